#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qtransfer/tensor.hpp"

namespace qtransfer {

// A named network parameter. Frozen parameters are never touched by the
// optimizer and have no optimizer state.
struct Parameter {
  std::string name;
  Tensor value;
  bool frozen = false;
};

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam. Moment buffers are created for exactly the parameters
// that are trainable when the optimizer is constructed.
class Adam {
 public:
  Adam(std::span<const Parameter> params, AdamOptions options);

  // `grads[i]` belongs to `params[i]`; entries for frozen parameters are
  // ignored and may be empty.
  void step(std::span<Parameter> params, std::span<const Tensor> grads);

  const AdamOptions& options() const { return options_; }
  void set_lr(double lr);
  std::uint64_t steps() const { return steps_; }
  bool has_state(std::size_t param_index) const {
    return param_index < moments_.size() && moments_[param_index].has_value();
  }
  std::size_t state_count() const;

 private:
  struct Moments {
    std::vector<float> first;
    std::vector<float> second;
  };

  AdamOptions options_;
  std::uint64_t steps_ = 0;
  std::vector<std::optional<Moments>> moments_;
};

}  // namespace qtransfer
