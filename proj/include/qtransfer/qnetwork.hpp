#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qtransfer/adam.hpp"
#include "qtransfer/layers.hpp"
#include "qtransfer/tensor.hpp"

namespace qtransfer {

// Encoder (ReLU convolutions) followed by a two-layer head:
// features -> hidden (ReLU) -> one Q-value per action.
//
// With an empty conv list the head reads the flattened input directly; this
// is how small feature-vector problems bypass the encoder.
struct QNetworkSpec {
  std::size_t input_channels = 4;
  std::size_t input_height = 84;
  std::size_t input_width = 84;
  std::vector<ConvSpec> conv;
  std::size_t hidden = 512;
  std::size_t actions = 6;

  // 4x84x84 -> 32x20x20 -> 64x9x9 -> 64x7x7 -> 3136 -> 512 -> actions.
  static QNetworkSpec standard(std::size_t actions);
  // Same 4x84x84 pipeline with narrower layers, for gradient checks.
  static QNetworkSpec reduced_width(std::size_t actions, int c1, int c2, int c3,
                                    std::size_t hidden);
  // Head only, fed by a flat vector of `inputs` values.
  static QNetworkSpec features_only(std::size_t inputs, std::size_t hidden,
                                    std::size_t actions);

  Shape input_shape() const;
  // Per-layer [C,H,W] outputs of the encoder.
  std::vector<Shape> conv_output_shapes() const;
  std::size_t feature_count() const;

  // Throws ConfigError when the layer stack does not line up.
  void validate() const;

  bool operator==(const QNetworkSpec&) const = default;
};

// Activations kept by forward() for the backward pass.
struct ForwardCache {
  std::vector<Tensor> conv_inputs;
  std::vector<Tensor> conv_outputs;  // post-ReLU
  Tensor features;                   // [B, F]
  Tensor hidden;                     // [B, H], post-ReLU
  bool single = false;
};

class QNetwork {
 public:
  // All parameters zero.
  explicit QNetwork(QNetworkSpec spec);

  // Weights uniform in +-1/sqrt(fan_in), biases zero, drawn in canonical
  // parameter order from one stream seeded by `seed`.
  static QNetwork initialized(QNetworkSpec spec, std::uint64_t seed);

  const QNetworkSpec& spec() const { return spec_; }
  std::size_t action_count() const { return spec_.actions; }

  std::span<Parameter> parameters() { return params_; }
  std::span<const Parameter> parameters() const { return params_; }
  Parameter& parameter(std::string_view name);
  const Parameter& parameter(std::string_view name) const;
  std::size_t parameter_index(std::string_view name) const;

  // Canonical names: conv1.w, conv1.b, ..., head1.w, head1.b, head2.w,
  // head2.b.
  static std::vector<std::string> parameter_names(const QNetworkSpec& spec);

  bool is_encoder_parameter(std::size_t index) const;
  void set_encoder_frozen(bool frozen);
  void set_all_frozen(bool frozen);

  // `input` is one state (spec input shape) or a batch with a leading axis.
  // Returns [A] or [B, A].
  Tensor forward(const Tensor& input) const;
  Tensor forward(const Tensor& input, ForwardCache& cache) const;

  // Gradients of sum(grad_q * Q) for every parameter; frozen parameters get
  // an empty tensor and the pass stops at the lowest trainable layer.
  std::vector<Tensor> backward(const ForwardCache& cache,
                               const Tensor& grad_q) const;

  std::uint64_t hash() const;

 private:
  std::size_t head1_index() const { return 2 * spec_.conv.size(); }
  std::size_t head2_index() const { return head1_index() + 2; }
  bool layer_trainable(std::size_t weight_index) const;

  QNetworkSpec spec_;
  std::vector<Parameter> params_;
};

}  // namespace qtransfer
