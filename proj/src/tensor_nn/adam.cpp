#include "qtransfer/adam.hpp"

#include <cmath>

#include "qtransfer/errors.hpp"

namespace qtransfer {
namespace {

void validate(const AdamOptions& o) {
  if (!(o.lr > 0.0)) {
    throw ConfigError("adam: learning rate must be positive, got " +
                      std::to_string(o.lr));
  }
  if (!(o.beta1 >= 0.0 && o.beta1 < 1.0 && o.beta2 >= 0.0 && o.beta2 < 1.0)) {
    throw ConfigError("adam: betas must lie in [0, 1)");
  }
  if (!(o.epsilon > 0.0)) throw ConfigError("adam: epsilon must be positive");
}

}  // namespace

Adam::Adam(std::span<const Parameter> params, AdamOptions options)
    : options_(options) {
  validate(options_);
  moments_.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].frozen) continue;
    const std::size_t n = params[i].value.size();
    moments_[i] = Moments{std::vector<float>(n, 0.0f), std::vector<float>(n, 0.0f)};
  }
}

void Adam::set_lr(double lr) {
  AdamOptions next = options_;
  next.lr = lr;
  validate(next);
  options_ = next;
}

std::size_t Adam::state_count() const {
  std::size_t n = 0;
  for (const auto& m : moments_) n += m.has_value();
  return n;
}

void Adam::step(std::span<Parameter> params, std::span<const Tensor> grads) {
  if (params.size() != moments_.size() || grads.size() != params.size()) {
    throw ConfigError("adam: parameter/gradient count mismatch");
  }
  ++steps_;
  const double t = static_cast<double>(steps_);
  const float b1 = static_cast<float>(options_.beta1);
  const float b2 = static_cast<float>(options_.beta2);
  const double c1 = 1.0 - std::pow(options_.beta1, t);
  const double c2 = 1.0 - std::pow(options_.beta2, t);
  // lr * m_hat / (sqrt(v_hat) + eps) rewritten with the corrections folded
  // into one step size and a rescaled epsilon.
  const float step_size = static_cast<float>(options_.lr * std::sqrt(c2) / c1);
  const float eps_hat = static_cast<float>(options_.epsilon * std::sqrt(c2));

  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].frozen || !moments_[i]) continue;
    Tensor& value = params[i].value;
    require_shape(grads[i], value.shape(), "adam gradient");
    auto& m = moments_[i]->first;
    auto& v = moments_[i]->second;
    const float* g = grads[i].data();
    float* p = value.data();
    const std::size_t n = value.size();
    for (std::size_t j = 0; j < n; ++j) {
      m[j] = b1 * m[j] + (1.0f - b1) * g[j];
      v[j] = b2 * v[j] + (1.0f - b2) * g[j] * g[j];
      p[j] -= step_size * m[j] / (std::sqrt(v[j]) + eps_hat);
    }
  }
}

}  // namespace qtransfer
