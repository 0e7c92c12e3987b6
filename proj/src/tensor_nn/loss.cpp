#include "qtransfer/loss.hpp"

#include <algorithm>
#include <cmath>

#include "qtransfer/errors.hpp"

namespace qtransfer {

LossResult huber_loss(const Tensor& pred, const Tensor& target,
                      const Tensor* weights) {
  if (pred.rank() != 1 || pred.empty()) {
    throw ConfigError("huber_loss: pred must be a non-empty [B] vector, got " +
                      shape_to_string(pred.shape()));
  }
  require_shape(target, pred.shape(), "huber_loss target");
  if (weights) require_shape(*weights, pred.shape(), "huber_loss weights");

  const std::size_t n = pred.size();
  LossResult result;
  result.grad = Tensor(pred.shape());
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(pred[i]) - target[i];
    const double w = weights ? (*weights)[i] : 1.0;
    const double ad = std::abs(d);
    total += w * (ad < 1.0 ? 0.5 * d * d : ad - 0.5);
    result.grad[i] =
        static_cast<float>(w * std::clamp(d, -1.0, 1.0) / static_cast<double>(n));
  }
  result.loss = total / static_cast<double>(n);
  if (!std::isfinite(result.loss)) throw NumericalError("huber_loss is not finite");
  return result;
}

}  // namespace qtransfer
