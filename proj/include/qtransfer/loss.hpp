#pragma once

#include "qtransfer/tensor.hpp"

namespace qtransfer {

struct LossResult {
  double loss = 0.0;
  Tensor grad;  // d loss / d pred, same shape as pred
};

// Mean smooth-L1 (Huber, delta 1) over a batch [B]. Per-element gradients are
// clip(pred - target, -1, 1) / B. Optional `weights` scale each element's
// loss and gradient (importance sampling).
LossResult huber_loss(const Tensor& pred, const Tensor& target,
                      const Tensor* weights = nullptr);

}  // namespace qtransfer
