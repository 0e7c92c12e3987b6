#pragma once

#include <vector>

#include "qtransfer/tensor.hpp"

namespace qtransfer {

struct ConvSpec {
  int in_channels = 1;
  int out_channels = 1;
  int kernel = 1;
  int stride = 1;
  int padding = 0;

  // floor((extent + 2*padding - kernel) / stride) + 1, or 0 when the kernel
  // does not fit.
  int output_extent(int extent) const;
  Shape weight_shape() const;
  int fan_in() const { return in_channels * kernel * kernel; }

  bool operator==(const ConvSpec&) const = default;
};

struct LayerGradients {
  Tensor input;  // left empty when not requested
  Tensor weights;
  Tensor bias;
};

// Cross-correlation. `input` is [C,H,W] or a batch [N,C,H,W]; the output has
// the same rank. Weights are [C_out, C_in, k, k], bias [C_out].
//
// Samples are unfolded one at a time; `scratch`, when given, holds the
// unfolded sample and saves an allocation per call.
Tensor conv2d_forward(const Tensor& input, const ConvSpec& spec,
                      const Tensor& weights, const Tensor& bias,
                      FloatBuffer* scratch = nullptr);

LayerGradients conv2d_backward(const Tensor& grad_out, const Tensor& input,
                               const ConvSpec& spec, const Tensor& weights,
                               bool input_grad = true,
                               FloatBuffer* scratch = nullptr);

// y = W x + b. `input` is [in] or a batch [N, in]; weights [out, in].
Tensor linear_forward(const Tensor& input, const Tensor& weights,
                      const Tensor& bias);

LayerGradients linear_backward(const Tensor& grad_out, const Tensor& input,
                               const Tensor& weights, bool input_grad = true);

Tensor relu_forward(const Tensor& input);
void relu_inplace(Tensor& t);

// Subgradient at exactly 0 is 0.
Tensor relu_backward(const Tensor& grad_out, const Tensor& forward_output);

}  // namespace qtransfer
