#include "qtransfer/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <string>

#include "qtransfer/errors.hpp"

namespace qtransfer {
namespace {

using RowMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

struct ConvGeometry {
  std::size_t batch, channels, height, width;
  std::size_t out_height, out_width;
  bool batched;

  std::size_t positions() const { return out_height * out_width; }
  std::size_t rows(const ConvSpec& s) const {
    return channels * s.kernel * s.kernel;
  }
  std::size_t cols() const { return batch * positions(); }
};

ConvGeometry conv_geometry(const Tensor& input, const ConvSpec& spec) {
  ConvGeometry g{};
  if (input.rank() == 3) {
    g = {1, input.dim(0), input.dim(1), input.dim(2), 0, 0, false};
  } else if (input.rank() == 4) {
    g = {input.dim(0), input.dim(1), input.dim(2), input.dim(3), 0, 0, true};
  } else {
    throw ConfigError("conv2d: input must be [C,H,W] or [N,C,H,W], got " +
                      shape_to_string(input.shape()));
  }
  if (g.channels != static_cast<std::size_t>(spec.in_channels)) {
    throw ConfigError("conv2d: input " + shape_to_string(input.shape()) +
                      " does not have " + std::to_string(spec.in_channels) +
                      " channels");
  }
  const int oh = spec.output_extent(static_cast<int>(g.height));
  const int ow = spec.output_extent(static_cast<int>(g.width));
  if (oh < 1 || ow < 1) {
    throw ConfigError("conv2d: input " + shape_to_string(input.shape()) +
                      " too small for kernel " + std::to_string(spec.kernel) +
                      " stride " + std::to_string(spec.stride));
  }
  g.out_height = static_cast<std::size_t>(oh);
  g.out_width = static_cast<std::size_t>(ow);
  return g;
}

// Unfolds one sample [C,H,W] into a [C*k*k, P] matrix, one column per
// output position.
void im2col(const float* in, const ConvSpec& spec, const ConvGeometry& g,
            float* cols) {
  const std::size_t p = g.positions();
  const int k = spec.kernel, s = spec.stride, pad = spec.padding;
  const int h = static_cast<int>(g.height), w = static_cast<int>(g.width);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.channels; ++c) {
    const float* plane = in + c * g.height * g.width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx, ++row) {
        float* dst = cols + row * p;
        for (std::size_t oy = 0; oy < g.out_height; ++oy) {
          const int iy = static_cast<int>(oy) * s + ky - pad;
          float* out_row = dst + oy * g.out_width;
          if (iy < 0 || iy >= h) {
            std::fill(out_row, out_row + g.out_width, 0.0f);
            continue;
          }
          const float* src = plane + static_cast<std::size_t>(iy) * g.width;
          for (std::size_t ox = 0; ox < g.out_width; ++ox) {
            const int ix = static_cast<int>(ox) * s + kx - pad;
            out_row[ox] = (ix >= 0 && ix < w) ? src[ix] : 0.0f;
          }
        }
      }
    }
  }
}

// Inverse scatter of im2col for one sample, accumulating into `out`.
void col2im(const float* cols, const ConvSpec& spec, const ConvGeometry& g,
            float* out) {
  const std::size_t p = g.positions();
  const int k = spec.kernel, s = spec.stride, pad = spec.padding;
  const int h = static_cast<int>(g.height), w = static_cast<int>(g.width);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.channels; ++c) {
    float* plane = out + c * g.height * g.width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx, ++row) {
        const float* src = cols + row * p;
        for (std::size_t oy = 0; oy < g.out_height; ++oy) {
          const int iy = static_cast<int>(oy) * s + ky - pad;
          if (iy < 0 || iy >= h) continue;
          float* dst = plane + static_cast<std::size_t>(iy) * g.width;
          const float* in_row = src + oy * g.out_width;
          for (std::size_t ox = 0; ox < g.out_width; ++ox) {
            const int ix = static_cast<int>(ox) * s + kx - pad;
            if (ix >= 0 && ix < w) dst[ix] += in_row[ox];
          }
        }
      }
    }
  }
}

void check_conv_params(const ConvSpec& spec, const Tensor& weights,
                       const Tensor* bias) {
  require_shape(weights, spec.weight_shape(), "conv2d weights");
  if (bias) {
    require_shape(*bias, {static_cast<std::size_t>(spec.out_channels)},
                  "conv2d bias");
  }
}

struct LinearGeometry {
  std::size_t batch, in, out;
};

LinearGeometry linear_geometry(const Tensor& input, const Tensor& weights) {
  if (weights.rank() != 2) {
    throw ConfigError("linear: weights must be [out,in], got " +
                      shape_to_string(weights.shape()));
  }
  LinearGeometry g{};
  if (input.rank() == 1) {
    g = {1, input.dim(0), weights.dim(0)};
  } else if (input.rank() == 2) {
    g = {input.dim(0), input.dim(1), weights.dim(0)};
  } else {
    throw ConfigError("linear: input must be [in] or [N,in], got " +
                      shape_to_string(input.shape()));
  }
  if (g.in != weights.dim(1)) {
    throw ConfigError("linear: input " + shape_to_string(input.shape()) +
                      " incompatible with weights " +
                      shape_to_string(weights.shape()));
  }
  return g;
}

}  // namespace

int ConvSpec::output_extent(int extent) const {
  const int span = extent + 2 * padding - kernel;
  if (span < 0 || stride < 1) return 0;
  return span / stride + 1;
}

Shape ConvSpec::weight_shape() const {
  return {static_cast<std::size_t>(out_channels),
          static_cast<std::size_t>(in_channels),
          static_cast<std::size_t>(kernel), static_cast<std::size_t>(kernel)};
}

Tensor conv2d_forward(const Tensor& input, const ConvSpec& spec,
                      const Tensor& weights, const Tensor& bias,
                      FloatBuffer* scratch) {
  check_conv_params(spec, weights, &bias);
  const ConvGeometry g = conv_geometry(input, spec);
  const std::size_t cout = static_cast<std::size_t>(spec.out_channels);
  const std::size_t p = g.positions(), k = g.rows(spec);
  const std::size_t in_stride = g.channels * g.height * g.width;
  Shape out_shape = g.batched ? Shape{g.batch, cout, g.out_height, g.out_width}
                              : Shape{cout, g.out_height, g.out_width};
  Tensor out(std::move(out_shape));

  FloatBuffer local;
  FloatBuffer& cols = scratch ? *scratch : local;
  cols.resize(k * p);
  ConstMatrixMap w(weights.data(), cout, k);
  ConstMatrixMap c(cols.data(), k, p);
  Eigen::Map<const Eigen::VectorXf> b(bias.data(), cout);
  for (std::size_t n = 0; n < g.batch; ++n) {
    im2col(input.data() + n * in_stride, spec, g, cols.data());
    MatrixMap o(out.data() + n * cout * p, cout, p);
    o.noalias() = w * c;
    o.colwise() += b;
  }
  return out;
}

LayerGradients conv2d_backward(const Tensor& grad_out, const Tensor& input,
                               const ConvSpec& spec, const Tensor& weights,
                               bool input_grad, FloatBuffer* scratch) {
  check_conv_params(spec, weights, nullptr);
  const ConvGeometry g = conv_geometry(input, spec);
  const std::size_t cout = static_cast<std::size_t>(spec.out_channels);
  const Shape expected = g.batched
                             ? Shape{g.batch, cout, g.out_height, g.out_width}
                             : Shape{cout, g.out_height, g.out_width};
  require_shape(grad_out, expected, "conv2d_backward grad_out");

  const std::size_t p = g.positions(), k = g.rows(spec);
  const std::size_t in_stride = g.channels * g.height * g.width;
  FloatBuffer local;
  FloatBuffer& cols = scratch ? *scratch : local;
  cols.resize(k * p);

  LayerGradients grads;
  grads.weights = Tensor(spec.weight_shape());
  grads.bias = Tensor({cout});
  ConstMatrixMap c(cols.data(), k, p);
  MatrixMap gw(grads.weights.data(), cout, k);
  Eigen::Map<Eigen::VectorXf> gb(grads.bias.data(), cout);
  ConstMatrixMap w(weights.data(), cout, k);
  FloatBuffer gcols;
  if (input_grad) {
    grads.input = Tensor(input.shape());
    gcols.resize(k * p);
  }
  MatrixMap gc(gcols.data(), input_grad ? k : 0, p);

  for (std::size_t n = 0; n < g.batch; ++n) {
    ConstMatrixMap go(grad_out.data() + n * cout * p, cout, p);
    im2col(input.data() + n * in_stride, spec, g, cols.data());
    gw.noalias() += go * c.transpose();
    gb += go.rowwise().sum();
    if (input_grad) {
      gc.noalias() = w.transpose() * go;
      col2im(gcols.data(), spec, g, grads.input.data() + n * in_stride);
    }
  }
  return grads;
}

Tensor linear_forward(const Tensor& input, const Tensor& weights,
                      const Tensor& bias) {
  const LinearGeometry g = linear_geometry(input, weights);
  require_shape(bias, {g.out}, "linear bias");
  Tensor out(input.rank() == 1 ? Shape{g.out} : Shape{g.batch, g.out});
  ConstMatrixMap x(input.data(), g.batch, g.in);
  ConstMatrixMap w(weights.data(), g.out, g.in);
  MatrixMap y(out.data(), g.batch, g.out);
  y.noalias() = x * w.transpose();
  Eigen::Map<const Eigen::RowVectorXf> b(bias.data(), g.out);
  y.rowwise() += b;
  return out;
}

LayerGradients linear_backward(const Tensor& grad_out, const Tensor& input,
                               const Tensor& weights, bool input_grad) {
  const LinearGeometry g = linear_geometry(input, weights);
  require_shape(grad_out,
                input.rank() == 1 ? Shape{g.out} : Shape{g.batch, g.out},
                "linear_backward grad_out");
  LayerGradients grads;
  grads.weights = Tensor(weights.shape());
  grads.bias = Tensor({g.out});
  ConstMatrixMap go(grad_out.data(), g.batch, g.out);
  ConstMatrixMap x(input.data(), g.batch, g.in);
  MatrixMap gw(grads.weights.data(), g.out, g.in);
  gw.noalias() = go.transpose() * x;
  Eigen::Map<Eigen::RowVectorXf> gb(grads.bias.data(), g.out);
  gb = go.colwise().sum();
  if (input_grad) {
    grads.input = Tensor(input.shape());
    ConstMatrixMap w(weights.data(), g.out, g.in);
    MatrixMap gx(grads.input.data(), g.batch, g.in);
    gx.noalias() = go * w;
  }
  return grads;
}

Tensor relu_forward(const Tensor& input) {
  Tensor out = input;
  relu_inplace(out);
  return out;
}

void relu_inplace(Tensor& t) {
  for (float& v : t.values()) v = v > 0.0f ? v : 0.0f;
}

Tensor relu_backward(const Tensor& grad_out, const Tensor& forward_output) {
  require_shape(grad_out, forward_output.shape(), "relu_backward grad_out");
  Tensor grad(grad_out.shape());
  const float* g = grad_out.data();
  const float* y = forward_output.data();
  float* out = grad.data();
  for (std::size_t i = 0; i < grad.size(); ++i) {
    out[i] = y[i] > 0.0f ? g[i] : 0.0f;
  }
  return grad;
}

}  // namespace qtransfer
