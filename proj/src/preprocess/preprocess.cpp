#include "qtransfer/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "qtransfer/errors.hpp"

namespace qtransfer {
namespace {

constexpr std::size_t kPlane = static_cast<std::size_t>(kFrameSize) * kFrameSize;

struct AxisWeights {
  std::size_t first;
  std::vector<double> weights;
};

// Overlap of each source cell with the box [i*src/dst, (i+1)*src/dst).
std::vector<AxisWeights> box_weights(std::size_t src, std::size_t dst) {
  std::vector<AxisWeights> out(dst);
  const double scale = static_cast<double>(src) / static_cast<double>(dst);
  for (std::size_t i = 0; i < dst; ++i) {
    const double lo = static_cast<double>(i) * scale;
    const double hi = static_cast<double>(i + 1) * scale;
    const auto first = static_cast<std::size_t>(std::floor(lo));
    const auto last = std::min(src, static_cast<std::size_t>(std::ceil(hi)));
    out[i].first = first;
    for (std::size_t s = first; s < last; ++s) {
      const double overlap =
          std::min(hi, static_cast<double>(s + 1)) - std::max(lo, static_cast<double>(s));
      out[i].weights.push_back(overlap / scale);
    }
  }
  return out;
}

}  // namespace

void PreprocessConfig::validate() const {
  if (frame_skip < 1) {
    throw ConfigError("frame_skip must be >= 1, got " + std::to_string(frame_skip));
  }
}

Tensor grayscale(std::span<const std::uint8_t> rgb, std::size_t height,
                 std::size_t width) {
  if (rgb.size() != height * width * 3) {
    throw ConfigError("grayscale: expected " + std::to_string(height * width * 3) +
                      " bytes, got " + std::to_string(rgb.size()));
  }
  Tensor out({height, width});
  for (std::size_t i = 0; i < height * width; ++i) {
    const double y = (0.299 * rgb[3 * i] + 0.587 * rgb[3 * i + 1] +
                      0.114 * rgb[3 * i + 2]) / 255.0;
    out[i] = static_cast<float>(std::clamp(y, 0.0, 1.0));
  }
  return out;
}

Tensor grayscale(const Frame& frame) {
  return grayscale(frame.rgb, kFrameSize, kFrameSize);
}

Tensor resize_area(const Tensor& gray, std::size_t height, std::size_t width) {
  if (gray.rank() != 2) {
    throw ConfigError("resize: expected [H,W], got " + shape_to_string(gray.shape()));
  }
  const std::size_t sh = gray.dim(0), sw = gray.dim(1);
  if (sh == height && sw == width) return gray;

  const auto rows = box_weights(sh, height);
  const auto cols = box_weights(sw, width);
  // Rows first into a [height, sw] buffer, then columns.
  std::vector<double> tmp(height * sw, 0.0);
  for (std::size_t oy = 0; oy < height; ++oy) {
    for (std::size_t k = 0; k < rows[oy].weights.size(); ++k) {
      const double w = rows[oy].weights[k];
      const float* src = gray.data() + (rows[oy].first + k) * sw;
      double* dst = tmp.data() + oy * sw;
      for (std::size_t x = 0; x < sw; ++x) dst[x] += w * src[x];
    }
  }
  Tensor out({height, width});
  for (std::size_t oy = 0; oy < height; ++oy) {
    for (std::size_t ox = 0; ox < width; ++ox) {
      double acc = 0.0;
      for (std::size_t k = 0; k < cols[ox].weights.size(); ++k) {
        acc += cols[ox].weights[k] * tmp[oy * sw + cols[ox].first + k];
      }
      out[oy * width + ox] = static_cast<float>(acc);
    }
  }
  return out;
}

Tensor preprocess_frame(const Frame& frame) {
  return resize_area(grayscale(frame));
}

SkipResult skip_step(Environment& env, int action, int k) {
  if (k < 1) throw ConfigError("frame skip must be >= 1");
  SkipResult result;
  for (int i = 0; i < k; ++i) {
    const TickResult t = env.tick(action);
    result.reward += t.reward;
    ++result.ticks;
    if (t.done) {
      result.done = true;
      break;
    }
  }
  result.frame = env.render();
  return result;
}

FrameStack::FrameStack()
    : state_({static_cast<std::size_t>(kStackDepth), kFrameSize, kFrameSize}) {}

void FrameStack::reset(const Tensor& first) {
  require_shape(first, {kFrameSize, kFrameSize}, "frame stack input");
  for (int p = 0; p < kStackDepth; ++p) {
    std::copy_n(first.data(), kPlane, state_.data() + p * kPlane);
  }
}

void FrameStack::push(const Tensor& frame) {
  require_shape(frame, {kFrameSize, kFrameSize}, "frame stack input");
  float* d = state_.data();
  std::copy(d + kPlane, d + kStackDepth * kPlane, d);
  std::copy_n(frame.data(), kPlane, d + (kStackDepth - 1) * kPlane);
}

Tensor difference(const Tensor& stack) {
  if (stack.rank() < 3 || stack.dim(stack.rank() - 3) != kStackDepth) {
    throw ConfigError("difference: expected [...,4,H,W], got " +
                      shape_to_string(stack.shape()));
  }
  const std::size_t plane =
      stack.dim(stack.rank() - 2) * stack.dim(stack.rank() - 1);
  const std::size_t group = plane * kStackDepth;
  Tensor out = stack;
  for (std::size_t base = 0; base < stack.size(); base += group) {
    for (int p = kStackDepth - 1; p >= 1; --p) {
      float* cur = out.data() + base + p * plane;
      const float* prev = stack.data() + base + (p - 1) * plane;
      for (std::size_t i = 0; i < plane; ++i) cur[i] -= prev[i];
    }
  }
  return out;
}

Tensor network_input(const Tensor& stacks, const PreprocessConfig& config) {
  return config.difference_frames ? difference(stacks) : stacks;
}

}  // namespace qtransfer
