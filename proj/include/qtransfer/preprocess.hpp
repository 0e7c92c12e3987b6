#pragma once

#include <cstdint>
#include <span>

#include "qtransfer/envs.hpp"
#include "qtransfer/tensor.hpp"

namespace qtransfer {

inline constexpr int kStackDepth = 4;

struct PreprocessConfig {
  int frame_skip = 4;
  bool difference_frames = false;

  void validate() const;
};

// Luma (0.299 R + 0.587 G + 0.114 B) / 255, so the result is already in
// [0, 1]. Returns [height, width].
Tensor grayscale(std::span<const std::uint8_t> rgb, std::size_t height,
                 std::size_t width);
Tensor grayscale(const Frame& frame);

// Area-average resampling of a [H, W] image: every output pixel is the
// overlap-weighted mean of the source box it covers. Exact identity when the
// size already matches.
Tensor resize_area(const Tensor& gray, std::size_t height = kFrameSize,
                   std::size_t width = kFrameSize);

// grayscale + resize to 84x84.
Tensor preprocess_frame(const Frame& frame);

struct SkipResult {
  Frame frame;
  float reward = 0.0f;
  bool done = false;
  int ticks = 0;
};

// Repeats `action` for up to k ticks, stopping early when the episode ends.
// Rewards are summed; only the last frame is rendered.
SkipResult skip_step(Environment& env, int action, int k);

// The four most recent preprocessed frames, index 0 oldest.
class FrameStack {
 public:
  FrameStack();

  // Fills all planes with `first`.
  void reset(const Tensor& first);
  // Drops the oldest plane and appends `frame` ([84, 84], values in [0, 1]).
  void push(const Tensor& frame);

  const Tensor& state() const { return state_; }

 private:
  Tensor state_;
};

// Plane 0 stays raw; plane i > 0 becomes frame_i - frame_{i-1}, so values
// widen to [-1, 1].
Tensor difference(const Tensor& stack);

// What the network sees for a stored stack: the stack itself, or its
// difference planes when enabled. Accepts one stack or a batch.
Tensor network_input(const Tensor& stacks, const PreprocessConfig& config);

}  // namespace qtransfer
