#pragma once

#include <cstdint>
#include <mutex>
#include <span>
#include <vector>

#include "qtransfer/rng.hpp"
#include "qtransfer/tensor.hpp"

namespace qtransfer {

// One experience tuple (s, a, r, s', done).
struct Transition {
  Tensor state;
  int action = 0;
  float reward = 0.0f;
  Tensor next_state;
  bool done = false;
};

// A sampled minibatch in struct-of-arrays form. `indices` are the stable
// insertion serials of the sampled entries; pass them back to
// update_priorities.
struct SampledBatch {
  std::vector<std::uint64_t> indices;
  Tensor states;       // [B, ...state shape]
  std::vector<int> actions;
  Tensor rewards;      // [B]
  Tensor next_states;  // [B, ...state shape]
  std::vector<std::uint8_t> dones;
  Tensor weights;      // [B] importance weights, all 1 for uniform sampling

  std::size_t size() const { return indices.size(); }
  Transition transition(std::size_t i) const;
};

// Binary tree of partial sums over `capacity` non-negative leaves.
class SumTree {
 public:
  explicit SumTree(std::size_t capacity);

  void set(std::size_t leaf, double value);
  double get(std::size_t leaf) const { return nodes_[base_ + leaf]; }
  double total() const { return nodes_[1]; }
  std::size_t capacity() const { return capacity_; }

  // Leaf whose cumulative range contains `prefix` (clamped into
  // [0, total)). Never returns a zero-valued leaf while total() > 0.
  std::size_t find(double prefix) const;

 private:
  std::size_t capacity_;
  std::size_t base_;
  std::vector<double> nodes_;
};

// Fixed-capacity FIFO of transitions; the oldest entry is overwritten once
// full. States are stored as 8-bit planes (values clamped to [0, 1] and
// rounded to multiples of 1/255) and dequantized when sampled.
//
// Every public member is serialized by an internal mutex, so many producers
// and one sampler may share a buffer.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, Shape state_shape);
  virtual ~ReplayBuffer() = default;

  ReplayBuffer(const ReplayBuffer&) = delete;
  ReplayBuffer& operator=(const ReplayBuffer&) = delete;

  virtual void push(const Transition& t);

  // Independent uniform draws with replacement. Throws InsufficientSamples
  // when size() < batch.
  virtual SampledBatch sample(std::size_t batch, Rng& rng);

  // No-op for uniform replay.
  virtual void update_priorities(std::span<const std::uint64_t> indices,
                                 std::span<const float> td_errors);

  virtual bool prioritized() const { return false; }

  std::size_t size() const;
  std::size_t capacity() const { return capacity_; }
  std::uint64_t total_pushed() const;
  const Shape& state_shape() const { return state_shape_; }

  // i-th oldest live transition.
  Transition at(std::size_t i) const;

 protected:
  std::size_t slot_of(std::uint64_t serial) const { return serial % capacity_; }
  bool live(std::uint64_t serial) const {
    return serial < pushed_ && serial + size_ >= pushed_;
  }
  // Appends without locking; returns the slot written.
  std::size_t store(const Transition& t);
  SampledBatch gather(const std::vector<std::uint64_t>& serials) const;
  Transition load(std::size_t slot) const;
  void require_batch(std::size_t batch) const;

  mutable std::mutex mutex_;
  std::size_t capacity_;
  Shape state_shape_;
  std::size_t state_size_;
  std::size_t size_ = 0;
  std::uint64_t pushed_ = 0;

 private:
  std::vector<std::uint8_t> states_;
  std::vector<std::uint8_t> next_states_;
  std::vector<int> actions_;
  std::vector<float> rewards_;
  std::vector<std::uint8_t> dones_;
};

struct PrioritizedOptions {
  double alpha = 0.6;
  double beta = 0.4;
  double priority_epsilon = 1e-2;
};

// Proportional prioritized replay. Sampling probability is p_i^alpha / sum
// p^alpha, drawn by stratified sum-tree descent; importance weights are
// (N P(i))^-beta scaled so the batch maximum is 1.
class PrioritizedReplayBuffer final : public ReplayBuffer {
 public:
  PrioritizedReplayBuffer(std::size_t capacity, Shape state_shape,
                          PrioritizedOptions options = {});

  // New entries get the largest priority seen so far (1 while empty).
  void push(const Transition& t) override;
  SampledBatch sample(std::size_t batch, Rng& rng) override;

  // p_i = |td_i| + priority_epsilon. Entries already evicted are skipped and
  // counted in stale_updates().
  void update_priorities(std::span<const std::uint64_t> indices,
                         std::span<const float> td_errors) override;

  bool prioritized() const override { return true; }

  const PrioritizedOptions& options() const { return options_; }
  double priority(std::uint64_t serial) const;
  double tree_total() const;
  // Naive sum over leaves; the tree root must agree with it.
  double leaf_sum() const;
  std::uint64_t stale_updates() const;

 private:
  PrioritizedOptions options_;
  SumTree tree_;
  std::vector<double> priorities_;
  double max_priority_ = 1.0;
  std::uint64_t stale_ = 0;
};

}  // namespace qtransfer
