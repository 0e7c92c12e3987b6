#include <algorithm>
#include <cmath>

#include "qtransfer/errors.hpp"
#include "qtransfer/replay.hpp"

namespace qtransfer {
namespace {

std::uint8_t quantize(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

constexpr float kInv255 = 1.0f / 255.0f;

void dequantize(const std::uint8_t* src, std::size_t n, float* dst) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = src[i] * kInv255;
}

Shape batched(std::size_t batch, const Shape& shape) {
  Shape out{batch};
  out.insert(out.end(), shape.begin(), shape.end());
  return out;
}

}  // namespace

Transition SampledBatch::transition(std::size_t i) const {
  const std::size_t n = states.size() / size();
  Shape shape(states.shape().begin() + 1, states.shape().end());
  Transition t;
  t.state = Tensor(shape, std::vector<float>(states.data() + i * n,
                                             states.data() + (i + 1) * n));
  t.next_state = Tensor(shape, std::vector<float>(next_states.data() + i * n,
                                                  next_states.data() + (i + 1) * n));
  t.action = actions[i];
  t.reward = rewards[i];
  t.done = dones[i] != 0;
  return t;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, Shape state_shape)
    : capacity_(capacity),
      state_shape_(std::move(state_shape)),
      state_size_(shape_size(state_shape_)) {
  if (capacity_ == 0) throw ConfigError("replay capacity must be positive");
  // Address space only; pages are committed as the buffer fills.
  states_.reserve(capacity_ * state_size_);
  next_states_.reserve(capacity_ * state_size_);
}

std::size_t ReplayBuffer::size() const {
  std::lock_guard lock(mutex_);
  return size_;
}

std::uint64_t ReplayBuffer::total_pushed() const {
  std::lock_guard lock(mutex_);
  return pushed_;
}

std::size_t ReplayBuffer::store(const Transition& t) {
  require_shape(t.state, state_shape_, "replay state");
  require_shape(t.next_state, state_shape_, "replay next_state");
  const std::size_t slot = slot_of(pushed_);
  if (slot >= actions_.size()) {
    states_.resize((slot + 1) * state_size_);
    next_states_.resize((slot + 1) * state_size_);
    actions_.resize(slot + 1);
    rewards_.resize(slot + 1);
    dones_.resize(slot + 1);
  }
  std::uint8_t* s = states_.data() + slot * state_size_;
  std::uint8_t* ns = next_states_.data() + slot * state_size_;
  for (std::size_t i = 0; i < state_size_; ++i) {
    s[i] = quantize(t.state[i]);
    ns[i] = quantize(t.next_state[i]);
  }
  actions_[slot] = t.action;
  rewards_[slot] = t.reward;
  dones_[slot] = t.done ? 1 : 0;
  ++pushed_;
  size_ = std::min(size_ + 1, capacity_);
  return slot;
}

void ReplayBuffer::push(const Transition& t) {
  std::lock_guard lock(mutex_);
  store(t);
}

Transition ReplayBuffer::load(std::size_t slot) const {
  Transition t;
  t.state = Tensor(state_shape_);
  t.next_state = Tensor(state_shape_);
  dequantize(states_.data() + slot * state_size_, state_size_, t.state.data());
  dequantize(next_states_.data() + slot * state_size_, state_size_,
             t.next_state.data());
  t.action = actions_[slot];
  t.reward = rewards_[slot];
  t.done = dones_[slot] != 0;
  return t;
}

Transition ReplayBuffer::at(std::size_t i) const {
  std::lock_guard lock(mutex_);
  if (i >= size_) throw ConfigError("replay index out of range");
  return load(slot_of(pushed_ - size_ + i));
}

void ReplayBuffer::require_batch(std::size_t batch) const {
  if (batch == 0) throw ConfigError("batch size must be positive");
  if (size_ < batch) {
    throw InsufficientSamples("insufficient samples: have " +
                              std::to_string(size_) + ", need " +
                              std::to_string(batch));
  }
}

SampledBatch ReplayBuffer::gather(const std::vector<std::uint64_t>& serials) const {
  const std::size_t b = serials.size();
  SampledBatch out;
  out.indices = serials;
  out.states = Tensor(batched(b, state_shape_));
  out.next_states = Tensor(batched(b, state_shape_));
  out.rewards = Tensor({b});
  out.weights = Tensor({b}, 1.0f);
  out.actions.resize(b);
  out.dones.resize(b);
  for (std::size_t i = 0; i < b; ++i) {
    const std::size_t slot = slot_of(serials[i]);
    dequantize(states_.data() + slot * state_size_, state_size_,
               out.states.data() + i * state_size_);
    dequantize(next_states_.data() + slot * state_size_, state_size_,
               out.next_states.data() + i * state_size_);
    out.actions[i] = actions_[slot];
    out.rewards[i] = rewards_[slot];
    out.dones[i] = dones_[slot];
  }
  return out;
}

SampledBatch ReplayBuffer::sample(std::size_t batch, Rng& rng) {
  std::lock_guard lock(mutex_);
  require_batch(batch);
  const std::uint64_t oldest = pushed_ - size_;
  std::vector<std::uint64_t> serials(batch);
  for (auto& s : serials) s = oldest + uniform_index(rng, size_);
  return gather(serials);
}

void ReplayBuffer::update_priorities(std::span<const std::uint64_t>,
                                     std::span<const float>) {}

PrioritizedReplayBuffer::PrioritizedReplayBuffer(std::size_t capacity,
                                                 Shape state_shape,
                                                 PrioritizedOptions options)
    : ReplayBuffer(capacity, std::move(state_shape)),
      options_(options),
      tree_(capacity),
      priorities_(capacity, 0.0) {
  if (!(options_.alpha >= 0.0 && options_.alpha <= 1.0 && options_.beta >= 0.0 &&
        options_.beta <= 1.0)) {
    throw ConfigError("prioritized replay: alpha and beta must lie in [0, 1]");
  }
  if (!(options_.priority_epsilon > 0.0)) {
    throw ConfigError("prioritized replay: priority epsilon must be positive");
  }
}

void PrioritizedReplayBuffer::push(const Transition& t) {
  std::lock_guard lock(mutex_);
  const std::size_t slot = store(t);
  priorities_[slot] = max_priority_;
  tree_.set(slot, std::pow(max_priority_, options_.alpha));
}

SampledBatch PrioritizedReplayBuffer::sample(std::size_t batch, Rng& rng) {
  std::lock_guard lock(mutex_);
  require_batch(batch);
  const double total = tree_.total();
  const double segment = total / static_cast<double>(batch);
  const std::uint64_t oldest = pushed_ - size_;
  std::vector<std::uint64_t> serials(batch);
  std::vector<double> probs(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    const double u = (static_cast<double>(i) + uniform01(rng)) * segment;
    const std::size_t slot = tree_.find(u);
    probs[i] = tree_.get(slot) / total;
    // Map the slot back to the serial currently living there.
    const std::uint64_t oldest_slot = slot_of(oldest);
    const std::uint64_t offset =
        slot >= oldest_slot ? slot - oldest_slot : slot + capacity_ - oldest_slot;
    serials[i] = oldest + offset;
  }
  SampledBatch out = gather(serials);
  double max_w = 0.0;
  std::vector<double> w(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    w[i] = std::pow(static_cast<double>(size_) * probs[i], -options_.beta);
    max_w = std::max(max_w, w[i]);
  }
  for (std::size_t i = 0; i < batch; ++i) {
    out.weights[i] = static_cast<float>(w[i] / max_w);
  }
  return out;
}

void PrioritizedReplayBuffer::update_priorities(
    std::span<const std::uint64_t> indices, std::span<const float> td_errors) {
  if (indices.size() != td_errors.size()) {
    throw ConfigError("update_priorities: index/error count mismatch");
  }
  for (float e : td_errors) {
    if (!std::isfinite(e)) throw NumericalError("update_priorities: non-finite TD error");
  }
  std::lock_guard lock(mutex_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (!live(indices[i])) {
      ++stale_;
      continue;
    }
    const double p = std::abs(static_cast<double>(td_errors[i])) +
                     options_.priority_epsilon;
    const std::size_t slot = slot_of(indices[i]);
    priorities_[slot] = p;
    tree_.set(slot, std::pow(p, options_.alpha));
    max_priority_ = std::max(max_priority_, p);
  }
}

double PrioritizedReplayBuffer::priority(std::uint64_t serial) const {
  std::lock_guard lock(mutex_);
  if (!live(serial)) throw ConfigError("priority: index is not live");
  return priorities_[slot_of(serial)];
}

double PrioritizedReplayBuffer::tree_total() const {
  std::lock_guard lock(mutex_);
  return tree_.total();
}

double PrioritizedReplayBuffer::leaf_sum() const {
  std::lock_guard lock(mutex_);
  double sum = 0.0;
  for (std::size_t i = 0; i < capacity_; ++i) sum += tree_.get(i);
  return sum;
}

std::uint64_t PrioritizedReplayBuffer::stale_updates() const {
  std::lock_guard lock(mutex_);
  return stale_;
}

}  // namespace qtransfer
