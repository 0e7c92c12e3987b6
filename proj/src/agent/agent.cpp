#include "qtransfer/agent.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qtransfer/errors.hpp"
#include "qtransfer/loss.hpp"

namespace qtransfer {

void AgentConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw ConfigError("gamma must lie in (0, 1], got " + std::to_string(gamma));
  }
  if (!(eps_end >= 0.0 && eps_end <= eps_start && eps_start <= 1.0)) {
    throw ConfigError("epsilon bounds must satisfy 0 <= eps_end <= eps_start <= 1");
  }
  if (!(eps_decay > 0.0)) throw ConfigError("eps_decay must be positive");
  if (!(tau > 0.0 && tau <= 1.0)) {
    throw ConfigError("tau must lie in (0, 1], got " + std::to_string(tau));
  }
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (train_every < 1) throw ConfigError("train_every must be at least 1");
}

double epsilon(std::uint64_t t, const AgentConfig& config) {
  return config.eps_end + (config.eps_start - config.eps_end) *
                              std::exp(-static_cast<double>(t) / config.eps_decay);
}

int greedy_action(std::span<const float> q) {
  int best = 0;
  for (std::size_t a = 1; a < q.size(); ++a) {
    if (q[a] > q[best]) best = static_cast<int>(a);
  }
  return best;
}

int epsilon_greedy(double eps, int action_count, Rng& rng,
                   const std::function<Tensor()>& q_fn) {
  if (uniform01(rng) < eps) {
    return static_cast<int>(uniform_index(rng, action_count));
  }
  return greedy_action(q_fn().values());
}

DqnAgent::DqnAgent(QNetwork policy, AgentConfig config,
                   PreprocessConfig preprocess)
    : config_(config),
      preprocess_(preprocess),
      policy_(std::move(policy)),
      target_(policy_) {
  AgentConfig relaxed = config_;
  if (relaxed.tau == 0.0) relaxed.tau = 1.0;
  if (relaxed.lr == 0.0) relaxed.lr = 1.0;
  relaxed.validate();
  preprocess_.validate();
  reset_optimizer();
}

void DqnAgent::reset_optimizer() {
  optimizer_.reset();
  if (config_.lr > 0.0) {
    optimizer_.emplace(policy_.parameters(), AdamOptions{.lr = config_.lr});
  }
}

Tensor DqnAgent::prepare(const Tensor& states) const {
  // Differencing only makes sense for frame stacks; flat feature inputs pass
  // straight through.
  if (policy_.spec().conv.empty()) return states;
  return network_input(states, preprocess_);
}

Tensor DqnAgent::q_values(const Tensor& states) const {
  return policy_.forward(prepare(states));
}

int DqnAgent::select_action(const Tensor& state, Rng& rng) {
  const double eps = epsilon(t_, config_);
  ++t_;
  return epsilon_greedy(eps, action_count(), rng,
                        [&] { return q_values(state); });
}

Tensor DqnAgent::compute_targets(const SampledBatch& batch) const {
  const std::size_t b = batch.size();
  const std::size_t a = policy_.action_count();
  const Tensor next_q = target_.forward(prepare(batch.next_states));
  Tensor y({b});
  for (std::size_t i = 0; i < b; ++i) {
    double target = batch.rewards[i];
    if (!batch.dones[i]) {
      const float* row = next_q.data() + i * a;
      target += config_.gamma * *std::max_element(row, row + a);
    }
    y[i] = static_cast<float>(target);
  }
  return y;
}

std::optional<double> DqnAgent::train_step(ReplayBuffer& buffer, Rng& rng) {
  const std::size_t need = std::max(config_.warmup_transitions, config_.batch_size);
  if (buffer.size() < need) return std::nullopt;
  const SampledBatch batch = buffer.sample(config_.batch_size, rng);
  return learn(batch, &buffer);
}

double DqnAgent::learn(const SampledBatch& batch, ReplayBuffer* buffer) {
  const std::size_t b = batch.size();
  const std::size_t a = policy_.action_count();
  if (b == 0) throw ConfigError("learn: empty batch");
  for (int action : batch.actions) {
    if (action < 0 || static_cast<std::size_t>(action) >= a) {
      throw ConfigError("learn: action " + std::to_string(action) +
                        " outside the network's " + std::to_string(a) +
                        " outputs");
    }
  }

  const Tensor y = compute_targets(batch);
  ForwardCache cache;
  const Tensor q = policy_.forward(prepare(batch.states), cache);
  Tensor pred({b});
  for (std::size_t i = 0; i < b; ++i) pred[i] = q[i * a + batch.actions[i]];

  const bool weighted = buffer != nullptr && buffer->prioritized();
  const LossResult loss = huber_loss(pred, y, weighted ? &batch.weights : nullptr);
  if (!std::isfinite(loss.loss)) throw NumericalError("train_step: loss is not finite");

  if (optimizer_) {
    Tensor grad_q({b, a});
    for (std::size_t i = 0; i < b; ++i) {
      grad_q[i * a + batch.actions[i]] = loss.grad[i];
    }
    const std::vector<Tensor> grads = policy_.backward(cache, grad_q);
    optimizer_->step(policy_.parameters(), grads);
  }

  if (buffer != nullptr && buffer->prioritized()) {
    std::vector<float> td(b);
    for (std::size_t i = 0; i < b; ++i) td[i] = std::abs(y[i] - pred[i]);
    buffer->update_priorities(batch.indices, td);
  }
  soft_update();
  ++train_steps_;
  return loss.loss;
}

void DqnAgent::soft_update() { soft_update(config_.tau); }

void DqnAgent::soft_update(double tau) {
  if (tau == 0.0) return;
  auto src = policy_.parameters();
  auto dst = target_.parameters();
  if (tau == 1.0) {
    for (std::size_t i = 0; i < src.size(); ++i) dst[i].value = src[i].value;
    return;
  }
  // d + tau (s - d) rather than tau s + (1 - tau) d: one rounding per
  // element, and the error scales with the gap instead of the weights.
  const float t = static_cast<float>(tau);
  for (std::size_t i = 0; i < src.size(); ++i) {
    const float* s = src[i].value.data();
    float* d = dst[i].value.data();
    const std::size_t n = src[i].value.size();
    for (std::size_t k = 0; k < n; ++k) d[k] += t * (s[k] - d[k]);
  }
}

ChainMdp::Outcome ChainMdp::step(int state, int action) const {
  if (state < 0 || state >= states_ || action < 0 || action >= kActions) {
    throw EnvError("chain: state or action out of range");
  }
  if (action == 0) return {std::max(state - 1, 0), 0.0f, false};
  if (state == states_ - 1) return {state, 1.0f, true};
  return {state + 1, 0.0f, false};
}

Tensor ChainMdp::one_hot(int state) const {
  Tensor t({static_cast<std::size_t>(states_)});
  t[state] = 1.0f;
  return t;
}

}  // namespace qtransfer
