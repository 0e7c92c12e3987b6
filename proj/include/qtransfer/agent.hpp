#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "qtransfer/adam.hpp"
#include "qtransfer/envs.hpp"
#include "qtransfer/preprocess.hpp"
#include "qtransfer/qnetwork.hpp"
#include "qtransfer/replay.hpp"
#include "qtransfer/rng.hpp"

namespace qtransfer {

struct AgentConfig {
  std::size_t batch_size = 128;
  double gamma = 0.99;
  double eps_start = 0.9;
  double eps_end = 0.05;
  double eps_decay = 1000.0;
  double tau = 0.005;
  double lr = 1e-4;
  std::size_t warmup_transitions = 1000;
  std::size_t train_every = 1;

  // Throws ConfigError naming the first offending field.
  void validate() const;
};

// eps_end + (eps_start - eps_end) * exp(-t / eps_decay), where t counts
// actions selected by the learner.
double epsilon(std::uint64_t t, const AgentConfig& config);

// Index of the largest Q-value; ties go to the lowest index.
int greedy_action(std::span<const float> q);

// One uniform draw decides between exploring and exploiting. The Q-values
// are only computed (via `q_fn`) when the greedy branch is taken.
int epsilon_greedy(double eps, int action_count, Rng& rng,
                   const std::function<Tensor()>& q_fn);

// Plain DQN: the policy network is trained by Huber-loss regression onto
// targets from a slowly blended target network.
class DqnAgent {
 public:
  // The target network starts as an exact copy of `policy`. Parameters that
  // are frozen in `policy` stay frozen and get no optimizer state.
  //
  // Beyond AgentConfig::validate(), the constructor also admits tau == 0 and
  // lr == 0, which turn the soft update and the gradient step into no-ops.
  DqnAgent(QNetwork policy, AgentConfig config,
           PreprocessConfig preprocess = {});

  const AgentConfig& config() const { return config_; }
  const PreprocessConfig& preprocess() const { return preprocess_; }
  const QNetwork& policy() const { return policy_; }
  const QNetwork& target() const { return target_; }
  // Empty when lr == 0: such an agent never changes its policy parameters.
  const std::optional<Adam>& optimizer() const { return optimizer_; }
  int action_count() const { return static_cast<int>(policy_.action_count()); }

  // Mutable access for tests and weight surgery. Call reset_optimizer() after
  // changing freeze flags.
  QNetwork& mutable_policy() { return policy_; }
  QNetwork& mutable_target() { return target_; }
  void reset_optimizer();

  // Learner step counter t (drives epsilon).
  std::uint64_t steps() const { return t_; }
  void advance_steps(std::uint64_t n) { t_ += n; }
  std::uint64_t train_steps() const { return train_steps_; }

  // Q-values of one state or a batch of states, as the policy network sees
  // them (frame differencing applied when configured).
  Tensor q_values(const Tensor& states) const;

  // Epsilon-greedy on epsilon(t), then t += 1.
  int select_action(const Tensor& state, Rng& rng);

  // r if done, else r + gamma * max_a' Q_target(s', a').
  Tensor compute_targets(const SampledBatch& batch) const;

  // One gradient step on a sampled minibatch followed by a soft update.
  // Returns nullopt, touching nothing, while the buffer holds fewer than
  // max(warmup_transitions, batch_size) transitions.
  std::optional<double> train_step(ReplayBuffer& buffer, Rng& rng);

  // Gradient step on an explicit batch; returns the loss. Exposed so tests
  // can feed hand-built batches.
  double learn(const SampledBatch& batch, ReplayBuffer* buffer = nullptr);

  // theta_target = tau * theta_policy + (1 - tau) * theta_target, for every
  // parameter including frozen ones.
  void soft_update();
  void soft_update(double tau);

 private:
  Tensor prepare(const Tensor& states) const;

  AgentConfig config_;
  PreprocessConfig preprocess_;
  QNetwork policy_;
  QNetwork target_;
  std::optional<Adam> optimizer_;
  std::uint64_t t_ = 0;
  std::uint64_t train_steps_ = 0;
};

struct EvalResult {
  double mean_reward = 0.0;
  double mean_duration = 0.0;
  std::vector<double> rewards;
  std::vector<int> durations;  // environment ticks per episode
};

inline constexpr double kEvalEpsilon = 0.05;

// Maps the current frame stack to Q-values.
using QFunction = std::function<Tensor(const Tensor& stack)>;

// Runs `episodes` episodes, episode k reset with derive_seed(seed, k). Each
// decision takes a uniform action with probability `eps` and otherwise the
// argmax of `q_fn` (which may be empty when eps == 1).
EvalResult evaluate_policy(Environment& env, const QFunction& q_fn,
                           int episodes, std::uint64_t seed, double eps,
                           int frame_skip);

// evaluate_policy with the agent's policy network at kEvalEpsilon.
EvalResult evaluate(const DqnAgent& agent, Environment& env, int episodes,
                    std::uint64_t seed);

// Same as above for a bare network.
EvalResult evaluate(const QNetwork& net, const PreprocessConfig& preprocess,
                    Environment& env, int episodes, std::uint64_t seed);

// Uniform random actions, same seeds as evaluate().
EvalResult random_baseline(Environment& env, int episodes, std::uint64_t seed,
                           int frame_skip);

// Deterministic n-state corridor used to check the learning rule against
// exact values. Action 0 steps left (clamped at 0), action 1 steps right;
// stepping right from the last state pays 1 and ends the episode. States are
// one-hot vectors.
class ChainMdp {
 public:
  explicit ChainMdp(int states = 5) : states_(states) {}

  int states() const { return states_; }
  static constexpr int kActions = 2;

  struct Outcome {
    int next = 0;
    float reward = 0.0f;
    bool done = false;
  };
  Outcome step(int state, int action) const;
  Tensor one_hot(int state) const;

 private:
  int states_;
};

}  // namespace qtransfer
