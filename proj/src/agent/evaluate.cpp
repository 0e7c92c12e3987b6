#include <string>

#include "qtransfer/agent.hpp"
#include "qtransfer/errors.hpp"

namespace qtransfer {
namespace {

// Stream id for the exploration draws, kept apart from the episode seeds.
constexpr std::uint64_t kEvalActionStream = 0xE7A1'0000'0000'0001ull;

void require_actions(const QNetwork& net, const Environment& env) {
  if (static_cast<int>(net.action_count()) != env.action_space()) {
    throw ConfigError("network has " + std::to_string(net.action_count()) +
                      " outputs but " + env.name() + " has " +
                      std::to_string(env.action_space()) + " actions");
  }
}

}  // namespace

EvalResult evaluate_policy(Environment& env, const QFunction& q_fn,
                           int episodes, std::uint64_t seed, double eps,
                           int frame_skip) {
  if (episodes < 1) throw ConfigError("evaluate: episodes must be at least 1");
  if (frame_skip < 1) throw ConfigError("evaluate: frame_skip must be at least 1");
  Rng rng(derive_seed(seed, kEvalActionStream));
  EvalResult out;
  for (int e = 0; e < episodes; ++e) {
    FrameStack stack;
    stack.reset(preprocess_frame(env.reset(derive_seed(seed, e))));
    double total = 0.0;
    while (!env.done()) {
      const int action = epsilon_greedy(eps, env.action_space(), rng,
                                        [&] { return q_fn(stack.state()); });
      const SkipResult r = skip_step(env, action, frame_skip);
      total += r.reward;
      stack.push(preprocess_frame(r.frame));
    }
    out.rewards.push_back(total);
    out.durations.push_back(env.episode_steps());
  }
  for (std::size_t i = 0; i < out.rewards.size(); ++i) {
    out.mean_reward += out.rewards[i];
    out.mean_duration += out.durations[i];
  }
  out.mean_reward /= episodes;
  out.mean_duration /= episodes;
  return out;
}

EvalResult evaluate(const QNetwork& net, const PreprocessConfig& preprocess,
                    Environment& env, int episodes, std::uint64_t seed) {
  require_actions(net, env);
  const QFunction q = [&](const Tensor& stack) {
    return net.forward(network_input(stack, preprocess));
  };
  return evaluate_policy(env, q, episodes, seed, kEvalEpsilon,
                         preprocess.frame_skip);
}

EvalResult evaluate(const DqnAgent& agent, Environment& env, int episodes,
                    std::uint64_t seed) {
  return evaluate(agent.policy(), agent.preprocess(), env, episodes, seed);
}

EvalResult random_baseline(Environment& env, int episodes, std::uint64_t seed,
                           int frame_skip) {
  return evaluate_policy(env, QFunction{}, episodes, seed, 1.0, frame_skip);
}

}  // namespace qtransfer
