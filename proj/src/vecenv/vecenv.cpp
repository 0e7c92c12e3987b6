#include "qtransfer/vecenv.hpp"

#include <algorithm>
#include <exception>
#include <thread>

#include "qtransfer/errors.hpp"

namespace qtransfer {
namespace {

constexpr std::uint64_t kActorStream = 0xAC70'0000'0000'0001ull;

}  // namespace

std::uint64_t actor_seed(std::uint64_t instance_seed) {
  return derive_seed(instance_seed, kActorStream);
}

struct VectorEnv::Instance {
  std::unique_ptr<Environment> env;
  FrameStack stack;
  Rng rng;
  std::uint64_t seed = 0;
  std::uint64_t episode = 0;
  double reward = 0.0;
};

VectorEnv::VectorEnv(VecEnvConfig config) : config_(std::move(config)) {
  if (config_.num_envs < 1) throw ConfigError("workers must be at least 1");
  config_.preprocess.validate();
  for (std::size_t i = 0; i < config_.num_envs; ++i) {
    auto inst = std::make_unique<Instance>();
    inst->env = make_env(config_.env_name, config_.env_options);
    inst->seed = config_.base_seed + i;
    inst->rng.seed(actor_seed(inst->seed));
    instances_.push_back(std::move(inst));
  }
}

VectorEnv::~VectorEnv() = default;

int VectorEnv::action_count() const { return instances_.front()->env->action_space(); }

void VectorEnv::sync_policy(const QNetwork& net) {
  if (static_cast<int>(net.action_count()) != action_count()) {
    throw ConfigError("policy has " + std::to_string(net.action_count()) +
                      " outputs but " + config_.env_name + " has " +
                      std::to_string(action_count()) + " actions");
  }
  auto copy = std::make_shared<const QNetwork>(net);
  std::lock_guard lock(snapshot_mutex_);
  snapshot_ = PolicySnapshot{std::move(copy), snapshot_.version + 1};
}

PolicySnapshot VectorEnv::snapshot() const {
  std::lock_guard lock(snapshot_mutex_);
  return snapshot_;
}

void VectorEnv::set_forward_hook(std::function<void(const PolicySnapshot&)> hook) {
  hook_ = std::move(hook);
}

void VectorEnv::run_instance(std::size_t i, std::size_t quota, std::uint64_t t_base,
                             const AgentConfig& schedule,
                             const PolicySnapshot& fixed, ReplayBuffer& buffer,
                             std::vector<Transition>* sink,
                             std::vector<CompletedEpisode>& done) {
  Instance& inst = *instances_[i];
  Environment& env = *inst.env;
  const std::size_t n = instances_.size();
  const int frame_skip = config_.preprocess.frame_skip;
  for (std::size_t j = 0; j < quota; ++j) {
    if (env.needs_reset()) {
      inst.stack.reset(preprocess_frame(env.reset(derive_seed(inst.seed, inst.episode))));
      inst.reward = 0.0;
    }
    const std::uint64_t order = j * n + i;
    const double eps = epsilon(t_base + order, schedule);
    const int action = epsilon_greedy(eps, env.action_space(), inst.rng, [&] {
      const PolicySnapshot snap = config_.deterministic ? fixed : snapshot();
      if (!snap.net) throw ConfigError("collect: no policy snapshot has been synced");
      Tensor q = snap.net->forward(network_input(inst.stack.state(), config_.preprocess));
      if (hook_) hook_(snap);
      return q;
    });

    Transition t;
    t.state = inst.stack.state();
    const SkipResult r = skip_step(env, action, frame_skip);
    inst.stack.push(preprocess_frame(r.frame));
    t.action = action;
    t.reward = r.reward;
    t.next_state = inst.stack.state();
    t.done = r.done;
    inst.reward += r.reward;
    if (r.done) {
      done.push_back({i, inst.episode, inst.reward, env.episode_steps(), order});
      ++inst.episode;
    }
    if (sink) {
      sink->push_back(std::move(t));
    } else {
      buffer.push(t);
    }
  }
}

std::vector<CompletedEpisode> VectorEnv::collect(ReplayBuffer& buffer, std::size_t n,
                                                 std::uint64_t t_base,
                                                 const AgentConfig& schedule) {
  if (n < 1) throw ConfigError("collect: n_transitions must be at least 1");
  const std::size_t count = instances_.size();
  const PolicySnapshot fixed = snapshot();

  std::vector<std::size_t> quota(count);
  for (std::size_t i = 0; i < count; ++i) quota[i] = n / count + (i < n % count ? 1 : 0);

  std::vector<std::vector<Transition>> sinks(config_.deterministic ? count : 0);
  std::vector<std::vector<CompletedEpisode>> finished(count);
  std::vector<std::exception_ptr> errors(count);

  auto work = [&](std::size_t i) {
    try {
      run_instance(i, quota[i], t_base, schedule, fixed, buffer,
                   config_.deterministic ? &sinks[i] : nullptr, finished[i]);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };

  if (config_.threaded && count > 1) {
    std::vector<std::thread> threads;
    threads.reserve(count);
    for (std::size_t i = 0; i < count; ++i) threads.emplace_back(work, i);
    for (auto& th : threads) th.join();
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      work(i);
      if (errors[i]) break;
    }
  }

  for (std::size_t i = 0; i < count; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      throw CollectError(i, e.what(), errors[i]);
    } catch (...) {
      throw CollectError(i, "unknown failure", errors[i]);
    }
  }

  if (config_.deterministic) {
    // Round-robin order j * N + i, the order a single thread stepping the
    // instances in lockstep would produce.
    for (std::size_t j = 0; j < quota.front(); ++j) {
      for (std::size_t i = 0; i < count; ++i) {
        if (j < sinks[i].size()) buffer.push(sinks[i][j]);
      }
    }
  }
  pushed_ += n;

  std::vector<CompletedEpisode> out;
  for (auto& f : finished) out.insert(out.end(), f.begin(), f.end());
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.order < b.order; });
  return out;
}

}  // namespace qtransfer
