#include <chrono>
#include <cstdio>

#include "qtransfer/cli.hpp"
#include "qtransfer/errors.hpp"
#include "qtransfer/vecenv.hpp"

namespace qtransfer {
namespace {

constexpr std::uint64_t kLearnerStream = 0x1EA2'0000'0000'0001ull;
constexpr std::uint64_t kInitStream = 0x1217'0000'0000'0001ull;

std::int64_t elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now() - since)
      .count();
}

}  // namespace

std::unique_ptr<ReplayBuffer> make_buffer(const RunConfig& config) {
  const Shape state{static_cast<std::size_t>(kStackDepth), kFrameSize, kFrameSize};
  if (config.buffer == "prioritized") {
    PrioritizedOptions options;
    options.alpha = config.per_alpha;
    options.beta = config.per_beta;
    return std::make_unique<PrioritizedReplayBuffer>(config.buffer_capacity, state,
                                                     options);
  }
  return std::make_unique<ReplayBuffer>(config.buffer_capacity, state);
}

std::uint64_t init_seed(std::uint64_t seed) { return derive_seed(seed, kInitStream); }

QNetwork initial_network(std::size_t actions, std::uint64_t seed) {
  return QNetwork::initialized(QNetworkSpec::standard(actions), init_seed(seed));
}

CheckpointMetadata checkpoint_metadata(const DqnAgent& agent, const std::string& env,
                                       std::uint64_t config_hash) {
  return {env, static_cast<std::uint32_t>(agent.action_count()), agent.steps(),
          config_hash};
}

std::vector<EpisodeRecord> run_training(DqnAgent& agent, ReplayBuffer& buffer,
                                        const TrainLoopOptions& options, RunLog* log) {
  VecEnvConfig vc;
  vc.env_name = options.env_name;
  vc.env_options = options.env_options;
  vc.preprocess = agent.preprocess();
  vc.num_envs = options.workers;
  vc.base_seed = options.seed;
  vc.deterministic = options.deterministic;
  vc.threaded = options.workers > 1;
  VectorEnv vec(vc);
  if (vec.action_count() != agent.action_count()) {
    throw ConfigError("agent has " + std::to_string(agent.action_count()) +
                      " actions but " + options.env_name + " has " +
                      std::to_string(vec.action_count()));
  }
  vec.sync_policy(agent);

  Rng sample_rng(derive_seed(options.seed, kLearnerStream));
  std::vector<EpisodeRecord> records;
  double loss_sum = 0.0;
  std::size_t loss_count = 0;
  std::uint64_t trained = 0;
  auto episode_start = std::chrono::steady_clock::now();
  const std::size_t chunk = agent.config().train_every;
  bool stop = options.episodes <= 0;

  while (!stop) {
    std::vector<CompletedEpisode> finished;
    try {
      finished = vec.collect(buffer, chunk, agent.steps(), agent.config());
    } catch (const CollectError& e) {
      if (e.cause()) std::rethrow_exception(e.cause());
      throw;
    }
    agent.advance_steps(chunk);

    for (const auto& ep : finished) {
      EpisodeRecord r;
      r.episode_index = options.first_episode_index + records.size();
      r.reward = static_cast<float>(ep.reward);
      r.duration_steps = ep.duration;
      r.mean_loss = loss_count ? static_cast<float>(loss_sum / loss_count) : 0.0f;
      r.wall_ms = elapsed_ms(episode_start);
      r.env_name = options.env_name;
      r.phase = "train";
      loss_sum = 0.0;
      loss_count = 0;
      episode_start = std::chrono::steady_clock::now();
      records.push_back(r);
      if (log) log->append(r);
      const int done = static_cast<int>(records.size());
      if (options.checkpoint_every > 0 && done % options.checkpoint_every == 0 &&
          done < options.episodes) {
        char name[40];
        std::snprintf(name, sizeof name, "episode_%06llu.dqnc",
                      static_cast<unsigned long long>(r.episode_index + 1));
        save_checkpoint(agent.policy(), options.checkpoint_dir / name,
                        checkpoint_metadata(agent, options.env_name, options.config_hash));
      }
      if (options.on_episode && !options.on_episode(r)) stop = true;
      if (done >= options.episodes) stop = true;
      if (stop) break;
    }
    if (stop) break;

    if (const auto loss = agent.train_step(buffer, sample_rng)) {
      loss_sum += *loss;
      ++loss_count;
      if (++trained % options.sync_every == 0) vec.sync_policy(agent);
    }
  }
  return records;
}

}  // namespace qtransfer
