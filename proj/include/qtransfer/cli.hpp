#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "qtransfer/agent.hpp"
#include "qtransfer/errors.hpp"
#include "qtransfer/metrics.hpp"
#include "qtransfer/replay.hpp"
#include "qtransfer/transfer.hpp"

namespace qtransfer {

// Flat key=value run configuration. Every key except env and out_dir has a
// default; unknown keys are rejected.
struct RunConfig {
  std::string env;
  std::string out_dir;
  int episodes = 1000;
  std::uint64_t seed = 0;
  AgentConfig agent;
  std::string buffer = "uniform";  // uniform | prioritized
  std::size_t buffer_capacity = 50000;
  double per_alpha = 0.6;
  double per_beta = 0.4;
  std::size_t workers = 1;
  std::size_t sync_every = 4;
  bool deterministic = false;
  PreprocessConfig preprocess;
  int max_episode_steps = 3000;
  int checkpoint_every = 500;
  std::string transfer_mode;
  std::string transfer_checkpoint;
  std::vector<std::string> env_list;
  int episodes_per_env = 1000;
  std::string eval_env;
  int eval_episodes = 100;
  std::string checkpoint;
  int frames = 100;
  std::string log;  // plot input; defaults to <out_dir>/run.ndjson

  // Throws ConfigError naming `key` for unknown keys or unparsable values.
  void set(std::string_view key, std::string_view value);

  // Canonical "key=value" lines for every key, sorted by key.
  std::map<std::string, std::string> entries() const;
  nlohmann::json to_json() const;
  // FNV-1a over the canonical entries, excluding out_dir.
  std::uint64_t hash() const;

  EnvOptions env_options() const { return {max_episode_steps}; }
};

// Parses config text: one key=value per line, '#' starts a comment, blank
// lines ignored. `origin` labels error messages.
RunConfig parse_config(std::string_view text, const std::string& origin = "config");
// Throws IoError when unreadable.
RunConfig load_config(const std::filesystem::path& path);

// True when QT_DETERMINISTIC=1 is set in the environment.
bool deterministic_from_env();

struct TrainLoopOptions {
  std::string env_name;
  EnvOptions env_options;
  int episodes = 1;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::size_t sync_every = 4;
  bool deterministic = true;
  // Index given to the first episode (keeps indices increasing across the
  // segments of a sequential run).
  std::uint64_t first_episode_index = 0;
  // Periodic checkpoints every this many episodes into checkpoint_dir (0 = off).
  int checkpoint_every = 0;
  std::filesystem::path checkpoint_dir;
  std::uint64_t config_hash = 0;
  // Called for every finished episode after it is logged; returning false
  // ends training early.
  std::function<bool(const EpisodeRecord&)> on_episode;
};

// Collects train_every transitions, takes one train_step, repeats, until
// `episodes` episodes have finished. Actors see the policy through a
// snapshot refreshed every sync_every train steps.
std::vector<EpisodeRecord> run_training(DqnAgent& agent, ReplayBuffer& buffer,
                                        const TrainLoopOptions& options,
                                        RunLog* log);

std::unique_ptr<ReplayBuffer> make_buffer(const RunConfig& config);

// Seed of the weight-initialization stream of a run seeded with `seed`.
std::uint64_t init_seed(std::uint64_t seed);
// Initial weights for a fresh agent with the given action count.
QNetwork initial_network(std::size_t actions, std::uint64_t seed);

CheckpointMetadata checkpoint_metadata(const DqnAgent& agent, const std::string& env,
                                       std::uint64_t config_hash);

// Commands. Each returns a process exit code: 0 success, 2 configuration
// error, 3 I/O error, 4 numerical failure. Diagnostics go to `err`, the eval
// summary line to `out`.
int cmd_train(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_finetune(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_universal(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_eval(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_record(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_plot(const RunConfig& config, std::ostream& out, std::ostream& err);

// Dispatches by name; unknown commands return 2.
int run_command(std::string_view command, const RunConfig& config, std::ostream& out,
                std::ostream& err);

// Runs `body`, translating exceptions to exit codes and messages on `err`.
int guarded(const std::function<void()>& body, std::ostream& err);

}  // namespace qtransfer
