#include <algorithm>
#include <cstdio>
#include <ostream>

#include "qtransfer/cli.hpp"
#include "qtransfer/errors.hpp"
#include "qtransfer/vecenv.hpp"

namespace qtransfer {
namespace {

constexpr const char* kVersion = "qtransfer 1.0";

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

void require_key(const std::string& value, const char* key) {
  require(!value.empty(), std::string("missing required key '") + key + "'");
}

std::filesystem::path out_path(const RunConfig& c) {
  require_key(c.out_dir, "out_dir");
  return c.out_dir;
}

bool deterministic(const RunConfig& c) { return c.deterministic || deterministic_from_env(); }

nlohmann::json header(const RunConfig& c, const char* command) {
  return {{"command", command},
          {"version", kVersion},
          {"config", c.to_json()},
          {"config_hash", c.hash()},
          {"seed", c.seed},
          {"deterministic", deterministic(c)}};
}

TrainLoopOptions loop_options(const RunConfig& c, const std::string& env,
                              std::uint64_t seed, int episodes) {
  TrainLoopOptions o;
  o.env_name = env;
  o.env_options = c.env_options();
  o.episodes = episodes;
  o.seed = seed;
  o.workers = c.workers;
  o.sync_every = c.sync_every;
  o.deterministic = deterministic(c);
  o.checkpoint_every = c.checkpoint_every;
  o.checkpoint_dir = std::filesystem::path(c.out_dir) / "checkpoints";
  o.config_hash = c.hash();
  return o;
}

void validate_common(const RunConfig& c) {
  c.agent.validate();
  c.preprocess.validate();
}

void print_summary(std::ostream& out, const EvalResult& r) {
  char line[128];
  std::snprintf(line, sizeof line, "mean_reward=%.4f mean_duration=%.2f", r.mean_reward,
                r.mean_duration);
  out << line << std::endl;
}

void log_eval(RunLog& log, const EvalResult& r, const std::string& env,
              std::uint64_t first_index) {
  for (std::size_t i = 0; i < r.rewards.size(); ++i) {
    EpisodeRecord rec;
    rec.episode_index = first_index + i;
    rec.reward = static_cast<float>(r.rewards[i]);
    rec.duration_steps = r.durations[i];
    rec.env_name = env;
    rec.phase = "eval";
    log.append(rec);
  }
}

void train_and_save(DqnAgent& agent, const RunConfig& c, RunLog& log) {
  auto buffer = make_buffer(c);
  run_training(agent, *buffer, loop_options(c, c.env, c.seed, c.episodes), &log);
  save_checkpoint(agent.policy(), out_path(c) / "final.dqnc",
                  checkpoint_metadata(agent, c.env, c.hash()));
}

}  // namespace

int guarded(const std::function<void()>& body, std::ostream& err) {
  auto report = [&](const char* kind, const std::exception& e, int code) {
    err << "error (" << kind << "): " << e.what() << std::endl;
    return code;
  };
  try {
    try {
      body();
    } catch (const CollectError& e) {
      if (e.cause()) std::rethrow_exception(e.cause());
      throw;
    }
    return 0;
  } catch (const ConfigError& e) {
    return report("configuration", e, 2);
  } catch (const InsufficientSamples& e) {
    return report("configuration", e, 2);
  } catch (const IoError& e) {
    return report("io", e, 3);
  } catch (const std::filesystem::filesystem_error& e) {
    return report("io", e, 3);
  } catch (const NumericalError& e) {
    return report("numerical", e, 4);
  } catch (const std::exception& e) {
    return report("internal", e, 1);
  }
}

int cmd_train(const RunConfig& c, std::ostream&, std::ostream& err) {
  return guarded([&] {
    require_key(c.env, "env");
    require(c.transfer_mode.empty() && c.transfer_checkpoint.empty(),
            "train does not take transfer.* keys; use finetune");
    validate_common(c);
    const int actions = env_action_count(c.env);
    RunLog log(out_path(c) / "run.ndjson", header(c, "train"));
    DqnAgent agent(initial_network(actions, c.seed), c.agent, c.preprocess);
    train_and_save(agent, c, log);
  }, err);
}

int cmd_finetune(const RunConfig& c, std::ostream&, std::ostream& err) {
  return guarded([&] {
    require_key(c.env, "env");
    require_key(c.transfer_mode, "transfer.mode");
    require_key(c.transfer_checkpoint, "transfer.checkpoint");
    validate_common(c);
    const TransferMode mode = parse_transfer_mode(c.transfer_mode);
    const Checkpoint ckpt = load_checkpoint(c.transfer_checkpoint);
    const int actions = env_action_count(c.env);
    // Fresh parameters come from the same stream a scratch run would use.
    DqnAgent agent = build_transfer_agent(ckpt, QNetworkSpec::standard(actions), mode,
                                          init_seed(c.seed), c.agent, c.preprocess);
    nlohmann::json h = header(c, "finetune");
    h["transfer_mode"] = to_string(mode);
    h["source_checkpoint"] = c.transfer_checkpoint;
    h["source_hash"] = file_hash(c.transfer_checkpoint);
    h["source_env"] = ckpt.metadata.env_name;
    RunLog log(out_path(c) / "run.ndjson", h);
    train_and_save(agent, c, log);
  }, err);
}

int cmd_universal(const RunConfig& c, std::ostream& out, std::ostream& err) {
  return guarded([&] {
    require(!c.env_list.empty(), "missing required key 'env_list'");
    require_key(c.eval_env, "eval_env");
    validate_common(c);
    for (const auto& e : c.env_list) {
      require(e != c.eval_env, "eval_env '" + c.eval_env +
                                   "' is also a training environment; the holdout "
                                   "must be unseen");
    }
    const int actions = env_action_count(c.env_list.front());
    for (const auto& e : c.env_list) {
      require(env_action_count(e) == actions,
              "env_list mixes action counts: " + c.env_list.front() + " has " +
                  std::to_string(actions) + ", " + e + " has " +
                  std::to_string(env_action_count(e)));
    }
    require(env_action_count(c.eval_env) == actions,
            "eval_env " + c.eval_env + " has a different action count");

    RunLog log(out_path(c) / "run.ndjson", header(c, "universal"));
    DqnAgent agent(initial_network(actions, c.seed), c.agent, c.preprocess);
    auto buffer = make_buffer(c);
    std::uint64_t next_index = 0;
    for (std::size_t k = 0; k < c.env_list.size(); ++k) {
      const std::string& env = c.env_list[k];
      log.segment(env);
      TrainLoopOptions o = loop_options(c, env, derive_seed(c.seed, k), c.episodes_per_env);
      o.first_episode_index = next_index;
      next_index += run_training(agent, *buffer, o, &log).size();
    }
    save_checkpoint(agent.policy(), out_path(c) / "final.dqnc",
                    checkpoint_metadata(agent, c.env_list.back(), c.hash()));
    auto env = make_env(c.eval_env, c.env_options());
    const EvalResult r = evaluate(agent, *env, c.eval_episodes, c.seed);
    log_eval(log, r, c.eval_env, next_index);
    print_summary(out, r);
  }, err);
}

int cmd_eval(const RunConfig& c, std::ostream& out, std::ostream& err) {
  return guarded([&] {
    require_key(c.env, "env");
    require_key(c.checkpoint, "checkpoint");
    c.preprocess.validate();
    require(c.episodes >= 1, "episodes must be at least 1 for eval");
    const QNetwork net = network_from_checkpoint(load_checkpoint(c.checkpoint));
    auto env = make_env(c.env, c.env_options());
    const EvalResult r = evaluate(net, c.preprocess, *env, c.episodes, c.seed);
    if (!c.out_dir.empty()) {
      nlohmann::json h = header(c, "eval");
      h["checkpoint_hash"] = file_hash(c.checkpoint);
      RunLog log(std::filesystem::path(c.out_dir) / "eval.ndjson", h);
      log_eval(log, r, c.env, 0);
    }
    print_summary(out, r);
  }, err);
}

int cmd_record(const RunConfig& c, std::ostream& out, std::ostream& err) {
  return guarded([&] {
    require_key(c.env, "env");
    require_key(c.checkpoint, "checkpoint");
    c.preprocess.validate();
    const QNetwork net = network_from_checkpoint(load_checkpoint(c.checkpoint));
    auto env = make_env(c.env, c.env_options());
    const auto files =
        record_frames(*env, net, c.preprocess, c.frames, out_path(c) / "frames", c.seed);
    out << "frames=" << files.size() << std::endl;
  }, err);
}

int cmd_plot(const RunConfig& c, std::ostream& out, std::ostream& err) {
  return guarded([&] {
    const std::filesystem::path dir = out_path(c);
    const std::filesystem::path log_path = c.log.empty() ? dir / "run.ndjson" : std::filesystem::path(c.log);
    const RunLogContents contents = read_run_log(log_path);
    std::filesystem::create_directories(dir);
    export_csv(contents.records, dir / "run.csv");
    std::vector<EpisodeRecord> train;
    std::copy_if(contents.records.begin(), contents.records.end(),
                 std::back_inserter(train), [](const auto& r) { return r.phase == "train"; });
    for (Metric m : {Metric::kReward, Metric::kDuration, Metric::kLoss}) {
      emit_plot(train, m, dir / (metric_name(m) + ".svg"));
    }
    out << "records=" << contents.records.size() << std::endl;
  }, err);
}

int run_command(std::string_view command, const RunConfig& config, std::ostream& out,
                std::ostream& err) {
  if (command == "train") return cmd_train(config, out, err);
  if (command == "finetune") return cmd_finetune(config, out, err);
  if (command == "universal") return cmd_universal(config, out, err);
  if (command == "eval") return cmd_eval(config, out, err);
  if (command == "record") return cmd_record(config, out, err);
  if (command == "plot") return cmd_plot(config, out, err);
  err << "error (configuration): unknown command '" << command << "'" << std::endl;
  return 2;
}

}  // namespace qtransfer
