// qtransfer: train, transfer and evaluate DQN agents on the built-in games.
//
//   qtransfer <train|finetune|universal|eval|record|plot>
//             [--config <file>] [--set key=value]... [--out <dir>]

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qtransfer/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Deep Q-learning with transfer between pixel mini-games"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;

  const std::vector<std::pair<const char*, const char*>> commands{
      {"train", "Train an agent from scratch"},
      {"finetune", "Train starting from a checkpoint using a transfer mode"},
      {"universal", "Train sequentially on several games, then evaluate on a holdout"},
      {"eval", "Evaluate a checkpoint and print mean reward and duration"},
      {"record", "Dump frames of a greedy rollout as PPM files"},
      {"plot", "Export a run log to CSV and SVG charts"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "key=value config file");
    sub->add_option("--set", overrides, "Override one key (key=value), repeatable");
    sub->add_option("--out", out_dir, "Output directory (sets out_dir)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // CLI11 reports usage errors with its own codes; map them onto the
    // configuration-error exit code, except --help.
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  qtransfer::RunConfig config;
  const int load = qtransfer::guarded(
      [&] {
        if (!config_path.empty()) config = qtransfer::load_config(config_path);
        for (const auto& kv : overrides) {
          const auto eq = kv.find('=');
          if (eq == std::string::npos) {
            throw qtransfer::ConfigError("--set expects key=value, got '" + kv + "'");
          }
          config.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (!out_dir.empty()) config.out_dir = out_dir;
      },
      std::cerr);
  if (load != 0) return load;
  return qtransfer::run_command(command, config, std::cout, std::cerr);
}
