#include "qtransfer/metrics.hpp"

#include <cstdio>

#include "qtransfer/agent.hpp"
#include "qtransfer/errors.hpp"

namespace qtransfer {

using nlohmann::json;

json to_json(const EpisodeRecord& r) {
  return json{{"type", "episode"},
              {"episode", r.episode_index},
              {"reward", r.reward},
              {"duration_steps", r.duration_steps},
              {"mean_loss", r.mean_loss},
              {"wall_ms", r.wall_ms},
              {"env", r.env_name},
              {"phase", r.phase}};
}

EpisodeRecord record_from_json(const json& j) {
  try {
    EpisodeRecord r;
    r.episode_index = j.at("episode").get<std::uint64_t>();
    r.reward = j.at("reward").get<float>();
    r.duration_steps = j.at("duration_steps").get<std::int64_t>();
    r.mean_loss = j.at("mean_loss").get<float>();
    r.wall_ms = j.at("wall_ms").get<std::int64_t>();
    r.env_name = j.at("env").get<std::string>();
    r.phase = j.at("phase").get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed episode record: ") + e.what());
  }
}

std::vector<double> moving_average(const std::vector<double>& values,
                                   std::size_t window) {
  if (window == 0) throw ConfigError("moving_average: window must be positive");
  std::vector<double> out(values.size(), 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    sum += values[i];
    if (i >= window) sum -= values[i - window];
    if (i + 1 >= window) {
      // Re-sum every window to keep long runs free of accumulated drift.
      if ((i + 1) % window == 0) {
        sum = 0.0;
        for (std::size_t k = i + 1 - window; k <= i; ++k) sum += values[k];
      }
      out[i] = sum / static_cast<double>(window);
    }
  }
  return out;
}

RunLog::RunLog(const std::filesystem::path& path, const json& header)
    : path_(path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  out_.open(path, std::ios::trunc);
  if (!out_) throw IoError("cannot open run log " + path.string());
  json h = header;
  h["type"] = "header";
  write_line(h);
}

void RunLog::write_line(const json& j) {
  out_ << j.dump() << '\n';
  out_.flush();
  if (!out_) throw IoError("error while writing run log " + path_.string());
}

void RunLog::append(const EpisodeRecord& record) {
  if (any_ && record.episode_index <= last_index_) {
    throw ConfigError("run log: episode index " + std::to_string(record.episode_index) +
                      " does not increase");
  }
  write_line(to_json(record));
  any_ = true;
  last_index_ = record.episode_index;
  ++records_;
}

void RunLog::segment(const std::string& env_name) {
  write_line(json{{"type", "segment"}, {"env", env_name}});
}

RunLogContents read_run_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open run log " + path.string());
  RunLogContents out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("type")) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                        ": not a run log line");
    }
    const std::string type = j["type"].get<std::string>();
    if (line_no == 1) {
      if (type != "header") throw ConfigError(path.string() + ": missing header line");
      out.header = std::move(j);
    } else if (type == "episode") {
      out.records.push_back(record_from_json(j));
    } else if (type == "segment") {
      out.segments.push_back(j.at("env").get<std::string>());
    } else {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                        ": unknown line type '" + type + "'");
    }
  }
  if (line_no == 0) throw ConfigError(path.string() + ": empty run log");
  return out;
}

void export_csv(const std::vector<EpisodeRecord>& records,
                const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "episode,reward,duration_steps,mean_loss,wall_ms,phase\n";
  char buf[256];
  for (const auto& r : records) {
    // %.9g is enough digits to round-trip any float.
    std::snprintf(buf, sizeof buf, "%llu,%.9g,%lld,%.9g,%lld,%s\n",
                  static_cast<unsigned long long>(r.episode_index),
                  static_cast<double>(r.reward),
                  static_cast<long long>(r.duration_steps),
                  static_cast<double>(r.mean_loss), static_cast<long long>(r.wall_ms),
                  r.phase.c_str());
    out << buf;
  }
  if (!out) throw IoError("error while writing " + path.string());
}

void write_ppm(const Frame& frame, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P6\n" << kFrameSize << ' ' << kFrameSize << "\n255\n";
  out.write(reinterpret_cast<const char*>(frame.rgb.data()),
            static_cast<std::streamsize>(frame.rgb.size()));
  if (!out) throw IoError("error while writing " + path.string());
}

std::vector<std::filesystem::path> record_frames(
    Environment& env, const QNetwork& net, const PreprocessConfig& preprocess,
    int n_frames, const std::filesystem::path& out_dir, std::uint64_t seed) {
  if (n_frames < 0) throw ConfigError("record: frame count must be non-negative");
  if (static_cast<int>(net.action_count()) != env.action_space()) {
    throw ConfigError("record: network has " + std::to_string(net.action_count()) +
                      " outputs but " + env.name() + " has " +
                      std::to_string(env.action_space()) + " actions");
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string());

  std::vector<std::filesystem::path> files;
  auto dump = [&](const Frame& f) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%06d.ppm", static_cast<int>(files.size()));
    files.push_back(out_dir / name);
    write_ppm(f, files.back());
  };

  FrameStack stack;
  std::uint64_t episode = 0;
  while (static_cast<int>(files.size()) < n_frames) {
    if (env.needs_reset()) {
      const Frame first = env.reset(derive_seed(seed, episode++));
      stack.reset(preprocess_frame(first));
      dump(first);
      continue;
    }
    const Tensor q = net.forward(network_input(stack.state(), preprocess));
    const int action = greedy_action(q.values());
    // Tick by tick so every intermediate frame is captured.
    Frame last;
    for (int k = 0; k < preprocess.frame_skip && !env.done(); ++k) {
      env.tick(action);
      last = env.render();
      if (static_cast<int>(files.size()) < n_frames) dump(last);
    }
    stack.push(preprocess_frame(last));
  }
  return files;
}

}  // namespace qtransfer
