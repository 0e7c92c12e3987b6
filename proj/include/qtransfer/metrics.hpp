#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qtransfer/envs.hpp"
#include "qtransfer/preprocess.hpp"
#include "qtransfer/qnetwork.hpp"

namespace qtransfer {

struct EpisodeRecord {
  std::uint64_t episode_index = 0;
  float reward = 0.0f;
  std::int64_t duration_steps = 0;
  float mean_loss = 0.0f;  // 0 when no train step ran during the episode
  std::int64_t wall_ms = 0;
  std::string env_name;
  std::string phase = "train";  // "train" or "eval"

  bool operator==(const EpisodeRecord&) const = default;
};

nlohmann::json to_json(const EpisodeRecord& record);
// Throws ConfigError on missing or mistyped fields.
EpisodeRecord record_from_json(const nlohmann::json& j);

// Trailing mean over `window` values, zero for the first window - 1 points.
std::vector<double> moving_average(const std::vector<double>& values,
                                   std::size_t window = 100);

// Append-only NDJSON run log. The first line is the header; every later line
// is an episode record or a segment marker. Each line is flushed as written,
// so the file stays parseable if the process dies between records.
class RunLog {
 public:
  // Truncates `path` and writes the header. Throws IoError.
  RunLog(const std::filesystem::path& path, const nlohmann::json& header);

  // Throws ConfigError if episode_index does not increase.
  void append(const EpisodeRecord& record);
  // Marks the start of training on `env_name`.
  void segment(const std::string& env_name);

  const std::filesystem::path& path() const { return path_; }
  std::size_t record_count() const { return records_; }

 private:
  void write_line(const nlohmann::json& j);

  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t records_ = 0;
  bool any_ = false;
  std::uint64_t last_index_ = 0;
};

struct RunLogContents {
  nlohmann::json header;
  std::vector<EpisodeRecord> records;
  std::vector<std::string> segments;  // env names, in order
};

// Throws IoError when unreadable, ConfigError on malformed lines.
RunLogContents read_run_log(const std::filesystem::path& path);

// Header: episode,reward,duration_steps,mean_loss,wall_ms,phase.
void export_csv(const std::vector<EpisodeRecord>& records,
                const std::filesystem::path& path);

enum class Metric { kReward, kDuration, kLoss };
Metric parse_metric(const std::string& name);
std::string metric_name(Metric metric);

// SVG line chart of the raw series and its 100-point moving average.
void emit_plot(const std::vector<EpisodeRecord>& records, Metric metric,
               const std::filesystem::path& path);

// Binary PPM (P6) of one frame.
void write_ppm(const Frame& frame, const std::filesystem::path& path);

// Greedy rollout of `net` on `env` (episodes reset with derive_seed(seed, k)
// and restarted as needed) writing every rendered tick as
// out_dir/frame_%06d.ppm until `n_frames` files exist. Returns the paths.
std::vector<std::filesystem::path> record_frames(
    Environment& env, const QNetwork& net, const PreprocessConfig& preprocess,
    int n_frames, const std::filesystem::path& out_dir, std::uint64_t seed);

}  // namespace qtransfer
