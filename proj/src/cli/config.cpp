#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "qtransfer/cli.hpp"
#include "qtransfer/errors.hpp"

namespace qtransfer {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value,
                            const char* expected) {
  throw ConfigError("invalid value '" + std::string(value) + "' for key '" +
                    std::string(key) + "': expected " + expected);
}

template <typename T>
T parse_integer(std::string_view key, std::string_view v, T min) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || out < min) {
    bad_value(key, v, min > 0 ? "a positive integer" : "a non-negative integer");
  }
  return out;
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "true or false");
}

// Shortest text that parses back to the same double.
std::string fmt_double(double v) {
  char buf[40];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::vector<std::string> split_list(std::string_view v) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= v.size()) {
    const auto comma = v.find(',', start);
    const auto end = comma == std::string_view::npos ? v.size() : comma;
    std::string item = trim(v.substr(start, end - start));
    if (!item.empty()) out.push_back(std::move(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    out += items[i];
  }
  return out;
}

}  // namespace

void RunConfig::set(std::string_view key, std::string_view value) {
  const std::string v = trim(value);
  if (key == "env") env = v;
  else if (key == "out_dir") out_dir = v;
  else if (key == "episodes") episodes = parse_integer<int>(key, v, 0);
  else if (key == "seed") seed = parse_integer<std::uint64_t>(key, v, 0);
  else if (key == "batch_size") agent.batch_size = parse_integer<std::size_t>(key, v, 1);
  else if (key == "gamma") agent.gamma = parse_double(key, v);
  else if (key == "eps_start") agent.eps_start = parse_double(key, v);
  else if (key == "eps_end") agent.eps_end = parse_double(key, v);
  else if (key == "eps_decay") agent.eps_decay = parse_double(key, v);
  else if (key == "tau") agent.tau = parse_double(key, v);
  else if (key == "lr") agent.lr = parse_double(key, v);
  else if (key == "warmup_transitions") agent.warmup_transitions = parse_integer<std::size_t>(key, v, 0);
  else if (key == "train_every") agent.train_every = parse_integer<std::size_t>(key, v, 1);
  else if (key == "buffer") {
    if (v != "uniform" && v != "prioritized") bad_value(key, v, "uniform or prioritized");
    buffer = v;
  }
  else if (key == "buffer_capacity") buffer_capacity = parse_integer<std::size_t>(key, v, 1);
  else if (key == "per_alpha") per_alpha = parse_double(key, v);
  else if (key == "per_beta") per_beta = parse_double(key, v);
  else if (key == "workers") workers = parse_integer<std::size_t>(key, v, 1);
  else if (key == "sync_every") sync_every = parse_integer<std::size_t>(key, v, 1);
  else if (key == "deterministic") deterministic = parse_bool(key, v);
  else if (key == "frame_skip") preprocess.frame_skip = parse_integer<int>(key, v, 1);
  else if (key == "difference_frames") preprocess.difference_frames = parse_bool(key, v);
  else if (key == "max_episode_steps") max_episode_steps = parse_integer<int>(key, v, 1);
  else if (key == "checkpoint_every") checkpoint_every = parse_integer<int>(key, v, 0);
  else if (key == "transfer.mode") {
    if (!v.empty()) (void)parse_transfer_mode(v);
    transfer_mode = v;
  }
  else if (key == "transfer.checkpoint") transfer_checkpoint = v;
  else if (key == "env_list") env_list = split_list(v);
  else if (key == "episodes_per_env") episodes_per_env = parse_integer<int>(key, v, 0);
  else if (key == "eval_env") eval_env = v;
  else if (key == "eval_episodes") eval_episodes = parse_integer<int>(key, v, 1);
  else if (key == "checkpoint") checkpoint = v;
  else if (key == "frames") frames = parse_integer<int>(key, v, 0);
  else if (key == "log") log = v;
  else throw ConfigError("unknown config key '" + std::string(key) + "'");
}

std::map<std::string, std::string> RunConfig::entries() const {
  return {
      {"env", env},
      {"out_dir", out_dir},
      {"episodes", std::to_string(episodes)},
      {"seed", std::to_string(seed)},
      {"batch_size", std::to_string(agent.batch_size)},
      {"gamma", fmt_double(agent.gamma)},
      {"eps_start", fmt_double(agent.eps_start)},
      {"eps_end", fmt_double(agent.eps_end)},
      {"eps_decay", fmt_double(agent.eps_decay)},
      {"tau", fmt_double(agent.tau)},
      {"lr", fmt_double(agent.lr)},
      {"warmup_transitions", std::to_string(agent.warmup_transitions)},
      {"train_every", std::to_string(agent.train_every)},
      {"buffer", buffer},
      {"buffer_capacity", std::to_string(buffer_capacity)},
      {"per_alpha", fmt_double(per_alpha)},
      {"per_beta", fmt_double(per_beta)},
      {"workers", std::to_string(workers)},
      {"sync_every", std::to_string(sync_every)},
      {"deterministic", deterministic ? "true" : "false"},
      {"frame_skip", std::to_string(preprocess.frame_skip)},
      {"difference_frames", preprocess.difference_frames ? "true" : "false"},
      {"max_episode_steps", std::to_string(max_episode_steps)},
      {"checkpoint_every", std::to_string(checkpoint_every)},
      {"transfer.mode", transfer_mode},
      {"transfer.checkpoint", transfer_checkpoint},
      {"env_list", join(env_list)},
      {"episodes_per_env", std::to_string(episodes_per_env)},
      {"eval_env", eval_env},
      {"eval_episodes", std::to_string(eval_episodes)},
      {"checkpoint", checkpoint},
      {"frames", std::to_string(frames)},
      {"log", log},
  };
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : entries()) j[k] = v;
  return j;
}

std::uint64_t RunConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& [k, v] : entries()) {
    if (k == "out_dir") continue;
    for (char c : k + "=" + v + "\n") {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

RunConfig parse_config(std::string_view text, const std::string& origin) {
  RunConfig config;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string content = trim(line);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) +
                        ": expected key=value, got '" + content + "'");
    }
    const std::string key = trim(std::string_view(content).substr(0, eq));
    try {
      config.set(key, std::string_view(content).substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

bool deterministic_from_env() {
  const char* v = std::getenv("QT_DETERMINISTIC");
  return v != nullptr && std::string_view(v) == "1";
}

}  // namespace qtransfer
