#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "qtransfer/rng.hpp"

namespace qtransfer {

inline constexpr int kFrameSize = 84;

struct Color {
  std::uint8_t r, g, b;
};

// 84x84 RGB, 8 bits per channel, row-major with interleaved channels.
struct Frame {
  std::array<std::uint8_t, kFrameSize * kFrameSize * 3> rgb{};

  void clear(Color c = {0, 0, 0});
  // Clipped to the frame.
  void fill_rect(int x, int y, int w, int h, Color c);
  Color pixel(int x, int y) const;

  bool operator==(const Frame&) const = default;
};

struct EnvSpec {
  std::string name;
  int action_count = 0;
  int max_episode_steps = 3000;
};

struct StepResult {
  Frame frame;
  float reward = 0.0f;
  bool done = false;
  int episode_steps = 0;
};

// Reward and termination of one tick, without rendering.
struct TickResult {
  float reward = 0.0f;
  bool done = false;
};

// A deterministic pixel game. All dynamics run on an integer grid and draw
// randomness from one seeded mt19937_64, so (seed, actions) fixes the whole
// trajectory. One instance is single-threaded; instances share nothing.
class Environment {
 public:
  explicit Environment(EnvSpec spec);
  virtual ~Environment() = default;

  const EnvSpec& spec() const { return spec_; }
  const std::string& name() const { return spec_.name; }
  int action_space() const { return spec_.action_count; }

  Frame reset(std::uint64_t seed);

  // Throws EnvError on an out-of-range action or when the episode is over.
  StepResult step(int action);
  TickResult tick(int action);

  Frame render() const;

  bool done() const { return done_; }
  int episode_steps() const { return steps_; }
  bool needs_reset() const { return !started_ || done_; }

  // Upper bound on the total reward of one episode.
  virtual int max_episode_reward() const = 0;
  virtual std::unique_ptr<Environment> clone() const = 0;

 protected:
  virtual void on_reset() = 0;
  // Advances one tick and returns the (non-negative) reward.
  virtual int on_tick(int action) = 0;
  virtual bool terminal() const = 0;
  virtual void draw(Frame& frame) const = 0;

  Rng& rng() { return rng_; }
  bool chance(int one_in) { return uniform_index(rng_, one_in) == 0; }
  int random_int(int lo, int hi_inclusive) {
    return lo + static_cast<int>(uniform_index(rng_, hi_inclusive - lo + 1));
  }

 private:
  EnvSpec spec_;
  Rng rng_;
  int steps_ = 0;
  bool done_ = false;
  bool started_ = false;
};

struct EnvOptions {
  int max_episode_steps = 3000;
};

// Paddle/ball/brick wall. Actions: noop, fire (launch), left, right.
// Bricks score +7 (top two rows), +4 (middle), +1 (bottom); three lost balls
// end the episode.
std::unique_ptr<Environment> make_brick(EnvOptions options = {});

// Cannon vs. a descending alien grid that drops bombs. Actions: noop, fire,
// left, right, left+fire, right+fire. +10 per alien; ends when the cannon is
// hit or the grid is cleared or lands.
std::unique_ptr<Environment> make_shooter6(EnvOptions options = {});

// Movable cannon vs. respawning enemies that shoot back. shooter6's six
// actions plus up. +21 per enemy; ends when the cannon is hit.
std::unique_ptr<Environment> make_shooter7(EnvOptions options = {});

// shooter6 variant whose formation sends enemies diving at the cannon. Same
// six actions with identical movement semantics. +10 per enemy. Reserved for
// evaluation of agents trained elsewhere.
std::unique_ptr<Environment> make_shooter6_holdout(EnvOptions options = {});

// Throws ConfigError for unknown names.
std::unique_ptr<Environment> make_env(std::string_view name,
                                      EnvOptions options = {});
const std::vector<std::string>& env_names();
int env_action_count(std::string_view name);

}  // namespace qtransfer
