#include <algorithm>
#include <string>

#include "qtransfer/envs.hpp"
#include "qtransfer/errors.hpp"

namespace qtransfer {

void Frame::clear(Color c) {
  for (std::size_t i = 0; i < rgb.size(); i += 3) {
    rgb[i] = c.r;
    rgb[i + 1] = c.g;
    rgb[i + 2] = c.b;
  }
}

void Frame::fill_rect(int x, int y, int w, int h, Color c) {
  const int x0 = std::max(x, 0), y0 = std::max(y, 0);
  const int x1 = std::min(x + w, kFrameSize), y1 = std::min(y + h, kFrameSize);
  for (int yy = y0; yy < y1; ++yy) {
    for (int xx = x0; xx < x1; ++xx) {
      const std::size_t i = (static_cast<std::size_t>(yy) * kFrameSize + xx) * 3;
      rgb[i] = c.r;
      rgb[i + 1] = c.g;
      rgb[i + 2] = c.b;
    }
  }
}

Color Frame::pixel(int x, int y) const {
  const std::size_t i = (static_cast<std::size_t>(y) * kFrameSize + x) * 3;
  return {rgb[i], rgb[i + 1], rgb[i + 2]};
}

Environment::Environment(EnvSpec spec) : spec_(std::move(spec)) {
  if (spec_.max_episode_steps < 1) {
    throw ConfigError("max_episode_steps must be positive");
  }
}

Frame Environment::reset(std::uint64_t seed) {
  rng_.seed(seed);
  steps_ = 0;
  done_ = false;
  started_ = true;
  on_reset();
  return render();
}

TickResult Environment::tick(int action) {
  if (!started_) throw EnvError(spec_.name + ": step() before reset()");
  if (done_) throw EnvError(spec_.name + ": step() after episode end");
  if (action < 0 || action >= spec_.action_count) {
    throw EnvError(spec_.name + ": action " + std::to_string(action) +
                   " outside [0, " + std::to_string(spec_.action_count) + ")");
  }
  const int reward = on_tick(action);
  ++steps_;
  done_ = terminal() || steps_ >= spec_.max_episode_steps;
  return {static_cast<float>(reward), done_};
}

StepResult Environment::step(int action) {
  const TickResult t = tick(action);
  return {render(), t.reward, t.done, steps_};
}

Frame Environment::render() const {
  Frame frame;
  draw(frame);
  return frame;
}

}  // namespace qtransfer
