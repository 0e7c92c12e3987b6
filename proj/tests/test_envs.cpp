#include <doctest.h>

#include <optional>

#include "qtransfer/envs.hpp"
#include "qtransfer/errors.hpp"

using namespace qtransfer;

namespace {

// Leftmost column of the cannon (its colour is unique to it), if visible.
std::optional<int> cannon_x(const Frame& f) {
  for (int x = 0; x < kFrameSize; ++x) {
    const Color c = f.pixel(x, 78);
    if (c.r == 60 && c.g == 200 && c.b == 60) return x;
  }
  return std::nullopt;
}

struct Rollout {
  std::vector<Frame> frames;
  std::vector<float> rewards;
  std::vector<bool> dones;
};

Rollout play(Environment& env, std::uint64_t seed, const std::vector<int>& actions) {
  Rollout r;
  r.frames.push_back(env.reset(seed));
  for (int a : actions) {
    if (env.done()) break;
    auto s = env.step(a);
    r.frames.push_back(s.frame);
    r.rewards.push_back(s.reward);
    r.dones.push_back(s.done);
  }
  return r;
}

std::vector<int> random_actions(int n, int action_count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> out(n);
  for (int& a : out) a = static_cast<int>(uniform_index(rng, action_count));
  return out;
}

}  // namespace

TEST_CASE("catalog action counts") {
  CHECK(env_action_count("shooter6") == 6);
  CHECK(env_action_count("shooter7") == 7);
  CHECK(env_action_count("brick") == 4);
  CHECK(env_action_count("shooter6_holdout") == 6);
  CHECK_THROWS_AS(make_env("pong"), ConfigError);
  for (const auto& name : env_names()) CHECK(make_env(name)->name() == name);
}

TEST_CASE("same seed and actions reproduce the trajectory bit for bit") {
  for (const auto& name : env_names()) {
    CAPTURE(name);
    auto a = make_env(name), b = make_env(name);
    const auto actions = random_actions(400, a->action_space(), 9);
    const auto ra = play(*a, 77, actions), rb = play(*b, 77, actions);
    CHECK(ra.frames == rb.frames);
    CHECK(ra.rewards == rb.rewards);
    CHECK(ra.dones == rb.dones);
  }
}

TEST_CASE("different seeds give different starts") {
  for (const auto& name : env_names()) {
    CAPTURE(name);
    auto env = make_env(name);
    const auto actions = random_actions(100, env->action_space(), 1);
    CHECK(play(*env, 1, actions).frames != play(*env, 2, actions).frames);
  }
}

TEST_CASE("different games render differently") {
  const auto a = make_env("shooter6")->reset(5);
  const auto b = make_env("brick")->reset(5);
  const auto c = make_env("shooter6_holdout")->reset(5);
  CHECK(a != b);
  CHECK(a != c);
}

TEST_CASE("reset mid-episode discards prior state") {
  auto env = make_env("shooter7");
  const Frame fresh = env->reset(3);
  for (int i = 0; i < 30 && !env->done(); ++i) env->step(i % 7);
  CHECK(env->reset(3) == fresh);
  CHECK(env->episode_steps() == 0);
}

TEST_CASE("step contract errors") {
  auto env = make_env("brick");
  CHECK_THROWS_AS(env->step(0), EnvError);  // before reset
  env->reset(0);
  CHECK_THROWS_AS(env->step(4), EnvError);
  CHECK_THROWS_AS(env->step(-1), EnvError);
  auto short_env = make_env("brick", {3});
  short_env->reset(0);
  for (int i = 0; i < 3; ++i) short_env->step(0);
  CHECK(short_env->done());
  CHECK_THROWS_AS(short_env->step(0), EnvError);
  CHECK_THROWS_AS(make_env("brick", {0}), ConfigError);
}

TEST_CASE("brick without launching scores nothing until the time limit") {
  auto env = make_env("brick", {500});
  env->reset(11);
  float total = 0.0f;
  int ticks = 0;
  while (!env->done()) {
    total += env->step(0).reward;
    ++ticks;
  }
  CHECK(total == 0.0f);
  CHECK(ticks == 500);
}

TEST_CASE("shooter6 scripted fire scores one alien") {
  auto env = make_env("shooter6");
  env->reset(4);
  float first_event = 0.0f;
  env->step(1);
  for (int i = 0; i < 40 && first_event == 0.0f && !env->done(); ++i) {
    first_event = env->step(0).reward;
  }
  CHECK(first_event == 10.0f);
}

TEST_CASE("rewards are non-negative and bounded per episode") {
  for (const auto& name : env_names()) {
    CAPTURE(name);
    auto env = make_env(name);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      env->reset(seed);
      const auto actions = random_actions(3000, env->action_space(), seed + 100);
      double total = 0.0;
      for (int a : actions) {
        if (env->done()) break;
        const auto s = env->step(a);
        CHECK(s.reward >= 0.0f);
        CHECK(s.reward <= 21.0f * 8);  // several events may share a tick
        total += s.reward;
      }
      CHECK(total <= env->max_episode_reward());
    }
  }
}

TEST_CASE("render is pure") {
  auto env = make_env("shooter6");
  env->reset(2);
  env->step(3);
  CHECK(env->render() == env->render());
}

TEST_CASE("shooter6 and its holdout move the cannon identically") {
  auto a = make_env("shooter6"), b = make_env("shooter6_holdout");
  a->reset(8);
  b->reset(8);
  const std::vector<int> script{2, 2, 2, 3, 3, 0, 4, 5, 3, 3, 3, 2, 0, 0, 5, 4};
  auto xa = cannon_x(a->render()), xb = cannon_x(b->render());
  REQUIRE(xa);
  REQUIRE(xb);
  for (int act : script) {
    if (a->done() || b->done()) break;
    const auto na = cannon_x(a->step(act).frame), nb = cannon_x(b->step(act).frame);
    REQUIRE(na);
    REQUIRE(nb);
    // Away from the walls both move by the same amount.
    if (*xa > 6 && *xa < 70 && *xb > 6 && *xb < 70) CHECK(*na - *xa == *nb - *xb);
    xa = na;
    xb = nb;
  }
}

TEST_CASE("fill_rect clips to the frame") {
  Frame f;
  f.fill_rect(-5, -5, 10, 10, {255, 0, 0});
  CHECK(f.pixel(0, 0).r == 255);
  CHECK(f.pixel(4, 4).r == 255);
  CHECK(f.pixel(5, 5).r == 0);
  f.fill_rect(80, 80, 20, 20, {0, 0, 9});
  CHECK(f.pixel(83, 83).b == 9);
}
