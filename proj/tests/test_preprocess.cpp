#include <doctest.h>

#include "qtransfer/envs.hpp"
#include "qtransfer/errors.hpp"
#include "qtransfer/preprocess.hpp"

using namespace qtransfer;

namespace {

// Pays rewards[t] on tick t and ends after `length` ticks.
class ScriptedEnv : public Environment {
 public:
  ScriptedEnv(std::vector<int> rewards, int length)
      : Environment({"scripted", 2, 1000}), rewards_(std::move(rewards)), length_(length) {}
  int max_episode_reward() const override { return 1000; }
  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<ScriptedEnv>(*this);
  }

 protected:
  void on_reset() override { t_ = 0; }
  int on_tick(int) override {
    const int r = t_ < static_cast<int>(rewards_.size()) ? rewards_[t_] : 0;
    ++t_;
    return r;
  }
  bool terminal() const override { return t_ >= length_; }
  void draw(Frame& f) const override { f.clear({static_cast<std::uint8_t>(t_), 0, 0}); }

 private:
  std::vector<int> rewards_;
  int length_;
  int t_ = 0;
};

Frame solid(Color c) {
  Frame f;
  f.clear(c);
  return f;
}

Tensor plane(float v) { return Tensor({84, 84}, v); }

}  // namespace

TEST_CASE("grayscale reference colours") {
  CHECK(grayscale(solid({0, 0, 0})) == plane(0.0f));
  const auto white = grayscale(solid({255, 255, 255}));
  for (float v : white.values()) CHECK(v == doctest::Approx(1.0).epsilon(1e-6));
  const auto red = grayscale(solid({255, 0, 0}));
  CHECK(red[0] == doctest::Approx(0.299).epsilon(1e-6));
  const auto green = grayscale(solid({0, 255, 0}));
  CHECK(green[100] == doctest::Approx(0.587).epsilon(1e-6));
}

TEST_CASE("resize is the identity at 84x84") {
  Tensor img({84, 84});
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<float>(i % 97) / 97.0f;
  CHECK(resize_area(img) == img);
}

TEST_CASE("resize of a constant image is constant") {
  const auto out = resize_area(Tensor({168, 168}, 0.37f));
  for (float v : out.values()) CHECK(v == doctest::Approx(0.37f).epsilon(1e-6));
  const auto odd = resize_area(Tensor({100, 130}, 0.5f));
  for (float v : odd.values()) CHECK(v == doctest::Approx(0.5f).epsilon(1e-6));
}

TEST_CASE("resize averages each source box") {
  // Pixel-level checkerboard: every 2x2 box holds two 0s and two 1s.
  Tensor fine({168, 168});
  for (std::size_t y = 0; y < 168; ++y)
    for (std::size_t x = 0; x < 168; ++x) fine[y * 168 + x] = static_cast<float>((x + y) % 2);
  const auto halves = resize_area(fine);
  for (float v : halves.values()) CHECK(v == doctest::Approx(0.5));

  // 2x2 blocks line up with the boxes, so each output is one block's value.
  Tensor blocks({168, 168});
  for (std::size_t y = 0; y < 168; ++y)
    for (std::size_t x = 0; x < 168; ++x)
      blocks[y * 168 + x] = static_cast<float>((x / 2 + y / 2) % 2);
  const auto out = resize_area(blocks);
  for (std::size_t y = 0; y < 84; ++y)
    for (std::size_t x = 0; x < 84; ++x) CHECK(out[y * 84 + x] == static_cast<float>((x + y) % 2));

  // Fractional boxes: 3 -> 2 columns weights the middle pixel half and half.
  Tensor row({1, 3}, std::vector<float>{0.0f, 1.0f, 4.0f});
  const auto r = resize_area(row, 1, 2);
  CHECK(r[0] == doctest::Approx((0.0 + 0.5 * 1.0) / 1.5));
  CHECK(r[1] == doctest::Approx((0.5 * 1.0 + 4.0) / 1.5));
}

TEST_CASE("grayscale and resize commute on constant images") {
  const Color c{90, 30, 200};
  const float g = grayscale(solid(c))[0];
  const auto resized = resize_area(Tensor({84, 84}, g), 42, 42);
  for (float v : resized.values()) CHECK(v == doctest::Approx(g).epsilon(1e-6));
}

TEST_CASE("skip_step sums rewards over the repeated action") {
  ScriptedEnv env({0, 10, 0, 0, 3}, 100);
  env.reset(0);
  const auto r = skip_step(env, 1, 4);
  CHECK(r.reward == 10.0f);
  CHECK(r.ticks == 4);
  CHECK_FALSE(r.done);
  CHECK(r.frame == env.render());
}

TEST_CASE("skip_step stops when the episode ends") {
  ScriptedEnv env({1, 1, 1, 1}, 2);
  env.reset(0);
  const auto r = skip_step(env, 0, 4);
  CHECK(r.done);
  CHECK(r.ticks == 2);
  CHECK(r.reward == 2.0f);
}

TEST_CASE("skip_step with k=1 is a plain step") {
  auto a = make_env("shooter6"), b = make_env("shooter6");
  a->reset(3);
  b->reset(3);
  for (int i = 0; i < 50 && !a->done(); ++i) {
    const auto s = a->step(i % 6);
    const auto k = skip_step(*b, i % 6, 1);
    CHECK(s.frame == k.frame);
    CHECK(s.reward == k.reward);
    CHECK(s.done == k.done);
  }
}

TEST_CASE("skip_step reward equals the per-tick replay") {
  auto a = make_env("shooter7"), b = make_env("shooter7");
  a->reset(12);
  b->reset(12);
  Rng rng(4);
  while (!a->done()) {
    const int action = static_cast<int>(uniform_index(rng, 7));
    const auto k = skip_step(*a, action, 4);
    float sum = 0.0f;
    for (int i = 0; i < k.ticks; ++i) sum += b->step(action).reward;
    CHECK(k.reward == sum);
    CHECK(b->done() == k.done);
  }
}

TEST_CASE("frame stack fill and push order") {
  FrameStack stack;
  stack.reset(plane(0.1f));
  const auto& s = stack.state();
  CHECK(s.shape() == Shape{4, 84, 84});
  for (std::size_t p = 0; p < 4; ++p) CHECK(s[p * 84 * 84 + 7] == 0.1f);
  for (int i = 1; i <= 4; ++i) stack.push(plane(0.2f * i));
  for (std::size_t p = 0; p < 4; ++p) CHECK(stack.state()[p * 84 * 84] == 0.2f * (p + 1));
  for (float v : stack.state().values()) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  CHECK_THROWS_AS(stack.push(Tensor({42, 42})), ConfigError);
}

TEST_CASE("difference planes") {
  SUBCASE("static scene") {
    FrameStack stack;
    stack.reset(plane(0.6f));
    const auto d = difference(stack.state());
    for (std::size_t i = 0; i < 84 * 84; ++i) CHECK(d[i] == 0.6f);
    for (std::size_t i = 84 * 84; i < d.size(); ++i) CHECK(d[i] == 0.0f);
  }
  SUBCASE("object moving one pixel right") {
    Tensor before = plane(0.0f), after = plane(0.0f);
    before[10 * 84 + 20] = 1.0f;
    after[10 * 84 + 21] = 1.0f;
    FrameStack stack;
    stack.reset(before);
    stack.push(after);
    const auto d = difference(stack.state());
    const std::size_t last = 3 * 84 * 84;
    CHECK(d[last + 10 * 84 + 20] == -1.0f);
    CHECK(d[last + 10 * 84 + 21] == 1.0f);
    float others = 0.0f;
    for (std::size_t i = last; i < d.size(); ++i) others += std::abs(d[i]);
    CHECK(others == 2.0f);
  }
  SUBCASE("disabled config leaves the stack alone") {
    FrameStack stack;
    stack.reset(plane(0.3f));
    stack.push(plane(0.9f));
    CHECK(network_input(stack.state(), {4, false}) == stack.state());
    const auto d = network_input(stack.state(), {4, true});
    CHECK(d == difference(stack.state()));
    for (float v : d.values()) {
      CHECK(v >= -1.0f);
      CHECK(v <= 1.0f);
    }
  }
}

TEST_CASE("network_input differences every item of a batch") {
  Tensor batch({2, 4, 84, 84});
  for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = static_cast<float>(i % 5) / 5.0f;
  const auto d = network_input(batch, {4, true});
  Tensor second({4, 84, 84});
  std::copy_n(batch.data() + second.size(), second.size(), second.data());
  const auto ref = difference(second);
  CHECK(std::equal(ref.values().begin(), ref.values().end(), d.data() + second.size()));
}

TEST_CASE("preprocess config validation") {
  CHECK_NOTHROW(PreprocessConfig{}.validate());
  CHECK_THROWS_AS((PreprocessConfig{0, false}.validate()), ConfigError);
}

TEST_CASE("full pipeline output is a unit-range 84x84 plane") {
  auto env = make_env("brick");
  const auto p = preprocess_frame(env->reset(1));
  CHECK(p.shape() == Shape{84, 84});
  for (float v : p.values()) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}
