#include <algorithm>
#include <array>

#include "qtransfer/envs.hpp"

namespace qtransfer {
namespace {

constexpr int kRows = 6;
constexpr int kCols = 10;
constexpr int kBrickW = 7;
constexpr int kBrickH = 3;
constexpr int kWallTop = 12;
constexpr int kPaddleW = 12;
constexpr int kPaddleY = 78;
constexpr int kPaddleSpeed = 3;
constexpr int kBall = 2;
constexpr int kLives = 3;

constexpr Color kWallColor{142, 142, 142};
constexpr Color kPaddleColor{200, 72, 72};
constexpr Color kBallColor{236, 236, 236};
constexpr std::array<Color, kRows> kRowColors{{{200, 72, 72},
                                               {198, 108, 58},
                                               {180, 122, 48},
                                               {162, 162, 42},
                                               {72, 160, 72},
                                               {66, 72, 200}}};

int row_value(int row) {
  if (row < 2) return 7;
  if (row < 4) return 4;
  return 1;
}

enum Action { kNoop = 0, kFire = 1, kLeft = 2, kRight = 3 };

class Brick final : public Environment {
 public:
  explicit Brick(EnvOptions options)
      : Environment({"brick", 4, options.max_episode_steps}) {}

  int max_episode_reward() const override {
    int total = 0;
    for (int r = 0; r < kRows; ++r) total += row_value(r) * kCols;
    return total;
  }

  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<Brick>(*this);
  }

 protected:
  void on_reset() override {
    for (auto& row : bricks_) row.fill(true);
    remaining_ = kRows * kCols;
    lives_ = kLives;
    paddle_x_ = random_int(2, kFrameSize - 2 - kPaddleW);
    hold_ball();
  }

  int on_tick(int action) override {
    if (action == kLeft) paddle_x_ -= kPaddleSpeed;
    if (action == kRight) paddle_x_ += kPaddleSpeed;
    paddle_x_ = std::clamp(paddle_x_, 2, kFrameSize - 2 - kPaddleW);

    if (held_) {
      ball_x_ = paddle_x_ + kPaddleW / 2 - 1;
      if (action == kFire) {
        held_ = false;
        vx_ = chance(2) ? 1 : -1;
        vy_ = -2;
      }
      return 0;
    }

    int reward = 0;
    ball_x_ += vx_;
    if (ball_x_ < 2) {
      ball_x_ = 2;
      vx_ = -vx_;
    } else if (ball_x_ + kBall > kFrameSize - 2) {
      ball_x_ = kFrameSize - 2 - kBall;
      vx_ = -vx_;
    }
    if (int v = hit_brick(); v > 0) {
      reward += v;
      vx_ = -vx_;
    }
    ball_y_ += vy_;
    if (ball_y_ < 2) {
      ball_y_ = 2;
      vy_ = -vy_;
    }
    if (int v = hit_brick(); v > 0) {
      reward += v;
      vy_ = -vy_;
    }

    if (vy_ > 0 && ball_y_ + kBall >= kPaddleY && ball_y_ < kPaddleY + 2 &&
        ball_x_ + kBall > paddle_x_ && ball_x_ < paddle_x_ + kPaddleW) {
      const int offset = (ball_x_ + 1) - (paddle_x_ + kPaddleW / 2);
      vx_ = offset < -3 ? -2 : offset < 0 ? -1 : offset < 3 ? 1 : 2;
      vy_ = -2;
      ball_y_ = kPaddleY - kBall;
    }
    if (ball_y_ >= kFrameSize) {
      --lives_;
      hold_ball();
    }
    return reward;
  }

  bool terminal() const override { return lives_ <= 0 || remaining_ == 0; }

  void draw(Frame& f) const override {
    f.clear();
    f.fill_rect(0, 0, kFrameSize, 2, kWallColor);
    f.fill_rect(0, 0, 2, kFrameSize, kWallColor);
    f.fill_rect(kFrameSize - 2, 0, 2, kFrameSize, kWallColor);
    for (int r = 0; r < kRows; ++r) {
      for (int c = 0; c < kCols; ++c) {
        if (bricks_[r][c]) {
          f.fill_rect(brick_x(c), brick_y(r), kBrickW, kBrickH, kRowColors[r]);
        }
      }
    }
    // Remaining lives as ticks in the top-left corner of the wall.
    for (int i = 0; i < lives_; ++i) {
      f.fill_rect(4 + 4 * i, 5, 2, 3, kBallColor);
    }
    f.fill_rect(paddle_x_, kPaddleY, kPaddleW, 2, kPaddleColor);
    if (lives_ > 0) f.fill_rect(ball_x_, ball_y_, kBall, kBall, kBallColor);
  }

 private:
  static int brick_x(int col) { return 2 + col * (kBrickW + 1); }
  static int brick_y(int row) { return kWallTop + row * (kBrickH + 1); }

  void hold_ball() {
    held_ = true;
    vx_ = 0;
    vy_ = 0;
    ball_x_ = paddle_x_ + kPaddleW / 2 - 1;
    ball_y_ = kPaddleY - kBall;
  }

  // Removes the first brick overlapping the ball and returns its value.
  int hit_brick() {
    for (int r = 0; r < kRows; ++r) {
      const int y = brick_y(r);
      if (ball_y_ + kBall <= y || ball_y_ >= y + kBrickH) continue;
      for (int c = 0; c < kCols; ++c) {
        if (!bricks_[r][c]) continue;
        const int x = brick_x(c);
        if (ball_x_ + kBall <= x || ball_x_ >= x + kBrickW) continue;
        bricks_[r][c] = false;
        --remaining_;
        return row_value(r);
      }
    }
    return 0;
  }

  std::array<std::array<bool, kCols>, kRows> bricks_{};
  int remaining_ = 0;
  int lives_ = kLives;
  int paddle_x_ = 0;
  int ball_x_ = 0, ball_y_ = 0, vx_ = 0, vy_ = 0;
  bool held_ = true;
};

}  // namespace

std::unique_ptr<Environment> make_brick(EnvOptions options) {
  return std::make_unique<Brick>(options);
}

}  // namespace qtransfer
