#include <algorithm>
#include <array>
#include <vector>

#include "qtransfer/envs.hpp"

namespace qtransfer {
namespace {

constexpr int kCannonW = 7;
constexpr int kCannonH = 4;
constexpr int kCannonFloor = 76;
constexpr int kCannonSpeed = 2;
constexpr int kFireCooldown = 6;
constexpr int kShotH = 3;
constexpr int kBulletSpeed = 4;
constexpr int kBombSpeed = 2;
constexpr int kAlienW = 6;
constexpr int kAlienH = 4;
constexpr int kAlienPitchX = 10;
constexpr int kAlienPitchY = 8;

constexpr Color kCannonColor{60, 200, 60};
constexpr Color kAlienColor{200, 120, 220};
constexpr Color kBulletColor{240, 240, 80};
constexpr Color kBombColor{230, 60, 60};
constexpr Color kGroundColor{110, 90, 60};

// Action indices shared by every shooter. shooter7 appends kUp.
enum Action {
  kNoop = 0,
  kFire = 1,
  kLeft = 2,
  kRight = 3,
  kLeftFire = 4,
  kRightFire = 5,
  kUp = 6
};

bool fires(int a) { return a == kFire || a == kLeftFire || a == kRightFire; }
int horizontal(int a) {
  if (a == kLeft || a == kLeftFire) return -1;
  if (a == kRight || a == kRightFire) return 1;
  return 0;
}

struct Point {
  int x, y;
};

bool overlaps(int ax, int ay, int aw, int ah, int bx, int by, int bw, int bh) {
  return ax < bx + bw && bx < ax + aw && ay < by + bh && by < ay + ah;
}

// Cannon, player bullets and enemy bombs; the parts every shooter shares.
class ShooterBase : public Environment {
 public:
  using Environment::Environment;

 protected:
  void reset_player() {
    cannon_x_ = random_int(4, kFrameSize - 4 - kCannonW);
    cannon_y_ = kCannonFloor;
    cooldown_ = 0;
    bullets_.clear();
    bombs_.clear();
    hit_ = false;
  }

  void move_cannon(int action) {
    cannon_x_ += kCannonSpeed * horizontal(action);
    cannon_x_ = std::clamp(cannon_x_, 2, kFrameSize - 2 - kCannonW);
    if (cooldown_ > 0) --cooldown_;
    if (fires(action) && cooldown_ == 0) {
      bullets_.push_back({cannon_x_ + kCannonW / 2, cannon_y_ - kShotH});
      cooldown_ = kFireCooldown;
    }
  }

  // Moves bullets; `hit` is called for each bullet position and returns the
  // reward when the bullet struck something (which removes the bullet).
  template <typename HitFn>
  int advance_bullets(HitFn&& hit) {
    int reward = 0;
    std::vector<Point> kept;
    for (Point b : bullets_) {
      b.y -= kBulletSpeed;
      if (b.y + kShotH <= 0) continue;
      if (int r = hit(b); r > 0) {
        reward += r;
        continue;
      }
      kept.push_back(b);
    }
    bullets_ = std::move(kept);
    return reward;
  }

  void advance_bombs() {
    std::vector<Point> kept;
    for (Point b : bombs_) {
      b.y += kBombSpeed;
      if (b.y >= kFrameSize) continue;
      if (overlaps(b.x, b.y, 1, kShotH, cannon_x_, cannon_y_, kCannonW,
                   kCannonH)) {
        hit_ = true;
        continue;
      }
      kept.push_back(b);
    }
    bombs_ = std::move(kept);
  }

  bool touches_cannon(int x, int y, int w, int h) const {
    return overlaps(x, y, w, h, cannon_x_, cannon_y_, kCannonW, kCannonH);
  }

  void draw_player(Frame& f) const {
    f.fill_rect(0, kCannonFloor + kCannonH, kFrameSize, 2, kGroundColor);
    f.fill_rect(cannon_x_, cannon_y_ + 1, kCannonW, kCannonH - 1, kCannonColor);
    f.fill_rect(cannon_x_ + kCannonW / 2 - 1, cannon_y_, 3, 1, kCannonColor);
    for (const Point& b : bullets_) f.fill_rect(b.x, b.y, 1, kShotH, kBulletColor);
    for (const Point& b : bombs_) f.fill_rect(b.x, b.y, 1, kShotH, kBombColor);
  }

  int cannon_x_ = 0;
  int cannon_y_ = kCannonFloor;
  int cooldown_ = 0;
  std::vector<Point> bullets_;
  std::vector<Point> bombs_;
  bool hit_ = false;
};

// Sideways-sweeping alien block shared by shooter6 and its holdout variant.
template <int Rows, int Cols>
struct Formation {
  std::array<std::array<bool, Cols>, Rows> alive{};
  int x = 0, y = 0, dir = 1;
  int count = Rows * Cols;

  static constexpr int width() { return (Cols - 1) * kAlienPitchX + kAlienW; }
  int alien_x(int c) const { return x + c * kAlienPitchX; }
  int alien_y(int r) const { return y + r * kAlienPitchY; }

  void reset(int origin_x, int origin_y, int direction) {
    for (auto& row : alive) row.fill(true);
    count = Rows * Cols;
    x = origin_x;
    y = origin_y;
    dir = direction;
  }

  // Returns true when the block bounced off a side wall.
  bool sweep() {
    int lo = Cols, hi = -1;
    for (int r = 0; r < Rows; ++r) {
      for (int c = 0; c < Cols; ++c) {
        if (alive[r][c]) {
          lo = std::min(lo, c);
          hi = std::max(hi, c);
        }
      }
    }
    if (hi < 0) return false;
    x += dir;
    if (alien_x(lo) < 2 || alien_x(hi) + kAlienW > kFrameSize - 2) {
      x -= dir;
      dir = -dir;
      return true;
    }
    return false;
  }

  // Kills the alien under the bullet, if any.
  bool hit(Point b) {
    for (int r = 0; r < Rows; ++r) {
      for (int c = 0; c < Cols; ++c) {
        if (alive[r][c] && overlaps(b.x, b.y, 1, kShotH, alien_x(c), alien_y(r),
                                    kAlienW, kAlienH)) {
          alive[r][c] = false;
          --count;
          return true;
        }
      }
    }
    return false;
  }

  // Bottom-most living alien of a random non-empty column.
  template <typename Pick>
  bool bomber(Pick&& pick, int& bx, int& by) const {
    std::vector<int> cols;
    for (int c = 0; c < Cols; ++c) {
      for (int r = 0; r < Rows; ++r) {
        if (alive[r][c]) {
          cols.push_back(c);
          break;
        }
      }
    }
    if (cols.empty()) return false;
    const int c = cols[pick(static_cast<int>(cols.size()))];
    for (int r = Rows - 1; r >= 0; --r) {
      if (alive[r][c]) {
        bx = alien_x(c) + kAlienW / 2;
        by = alien_y(r) + kAlienH;
        return true;
      }
    }
    return false;
  }

  int lowest_edge() const {
    for (int r = Rows - 1; r >= 0; --r) {
      for (int c = 0; c < Cols; ++c) {
        if (alive[r][c]) return alien_y(r) + kAlienH;
      }
    }
    return 0;
  }

  void draw(Frame& f) const {
    for (int r = 0; r < Rows; ++r) {
      for (int c = 0; c < Cols; ++c) {
        if (!alive[r][c]) continue;
        f.fill_rect(alien_x(c) + 1, alien_y(r), kAlienW - 2, 1, kAlienColor);
        f.fill_rect(alien_x(c), alien_y(r) + 1, kAlienW, 2, kAlienColor);
        f.fill_rect(alien_x(c), alien_y(r) + 3, 2, 1, kAlienColor);
        f.fill_rect(alien_x(c) + kAlienW - 2, alien_y(r) + 3, 2, 1, kAlienColor);
      }
    }
  }
};

class Shooter6 final : public ShooterBase {
 public:
  static constexpr int kRows = 3;
  static constexpr int kCols = 6;
  static constexpr int kLandLine = 72;
  static constexpr int kBombOdds = 24;

  explicit Shooter6(EnvOptions options)
      : ShooterBase({"shooter6", 6, options.max_episode_steps}) {}

  int max_episode_reward() const override { return 10 * kRows * kCols; }
  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<Shooter6>(*this);
  }

 protected:
  void on_reset() override {
    reset_player();
    grid_.reset(random_int(2, kFrameSize - 2 - grid_.width()), 8,
                chance(2) ? 1 : -1);
    landed_ = false;
    ticks_ = 0;
  }

  int on_tick(int action) override {
    ++ticks_;
    move_cannon(action);
    const int reward =
        advance_bullets([&](Point b) { return grid_.hit(b) ? 10 : 0; });
    if (ticks_ % 2 == 0 && grid_.sweep()) grid_.y += 2;
    int bx, by;
    if (chance(kBombOdds) &&
        grid_.bomber([&](int n) { return random_int(0, n - 1); }, bx, by)) {
      bombs_.push_back({bx, by});
    }
    advance_bombs();
    if (grid_.count > 0 && grid_.lowest_edge() >= kLandLine) landed_ = true;
    return reward;
  }

  bool terminal() const override {
    return hit_ || landed_ || grid_.count == 0;
  }

  void draw(Frame& f) const override {
    f.clear();
    grid_.draw(f);
    draw_player(f);
  }

 private:
  Formation<kRows, kCols> grid_;
  bool landed_ = false;
  int ticks_ = 0;
};

class Shooter7 final : public ShooterBase {
 public:
  static constexpr int kSlots = 4;
  static constexpr int kRespawn = 12;
  static constexpr int kBombOdds = 40;
  static constexpr int kCeiling = 64;

  explicit Shooter7(EnvOptions options)
      : ShooterBase({"shooter7", 7, options.max_episode_steps}) {}

  int max_episode_reward() const override {
    // A slot can score at most once per respawn delay after its first kill.
    return 21 * kSlots * (1 + spec().max_episode_steps / kRespawn);
  }
  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<Shooter7>(*this);
  }

 protected:
  void on_reset() override {
    reset_player();
    for (int i = 0; i < kSlots; ++i) spawn(i);
  }

  int on_tick(int action) override {
    move_cannon(action);
    if (action == kUp) {
      cannon_y_ = std::max(kCeiling, cannon_y_ - 2);
    } else if (cannon_y_ < kCannonFloor) {
      ++cannon_y_;
    }

    const int reward = advance_bullets([&](Point b) {
      for (auto& e : enemies_) {
        if (e.alive && overlaps(b.x, b.y, 1, kShotH, e.x, e.y, kAlienW, kAlienH)) {
          e.alive = false;
          e.timer = kRespawn;
          return 21;
        }
      }
      return 0;
    });

    for (int i = 0; i < kSlots; ++i) {
      Enemy& e = enemies_[i];
      if (!e.alive) {
        if (--e.timer <= 0) spawn(i);
        continue;
      }
      e.x += e.vx;
      if (e.x < 2 || e.x + kAlienW > kFrameSize - 2) {
        e.vx = -e.vx;
        e.x += 2 * e.vx;
      }
      if (chance(kBombOdds)) bombs_.push_back({e.x + kAlienW / 2, e.y + kAlienH});
    }
    advance_bombs();
    return reward;
  }

  bool terminal() const override { return hit_; }

  void draw(Frame& f) const override {
    f.clear();
    for (const auto& e : enemies_) {
      if (!e.alive) continue;
      f.fill_rect(e.x, e.y + 1, kAlienW, 2, kAlienColor);
      f.fill_rect(e.x + 2, e.y, 2, kAlienH, kAlienColor);
    }
    draw_player(f);
  }

 private:
  struct Enemy {
    int x = 0, y = 0, vx = 1, timer = 0;
    bool alive = false;
  };

  void spawn(int slot) {
    Enemy& e = enemies_[slot];
    e.alive = true;
    e.x = random_int(2, kFrameSize - 2 - kAlienW);
    e.y = 10 + 10 * slot;
    e.vx = chance(2) ? 1 : -1;
    e.timer = 0;
  }

  std::array<Enemy, kSlots> enemies_{};
};

class Shooter6Holdout final : public ShooterBase {
 public:
  static constexpr int kRows = 2;
  static constexpr int kCols = 6;
  static constexpr int kBombOdds = 40;

  explicit Shooter6Holdout(EnvOptions options)
      : ShooterBase({"shooter6_holdout", 6, options.max_episode_steps}) {}

  int max_episode_reward() const override { return 10 * kRows * kCols; }
  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<Shooter6Holdout>(*this);
  }

 protected:
  void on_reset() override {
    reset_player();
    grid_.reset(random_int(2, kFrameSize - 2 - grid_.width()), 10,
                chance(2) ? 1 : -1);
    diver_.active = false;
    dive_timer_ = random_int(24, 48);
    ticks_ = 0;
  }

  int on_tick(int action) override {
    ++ticks_;
    move_cannon(action);
    const int reward = advance_bullets([&](Point b) {
      if (diver_.active &&
          overlaps(b.x, b.y, 1, kShotH, diver_.x, diver_.y, kAlienW, kAlienH)) {
        diver_.active = false;
        --grid_.count;
        return 10;
      }
      return grid_.hit(b) ? 10 : 0;
    });

    if (ticks_ % 2 == 0) grid_.sweep();
    if (diver_.active) {
      diver_.y += 2;
      const int target = cannon_x_ + kCannonW / 2 - kAlienW / 2;
      diver_.x += (target > diver_.x) - (target < diver_.x);
      if (touches_cannon(diver_.x, diver_.y, kAlienW, kAlienH)) hit_ = true;
      if (diver_.y >= kFrameSize) {
        // Back into its formation slot.
        grid_.alive[diver_.row][diver_.col] = true;
        diver_.active = false;
      }
    } else if (--dive_timer_ <= 0) {
      launch_diver();
      dive_timer_ = random_int(24, 48);
    }

    int bx, by;
    if (chance(kBombOdds) &&
        grid_.bomber([&](int n) { return random_int(0, n - 1); }, bx, by)) {
      bombs_.push_back({bx, by});
    }
    advance_bombs();
    return reward;
  }

  bool terminal() const override { return hit_ || grid_.count == 0; }

  void draw(Frame& f) const override {
    f.clear();
    grid_.draw(f);
    if (diver_.active) {
      f.fill_rect(diver_.x, diver_.y, kAlienW, 2, kAlienColor);
      f.fill_rect(diver_.x + 1, diver_.y + 2, kAlienW - 2, 2, kAlienColor);
    }
    draw_player(f);
  }

 private:
  struct Diver {
    bool active = false;
    int x = 0, y = 0, row = 0, col = 0;
  };

  void launch_diver() {
    std::vector<std::pair<int, int>> candidates;
    for (int r = 0; r < kRows; ++r) {
      for (int c = 0; c < kCols; ++c) {
        if (grid_.alive[r][c]) candidates.emplace_back(r, c);
      }
    }
    if (candidates.empty()) return;
    const auto [r, c] =
        candidates[random_int(0, static_cast<int>(candidates.size()) - 1)];
    grid_.alive[r][c] = false;
    diver_ = {true, grid_.alien_x(c), grid_.alien_y(r), r, c};
  }

  Formation<kRows, kCols> grid_;
  Diver diver_;
  int dive_timer_ = 0;
  int ticks_ = 0;
};

}  // namespace

std::unique_ptr<Environment> make_shooter6(EnvOptions options) {
  return std::make_unique<Shooter6>(options);
}

std::unique_ptr<Environment> make_shooter7(EnvOptions options) {
  return std::make_unique<Shooter7>(options);
}

std::unique_ptr<Environment> make_shooter6_holdout(EnvOptions options) {
  return std::make_unique<Shooter6Holdout>(options);
}

}  // namespace qtransfer
