#pragma once

// Episodic environments. Synthetic environments run on an internal tick
// clock; one agent step repeats the chosen action for `frame_skip` ticks and
// sums the rewards. Every synthetic environment draws itself on a full
// 210x160 canvas and also exposes its exact tabular state for oracle tests.

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "linrl/error.hpp"
#include "linrl/features.hpp"
#include "linrl/random.hpp"

namespace linrl {

struct EnvConfig {
  int frame_skip = 5;
  int max_steps = 10000;
  std::uint64_t seed = 0;
};

inline void validate(const EnvConfig& c) {
  if (c.frame_skip < 1) throw UsageError("frame_skip must be >= 1");
  if (c.max_steps < 1) throw UsageError("max_steps must be >= 1");
}

struct Observation {
  Screen screen;
  int legal_actions = kNumActions;
};

/// Reward and termination of one agent step, without the rendered screen.
struct Transition {
  double reward = 0.0;
  bool terminal = false;
  /// The step limit, not the dynamics, ended the episode.
  bool truncated = false;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool terminal = false;
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual int num_actions() const = 0;
  virtual int screen_width() const { return kScreenWidth; }
  virtual int screen_height() const { return kScreenHeight; }

  /// Puts the environment in its initial state. Deterministic given seed.
  virtual void restart(std::uint64_t seed) = 0;
  /// One agent step. Throws UsageError after a terminal step.
  virtual Transition act(int action) = 0;
  virtual Screen render_screen() const = 0;
  virtual int steps_taken() const = 0;

  /// Exact tabular state, for environments that have one.
  virtual std::optional<std::size_t> tabular_state() const { return std::nullopt; }
  virtual std::size_t num_tabular_states() const { return 0; }

  /// Environment-defined state-action features, for fixtures whose feature
  /// construction is part of the problem definition.
  virtual std::optional<SparseFeatures> native_features(int /*action*/) const { return std::nullopt; }
  virtual std::optional<WeightVector> native_initial_weights() const { return std::nullopt; }

  Observation reset(std::uint64_t seed) {
    restart(seed);
    return {render_screen(), num_actions()};
  }

  StepResult step(int action) {
    const Transition t = act(action);
    return {{render_screen(), num_actions()}, t.reward, t.terminal};
  }
};

// ---------------------------------------------------------------------------
// Drawing helpers

/// Palette colors chosen so the default SECAM map sends them to distinct
/// classes ((c >> 1) & 7).
namespace color {
inline constexpr std::uint8_t backdrop = 0;  // class 0
inline constexpr std::uint8_t agent = 2;     // class 1
inline constexpr std::uint8_t goal = 4;      // class 2
inline constexpr std::uint8_t hazard = 6;    // class 3
inline constexpr std::uint8_t item = 8;      // class 4
inline constexpr std::uint8_t meter = 10;    // class 5
inline constexpr std::uint8_t safe = 12;     // class 6
}  // namespace color

inline constexpr int kBlockH = 15;
inline constexpr int kBlockW = 10;
inline constexpr int kGridRows = kScreenHeight / kBlockH;  // 14
inline constexpr int kGridCols = kScreenWidth / kBlockW;   // 16

/// Fills one encoder block (15x10 pixels) with a color.
inline void fill_block(Screen& s, int block_row, int block_col, std::uint8_t c) {
  if (block_row < 0 || block_row >= kGridRows || block_col < 0 || block_col >= kGridCols)
    throw UsageError("block outside the canvas");
  for (int y = block_row * kBlockH; y < (block_row + 1) * kBlockH; ++y)
    std::fill_n(s.pixels.begin() + static_cast<std::ptrdiff_t>(y) * s.width + block_col * kBlockW, kBlockW, c);
}

// Action decoding shared by the grid worlds, following the Atari joystick
// layout: 2 up, 3 right, 4 left, 5 down, and the same directions with fire
// (10-13). Everything else leaves the agent in place.
struct Move {
  int dx = 0;
  int dy = 0;
};

inline Move decode_move(int action) {
  switch (action) {
    case 2: case 10: return {0, -1};
    case 3: case 11: return {1, 0};
    case 4: case 12: return {-1, 0};
    case 5: case 13: return {0, 1};
    default: return {};
  }
}

namespace action {
inline constexpr int noop = 0;
inline constexpr int fire = 1;
inline constexpr int up = 2;
inline constexpr int right = 3;
inline constexpr int left = 4;
inline constexpr int down = 5;
}  // namespace action

// ---------------------------------------------------------------------------
// Synthetic base

/// Tick-based environment: derived classes define per-tick dynamics and the
/// drawing; this class handles frame skip, the step limit and misuse.
class SyntheticEnvironment : public Environment {
 public:
  explicit SyntheticEnvironment(EnvConfig cfg, int num_actions = kNumActions) : cfg_(cfg), num_actions_(num_actions) {
    validate(cfg_);
    if (num_actions_ < 1) throw UsageError("environment needs at least one action");
  }

  int num_actions() const override { return num_actions_; }
  int steps_taken() const override { return steps_; }
  const EnvConfig& config() const noexcept { return cfg_; }
  bool terminal() const noexcept { return terminal_; }

  void restart(std::uint64_t seed) override {
    rng_.seed(seed);
    steps_ = 0;
    terminal_ = false;
    initialize(rng_);
  }

  Transition act(int action) override {
    if (terminal_) throw UsageError(name() + ": step after terminal; call reset first");
    if (action < 0 || action >= num_actions_)
      throw UsageError(name() + ": action " + std::to_string(action) + " out of range");
    Transition t;
    for (int f = 0; f < cfg_.frame_skip && !t.terminal; ++f) {
      bool done = false;
      t.reward += tick(action, rng_, done);
      t.terminal = done;
    }
    ++steps_;
    if (!t.terminal && steps_ >= cfg_.max_steps) {
      t.terminal = true;
      t.truncated = true;
    }
    terminal_ = t.terminal;
    return t;
  }

  Screen render_screen() const override {
    Screen s = backdrop();
    draw(s);
    return s;
  }

  /// The static part of the picture.
  virtual Screen backdrop() const {
    Screen s(kScreenWidth, kScreenHeight, color::backdrop);
    draw_static(s);
    return s;
  }

 protected:
  virtual void initialize(Rng& rng) = 0;
  /// Advances one tick; sets `terminal` on goal or death.
  virtual double tick(int action, Rng& rng, bool& terminal) = 0;
  virtual void draw_static(Screen&) const {}
  virtual void draw(Screen& s) const = 0;

 private:
  EnvConfig cfg_;
  int num_actions_;
  Rng rng_{0};
  int steps_ = 0;
  bool terminal_ = false;
};

// ---------------------------------------------------------------------------
// Corridor

/// Cells 0..length; start at 0; reaching `length` pays +1 and ends the
/// episode. Right (3) and left (4) move; the remaining actions do nothing.
class Corridor final : public SyntheticEnvironment {
 public:
  explicit Corridor(int length = 10, EnvConfig cfg = {}, int num_actions = kNumActions)
      : SyntheticEnvironment(cfg, num_actions), length_(length) {
    if (length_ < 1 || length_ >= kGridCols * (kGridRows - 7)) throw UsageError("corridor length out of range");
    if (num_actions < 5) throw UsageError("corridor needs the left/right actions");
  }

  std::string name() const override { return "corridor"; }
  int length() const noexcept { return length_; }
  int cell() const noexcept { return cell_; }

  std::optional<std::size_t> tabular_state() const override { return static_cast<std::size_t>(cell_); }
  std::size_t num_tabular_states() const override { return static_cast<std::size_t>(length_) + 1; }

  /// Block holding the agent when it stands in `cell`.
  static std::pair<int, int> block_of(int cell) { return {7 + cell / kGridCols, cell % kGridCols}; }

 protected:
  void initialize(Rng&) override { cell_ = 0; }

  double tick(int action, Rng&, bool& terminal) override {
    const Move m = decode_move(action);
    cell_ = std::clamp(cell_ + m.dx, 0, length_);
    if (cell_ == length_) {
      terminal = true;
      return 1.0;
    }
    return 0.0;
  }

  void draw(Screen& s) const override {
    const auto [r, c] = block_of(cell_);
    fill_block(s, r, c, color::agent);
  }

 private:
  int length_;
  int cell_ = 0;
};

// ---------------------------------------------------------------------------
// CliffWalk

/// Grid of width x height cells, row 0 at the top. Start bottom-left, goal
/// bottom-right, cliff between them on the bottom row. Every tick costs -1;
/// entering the cliff costs -100 and ends the episode.
class CliffWalk final : public SyntheticEnvironment {
 public:
  static constexpr double kStepReward = -1.0;
  static constexpr double kCliffReward = -100.0;

  explicit CliffWalk(int width = 12, int height = 4, EnvConfig cfg = {}, int num_actions = kNumActions)
      : SyntheticEnvironment(cfg, num_actions), width_(width), height_(height) {
    if (width_ < 3 || width_ > kGridCols || height_ < 2 || height_ > kGridRows - 2)
      throw UsageError("cliffwalk dimensions out of range");
    if (num_actions < 6) throw UsageError("cliffwalk needs the four move actions");
  }

  std::string name() const override { return "cliffwalk"; }
  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::pair<int, int> position() const noexcept { return {x_, y_}; }

  bool is_cliff(int x, int y) const { return y == height_ - 1 && x > 0 && x < width_ - 1; }
  bool is_goal(int x, int y) const { return y == height_ - 1 && x == width_ - 1; }

  std::optional<std::size_t> tabular_state() const override {
    return static_cast<std::size_t>(y_) * width_ + x_;
  }
  std::size_t num_tabular_states() const override { return static_cast<std::size_t>(width_) * height_; }

 protected:
  void initialize(Rng&) override {
    x_ = 0;
    y_ = height_ - 1;
  }

  double tick(int action, Rng&, bool& terminal) override {
    const Move m = decode_move(action);
    x_ = std::clamp(x_ + m.dx, 0, width_ - 1);
    y_ = std::clamp(y_ + m.dy, 0, height_ - 1);
    if (is_cliff(x_, y_)) {
      terminal = true;
      return kCliffReward;
    }
    if (is_goal(x_, y_)) terminal = true;
    return kStepReward;
  }

  void draw_static(Screen& s) const override {
    for (int x = 1; x < width_ - 1; ++x) fill_block(s, 1 + height_ - 1, x, color::hazard);
    fill_block(s, 1 + height_ - 1, width_ - 1, color::goal);
  }

  void draw(Screen& s) const override { fill_block(s, 1 + y_, x_, color::agent); }

 private:
  int width_, height_;
  int x_ = 0, y_ = 0;
};

// ---------------------------------------------------------------------------
// AirGrid

/// Diver in a width x height pool (row 0 is the surface). Air drops by one
/// per tick below the surface and refills at the surface, where collected
/// treasures also reappear. Treasures on the bottom row pay +5. Running out
/// of air ends the episode.
class AirGrid final : public SyntheticEnvironment {
 public:
  static constexpr double kItemReward = 5.0;

  explicit AirGrid(int width = 8, int height = 6, int max_air = 16, EnvConfig cfg = {},
                   int num_actions = kNumActions)
      : SyntheticEnvironment(cfg, num_actions), width_(width), height_(height), max_air_(max_air) {
    if (width_ < 3 || width_ > kGridCols || height_ < 3 || height_ > kGridRows - 2 || max_air_ < 1)
      throw UsageError("airgrid dimensions out of range");
    if (num_actions < 6) throw UsageError("airgrid needs the four move actions");
    item_cols_ = {1, width_ - 2};
  }

  std::string name() const override { return "airgrid"; }
  int air() const noexcept { return air_; }
  std::pair<int, int> position() const noexcept { return {x_, y_}; }

  std::optional<std::size_t> tabular_state() const override {
    std::size_t s = static_cast<std::size_t>(collected_);
    s = s * static_cast<std::size_t>(max_air_ + 1) + static_cast<std::size_t>(air_);
    s = s * static_cast<std::size_t>(height_) + static_cast<std::size_t>(y_);
    return s * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x_);
  }
  std::size_t num_tabular_states() const override {
    return (std::size_t{1} << item_cols_.size()) * static_cast<std::size_t>(max_air_ + 1) *
           static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
  }

 protected:
  void initialize(Rng&) override {
    x_ = width_ / 2;
    y_ = 0;
    air_ = max_air_;
    collected_ = 0;
  }

  double tick(int action, Rng&, bool& terminal) override {
    const Move m = decode_move(action);
    x_ = std::clamp(x_ + m.dx, 0, width_ - 1);
    y_ = std::clamp(y_ + m.dy, 0, height_ - 1);
    double reward = 0.0;
    if (y_ == 0) {
      air_ = max_air_;
      collected_ = 0;
      return 0.0;
    }
    --air_;
    if (y_ == height_ - 1) {
      for (std::size_t i = 0; i < item_cols_.size(); ++i) {
        if (item_cols_[i] == x_ && !(collected_ & (1u << i))) {
          collected_ |= 1u << i;
          reward += kItemReward;
        }
      }
    }
    if (air_ <= 0) {
      air_ = 0;
      terminal = true;
    }
    return reward;
  }

  void draw(Screen& s) const override {
    // Air meter along the top block row.
    const int bar = (air_ * kGridCols + max_air_ - 1) / max_air_;
    for (int c = 0; c < bar; ++c) fill_block(s, 0, c, color::meter);
    for (std::size_t i = 0; i < item_cols_.size(); ++i)
      if (!(collected_ & (1u << i))) fill_block(s, 2 + height_ - 1, item_cols_[i], color::item);
    fill_block(s, 2 + y_, x_, color::agent);
  }

 private:
  int width_, height_, max_air_;
  std::vector<int> item_cols_;
  int x_ = 0, y_ = 0, air_ = 0;
  unsigned collected_ = 0;
};

// ---------------------------------------------------------------------------
// DelayedDeath

/// A row of `width` cells; the agent starts in the left column and the safe
/// column is the rightmost one. Nothing pays until the agent reaches safety
/// (+1, episode ends). After `death_tick` ticks elsewhere the agent dies with
/// nothing.
class DelayedDeath final : public SyntheticEnvironment {
 public:
  explicit DelayedDeath(int width = 8, int death_tick = 120, EnvConfig cfg = {}, int num_actions = kNumActions)
      : SyntheticEnvironment(cfg, num_actions), width_(width), death_tick_(death_tick) {
    if (width_ < 2 || width_ > kGridCols || death_tick_ < 1) throw UsageError("delayeddeath parameters out of range");
    if (num_actions < 5) throw UsageError("delayeddeath needs the left/right actions");
  }

  std::string name() const override { return "delayeddeath"; }
  int column() const noexcept { return x_; }
  int timer() const noexcept { return timer_; }

  std::optional<std::size_t> tabular_state() const override {
    return static_cast<std::size_t>(timer_) * width_ + x_;
  }
  std::size_t num_tabular_states() const override {
    return static_cast<std::size_t>(death_tick_ + 1) * width_;
  }

 protected:
  void initialize(Rng&) override {
    x_ = 0;
    timer_ = 0;
  }

  double tick(int action, Rng&, bool& terminal) override {
    const Move m = decode_move(action);
    x_ = std::clamp(x_ + m.dx, 0, width_ - 1);
    ++timer_;
    if (x_ == width_ - 1) {
      terminal = true;
      return 1.0;
    }
    if (timer_ >= death_tick_) terminal = true;
    return 0.0;
  }

  void draw_static(Screen& s) const override { fill_block(s, 7, width_ - 1, color::safe); }

  void draw(Screen& s) const override {
    fill_block(s, 7, x_, color::agent);
    // Countdown bar: one block per elapsed eighth of the deadline.
    const int elapsed = timer_ * 8 / death_tick_;
    for (int c = 0; c < elapsed; ++c) fill_block(s, 0, c, color::hazard);
  }

 private:
  int width_, death_tick_;
  int x_ = 0, timer_ = 0;
};

// ---------------------------------------------------------------------------
// BairdStar

/// Seven-state star problem for off-policy divergence. Actions 0-5 are the
/// "dashed" action (jump to one of states 0-5 uniformly), action 6 the
/// "solid" one (go to state 6). All rewards are zero and episodes only end
/// at the step limit.
///
/// Native features per action class c (0 dashed, 1 solid), at offset 8c:
///   state i < 6: 2 at i, 1 at 7
///   state 6:     1 at 6, 2 at 7
/// with initial weights (1,1,1,1,1,1,10,1) for both classes. Uniform
/// behavior over the seven actions takes the solid action 1/7 of the time.
class BairdStar final : public SyntheticEnvironment {
 public:
  static constexpr int kStates = 7;
  static constexpr int kActions = 7;
  static constexpr int kFeaturesPerClass = 8;

  explicit BairdStar(EnvConfig cfg = {}) : SyntheticEnvironment(cfg, kActions) {}

  std::string name() const override { return "bairdstar"; }
  int state() const noexcept { return state_; }

  std::optional<std::size_t> tabular_state() const override { return static_cast<std::size_t>(state_); }
  std::size_t num_tabular_states() const override { return kStates; }

  static SparseFeatures features(int state, int action) {
    const std::uint32_t off = action == kActions - 1 ? kFeaturesPerClass : 0;
    if (state < kStates - 1)
      return SparseFeatures(2 * kFeaturesPerClass, {off + static_cast<std::uint32_t>(state), off + 7}, {2.0, 1.0});
    return SparseFeatures(2 * kFeaturesPerClass, {off + 6, off + 7}, {1.0, 2.0});
  }

  std::optional<SparseFeatures> native_features(int action) const override { return features(state_, action); }

  std::optional<WeightVector> native_initial_weights() const override {
    std::vector<double> w(2 * kFeaturesPerClass, 1.0);
    w[6] = 10.0;
    w[kFeaturesPerClass + 6] = 10.0;
    return WeightVector(std::move(w));
  }

 protected:
  void initialize(Rng& rng) override { state_ = static_cast<int>(uniform_index(rng, kStates)); }

  double tick(int action, Rng& rng, bool&) override {
    state_ = action == kActions - 1 ? kStates - 1 : static_cast<int>(uniform_index(rng, kStates - 1));
    return 0.0;
  }

  void draw(Screen& s) const override {
    // Outer states around the hub at block (7, 8).
    static constexpr int pos[kStates][2] = {{4, 8}, {5, 11}, {9, 11}, {10, 8}, {9, 5}, {5, 5}, {7, 8}};
    fill_block(s, pos[state_][0], pos[state_][1], color::agent);
  }

 private:
  int state_ = 0;
};

// ---------------------------------------------------------------------------
// RewardCycle

/// Deterministic cycle of `length` states under its only action; leaving the
/// last state pays +1. Average reward per step is 1/length.
class RewardCycle final : public SyntheticEnvironment {
 public:
  explicit RewardCycle(int length = 5, EnvConfig cfg = {}) : SyntheticEnvironment(cfg, 1), length_(length) {
    if (length_ < 1 || length_ > kGridCols) throw UsageError("cycle length out of range");
  }

  std::string name() const override { return "cycle"; }
  int state() const noexcept { return state_; }

  std::optional<std::size_t> tabular_state() const override { return static_cast<std::size_t>(state_); }
  std::size_t num_tabular_states() const override { return static_cast<std::size_t>(length_); }

 protected:
  void initialize(Rng&) override { state_ = 0; }

  double tick(int, Rng&, bool&) override {
    const double r = state_ == length_ - 1 ? 1.0 : 0.0;
    state_ = (state_ + 1) % length_;
    return r;
  }

  void draw(Screen& s) const override { fill_block(s, 7, state_, color::agent); }

 private:
  int length_;
  int state_ = 0;
};

// ---------------------------------------------------------------------------
// Registry

inline constexpr std::string_view kEnvironmentNames[] = {"corridor",     "cliffwalk", "airgrid",
                                                         "delayeddeath", "bairdstar", "cycle"};

namespace detail {
inline std::vector<int> parse_env_params(std::string_view text, const std::string& spec) {
  std::vector<int> out;
  std::string cur;
  auto flush = [&] {
    if (cur.empty()) throw UsageError("bad environment parameters in '" + spec + "'");
    try {
      out.push_back(std::stoi(cur));
    } catch (const std::exception&) {
      throw UsageError("bad environment parameters in '" + spec + "'");
    }
    cur.clear();
  };
  for (char ch : text) {
    if (ch == 'x' || ch == ',') {
      flush();
    } else {
      cur.push_back(ch);
    }
  }
  flush();
  return out;
}
}  // namespace detail

/// Builds a synthetic environment from "name" or "name:p1xp2...", e.g.
/// "corridor:10", "cliffwalk:12x4", "airgrid:8x6x16", "delayeddeath:8x120",
/// "cycle:5".
inline std::unique_ptr<SyntheticEnvironment> make_synthetic(const std::string& spec, const EnvConfig& cfg) {
  const auto colon = spec.find(':');
  const std::string name = spec.substr(0, colon);
  const std::vector<int> p =
      colon == std::string::npos ? std::vector<int>{} : detail::parse_env_params(std::string_view(spec).substr(colon + 1), spec);
  auto arg = [&](std::size_t i, int dflt) { return i < p.size() ? p[i] : dflt; };
  auto max_params = [&](std::size_t n) {
    if (p.size() > n) throw UsageError("too many parameters for environment '" + name + "'");
  };
  if (name == "corridor") {
    max_params(1);
    return std::make_unique<Corridor>(arg(0, 10), cfg);
  }
  if (name == "cliffwalk") {
    max_params(2);
    return std::make_unique<CliffWalk>(arg(0, 12), arg(1, 4), cfg);
  }
  if (name == "airgrid") {
    max_params(3);
    return std::make_unique<AirGrid>(arg(0, 8), arg(1, 6), arg(2, 16), cfg);
  }
  if (name == "delayeddeath") {
    max_params(2);
    return std::make_unique<DelayedDeath>(arg(0, 8), arg(1, 120), cfg);
  }
  if (name == "bairdstar") {
    max_params(0);
    return std::make_unique<BairdStar>(cfg);
  }
  if (name == "cycle") {
    max_params(1);
    return std::make_unique<RewardCycle>(arg(0, 5), cfg);
  }
  std::string valid;
  for (auto n : kEnvironmentNames) valid += (valid.empty() ? "" : ", ") + std::string(n);
  throw UsageError("unknown environment '" + name + "' (valid: " + valid + ", external:<command>)");
}

}  // namespace linrl
