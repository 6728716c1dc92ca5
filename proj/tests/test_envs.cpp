#include <gtest/gtest.h>

#include <deque>
#include <map>

#include "linrl/envs.hpp"
#include "linrl/features.hpp"
#include "linrl/harness.hpp"

using namespace linrl;

namespace {

EnvConfig unit_skip(int max_steps = 10000) {
  EnvConfig c;
  c.frame_skip = 1;
  c.max_steps = max_steps;
  return c;
}

/// Pays +1 per tick while action 1 (fire) is held.
class FireCounter final : public SyntheticEnvironment {
 public:
  explicit FireCounter(EnvConfig cfg) : SyntheticEnvironment(cfg, 2) {}
  std::string name() const override { return "firecounter"; }

 protected:
  void initialize(Rng&) override {}
  double tick(int a, Rng&, bool&) override { return a == action::fire ? 1.0 : 0.0; }
  void draw(Screen&) const override {}
};

/// Set of blocks (row, col) where two screens differ.
std::set<std::pair<int, int>> differing_blocks(const Screen& a, const Screen& b) {
  std::set<std::pair<int, int>> out;
  for (int r = 0; r < a.height; ++r)
    for (int c = 0; c < a.width; ++c)
      if (a.at(r, c) != b.at(r, c)) out.insert({r / kBlockH, c / kBlockW});
  return out;
}

/// Breadth-first shortest number of moves from start to goal in CliffWalk,
/// never entering the cliff.
int cliff_bfs(int width, int height) {
  std::map<std::pair<int, int>, int> dist;
  std::deque<std::pair<int, int>> frontier{{0, height - 1}};
  dist[{0, height - 1}] = 0;
  const int dx[] = {1, -1, 0, 0}, dy[] = {0, 0, 1, -1};
  while (!frontier.empty()) {
    const auto [x, y] = frontier.front();
    frontier.pop_front();
    if (x == width - 1 && y == height - 1) return dist[{x, y}];
    for (int k = 0; k < 4; ++k) {
      const int nx = std::clamp(x + dx[k], 0, width - 1), ny = std::clamp(y + dy[k], 0, height - 1);
      const bool cliff = ny == height - 1 && nx > 0 && nx < width - 1;
      if (cliff || dist.count({nx, ny})) continue;
      dist[{nx, ny}] = dist[{x, y}] + 1;
      frontier.push_back({nx, ny});
    }
  }
  return -1;
}

}  // namespace

TEST(Corridor, ResetAndGoal) {
  Corridor env(10, unit_skip());
  env.reset(1);
  EXPECT_EQ(env.cell(), 0);
  for (int k = 0; k < 9; ++k) {
    const StepResult r = env.step(action::right);
    EXPECT_EQ(r.reward, 0.0);
    EXPECT_FALSE(r.terminal);
  }
  EXPECT_EQ(env.cell(), 9);
  const StepResult last = env.step(action::right);
  EXPECT_EQ(last.reward, 1.0);
  EXPECT_TRUE(last.terminal);
  EXPECT_EQ(env.steps_taken(), 10);
  EXPECT_THROW(env.step(action::right), UsageError);
}

TEST(Corridor, RenderPutsAgentInItsColumn) {
  Corridor env(10, unit_skip());
  env.restart(0);
  const Screen bg = env.backdrop();
  for (int k = 0; k < 10; ++k) {
    const auto blocks = differing_blocks(env.render_screen(), bg);
    ASSERT_EQ(blocks.size(), 1u);
    EXPECT_EQ(blocks.begin()->second, k);
    env.act(action::right);
  }
}

TEST(Corridor, ConsecutiveStatesDifferOnlyInTheMovedEntity) {
  Corridor env(10, unit_skip());
  env.restart(0);
  const Screen before = env.render_screen();
  env.act(action::right);
  const auto blocks = differing_blocks(before, env.render_screen());
  EXPECT_EQ(blocks, (std::set<std::pair<int, int>>{{7, 0}, {7, 1}}));
}

TEST(CliffWalk, CliffAndStepRewards) {
  CliffWalk env(12, 4, unit_skip());
  env.restart(0);
  const Transition t = env.act(action::right);
  EXPECT_EQ(t.reward, -100.0);
  EXPECT_TRUE(t.terminal);

  env.restart(0);
  EXPECT_EQ(env.act(action::up).reward, -1.0);
}

TEST(CliffWalk, OptimalPathMatchesBreadthFirstSearch) {
  for (auto [w, h] : {std::pair{12, 4}, std::pair{5, 3}, std::pair{8, 6}}) {
    CliffWalk env(w, h, unit_skip());
    env.restart(0);
    int steps = 0;
    double ret = 0.0;
    auto go = [&](int a) {
      const Transition t = env.act(a);
      ret += t.reward;
      ++steps;
      return t.terminal;
    };
    go(action::up);
    for (int x = 0; x < w - 1; ++x) go(action::right);
    EXPECT_TRUE(go(action::down));
    EXPECT_EQ(steps, cliff_bfs(w, h));
    EXPECT_EQ(steps, w + 1);
    EXPECT_EQ(ret, -(w + 1.0));
  }
}

TEST(FrameSkip, AccumulatesRewardPerTick) {
  EnvConfig cfg;
  cfg.frame_skip = 5;
  FireCounter env(cfg);
  env.restart(0);
  EXPECT_EQ(env.act(action::fire).reward, 5.0);
  EXPECT_EQ(env.act(action::noop).reward, 0.0);

  RewardCycle single(1, cfg);
  single.restart(0);
  EXPECT_EQ(single.act(0).reward, 5.0);
}

TEST(FrameSkip, StopsAtTerminalTick) {
  EnvConfig cfg;
  cfg.frame_skip = 5;
  Corridor env(2, cfg);
  env.restart(0);
  const Transition t = env.act(action::right);
  EXPECT_TRUE(t.terminal);
  EXPECT_EQ(t.reward, 1.0);
}

TEST(MaxSteps, TruncatesEveryEnvironment) {
  for (const char* id : {"corridor", "cliffwalk", "airgrid", "delayeddeath", "bairdstar", "cycle"}) {
    auto env = make_synthetic(id, unit_skip(7));
    env->restart(3);
    int steps = 0;
    for (;;) {
      const Transition t = env->act(0);
      ++steps;
      if (t.terminal) break;
    }
    EXPECT_LE(steps, 7) << id;
  }
}

TEST(DelayedDeath, ResetDeathAndSafety) {
  DelayedDeath env(8, 120, unit_skip());
  env.restart(0);
  EXPECT_EQ(env.column(), 0);
  EXPECT_EQ(env.timer(), 0);
  int steps = 0;
  Transition t;
  do {
    t = env.act(action::noop);
    ++steps;
  } while (!t.terminal);
  EXPECT_EQ(steps, 120);
  EXPECT_EQ(t.reward, 0.0);
  EXPECT_FALSE(t.truncated);

  env.restart(0);
  double ret = 0.0;
  for (int k = 0; k < 7; ++k) ret += env.act(action::right).reward;
  EXPECT_EQ(ret, 1.0);
  EXPECT_TRUE(env.terminal());
}

TEST(AirGrid, AirRunsOutBelowTheSurface) {
  AirGrid env(8, 6, 16, unit_skip());
  env.restart(0);
  EXPECT_EQ(env.air(), 16);
  env.act(action::down);
  EXPECT_EQ(env.air(), 15);
  int steps = 1;
  while (!env.terminal()) {
    env.act(action::noop);
    ++steps;
  }
  EXPECT_EQ(steps, 16);
}

TEST(AirGrid, TreasurePaysAndSurfaceRefills) {
  AirGrid env(8, 6, 16, unit_skip());
  env.restart(0);
  for (int k = 0; k < 5; ++k) env.act(action::down);  // bottom row, column 4
  double reward = 0.0;
  for (int k = 0; k < 2; ++k) reward += env.act(action::right).reward;  // column 6 holds a treasure
  EXPECT_EQ(reward, 5.0);
  EXPECT_EQ(env.act(action::left).reward, 0.0);
  for (int k = 0; k < 5; ++k) env.act(action::up);
  EXPECT_EQ(env.air(), 16);
}

TEST(BairdStar, FixtureFeaturesAndTransitions) {
  BairdStar env(unit_skip());
  const SparseFeatures outer = BairdStar::features(2, 0);
  EXPECT_EQ(outer.active(), (std::vector<std::uint32_t>{2, 7}));
  EXPECT_EQ(outer.values(), (std::vector<double>{2.0, 1.0}));
  const SparseFeatures hub_solid = BairdStar::features(6, 6);
  EXPECT_EQ(hub_solid.active(), (std::vector<std::uint32_t>{14, 15}));
  EXPECT_EQ(hub_solid.values(), (std::vector<double>{1.0, 2.0}));
  const WeightVector w = *env.native_initial_weights();
  EXPECT_EQ(w[6], 10.0);
  EXPECT_EQ(w[14], 10.0);
  EXPECT_EQ(w[0], 1.0);

  env.restart(9);
  env.act(6);
  EXPECT_EQ(env.state(), 6);
  for (int k = 0; k < 100; ++k) {
    env.act(0);
    EXPECT_LT(env.state(), 6);
  }
}

TEST(Registry, ParsesParametersAndRejectsUnknownNames) {
  EXPECT_EQ(dynamic_cast<Corridor&>(*make_synthetic("corridor:5", unit_skip())).length(), 5);
  auto cliff = make_synthetic("cliffwalk:6x3", unit_skip());
  EXPECT_EQ(dynamic_cast<CliffWalk&>(*cliff).width(), 6);
  EXPECT_THROW(make_synthetic("corridor:abc", unit_skip()), UsageError);
  EXPECT_THROW(make_synthetic("bairdstar:3", unit_skip()), UsageError);
  try {
    make_synthetic("pong", unit_skip());
    FAIL();
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("corridor"), std::string::npos);
  }
}

TEST(Determinism, SameSeedAndActionsGiveSameTrajectory) {
  for (const char* id : {"corridor", "cliffwalk", "airgrid", "delayeddeath", "bairdstar", "cycle"}) {
    auto a = make_synthetic(id, EnvConfig{});
    auto b = make_synthetic(id, EnvConfig{});
    Rng actions(99);
    EXPECT_EQ(a->reset(5).screen, b->reset(5).screen) << id;
    for (int k = 0; k < 200; ++k) {
      const int act = static_cast<int>(uniform_index(actions, static_cast<std::size_t>(a->num_actions())));
      const StepResult ra = a->step(act), rb = b->step(act);
      ASSERT_EQ(ra.reward, rb.reward) << id;
      ASSERT_EQ(ra.terminal, rb.terminal) << id;
      ASSERT_EQ(ra.observation.screen, rb.observation.screen) << id;
      if (ra.terminal) {
        a->reset(static_cast<std::uint64_t>(k));
        b->reset(static_cast<std::uint64_t>(k));
      }
    }
  }
}

TEST(Rendering, ScreensAreValidAndEncodable) {
  for (const char* id : {"corridor", "cliffwalk", "airgrid", "delayeddeath", "bairdstar", "cycle"}) {
    auto env = make_synthetic(id, EnvConfig{});
    Rng actions(7);
    env->restart(1);
    const BackgroundModel bg = background_from_rollout(*env, 50, 3, default_palette());
    env->restart(1);
    for (int k = 0; k < 50 && !env->terminal(); ++k) {
      const Screen s = env->render_screen();
      ASSERT_NO_THROW(validate(s));
      ASSERT_NO_THROW(encode_basic(secam_reduce(s, default_palette()), bg, EncoderConfig{}));
      env->act(static_cast<int>(uniform_index(actions, static_cast<std::size_t>(env->num_actions()))));
    }
  }
}

TEST(Rendering, EntityColorsMapToDistinctClasses) {
  const Palette p = default_palette();
  const std::set<int> classes{p[color::backdrop], p[color::agent], p[color::goal], p[color::hazard],
                              p[color::item],     p[color::meter], p[color::safe]};
  EXPECT_EQ(classes.size(), 7u);
}

TEST(Background, RolloutOfMostlyStaticSceneEqualsBackdrop) {
  auto env = make_synthetic("bairdstar", EnvConfig{});
  const BackgroundModel bg = background_from_rollout(*env, 500, 4, default_palette());
  const SecamScreen backdrop = secam_reduce(dynamic_cast<SyntheticEnvironment&>(*env).backdrop(), default_palette());
  EXPECT_EQ(bg.modal_color, backdrop.pixels);
  EXPECT_EQ(bg.sample_count, 500u);
}

TEST(Background, RolloutIsDeterministic) {
  auto a = make_synthetic("airgrid", EnvConfig{});
  auto b = make_synthetic("airgrid", EnvConfig{});
  const BackgroundModel x = background_from_rollout(*a, 300, 8, default_palette());
  const BackgroundModel y = background_from_rollout(*b, 300, 8, default_palette());
  EXPECT_EQ(x.modal_color, y.modal_color);
  EXPECT_THROW(background_from_rollout(*a, 0, 8, default_palette()), UsageError);
}
