#pragma once

// Seeded trials (train phase, then test phase), divergence/stall/convergence
// detection, parameter sweeps, and the CSV/config formats used to persist
// them.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "linrl/agents.hpp"
#include "linrl/bridge.hpp"
#include "linrl/envs.hpp"
#include "linrl/error.hpp"
#include "linrl/exploration.hpp"
#include "linrl/features.hpp"
#include "linrl/random.hpp"

namespace linrl {

enum class FeatureMode { basic, tabular, native };

inline std::string_view to_string(FeatureMode m) {
  switch (m) {
    case FeatureMode::basic: return "basic";
    case FeatureMode::tabular: return "tabular";
    case FeatureMode::native: return "native";
  }
  return "?";
}

inline FeatureMode parse_feature_mode(std::string_view s) {
  if (s == "basic") return FeatureMode::basic;
  if (s == "tabular") return FeatureMode::tabular;
  if (s == "native") return FeatureMode::native;
  throw UsageError("unknown feature mode '" + std::string(s) + "' (valid: basic, tabular, native)");
}

enum class Phase { train, test };

inline std::string_view to_string(Phase p) { return p == Phase::train ? "train" : "test"; }

/// Builds an environment from its id: a synthetic spec such as
/// "corridor:10", or "external:<command>" for a bridge peer.
inline std::unique_ptr<Environment> make_environment(const std::string& id, const EnvConfig& cfg) {
  static constexpr std::string_view kExternal = "external:";
  if (id.rfind(kExternal, 0) == 0) return connect_external(id.substr(kExternal.size()));
  return make_synthetic(id, cfg);
}

/// Per-pixel mode over `frames` screens from a uniformly random policy.
/// The environment is restarted whenever an episode ends.
inline BackgroundModel background_from_rollout(Environment& env, int frames, std::uint64_t seed,
                                               const Palette& palette) {
  if (frames < 1) throw UsageError("background rollout needs at least one frame");
  Rng rng(derive_seed(seed, 0xb6));
  BackgroundAccumulator acc;
  std::uint64_t episode = 0;
  env.restart(derive_seed(seed, episode));
  acc.add(secam_reduce(env.render_screen(), palette));
  while (acc.frames() < static_cast<std::size_t>(frames)) {
    const Transition t = env.act(static_cast<int>(uniform_index(rng, static_cast<std::size_t>(env.num_actions()))));
    if (t.terminal) env.restart(derive_seed(seed, ++episode));
    acc.add(secam_reduce(env.render_screen(), palette));
  }
  return acc.model();
}

// ---------------------------------------------------------------------------
// Feature pipeline

/// Produces phi(s, a) for every action in the environment's current state.
class FeaturePipeline {
 public:
  FeaturePipeline(FeatureMode mode, Environment& env, Palette palette = default_palette(),
                  std::optional<BackgroundModel> background = std::nullopt)
      : mode_(mode), palette_(palette), num_actions_(env.num_actions()) {
    switch (mode_) {
      case FeatureMode::basic:
        encoder_ = EncoderConfig::for_screen(env.screen_width(), env.screen_height(), num_actions_);
        if (!background) throw UsageError("basic features need a background model");
        background_ = std::move(*background);
        if (background_.width != env.screen_width() || background_.height != env.screen_height())
          throw DimensionError("background model does not match the environment screen");
        dimension_ = encoder_.state_action_dimension();
        break;
      case FeatureMode::tabular:
        num_states_ = env.num_tabular_states();
        if (num_states_ == 0) throw UsageError(env.name() + " has no tabular state");
        dimension_ = num_states_ * static_cast<std::size_t>(num_actions_);
        break;
      case FeatureMode::native: {
        const auto phi = env.native_features(0);
        if (!phi) throw UsageError(env.name() + " has no native features");
        dimension_ = phi->dimension();
        break;
      }
    }
  }

  FeatureMode mode() const noexcept { return mode_; }
  std::size_t dimension() const noexcept { return dimension_; }
  const EncoderConfig& encoder() const noexcept { return encoder_; }
  const BackgroundModel& background() const noexcept { return background_; }

  std::vector<SparseFeatures> operator()(const Environment& env) const {
    std::vector<SparseFeatures> out;
    out.reserve(static_cast<std::size_t>(num_actions_));
    switch (mode_) {
      case FeatureMode::basic: {
        const SparseFeatures basic = encode_basic(secam_reduce(env.render_screen(), palette_), background_, encoder_);
        for (int a = 0; a < num_actions_; ++a) out.push_back(encode_state_action(basic, a, num_actions_));
        break;
      }
      case FeatureMode::tabular: {
        const auto s = env.tabular_state();
        if (!s) throw UsageError(env.name() + " has no tabular state");
        for (int a = 0; a < num_actions_; ++a) out.push_back(encode_tabular(*s, a, num_states_, num_actions_));
        break;
      }
      case FeatureMode::native:
        for (int a = 0; a < num_actions_; ++a) out.push_back(*env.native_features(a));
        break;
    }
    return out;
  }

  /// Starting weights: every initial Q value equals q0 (through the bias
  /// feature for basic encodings), or the environment's own fixture.
  WeightVector initial_weights(const Environment& env, double q0) const {
    switch (mode_) {
      case FeatureMode::basic: {
        WeightVector w(dimension_, 0.0);
        w[dimension_ - 1] = q0;
        return w;
      }
      case FeatureMode::tabular:
        return WeightVector(dimension_, q0);
      case FeatureMode::native:
        if (auto w = env.native_initial_weights()) return *w;
        return WeightVector(dimension_, q0);
    }
    return {};
  }

 private:
  FeatureMode mode_;
  Palette palette_;
  int num_actions_;
  EncoderConfig encoder_;
  BackgroundModel background_;
  std::size_t num_states_ = 0;
  std::size_t dimension_ = 0;
};

// ---------------------------------------------------------------------------
// Trials

struct TrialConfig {
  Algorithm algorithm = Algorithm::sarsa;
  std::string environment = "corridor";
  Hyperparams hyper;
  PolicyConfig policy;
  EnvConfig env;
  int train_episodes = 5000;
  int test_episodes = 500;
  std::uint64_t seed = 0;
  FeatureMode features = FeatureMode::basic;
  /// Initial Q value (optimistic initialization when positive).
  double q0 = 0.0;
  int background_frames = 1000;
  int stall_window = 100;
  /// Q and GQ (and R) test with epsilon = 0; on-policy methods keep their
  /// exploration policy.
  bool greedy_test_for_off_policy = true;
  /// Force a purely greedy test phase for every algorithm.
  bool greedy_test = false;
  /// ETTR terminal pessimism; defaults to the step limit.
  std::optional<double> ettr_terminal_value;
  std::optional<Palette> palette;
  std::optional<BackgroundModel> background;
  std::string run_id;
};

inline void validate(const TrialConfig& c) {
  if (c.train_episodes < 1 || c.test_episodes < 1) throw UsageError("episode counts must be >= 1");
  if (c.stall_window < 1) throw UsageError("stall window must be >= 1");
  validate(c.hyper);
  validate(c.policy);
  validate(c.env);
}

struct EpisodeRecord {
  Phase phase = Phase::train;
  int index = 0;
  double reward = 0.0;
  int steps = 0;
  /// The step limit ended the episode.
  bool hit_limit = false;

  bool operator==(const EpisodeRecord&) const = default;
};

struct TrialResult {
  std::string run_id;
  Algorithm algorithm = Algorithm::sarsa;
  std::string environment;
  std::uint64_t seed = 0;
  int train_episodes = 0;
  int test_episodes = 0;
  std::vector<EpisodeRecord> records;
  bool diverged = false;
  bool stalled = false;
  bool converged = false;
  double wall_time = 0.0;
  /// Set when the trial aborted with an error (sweeps keep going).
  std::string error;
  std::optional<AgentState> final_state;

  bool finished() const noexcept { return !diverged && !stalled && error.empty(); }
};

/// True iff some weight is non-finite or exceeds `threshold` in magnitude.
inline bool detect_divergence(const WeightVector& weights, double threshold = 1e10) {
  for (double v : weights.values())
    if (!std::isfinite(v) || std::abs(v) > threshold) return true;
  return false;
}

/// True iff each of the last `window` episodes hit the step limit with zero
/// total reward. False while fewer than `window` episodes exist.
inline bool detect_stall(std::span<const EpisodeRecord> episodes, int max_steps, int window = 100) {
  if (window < 1 || episodes.size() < static_cast<std::size_t>(window)) return false;
  return std::all_of(episodes.end() - window, episodes.end(),
                     [&](const EpisodeRecord& e) { return e.steps >= max_steps && e.reward == 0.0; });
}

inline constexpr double kConvergenceTolerance = 0.10;
inline constexpr double kConvergenceFloor = 1e-9;

/// Mean of the last 500 training rewards within 10% of the mean of the 500
/// before them.
inline bool detect_convergence(std::span<const double> train_rewards) {
  if (train_rewards.size() < 1000) throw UsageError("convergence needs at least 1000 training episodes");
  const auto end = train_rewards.end();
  const double a = std::accumulate(end - 500, end, 0.0) / 500.0;
  const double b = std::accumulate(end - 1000, end - 500, 0.0) / 500.0;
  const double scale = std::max({std::abs(a), std::abs(b), kConvergenceFloor});
  return std::abs(a - b) <= kConvergenceTolerance * scale;
}

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
  std::size_t n = 0;
};

/// Mean and sample standard deviation (0 for fewer than two values).
inline MeanSd mean_sd(std::span<const double> xs) {
  MeanSd out;
  out.n = xs.size();
  if (xs.empty()) return out;
  out.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return out;
}

inline std::vector<double> phase_rewards(const TrialResult& r, Phase phase) {
  std::vector<double> out;
  for (const auto& e : r.records)
    if (e.phase == phase) out.push_back(e.reward);
  return out;
}

inline MeanSd test_statistics(const TrialResult& r) { return mean_sd(phase_rewards(r, Phase::test)); }

namespace detail {

struct EpisodeOutcome {
  double reward = 0.0;
  int steps = 0;
  bool hit_limit = false;
  bool diverged = false;
};

inline EpisodeOutcome run_episode(Environment& env, const FeaturePipeline& features, LinearAgent& agent,
                                  ExplorationPolicy& policy, Rng& rng, std::uint64_t env_seed, bool learn) {
  EpisodeOutcome out;
  env.restart(env_seed);
  int action = agent.begin_episode(features(env), policy, rng);
  for (;;) {
    const Transition t = env.act(action);
    out.reward += t.reward;
    ++out.steps;
    StepOutcome s = t.terminal ? agent.step({}, t.reward, true, policy, rng, learn)
                               : agent.step(features(env), t.reward, false, policy, rng, learn);
    if (learn && s.diverged) {
      out.diverged = true;
      return out;
    }
    if (t.terminal) {
      out.hit_limit = t.truncated;
      return out;
    }
    action = s.action;
  }
}

inline std::string default_run_id(const TrialConfig& c) {
  return std::string(to_string(c.algorithm)) + "-" + c.environment + "-" + std::to_string(c.seed);
}

}  // namespace detail

/// Trains for `train_episodes`, then tests for `test_episodes` with learning
/// off. Deterministic given the config. Stops early (diverged) when a weight
/// leaves the finite range or crosses the divergence threshold.
inline TrialResult run_trial(const TrialConfig& config) {
  validate(config);
  const auto t0 = std::chrono::steady_clock::now();
  TrialResult result;
  result.run_id = config.run_id.empty() ? detail::default_run_id(config) : config.run_id;
  result.algorithm = config.algorithm;
  result.environment = config.environment;
  result.seed = config.seed;
  result.train_episodes = config.train_episodes;
  result.test_episodes = config.test_episodes;

  auto env = make_environment(config.environment, config.env);
  const Palette palette = config.palette.value_or(default_palette());
  std::optional<BackgroundModel> background = config.background;
  if (config.features == FeatureMode::basic && !background)
    background = background_from_rollout(*env, config.background_frames, derive_seed(config.seed, 2), palette);
  const FeaturePipeline features(config.features, *env, palette, background);

  Hyperparams hyper = config.hyper;
  hyper.ettr_terminal_value = config.ettr_terminal_value.value_or(static_cast<double>(config.env.max_steps));
  LinearAgent agent(config.algorithm, hyper, features.initial_weights(*env, config.q0));

  Rng rng(derive_seed(config.seed, 1));
  auto env_seed = [&](int episode) { return derive_seed(config.seed, 1000 + static_cast<std::uint64_t>(episode)); };

  ExplorationPolicy policy(config.policy);
  for (int ep = 0; ep < config.train_episodes; ++ep) {
    policy.begin_episode(ep);
    const auto o = detail::run_episode(*env, features, agent, policy, rng, env_seed(ep), true);
    result.records.push_back({Phase::train, ep, o.reward, o.steps, o.hit_limit});
    const auto& st = agent.state();
    if (o.diverged || detect_divergence(st.theta, hyper.divergence_threshold) ||
        (st.aux && detect_divergence(*st.aux, hyper.divergence_threshold))) {
      result.diverged = true;
      break;
    }
  }

  if (!result.diverged) {
    result.stalled = detect_stall(result.records, config.env.max_steps, config.stall_window);
    if (config.train_episodes >= 1000) result.converged = detect_convergence(phase_rewards(result, Phase::train));

    const bool greedy = config.greedy_test || (config.greedy_test_for_off_policy && is_off_policy(config.algorithm));
    ExplorationPolicy test_policy(greedy ? PolicyConfig::greedy() : config.policy);
    for (int ep = 0; ep < config.test_episodes; ++ep) {
      test_policy.begin_episode(greedy ? 0 : config.train_episodes);
      const auto o = detail::run_episode(*env, features, agent, test_policy, rng,
                                         env_seed(config.train_episodes + ep), false);
      result.records.push_back({Phase::test, ep, o.reward, o.steps, o.hit_limit});
    }
  }
  result.final_state = agent.state();
  result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

// ---------------------------------------------------------------------------
// Sweeps

enum class SweepAxis { gamma, lambda, epsilon, temperature, period_length };

inline std::string_view to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::gamma: return "gamma";
    case SweepAxis::lambda: return "lambda";
    case SweepAxis::epsilon: return "epsilon";
    case SweepAxis::temperature: return "temperature";
    case SweepAxis::period_length: return "period";
  }
  return "?";
}

inline SweepAxis parse_sweep_axis(std::string_view s) {
  if (s == "gamma") return SweepAxis::gamma;
  if (s == "lambda") return SweepAxis::lambda;
  if (s == "epsilon") return SweepAxis::epsilon;
  if (s == "temperature") return SweepAxis::temperature;
  if (s == "period" || s == "period_length") return SweepAxis::period_length;
  throw UsageError("unknown sweep axis '" + std::string(s) + "' (valid: gamma, lambda, epsilon, temperature, period)");
}

struct SweepSpec {
  TrialConfig base;
  SweepAxis axis = SweepAxis::epsilon;
  std::vector<double> values;
  int trials_per_value = 5;
};

/// The base config with the axis set to `value`.
inline TrialConfig apply_axis(TrialConfig c, SweepAxis axis, double value) {
  switch (axis) {
    case SweepAxis::gamma: c.hyper.gamma = value; break;
    case SweepAxis::lambda: c.hyper.lambda = value; break;
    case SweepAxis::epsilon: c.policy.schedule = EpsilonSchedule::constant(value); break;
    case SweepAxis::temperature:
      c.policy.kind = PolicyKind::softmax;
      c.policy.temperature = value;
      break;
    case SweepAxis::period_length:
      if (value < 1 || value != std::floor(value)) throw UsageError("period values must be positive integers");
      c.policy.kind = PolicyKind::exploration_period;
      c.policy.period_length = static_cast<int>(value);
      break;
  }
  return c;
}

struct SweepRow {
  double value = 0.0;
  /// Mean and SD of per-trial test means over non-diverged, error-free trials.
  MeanSd test;
  int trials = 0;
  int diverged = 0;
  int failed = 0;
};

struct SweepResult {
  SweepAxis axis = SweepAxis::epsilon;
  std::string environment;
  std::vector<SweepRow> rows;
  std::vector<TrialResult> trials;
};

/// Seed of trial `trial_index` in a sweep with base seed `seed`.
inline std::uint64_t sweep_trial_seed(std::uint64_t seed, std::uint64_t trial_index) {
  return derive_seed(seed, 0x5eed0000ULL + trial_index);
}

/// Runs `jobs` trials at a time. Each trial is independent; results are
/// merged in trial order so output does not depend on scheduling.
inline std::vector<TrialResult> run_trials_parallel(const std::vector<TrialConfig>& configs, int jobs) {
  std::vector<TrialResult> results(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        results[i] = run_trial(configs[i]);
      } catch (const std::exception& e) {
        TrialResult r;
        r.run_id = configs[i].run_id.empty() ? detail::default_run_id(configs[i]) : configs[i].run_id;
        r.algorithm = configs[i].algorithm;
        r.environment = configs[i].environment;
        r.seed = configs[i].seed;
        r.error = e.what();
        results[i] = std::move(r);
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(configs.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return results;
}

inline SweepResult run_sweep(const SweepSpec& spec, int jobs = 1) {
  if (spec.values.empty()) throw UsageError("sweep needs at least one value");
  if (spec.trials_per_value < 1) throw UsageError("trials per value must be >= 1");
  std::vector<TrialConfig> configs;
  for (std::size_t v = 0; v < spec.values.size(); ++v) {
    for (int t = 0; t < spec.trials_per_value; ++t) {
      TrialConfig c = apply_axis(spec.base, spec.axis, spec.values[v]);
      const std::uint64_t index = v * static_cast<std::size_t>(spec.trials_per_value) + static_cast<std::size_t>(t);
      c.seed = sweep_trial_seed(spec.base.seed, index);
      c.run_id = std::string(to_string(c.algorithm)) + "-" + c.environment + "-" + std::string(to_string(spec.axis)) +
                 "=" + format_real(spec.values[v]) + "-t" + std::to_string(t);
      configs.push_back(std::move(c));
    }
  }
  SweepResult out;
  out.axis = spec.axis;
  out.environment = spec.base.environment;
  out.trials = run_trials_parallel(configs, jobs);
  for (std::size_t v = 0; v < spec.values.size(); ++v) {
    SweepRow row;
    row.value = spec.values[v];
    std::vector<double> means;
    for (int t = 0; t < spec.trials_per_value; ++t) {
      auto& r = out.trials[v * static_cast<std::size_t>(spec.trials_per_value) + static_cast<std::size_t>(t)];
      ++row.trials;
      if (!r.error.empty()) {
        ++row.failed;
      } else if (r.diverged) {
        ++row.diverged;
      } else {
        means.push_back(test_statistics(r).mean);
      }
    }
    row.test = mean_sd(means);
    out.rows.push_back(row);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace csv {

inline std::string escape(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

}  // namespace csv

inline constexpr std::string_view kEpisodeCsvHeader =
    "run_id,algorithm,environment,seed,phase,episode_index,reward,steps,diverged,stalled,converged";
inline constexpr std::string_view kSummaryCsvHeader =
    "run_id,algorithm,environment,seed,diverged,stalled,converged,train_episodes,test_episodes,test_mean,test_sd";

inline void write_episode_csv(std::ostream& out, std::span<const TrialResult> trials, bool header = true) {
  if (header) out << kEpisodeCsvHeader << '\n';
  for (const auto& t : trials) {
    const std::string prefix = csv::escape(t.run_id) + ',' + std::string(to_string(t.algorithm)) + ',' +
                               csv::escape(t.environment) + ',' + std::to_string(t.seed) + ',';
    const std::string flags = std::string(t.diverged ? "1" : "0") + ',' + (t.stalled ? "1" : "0") + ',' +
                              (t.converged ? "1" : "0");
    for (const auto& e : t.records) {
      out << prefix << to_string(e.phase) << ',' << e.index << ',' << format_real(e.reward) << ',' << e.steps << ','
          << flags << '\n';
    }
  }
}

/// One parsed line of an episode CSV.
struct EpisodeRow {
  std::string run_id;
  std::string algorithm;
  std::string environment;
  std::uint64_t seed = 0;
  Phase phase = Phase::train;
  int index = 0;
  double reward = 0.0;
  int steps = 0;
  bool diverged = false;
  bool stalled = false;
  bool converged = false;

  bool operator==(const EpisodeRow&) const = default;
};

inline std::vector<EpisodeRow> read_episode_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("episode CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kEpisodeCsvHeader) throw FormatError("episode CSV header mismatch: " + line);
  std::vector<EpisodeRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = csv::split_line(line);
    const std::string where = "episode CSV line " + std::to_string(line_no);
    if (f.size() != 11) throw FormatError(where + ": expected 11 fields");
    auto flag = [&](const std::string& s) {
      if (s != "0" && s != "1") throw FormatError(where + ": bad flag");
      return s == "1";
    };
    EpisodeRow r;
    r.run_id = f[0];
    r.algorithm = f[1];
    r.environment = f[2];
    if (f[4] == "train") r.phase = Phase::train;
    else if (f[4] == "test") r.phase = Phase::test;
    else throw FormatError(where + ": bad phase '" + f[4] + "'");
    try {
      r.seed = std::stoull(f[3]);
      r.index = std::stoi(f[5]);
      r.reward = parse_real(f[6]);
      r.steps = std::stoi(f[7]);
    } catch (const FormatError&) {
      throw;
    } catch (const std::exception&) {
      throw FormatError(where + ": bad number");
    }
    r.diverged = flag(f[8]);
    r.stalled = flag(f[9]);
    r.converged = flag(f[10]);
    rows.push_back(std::move(r));
  }
  return rows;
}

/// One row per trial, as read back by `compare`.
struct TrialSummary {
  std::string run_id;
  std::string algorithm;
  std::string environment;
  std::uint64_t seed = 0;
  bool diverged = false;
  bool stalled = false;
  bool converged = false;
  int train_episodes = 0;
  int test_episodes = 0;
  double test_mean = 0.0;
  double test_sd = 0.0;

  bool finished() const noexcept { return !diverged && !stalled; }
  bool operator==(const TrialSummary&) const = default;
};

inline TrialSummary summarize_trial(const TrialResult& r) {
  const MeanSd s = test_statistics(r);
  return {r.run_id,    std::string(to_string(r.algorithm)), r.environment,     r.seed,  r.diverged || !r.error.empty(),
          r.stalled,   r.converged,                         r.train_episodes,  r.test_episodes, s.mean, s.sd};
}

/// Rebuilds per-trial summaries from episode rows, in first-seen run order.
inline std::vector<TrialSummary> summaries_from_episodes(std::span<const EpisodeRow> rows) {
  std::vector<TrialSummary> out;
  std::map<std::string, std::size_t> slot;
  std::vector<std::vector<double>> test_rewards;
  for (const auto& r : rows) {
    auto [it, inserted] = slot.try_emplace(r.run_id, out.size());
    if (inserted) {
      TrialSummary s;
      s.run_id = r.run_id;
      s.algorithm = r.algorithm;
      s.environment = r.environment;
      s.seed = r.seed;
      s.diverged = r.diverged;
      s.stalled = r.stalled;
      s.converged = r.converged;
      out.push_back(std::move(s));
      test_rewards.emplace_back();
    }
    auto& s = out[it->second];
    if (r.phase == Phase::train) {
      ++s.train_episodes;
    } else {
      ++s.test_episodes;
      test_rewards[it->second].push_back(r.reward);
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const MeanSd m = mean_sd(test_rewards[i]);
    out[i].test_mean = m.mean;
    out[i].test_sd = m.sd;
  }
  return out;
}

inline void write_summary_csv(std::ostream& out, std::span<const TrialSummary> rows, bool header = true) {
  if (header) out << kSummaryCsvHeader << '\n';
  for (const auto& r : rows) {
    out << csv::escape(r.run_id) << ',' << csv::escape(r.algorithm) << ',' << csv::escape(r.environment) << ','
        << r.seed << ',' << (r.diverged ? 1 : 0) << ',' << (r.stalled ? 1 : 0) << ',' << (r.converged ? 1 : 0) << ','
        << r.train_episodes << ',' << r.test_episodes << ',' << format_real(r.test_mean) << ','
        << format_real(r.test_sd) << '\n';
  }
}

inline std::vector<TrialSummary> read_summary_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("summary CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kSummaryCsvHeader) throw FormatError("summary CSV header mismatch: " + line);
  std::vector<TrialSummary> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = csv::split_line(line);
    if (f.size() != 11) throw FormatError("summary CSV line " + std::to_string(line_no) + ": expected 11 fields");
    auto flag = [&](const std::string& s) {
      if (s != "0" && s != "1") throw FormatError("summary CSV line " + std::to_string(line_no) + ": bad flag");
      return s == "1";
    };
    TrialSummary r;
    try {
      r.run_id = f[0];
      r.algorithm = f[1];
      r.environment = f[2];
      r.seed = std::stoull(f[3]);
      r.diverged = flag(f[4]);
      r.stalled = flag(f[5]);
      r.converged = flag(f[6]);
      r.train_episodes = std::stoi(f[7]);
      r.test_episodes = std::stoi(f[8]);
      r.test_mean = parse_real(f[9]);
      r.test_sd = parse_real(f[10]);
    } catch (const FormatError&) {
      throw;
    } catch (const std::exception&) {
      throw FormatError("summary CSV line " + std::to_string(line_no) + ": bad number");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

inline void write_sweep_table(std::ostream& out, const SweepResult& s) {
  out << "value,mean_test_reward,sd_test_reward,trials,diverged,failed\n";
  for (const auto& r : s.rows)
    out << format_real(r.value) << ',' << format_real(r.test.mean) << ',' << format_real(r.test.sd) << ','
        << r.trials << ',' << r.diverged << ',' << r.failed << '\n';
}

/// Two whitespace-separated columns: axis value, mean test reward.
inline void write_plot_data(std::ostream& out, const SweepResult& s) {
  out << "# " << to_string(s.axis) << " mean_test_reward (" << s.environment << ")\n";
  for (const auto& r : s.rows) out << format_real(r.value) << ' ' << format_real(r.test.mean) << '\n';
}

// ---------------------------------------------------------------------------
// Config files: "key = value" lines, '#' starts a comment.

using Settings = std::vector<std::pair<std::string, std::string>>;

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline Settings read_settings(std::istream& in) {
  Settings out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw FormatError("config line " + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(std::string_view(body).substr(0, eq));
    std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw FormatError("config line " + std::to_string(line_no) + ": empty key");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

inline Settings load_settings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config file " + path);
  return read_settings(in);
}

/// Keys accepted by apply_setting.
inline constexpr std::string_view kSettingKeys[] = {
    "algo",          "env",           "seed",          "alpha",          "beta",
    "gamma",         "lambda",        "normalize_alpha", "alpha_decay",  "beta_decay",
    "trace_threshold", "watkins_cut", "divergence_threshold", "q0",      "ettr_terminal_value",
    "policy",        "epsilon",       "epsilon_end",   "epsilon_decay_episodes", "temperature",
    "period",        "tie_break",     "frame_skip",    "max_steps",      "train_episodes",
    "test_episodes", "features",      "background_frames", "stall_window", "greedy_test"};

namespace detail {
inline double to_double(const std::string& key, const std::string& v) {
  try {
    return parse_real(v);
  } catch (const FormatError&) {
    throw UsageError("setting '" + key + "' expects a number, got '" + v + "'");
  }
}
inline long long to_int(const std::string& key, const std::string& v) {
  const auto x = bridge_detail::parse_int(v);
  if (!x) throw UsageError("setting '" + key + "' expects an integer, got '" + v + "'");
  return *x;
}
inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw UsageError("setting '" + key + "' expects a boolean, got '" + v + "'");
}
}  // namespace detail

/// Applies one setting to a trial config. Unknown keys are usage errors.
inline void apply_setting(TrialConfig& c, const std::string& key, const std::string& value) {
  using namespace detail;
  auto& eps = c.policy.schedule;
  if (key == "algo") c.algorithm = parse_algorithm(value);
  else if (key == "env") c.environment = value;
  else if (key == "seed") {
    const auto s = to_int(key, value);
    if (s < 0) throw UsageError("seed must be non-negative");
    c.seed = static_cast<std::uint64_t>(s);
  }
  else if (key == "alpha") c.hyper.alpha = to_double(key, value);
  else if (key == "beta") c.hyper.beta = to_double(key, value);
  else if (key == "gamma") c.hyper.gamma = to_double(key, value);
  else if (key == "lambda") c.hyper.lambda = to_double(key, value);
  else if (key == "normalize_alpha") c.hyper.normalize_alpha = to_bool(key, value);
  else if (key == "alpha_decay") c.hyper.alpha_decay = to_double(key, value);
  else if (key == "beta_decay") c.hyper.beta_decay = to_double(key, value);
  else if (key == "trace_threshold") c.hyper.trace_threshold = to_double(key, value);
  else if (key == "watkins_cut") c.hyper.watkins_cut = to_bool(key, value);
  else if (key == "divergence_threshold") c.hyper.divergence_threshold = to_double(key, value);
  else if (key == "q0") c.q0 = to_double(key, value);
  else if (key == "ettr_terminal_value") c.ettr_terminal_value = to_double(key, value);
  else if (key == "policy") c.policy.kind = parse_policy_kind(value);
  else if (key == "epsilon") {
    const double e = to_double(key, value);
    if (eps.kind == EpsilonSchedule::Kind::constant) eps.end = e;
    eps.start = e;
  }
  else if (key == "epsilon_end") {
    eps.kind = EpsilonSchedule::Kind::linear_decay;
    eps.end = to_double(key, value);
  }
  else if (key == "epsilon_decay_episodes") {
    eps.kind = EpsilonSchedule::Kind::linear_decay;
    eps.episodes = static_cast<int>(to_int(key, value));
  }
  else if (key == "temperature") c.policy.temperature = to_double(key, value);
  else if (key == "period") {
    c.policy.period_length = static_cast<int>(to_int(key, value));
    if (c.policy.period_length > 1) c.policy.kind = PolicyKind::exploration_period;
  }
  else if (key == "tie_break") {
    if (value == "uniform") c.policy.tie_break = TieBreak::uniform;
    else if (value == "first") c.policy.tie_break = TieBreak::first;
    else throw UsageError("tie_break must be 'uniform' or 'first'");
  }
  else if (key == "frame_skip") c.env.frame_skip = static_cast<int>(to_int(key, value));
  else if (key == "max_steps") c.env.max_steps = static_cast<int>(to_int(key, value));
  else if (key == "train_episodes") c.train_episodes = static_cast<int>(to_int(key, value));
  else if (key == "test_episodes") c.test_episodes = static_cast<int>(to_int(key, value));
  else if (key == "features") c.features = parse_feature_mode(value);
  else if (key == "background_frames") c.background_frames = static_cast<int>(to_int(key, value));
  else if (key == "stall_window") c.stall_window = static_cast<int>(to_int(key, value));
  else if (key == "greedy_test") c.greedy_test = to_bool(key, value);
  else throw UsageError("unknown setting '" + key + "'");
}

inline void apply_settings(TrialConfig& c, const Settings& settings) {
  for (const auto& [k, v] : settings) apply_setting(c, k, v);
}

}  // namespace linrl
