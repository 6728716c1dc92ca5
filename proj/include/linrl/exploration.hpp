#pragma once

// Action selection: epsilon-greedy, Gibbs/softmax, and epsilon-greedy with
// extended exploration periods (a random action held for several steps).

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "linrl/error.hpp"
#include "linrl/random.hpp"

namespace linrl {

enum class TieBreak { uniform, first };

struct Selection {
  int action = -1;
  /// The chosen action is a maximizer of the preference values.
  bool was_greedy = false;
  /// The random (exploratory) branch produced this action.
  bool random_branch = false;
};

/// Indices attaining the maximum value.
inline std::vector<int> maximizers(std::span<const double> values) {
  if (values.empty()) throw UsageError("empty action set");
  const double best = *std::max_element(values.begin(), values.end());
  std::vector<int> out;
  for (std::size_t a = 0; a < values.size(); ++a)
    if (values[a] == best) out.push_back(static_cast<int>(a));
  return out;
}

inline bool is_maximizer(std::span<const double> values, int action) {
  const double best = *std::max_element(values.begin(), values.end());
  return values[static_cast<std::size_t>(action)] == best;
}

inline int greedy_action(std::span<const double> values, Rng& rng, TieBreak tie_break = TieBreak::uniform) {
  const auto best = maximizers(values);
  if (best.size() == 1 || tie_break == TieBreak::first) return best.front();
  return best[uniform_index(rng, best.size())];
}

inline Selection select_epsilon_greedy(std::span<const double> q_values, double epsilon, Rng& rng,
                                       TieBreak tie_break = TieBreak::uniform) {
  if (q_values.empty()) throw UsageError("epsilon-greedy over an empty action set");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw UsageError("epsilon must lie in [0,1]");
  if (uniform_real(rng) < epsilon) {
    const int a = static_cast<int>(uniform_index(rng, q_values.size()));
    return {a, is_maximizer(q_values, a), true};
  }
  return {greedy_action(q_values, rng, tie_break), true, false};
}

/// P(a) proportional to exp(q(a)/temperature), computed after subtracting the
/// maximum so large values cannot overflow.
inline std::vector<double> softmax_probabilities(std::span<const double> q_values, double temperature) {
  if (!(temperature > 0.0)) throw UsageError("softmax temperature must be positive");
  if (q_values.empty()) throw UsageError("softmax over an empty action set");
  const double best = *std::max_element(q_values.begin(), q_values.end());
  std::vector<double> p(q_values.size());
  double total = 0.0;
  for (std::size_t a = 0; a < q_values.size(); ++a) {
    p[a] = std::exp((q_values[a] - best) / temperature);
    total += p[a];
  }
  for (auto& x : p) x /= total;
  return p;
}

inline int sample_discrete(std::span<const double> probabilities, Rng& rng) {
  const double u = uniform_real(rng);
  double acc = 0.0;
  for (std::size_t a = 0; a < probabilities.size(); ++a) {
    acc += probabilities[a];
    if (u < acc) return static_cast<int>(a);
  }
  // Rounding left u above the running sum; return the last positive entry.
  for (std::size_t a = probabilities.size(); a-- > 0;)
    if (probabilities[a] > 0.0) return static_cast<int>(a);
  return static_cast<int>(probabilities.size()) - 1;
}

inline int select_softmax(std::span<const double> q_values, double temperature, Rng& rng) {
  const auto p = softmax_probabilities(q_values, temperature);
  return sample_discrete(p, rng);
}

/// Action distribution of epsilon-greedy with uniform tie-breaking.
inline std::vector<double> epsilon_greedy_probabilities(std::span<const double> q_values, double epsilon) {
  const auto best = maximizers(q_values);
  const double n = static_cast<double>(q_values.size());
  std::vector<double> p(q_values.size(), epsilon / n);
  for (int a : best) p[static_cast<std::size_t>(a)] += (1.0 - epsilon) / static_cast<double>(best.size());
  return p;
}

// ---------------------------------------------------------------------------
// Schedules

struct EpsilonSchedule {
  enum class Kind { constant, linear_decay };
  Kind kind = Kind::constant;
  double start = 0.05;
  double end = 0.05;
  int episodes = 1;

  static EpsilonSchedule constant(double epsilon) { return {Kind::constant, epsilon, epsilon, 1}; }
  static EpsilonSchedule linear(double start, double end, int episodes) {
    return {Kind::linear_decay, start, end, episodes};
  }
};

inline double epsilon_at(const EpsilonSchedule& schedule, int episode_index) {
  if (episode_index < 0) throw UsageError("episode index must be non-negative");
  if (schedule.kind == EpsilonSchedule::Kind::constant || schedule.episodes <= 0) return schedule.start;
  if (episode_index >= schedule.episodes) return schedule.end;
  const double t = static_cast<double>(episode_index) / static_cast<double>(schedule.episodes);
  return schedule.start + (schedule.end - schedule.start) * t;
}

// ---------------------------------------------------------------------------
// Exploration periods

struct PolicyState {
  int remaining_repeat = 0;
  int repeated_action = -1;
  double current_epsilon = 0.05;
};

/// Epsilon-greedy where a random choice is then held for `period_length`
/// steps in total. While a repeat is pending no epsilon draw happens.
inline std::pair<Selection, PolicyState> select_with_period(std::span<const double> q_values, PolicyState state,
                                                            int period_length, Rng& rng,
                                                            TieBreak tie_break = TieBreak::uniform) {
  if (period_length < 1) throw UsageError("exploration period length must be >= 1");
  if (state.remaining_repeat > 0) {
    if (state.repeated_action < 0 || static_cast<std::size_t>(state.repeated_action) >= q_values.size())
      throw UsageError("pending repeat refers to an invalid action");
    --state.remaining_repeat;
    const int a = state.repeated_action;
    return {{a, is_maximizer(q_values, a), true}, state};
  }
  const Selection s = select_epsilon_greedy(q_values, state.current_epsilon, rng, tie_break);
  if (s.random_branch) {
    state.remaining_repeat = period_length - 1;
    state.repeated_action = s.action;
  }
  return {s, state};
}

// ---------------------------------------------------------------------------
// Policy object

enum class PolicyKind { epsilon_greedy, softmax, exploration_period };

inline std::string_view to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::epsilon_greedy: return "epsilon_greedy";
    case PolicyKind::softmax: return "softmax";
    case PolicyKind::exploration_period: return "exploration_period";
  }
  return "?";
}

inline PolicyKind parse_policy_kind(std::string_view s) {
  if (s == "epsilon_greedy" || s == "egreedy") return PolicyKind::epsilon_greedy;
  if (s == "softmax" || s == "gibbs") return PolicyKind::softmax;
  if (s == "exploration_period" || s == "period") return PolicyKind::exploration_period;
  throw UsageError("unknown policy '" + std::string(s) + "' (valid: epsilon_greedy, softmax, exploration_period)");
}

struct PolicyConfig {
  PolicyKind kind = PolicyKind::epsilon_greedy;
  EpsilonSchedule schedule = EpsilonSchedule::constant(0.05);
  double temperature = 1.0;
  int period_length = 1;
  TieBreak tie_break = TieBreak::uniform;

  static PolicyConfig greedy() {
    PolicyConfig c;
    c.schedule = EpsilonSchedule::constant(0.0);
    return c;
  }
};

inline void validate(const PolicyConfig& c) {
  auto in_unit = [](double e) { return e >= 0.0 && e <= 1.0; };
  if (!in_unit(c.schedule.start) || !in_unit(c.schedule.end)) throw UsageError("epsilon must lie in [0,1]");
  if (c.kind == PolicyKind::softmax && !(c.temperature > 0.0))
    throw UsageError("softmax temperature must be positive");
  if (c.period_length < 1) throw UsageError("exploration period length must be >= 1");
}

/// A configured policy plus its per-worker mutable state.
class ExplorationPolicy {
 public:
  explicit ExplorationPolicy(PolicyConfig config = {}) : config_(std::move(config)) {
    validate(config_);
    state_.current_epsilon = epsilon_at(config_.schedule, 0);
  }

  /// Sets epsilon from the schedule and drops any pending repeat.
  void begin_episode(int episode_index) {
    state_.current_epsilon = epsilon_at(config_.schedule, episode_index);
    state_.remaining_repeat = 0;
    state_.repeated_action = -1;
  }

  Selection select(std::span<const double> prefs, Rng& rng) {
    switch (config_.kind) {
      case PolicyKind::softmax: {
        const int a = select_softmax(prefs, config_.temperature, rng);
        return {a, is_maximizer(prefs, a), false};
      }
      case PolicyKind::exploration_period: {
        auto [s, next] = select_with_period(prefs, state_, config_.period_length, rng, config_.tie_break);
        state_ = next;
        return s;
      }
      case PolicyKind::epsilon_greedy:
        break;
    }
    return select_epsilon_greedy(prefs, state_.current_epsilon, rng, config_.tie_break);
  }

  /// Per-step action distribution (ignores any pending repeat).
  std::vector<double> probabilities(std::span<const double> prefs) const {
    if (config_.kind == PolicyKind::softmax) return softmax_probabilities(prefs, config_.temperature);
    return epsilon_greedy_probabilities(prefs, state_.current_epsilon);
  }

  double current_epsilon() const noexcept { return state_.current_epsilon; }
  const PolicyConfig& config() const noexcept { return config_; }
  const PolicyState& state() const noexcept { return state_; }

 private:
  PolicyConfig config_;
  PolicyState state_;
};

}  // namespace linrl
