#pragma once

// Linear learners over sparse features with replacing eligibility traces:
// SARSA, Q, ETTR (expected time to reward), R (average reward), GQ and a
// linear actor-critic. The TD-error and update rules are free functions so
// they can be checked in isolation; LinearAgent glues them to an episode loop.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "linrl/error.hpp"
#include "linrl/exploration.hpp"
#include "linrl/features.hpp"
#include "linrl/random.hpp"

namespace linrl {

enum class Algorithm { sarsa, q, ettr, r, gq, ac };

inline constexpr Algorithm kAllAlgorithms[] = {Algorithm::sarsa, Algorithm::q,  Algorithm::ettr,
                                               Algorithm::r,     Algorithm::gq, Algorithm::ac};

inline std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::sarsa: return "sarsa";
    case Algorithm::q: return "q";
    case Algorithm::ettr: return "ettr";
    case Algorithm::r: return "r";
    case Algorithm::gq: return "gq";
    case Algorithm::ac: return "ac";
  }
  return "?";
}

inline Algorithm parse_algorithm(std::string_view s) {
  for (auto a : kAllAlgorithms)
    if (s == to_string(a)) return a;
  throw UsageError("unknown algorithm '" + std::string(s) + "' (valid: sarsa, q, ettr, r, gq, ac)");
}

/// Q and GQ learn about the greedy policy; R-learning is also off-policy.
inline bool is_off_policy(Algorithm a) { return a == Algorithm::q || a == Algorithm::gq || a == Algorithm::r; }

/// ETTR and R-learning are undiscounted.
inline bool is_discounted(Algorithm a) { return a != Algorithm::ettr && a != Algorithm::r; }

struct Hyperparams {
  double alpha = 0.1;
  /// R: rho rate. GQ: w rate. AC: actor rate.
  double beta = 0.01;
  double gamma = 0.993;
  double lambda = 0.5;
  /// Divide alpha (and the GQ/AC beta) by the number of active features.
  bool normalize_alpha = true;
  /// Step size after n updates is base / (1 + decay * n).
  double alpha_decay = 0.0;
  double beta_decay = 0.0;
  /// Trace entries that decay below this are dropped.
  double trace_threshold = 1e-8;
  /// Q: zero the traces after an exploratory action.
  bool watkins_cut = false;
  /// ETTR: bootstrap value for a terminal step without positive reward.
  double ettr_terminal_value = 10000.0;
  double divergence_threshold = 1e10;

  bool operator==(const Hyperparams&) const = default;
};

inline void validate(const Hyperparams& h) {
  if (!(h.alpha > 0.0)) throw UsageError("alpha must be > 0");
  if (!(h.beta >= 0.0)) throw UsageError("beta must be >= 0");
  if (!(h.gamma >= 0.0 && h.gamma <= 1.0)) throw UsageError("gamma must lie in [0,1]");
  if (!(h.lambda >= 0.0 && h.lambda <= 1.0)) throw UsageError("lambda must lie in [0,1]");
  if (!(h.alpha_decay >= 0.0 && h.beta_decay >= 0.0)) throw UsageError("step-size decay must be >= 0");
  if (!(h.trace_threshold >= 0.0)) throw UsageError("trace threshold must be >= 0");
}

// ---------------------------------------------------------------------------
// Traces

/// Dense trace values plus the list of nonzero entries, so decay and weight
/// updates cost O(nonzero) instead of O(dimension).
class TraceVector {
 public:
  TraceVector() = default;
  explicit TraceVector(std::size_t n) : values_(n, 0.0) {}

  static TraceVector from_dense(std::vector<double> values) {
    TraceVector t;
    t.values_ = std::move(values);
    for (std::size_t i = 0; i < t.values_.size(); ++i)
      if (t.values_[i] != 0.0) t.nonzero_.push_back(static_cast<std::uint32_t>(i));
    return t;
  }

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  std::span<const double> values() const noexcept { return values_; }
  const std::vector<std::uint32_t>& nonzero() const noexcept { return nonzero_; }

  void clear() {
    for (auto i : nonzero_) values_[i] = 0.0;
    nonzero_.clear();
  }

  /// Replacing update: active entries take the feature value (1 for binary
  /// features); all others are multiplied by `decay`.
  void replace(const SparseFeatures& phi, double decay, double threshold) {
    if (phi.dimension() != values_.size())
      throw DimensionError("trace length " + std::to_string(values_.size()) + " != feature dimension " +
                           std::to_string(phi.dimension()));
    std::size_t kept = 0;
    for (auto i : nonzero_) {
      double v = values_[i] * decay;
      if (std::abs(v) < threshold) v = 0.0;
      values_[i] = v;
      if (v != 0.0) nonzero_[kept++] = i;
    }
    nonzero_.resize(kept);
    const auto& idx = phi.active();
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const double v = phi.value(k);
      if (v == 0.0) continue;
      if (values_[idx[k]] == 0.0) nonzero_.push_back(idx[k]);
      values_[idx[k]] = v;
    }
  }

  /// Inner product with a weight vector over the nonzero entries.
  double dot(const WeightVector& w) const {
    double s = 0.0;
    for (auto i : nonzero_) s += values_[i] * w[i];
    return s;
  }

 private:
  std::vector<double> values_;
  std::vector<std::uint32_t> nonzero_;
};

inline TraceVector update_traces(TraceVector trace, const SparseFeatures& phi, double gamma, double lambda,
                                 double threshold = 1e-8) {
  trace.replace(phi, gamma * lambda, threshold);
  return trace;
}

// ---------------------------------------------------------------------------
// TD errors

inline double sarsa_delta(double r, double q_next, double q_cur, double gamma, bool terminal) {
  return r + (terminal ? 0.0 : gamma * q_next) - q_cur;
}

inline double q_delta(double r, std::span<const double> q_next_all, double q_cur, double gamma, bool terminal) {
  if (q_next_all.empty() && !terminal) throw UsageError("Q-learning target over an empty action set");
  const double best = terminal ? 0.0 : *std::max_element(q_next_all.begin(), q_next_all.end());
  return r + gamma * best - q_cur;
}

/// Steps-to-next-positive-reward error. A terminal step without reward
/// bootstraps `terminal_value` instead of the successor estimate.
inline double ettr_delta(double r_next, double q_cur, double q_next, bool terminal = false,
                         double terminal_value = 10000.0) {
  if (r_next > 0.0) return -q_cur;
  return -q_cur + 1.0 + (terminal ? terminal_value : q_next);
}

inline double r_delta(double r, double rho, double max_q_next, double q_cur) { return r - rho + max_q_next - q_cur; }

/// Average-reward estimate; only moves when the action taken was greedy.
inline double rho_update(double rho, double beta, double r, double max_q_next, double max_q_cur, bool was_greedy) {
  if (!was_greedy) return rho;
  return rho + beta * (r - rho + max_q_next - max_q_cur);
}

// ---------------------------------------------------------------------------
// Weight updates

struct UpdateReport {
  /// Every written weight is finite.
  bool finite = true;
  /// Largest magnitude among written weights.
  double max_abs = 0.0;
  /// Number of weights written.
  std::size_t touched = 0;

  void merge(const UpdateReport& o) {
    finite = finite && o.finite;
    max_abs = std::max(max_abs, o.max_abs);
    touched += o.touched;
  }
};

namespace detail {
inline void note(UpdateReport& rep, double v) {
  if (!std::isfinite(v)) rep.finite = false;
  rep.max_abs = std::max(rep.max_abs, std::abs(v));
  ++rep.touched;
}
}  // namespace detail

/// theta += alpha_eff * delta * e, visiting only nonzero trace entries.
inline UpdateReport apply_update(WeightVector& theta, double alpha_eff, double delta, const TraceVector& trace) {
  if (theta.size() != trace.size()) throw DimensionError("weight and trace lengths differ");
  UpdateReport rep;
  if (!std::isfinite(delta)) rep.finite = false;
  const double scale = alpha_eff * delta;
  const auto e = trace.values();
  for (auto i : trace.nonzero()) {
    theta[i] += scale * e[i];
    detail::note(rep, theta[i]);
  }
  return rep;
}

/// alpha, optionally divided by the number of active features.
inline double normalized_step(double step, const SparseFeatures& phi, bool normalize) {
  if (!normalize || phi.empty()) return step;
  return step / static_cast<double>(phi.size());
}

// ---------------------------------------------------------------------------
// Agent state

struct AgentState {
  Algorithm algorithm = Algorithm::sarsa;
  Hyperparams hyper;
  WeightVector theta;
  /// GQ: secondary weights w. AC: critic weights nu.
  std::optional<WeightVector> aux;
  TraceVector trace;
  double rho = 0.0;
  std::optional<SparseFeatures> last_phi;
  int last_action = -1;
  bool last_was_greedy = false;
  /// State-action features of the state where last_action was chosen.
  std::vector<SparseFeatures> last_state_phis;
  /// Number of learning updates so far; drives step-size decay.
  std::uint64_t updates = 0;
};

inline AgentState make_agent_state(Algorithm algorithm, const Hyperparams& hyper, WeightVector initial_theta) {
  validate(hyper);
  AgentState s;
  s.algorithm = algorithm;
  s.hyper = hyper;
  const std::size_t n = initial_theta.size();
  if (n == 0) throw UsageError("weight vector must be non-empty");
  if (algorithm == Algorithm::gq) s.aux = WeightVector(n, 0.0);
  if (algorithm == Algorithm::ac) s.aux = initial_theta;  // critic starts at the same values
  s.theta = std::move(initial_theta);
  s.trace = TraceVector(n);
  return s;
}

inline double current_alpha(const AgentState& s) {
  return s.hyper.alpha / (1.0 + s.hyper.alpha_decay * static_cast<double>(s.updates));
}

inline double current_beta(const AgentState& s) {
  return s.hyper.beta / (1.0 + s.hyper.beta_decay * static_cast<double>(s.updates));
}

/// GQ update. Updates the trace with phi_cur, then
///   delta = r + gamma * expected_q_next - <theta, phi_cur>
///   theta += alpha (delta e - gamma (1 - lambda) <w, e> expected_phi_next)
///   w     += beta  (delta e - <w, phi_cur> phi_cur)
/// expected_phi_next is the target-policy expectation of the successor
/// features (all zero after a terminal step).
inline UpdateReport gq_step(AgentState& s, const SparseFeatures& phi_cur, double r,
                            const SparseFeatures& expected_phi_next, double expected_q_next, double* delta_out = nullptr) {
  if (s.algorithm != Algorithm::gq || !s.aux) throw UsageError("gq_step needs a GQ agent with secondary weights");
  auto& w = *s.aux;
  if (phi_cur.dimension() != s.theta.size() || expected_phi_next.dimension() != s.theta.size())
    throw DimensionError("GQ feature dimensions do not match weights");
  const double gamma = s.hyper.gamma;
  const double lambda = s.hyper.lambda;
  s.trace.replace(phi_cur, gamma * lambda, s.hyper.trace_threshold);

  const double delta = r + gamma * expected_q_next - dot(s.theta, phi_cur);
  const double w_dot_e = s.trace.dot(w);
  const double w_dot_phi = dot(w, phi_cur);
  const double alpha = normalized_step(current_alpha(s), phi_cur, s.hyper.normalize_alpha);
  const double beta = normalized_step(current_beta(s), phi_cur, s.hyper.normalize_alpha);

  UpdateReport rep = apply_update(s.theta, alpha, delta, s.trace);
  const double correction = alpha * gamma * (1.0 - lambda) * w_dot_e;
  if (correction != 0.0) {
    const auto& idx = expected_phi_next.active();
    for (std::size_t k = 0; k < idx.size(); ++k) {
      s.theta[idx[k]] -= correction * expected_phi_next.value(k);
      detail::note(rep, s.theta[idx[k]]);
    }
  }
  rep.merge(apply_update(w, beta, delta, s.trace));
  const auto& idx = phi_cur.active();
  for (std::size_t k = 0; k < idx.size(); ++k) {
    w[idx[k]] -= beta * w_dot_phi * phi_cur.value(k);
    detail::note(rep, w[idx[k]]);
  }
  if (!std::isfinite(delta)) rep.finite = false;
  if (delta_out) *delta_out = delta;
  return rep;
}

/// Actor-critic update. Updates the trace with phi_cur, then
/// critic nu += alpha delta e, actor theta += beta delta e.
inline UpdateReport ac_step(AgentState& s, const SparseFeatures& phi_cur, double delta) {
  if (!s.aux) throw UsageError("ac_step needs a critic weight vector");
  s.trace.replace(phi_cur, s.hyper.gamma * s.hyper.lambda, s.hyper.trace_threshold);
  const double alpha = normalized_step(current_alpha(s), phi_cur, s.hyper.normalize_alpha);
  const double beta = normalized_step(current_beta(s), phi_cur, s.hyper.normalize_alpha);
  UpdateReport rep = apply_update(*s.aux, alpha, delta, s.trace);
  rep.merge(apply_update(s.theta, beta, delta, s.trace));
  return rep;
}

/// Expected features sum_a pi(a) phi(s, a) as a weighted sparse vector.
inline SparseFeatures expected_features(std::span<const SparseFeatures> phi_by_action,
                                        std::span<const double> probabilities) {
  if (phi_by_action.size() != probabilities.size()) throw DimensionError("one probability per action expected");
  if (phi_by_action.empty()) return {};
  const std::size_t dim = phi_by_action.front().dimension();
  std::vector<std::pair<std::uint32_t, double>> entries;
  for (std::size_t a = 0; a < phi_by_action.size(); ++a) {
    if (probabilities[a] == 0.0) continue;
    const auto& phi = phi_by_action[a];
    for (std::size_t k = 0; k < phi.size(); ++k) entries.emplace_back(phi.active()[k], probabilities[a] * phi.value(k));
  }
  std::sort(entries.begin(), entries.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  std::vector<std::uint32_t> idx;
  std::vector<double> val;
  for (const auto& [i, v] : entries) {
    if (!idx.empty() && idx.back() == i) {
      val.back() += v;
    } else {
      idx.push_back(i);
      val.push_back(v);
    }
  }
  return SparseFeatures(dim, std::move(idx), std::move(val));
}

// ---------------------------------------------------------------------------
// Agent

struct StepOutcome {
  /// Next action (-1 after a terminal step).
  int action = -1;
  double delta = 0.0;
  /// A weight became non-finite or exceeded the divergence threshold.
  bool diverged = false;
  UpdateReport report;
};

class LinearAgent {
 public:
  LinearAgent(Algorithm algorithm, const Hyperparams& hyper, WeightVector initial_theta)
      : s_(make_agent_state(algorithm, hyper, std::move(initial_theta))) {}

  explicit LinearAgent(AgentState state) : s_(std::move(state)) {}

  const AgentState& state() const noexcept { return s_; }
  AgentState& state() noexcept { return s_; }
  Algorithm algorithm() const noexcept { return s_.algorithm; }

  /// Value estimates per action (critic weights for actor-critic).
  std::vector<double> action_values(std::span<const SparseFeatures> phis) const {
    const WeightVector& v = (s_.algorithm == Algorithm::ac) ? *s_.aux : s_.theta;
    std::vector<double> q(phis.size());
    for (std::size_t a = 0; a < phis.size(); ++a) q[a] = dot(v, phis[a]);
    return q;
  }

  /// Values the policy maximizes: negated step counts for ETTR, actor
  /// preferences for actor-critic, Q values otherwise.
  std::vector<double> preferences(std::span<const SparseFeatures> phis) const {
    std::vector<double> p(phis.size());
    for (std::size_t a = 0; a < phis.size(); ++a) p[a] = dot(s_.theta, phis[a]);
    if (s_.algorithm == Algorithm::ettr)
      for (auto& x : p) x = -x;
    return p;
  }

  /// Starts an episode: clears traces and chooses the first action. No
  /// weights change.
  int begin_episode(std::vector<SparseFeatures> phi_by_action, ExplorationPolicy& policy, Rng& rng) {
    if (phi_by_action.empty()) throw UsageError("no actions available");
    s_.trace.clear();
    const auto prefs = preferences(phi_by_action);
    const Selection sel = policy.select(prefs, rng);
    remember(std::move(phi_by_action), sel);
    return sel.action;
  }

  /// Consumes the transition (last_phi, last_action) -> (reward, next
  /// state), picks the next action, and (when `learn`) applies the
  /// algorithm's update. After a terminal step the traces are reset and the
  /// returned action is -1.
  StepOutcome step(std::vector<SparseFeatures> phi_next_by_action, double reward, bool terminal,
                   ExplorationPolicy& policy, Rng& rng, bool learn = true) {
    if (!s_.last_phi) throw UsageError("step() before begin_episode()");
    if (!terminal && phi_next_by_action.empty()) throw UsageError("no actions available");
    StepOutcome out;
    Selection sel;
    std::vector<double> prefs_next;
    if (!terminal) {
      prefs_next = preferences(phi_next_by_action);
      sel = policy.select(prefs_next, rng);
      out.action = sel.action;
    }
    if (learn) learn_from(phi_next_by_action, prefs_next, sel, reward, terminal, policy, out);

    if (terminal) {
      s_.trace.clear();
      s_.last_phi.reset();
      s_.last_action = -1;
      s_.last_state_phis.clear();
    } else {
      remember(std::move(phi_next_by_action), sel);
    }
    return out;
  }

 private:
  void remember(std::vector<SparseFeatures> phis, const Selection& sel) {
    s_.last_phi = phis[static_cast<std::size_t>(sel.action)];
    s_.last_action = sel.action;
    s_.last_was_greedy = sel.was_greedy;
    if (s_.algorithm == Algorithm::r) s_.last_state_phis = std::move(phis);
  }

  void learn_from(const std::vector<SparseFeatures>& phi_next, const std::vector<double>& prefs_next,
                  const Selection& sel, double r, bool terminal, ExplorationPolicy& policy, StepOutcome& out) {
    const SparseFeatures& phi = *s_.last_phi;
    const Hyperparams& h = s_.hyper;
    UpdateReport rep;
    double delta = 0.0;

    switch (s_.algorithm) {
      case Algorithm::sarsa:
      case Algorithm::q:
      case Algorithm::ettr:
      case Algorithm::r: {
        const double q_cur = dot(s_.theta, phi);
        const std::vector<double> q_next = terminal ? std::vector<double>{} : action_values(phi_next);
        const double q_sel = terminal ? 0.0 : q_next[static_cast<std::size_t>(sel.action)];
        double trace_gamma = h.gamma;
        if (s_.algorithm == Algorithm::sarsa) {
          delta = sarsa_delta(r, q_sel, q_cur, h.gamma, terminal);
        } else if (s_.algorithm == Algorithm::q) {
          delta = q_delta(r, q_next, q_cur, h.gamma, terminal);
        } else if (s_.algorithm == Algorithm::ettr) {
          delta = ettr_delta(r, q_cur, q_sel, terminal, h.ettr_terminal_value);
          trace_gamma = 1.0;
        } else {
          const double max_next = terminal ? 0.0 : *std::max_element(q_next.begin(), q_next.end());
          delta = r_delta(r, s_.rho, max_next, q_cur);
          const auto q_here = action_values(s_.last_state_phis);
          const double max_cur = *std::max_element(q_here.begin(), q_here.end());
          s_.rho = rho_update(s_.rho, current_beta(s_), r, max_next, max_cur, s_.last_was_greedy);
          trace_gamma = 1.0;
        }
        s_.trace.replace(phi, trace_gamma * h.lambda, h.trace_threshold);
        rep = apply_update(s_.theta, normalized_step(current_alpha(s_), phi, h.normalize_alpha), delta, s_.trace);
        if (s_.algorithm == Algorithm::q && h.watkins_cut && !terminal && !sel.was_greedy) s_.trace.clear();
        if (!std::isfinite(s_.rho)) rep.finite = false;
        break;
      }
      case Algorithm::gq: {
        SparseFeatures expected(phi.dimension(), {});
        double expected_q = 0.0;
        if (!terminal) {
          const auto pi = policy.probabilities(prefs_next);
          expected = expected_features(phi_next, pi);
          expected_q = dot(s_.theta, expected);
        }
        rep = gq_step(s_, phi, r, expected, expected_q, &delta);
        break;
      }
      case Algorithm::ac: {
        const double q_cur = dot(*s_.aux, phi);
        const double q_sel = terminal ? 0.0 : dot(*s_.aux, phi_next[static_cast<std::size_t>(sel.action)]);
        delta = sarsa_delta(r, q_sel, q_cur, h.gamma, terminal);
        rep = ac_step(s_, phi, delta);
        break;
      }
    }
    ++s_.updates;
    if (!std::isfinite(delta)) rep.finite = false;
    out.delta = delta;
    out.report = rep;
    out.diverged = !rep.finite || rep.max_abs > h.divergence_threshold;
  }

  AgentState s_;
};

// ---------------------------------------------------------------------------
// Checkpoints
//
// Text format, one item per line:
//   linrl-checkpoint 1
//   algorithm <name>
//   dimension <n>
//   alpha|beta|gamma|lambda|alpha_decay|beta_decay|trace_threshold|
//   ettr_terminal_value|divergence_threshold <value>
//   normalize_alpha|watkins_cut <0|1>
//   rho <value>
//   aux <0|1>
//   theta            followed by n values
//   aux-weights      followed by n values (only when aux is 1)
//   end
// Reals use 17 significant digits so values round-trip exactly.

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_real(const std::string& s) {
  if (s.empty()) throw FormatError("empty numeric field");
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) throw FormatError("invalid number '" + s + "'");
  return v;
}

inline void write_checkpoint(std::ostream& out, const AgentState& s) {
  const auto& h = s.hyper;
  out << "linrl-checkpoint 1\n";
  out << "algorithm " << to_string(s.algorithm) << '\n';
  out << "dimension " << s.theta.size() << '\n';
  out << "alpha " << format_real(h.alpha) << '\n';
  out << "beta " << format_real(h.beta) << '\n';
  out << "gamma " << format_real(h.gamma) << '\n';
  out << "lambda " << format_real(h.lambda) << '\n';
  out << "alpha_decay " << format_real(h.alpha_decay) << '\n';
  out << "beta_decay " << format_real(h.beta_decay) << '\n';
  out << "trace_threshold " << format_real(h.trace_threshold) << '\n';
  out << "ettr_terminal_value " << format_real(h.ettr_terminal_value) << '\n';
  out << "divergence_threshold " << format_real(h.divergence_threshold) << '\n';
  out << "normalize_alpha " << (h.normalize_alpha ? 1 : 0) << '\n';
  out << "watkins_cut " << (h.watkins_cut ? 1 : 0) << '\n';
  out << "rho " << format_real(s.rho) << '\n';
  out << "aux " << (s.aux ? 1 : 0) << '\n';
  out << "theta\n";
  for (double v : s.theta.values()) out << format_real(v) << '\n';
  if (s.aux) {
    out << "aux-weights\n";
    for (double v : s.aux->values()) out << format_real(v) << '\n';
  }
  out << "end\n";
}

inline AgentState read_checkpoint(std::istream& in) {
  std::string line;
  auto next = [&](const char* what) {
    if (!std::getline(in, line)) throw FormatError(std::string("checkpoint truncated before ") + what);
    return line;
  };
  auto field = [&](const std::string& key) {
    next(key.c_str());
    if (line.rfind(key + ' ', 0) != 0) throw FormatError("checkpoint expected '" + key + "', got '" + line + "'");
    return line.substr(key.size() + 1);
  };
  if (next("header") != "linrl-checkpoint 1") throw FormatError("not a version 1 checkpoint");
  AgentState s;
  s.algorithm = parse_algorithm(field("algorithm"));
  const std::size_t n = std::stoul(field("dimension"));
  auto& h = s.hyper;
  h.alpha = parse_real(field("alpha"));
  h.beta = parse_real(field("beta"));
  h.gamma = parse_real(field("gamma"));
  h.lambda = parse_real(field("lambda"));
  h.alpha_decay = parse_real(field("alpha_decay"));
  h.beta_decay = parse_real(field("beta_decay"));
  h.trace_threshold = parse_real(field("trace_threshold"));
  h.ettr_terminal_value = parse_real(field("ettr_terminal_value"));
  h.divergence_threshold = parse_real(field("divergence_threshold"));
  h.normalize_alpha = field("normalize_alpha") == "1";
  h.watkins_cut = field("watkins_cut") == "1";
  s.rho = parse_real(field("rho"));
  const bool has_aux = field("aux") == "1";
  auto read_vector = [&](const char* tag) {
    if (next(tag) != tag) throw FormatError(std::string("checkpoint expected '") + tag + "'");
    std::vector<double> v(n);
    for (auto& x : v) x = parse_real(next("weights"));
    return WeightVector(std::move(v));
  };
  s.theta = read_vector("theta");
  if (has_aux) s.aux = read_vector("aux-weights");
  if (next("end") != "end") throw FormatError("checkpoint missing 'end'");
  s.trace = TraceVector(n);
  return s;
}

inline void save_checkpoint(const std::string& path, const AgentState& s) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write checkpoint " + path);
  write_checkpoint(out, s);
}

inline AgentState load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open checkpoint " + path);
  return read_checkpoint(in);
}

}  // namespace linrl
