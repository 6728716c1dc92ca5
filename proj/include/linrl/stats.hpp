#pragma once

// Cross-algorithm comparison metrics over trial summaries: trimmed relative
// performance against a baseline, quartiles of per-game SDs, pairwise win
// counts, Pearson correlation of paired trials, and convergence rates.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "linrl/error.hpp"
#include "linrl/harness.hpp"

namespace linrl {

struct GameAlgoSummary {
  std::string environment;
  std::string algorithm;
  /// Test means of finished trials, ordered by (seed, mean), with their seeds.
  std::vector<double> trial_means;
  std::vector<std::uint64_t> seeds;
  double mean = 0.0;
  double sd = 0.0;
  int converged = 0;
  int finished = 0;
  int total = 0;
  int diverged = 0;
  int stalled = 0;
};

using SummaryKey = std::pair<std::string, std::string>;  // (environment, algorithm)

inline std::map<SummaryKey, GameAlgoSummary> summarize(std::span<const TrialSummary> trials) {
  std::map<SummaryKey, GameAlgoSummary> out;
  for (const auto& t : trials) {
    auto& g = out[{t.environment, t.algorithm}];
    g.environment = t.environment;
    g.algorithm = t.algorithm;
    ++g.total;
    if (t.diverged) ++g.diverged;
    else if (t.stalled) ++g.stalled;
    if (!t.finished()) continue;
    ++g.finished;
    if (t.converged) ++g.converged;
    g.trial_means.push_back(t.test_mean);
    g.seeds.push_back(t.seed);
  }
  for (auto& [key, g] : out) {
    std::vector<std::pair<std::uint64_t, double>> order;
    for (std::size_t i = 0; i < g.seeds.size(); ++i) order.emplace_back(g.seeds[i], g.trial_means[i]);
    std::sort(order.begin(), order.end());
    for (std::size_t i = 0; i < order.size(); ++i) std::tie(g.seeds[i], g.trial_means[i]) = order[i];
    const MeanSd m = mean_sd(g.trial_means);
    g.mean = m.mean;
    g.sd = m.sd;
  }
  return out;
}

/// Per-environment mean test reward of one algorithm over finished trials.
inline std::map<std::string, double> game_means(const std::map<SummaryKey, GameAlgoSummary>& s,
                                                const std::string& algorithm) {
  std::map<std::string, double> out;
  for (const auto& [key, g] : s)
    if (key.second == algorithm && g.finished > 0) out[key.first] = g.mean;
  return out;
}

// ---------------------------------------------------------------------------

struct RelativePerformance {
  double value = 0.0;
  /// Environments whose ratio entered the trimmed mean (before trimming).
  std::vector<std::string> used;
  /// Environments skipped because the baseline mean was zero.
  std::vector<std::string> zero_baseline;
  std::size_t trimmed_per_tail = 0;
};

/// Entries dropped from each tail for the middle-90% mean: ceil(5% of n),
/// reduced so at least one entry remains.
inline std::size_t trim_count(std::size_t n) {
  if (n == 0) return 0;
  const auto k = static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(n)));
  return std::min(k, (n - 1) / 2);
}

/// Mean of per-environment ratios mean_x / mean_baseline over the middle
/// 90% of environments.
inline RelativePerformance relative_performance(const std::map<std::string, double>& x,
                                                const std::map<std::string, double>& baseline) {
  RelativePerformance out;
  std::vector<double> ratios;
  bool any_common = false;
  for (const auto& [env, bx] : baseline) {
    const auto it = x.find(env);
    if (it == x.end()) continue;
    any_common = true;
    if (bx == 0.0) {
      out.zero_baseline.push_back(env);
      continue;
    }
    ratios.push_back(it->second / bx);
    out.used.push_back(env);
  }
  if (!any_common) throw UsageError("no environments in common with the baseline");
  if (ratios.empty()) throw UsageError("every common environment has a zero baseline mean");
  std::sort(ratios.begin(), ratios.end());
  const std::size_t k = trim_count(ratios.size());
  out.trimmed_per_tail = k;
  double sum = 0.0;
  for (std::size_t i = k; i < ratios.size() - k; ++i) sum += ratios[i];
  out.value = sum / static_cast<double>(ratios.size() - 2 * k);
  return out;
}

struct Quartiles {
  double q1 = 0.0;
  double q2 = 0.0;
  double q3 = 0.0;
};

/// Quantile by linear interpolation between order statistics (position
/// (n-1)p in the sorted data).
inline double quantile_sorted(std::span<const double> sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline Quartiles sd_quartiles(std::span<const double> sds) {
  if (sds.empty()) throw UsageError("quartiles of an empty set");
  std::vector<double> v(sds.begin(), sds.end());
  std::sort(v.begin(), v.end());
  return {quantile_sorted(v, 0.25), quantile_sorted(v, 0.5), quantile_sorted(v, 0.75)};
}

struct WinLoss {
  int wins = 0;
  int losses = 0;

  bool operator==(const WinLoss&) const = default;
};

/// Counts environments (present in both maps) where a beats b and where b
/// beats a. Exact ties count for neither.
inline WinLoss pairwise_wins(const std::map<std::string, double>& a, const std::map<std::string, double>& b) {
  WinLoss out;
  for (const auto& [env, va] : a) {
    const auto it = b.find(env);
    if (it == b.end()) continue;
    if (va > it->second) ++out.wins;
    else if (va < it->second) ++out.losses;
  }
  return out;
}

inline std::string format_win_loss(const WinLoss& w) {
  return std::to_string(w.wins) + "/" + std::to_string(w.losses);
}

/// Pearson correlation; nullopt for fewer than two pairs or zero variance.
inline std::optional<double> correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("correlation needs paired series");
  const std::size_t n = a.size();
  if (n < 2) return std::nullopt;
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

/// 100 * converged / finished, where finished excludes diverged and stalled
/// trials. nullopt when nothing finished.
inline std::optional<double> convergence_rate(std::span<const TrialSummary> trials) {
  int finished = 0, converged = 0;
  for (const auto& t : trials) {
    if (!t.finished()) continue;
    ++finished;
    if (t.converged) ++converged;
  }
  if (finished == 0) return std::nullopt;
  return 100.0 * converged / finished;
}

/// Paired per-trial test means of two algorithms: trials matched on
/// (environment, seed) where both finished.
inline std::pair<std::vector<double>, std::vector<double>> paired_trials(std::span<const TrialSummary> trials,
                                                                         const std::string& a, const std::string& b) {
  std::map<std::pair<std::string, std::uint64_t>, double> va, vb;
  for (const auto& t : trials) {
    if (!t.finished()) continue;
    if (t.algorithm == a) va[{t.environment, t.seed}] = t.test_mean;
    if (t.algorithm == b) vb[{t.environment, t.seed}] = t.test_mean;
  }
  std::pair<std::vector<double>, std::vector<double>> out;
  for (const auto& [k, x] : va) {
    const auto it = vb.find(k);
    if (it == vb.end()) continue;
    out.first.push_back(x);
    out.second.push_back(it->second);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report

struct AlgorithmRow {
  std::string algorithm;
  std::optional<RelativePerformance> relative;
  std::optional<Quartiles> sd_quartiles;
  std::optional<double> convergence_pct;
  int trials = 0;
  int diverged = 0;
  int stalled = 0;
};

struct ComparisonReport {
  std::string baseline;
  std::vector<std::string> algorithms;
  std::vector<AlgorithmRow> rows;
  /// wins[i][j]: algorithm i against algorithm j.
  std::vector<std::vector<WinLoss>> wins;
  std::vector<std::vector<std::optional<double>>> correlations;
  std::vector<std::string> warnings;
};

inline ComparisonReport build_report(std::span<const TrialSummary> trials, const std::string& baseline) {
  ComparisonReport rep;
  rep.baseline = baseline;
  std::set<std::string> algos;
  for (const auto& t : trials) algos.insert(t.algorithm);
  if (algos.size() < 2) throw UsageError("comparison needs results for at least two algorithms");
  if (!algos.count(baseline)) throw UsageError("baseline algorithm '" + baseline + "' has no results");
  // Baseline first, the rest in name order.
  rep.algorithms.push_back(baseline);
  for (const auto& a : algos)
    if (a != baseline) rep.algorithms.push_back(a);

  const auto summaries = summarize(trials);
  const auto base_means = game_means(summaries, baseline);
  for (const auto& a : rep.algorithms) {
    const auto means = game_means(summaries, a);
    bool overlap = false;
    for (const auto& [env, m] : means) overlap = overlap || base_means.count(env);
    if (overlap) continue;
    auto names = [](const std::map<std::string, double>& m) {
      std::string s;
      for (const auto& [env, v] : m) s += (s.empty() ? "" : ", ") + env;
      return s.empty() ? std::string("none") : s;
    };
    throw UsageError("no overlapping environments between '" + a + "' (" + names(means) + ") and baseline '" +
                     baseline + "' (" + names(base_means) + ")");
  }
  for (const auto& a : rep.algorithms) {
    AlgorithmRow row;
    row.algorithm = a;
    std::vector<TrialSummary> own;
    for (const auto& t : trials)
      if (t.algorithm == a) own.push_back(t);
    row.trials = static_cast<int>(own.size());
    for (const auto& t : own) {
      if (t.diverged) ++row.diverged;
      else if (t.stalled) ++row.stalled;
    }
    row.convergence_pct = convergence_rate(own);
    const auto means = game_means(summaries, a);
    try {
      row.relative = relative_performance(means, base_means);
      for (const auto& env : row.relative->zero_baseline)
        rep.warnings.push_back(a + ": environment '" + env + "' excluded (zero baseline mean)");
    } catch (const UsageError& e) {
      rep.warnings.push_back(a + ": " + e.what());
    }
    std::vector<double> sds;
    for (const auto& [key, g] : summaries)
      if (key.second == a && g.finished > 0) sds.push_back(g.sd);
    if (!sds.empty()) row.sd_quartiles = sd_quartiles(sds);
    rep.rows.push_back(std::move(row));
  }

  const std::size_t n = rep.algorithms.size();
  rep.wins.assign(n, std::vector<WinLoss>(n));
  rep.correlations.assign(n, std::vector<std::optional<double>>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto mi = game_means(summaries, rep.algorithms[i]);
    for (std::size_t j = 0; j < n; ++j) {
      const auto mj = game_means(summaries, rep.algorithms[j]);
      if (i != j) rep.wins[i][j] = pairwise_wins(mi, mj);
      const auto [x, y] = paired_trials(trials, rep.algorithms[i], rep.algorithms[j]);
      rep.correlations[i][j] = correlation(x, y);
    }
  }
  return rep;
}

namespace detail {
inline std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline void write_table(std::ostream& out, const std::vector<std::vector<std::string>>& cells) {
  std::vector<std::size_t> width;
  for (const auto& row : cells) {
    if (width.size() < row.size()) width.resize(row.size(), 0);
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  for (const auto& row : cells) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) line += "  ";
      line += row[c];
      if (c + 1 < row.size()) line.append(width[c] - row[c].size(), ' ');
    }
    out << line << '\n';
  }
}
}  // namespace detail

/// Aligned plain-text tables: relative performance with SD quartiles,
/// pairwise wins/losses, correlations, convergence rates.
inline void write_report_text(std::ostream& out, const ComparisonReport& rep) {
  using detail::fixed2;
  const std::string na = "-";
  out << "Relative performance (baseline " << rep.baseline << ") and test-reward SD quartiles\n";
  std::vector<std::vector<std::string>> t1{{"", "Rel.", "Q1", "Q2", "Q3"}};
  for (const auto& r : rep.rows) {
    t1.push_back({r.algorithm, r.relative ? fixed2(r.relative->value) : na,
                  r.sd_quartiles ? fixed2(r.sd_quartiles->q1) : na, r.sd_quartiles ? fixed2(r.sd_quartiles->q2) : na,
                  r.sd_quartiles ? fixed2(r.sd_quartiles->q3) : na});
  }
  detail::write_table(out, t1);

  out << "\nPairwise wins/losses (row vs column, environments with higher mean test reward)\n";
  std::vector<std::vector<std::string>> t2{{""}};
  for (const auto& a : rep.algorithms) t2[0].push_back(a);
  for (std::size_t i = 0; i < rep.algorithms.size(); ++i) {
    std::vector<std::string> row{rep.algorithms[i]};
    for (std::size_t j = 0; j < rep.algorithms.size(); ++j)
      row.push_back(i == j ? na : format_win_loss(rep.wins[i][j]));
    t2.push_back(std::move(row));
  }
  detail::write_table(out, t2);

  out << "\nCorrelation of paired trial test means (trials both methods finished)\n";
  std::vector<std::vector<std::string>> t3{{""}};
  for (const auto& a : rep.algorithms) t3[0].push_back(a);
  for (std::size_t i = 0; i < rep.algorithms.size(); ++i) {
    std::vector<std::string> row{rep.algorithms[i]};
    for (std::size_t j = 0; j < rep.algorithms.size(); ++j)
      row.push_back(rep.correlations[i][j] ? fixed2(*rep.correlations[i][j]) : na);
    t3.push_back(std::move(row));
  }
  detail::write_table(out, t3);

  out << "\nConvergence (last 500 vs preceding 500 training episodes within 10%)\n";
  std::vector<std::vector<std::string>> t4{{"", "Converged %", "Trials", "Diverged*", "Stalled*"}};
  for (const auto& r : rep.rows) {
    char pct[32] = "-";
    if (r.convergence_pct) std::snprintf(pct, sizeof pct, "%.0f%%", *r.convergence_pct);
    t4.push_back({r.algorithm, pct, std::to_string(r.trials), std::to_string(r.diverged), std::to_string(r.stalled)});
  }
  detail::write_table(out, t4);
  int excluded = 0;
  for (const auto& r : rep.rows) excluded += r.diverged + r.stalled;
  out << "* " << excluded << " trial(s) excluded from all statistics (diverged or stalled).\n";
  for (const auto& w : rep.warnings) out << "warning: " << w << '\n';
}

/// Long-format CSV: table,row,column,value.
inline void write_report_csv(std::ostream& out, const ComparisonReport& rep) {
  out << "table,row,column,value\n";
  auto opt = [](const std::optional<double>& v) { return v ? format_real(*v) : std::string(); };
  for (const auto& r : rep.rows) {
    out << "relative_performance," << r.algorithm << ",rel," << (r.relative ? format_real(r.relative->value) : "")
        << '\n';
    out << "sd_quartiles," << r.algorithm << ",q1," << (r.sd_quartiles ? format_real(r.sd_quartiles->q1) : "") << '\n';
    out << "sd_quartiles," << r.algorithm << ",q2," << (r.sd_quartiles ? format_real(r.sd_quartiles->q2) : "") << '\n';
    out << "sd_quartiles," << r.algorithm << ",q3," << (r.sd_quartiles ? format_real(r.sd_quartiles->q3) : "") << '\n';
    out << "convergence," << r.algorithm << ",percent," << opt(r.convergence_pct) << '\n';
    out << "convergence," << r.algorithm << ",diverged," << r.diverged << '\n';
    out << "convergence," << r.algorithm << ",stalled," << r.stalled << '\n';
  }
  for (std::size_t i = 0; i < rep.algorithms.size(); ++i) {
    for (std::size_t j = 0; j < rep.algorithms.size(); ++j) {
      if (i != j)
        out << "pairwise," << rep.algorithms[i] << ',' << rep.algorithms[j] << ',' << format_win_loss(rep.wins[i][j])
            << '\n';
      out << "correlation," << rep.algorithms[i] << ',' << rep.algorithms[j] << ',' << opt(rep.correlations[i][j])
          << '\n';
    }
  }
}

}  // namespace linrl
