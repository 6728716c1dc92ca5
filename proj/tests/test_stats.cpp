#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "linrl/stats.hpp"
#include "stats_oracles.hpp"

using namespace linrl;

namespace {

std::map<std::string, double> random_means(Rng& rng, std::size_t games, bool allow_zero = false) {
  std::map<std::string, double> m;
  for (std::size_t g = 0; g < games; ++g) {
    double v = 0.5 + uniform_real(rng) * 100.0;
    if (uniform_index(rng, 2)) v = -v;
    if (allow_zero && uniform_index(rng, 10) == 0) v = 0.0;
    m["g" + std::to_string(g)] = v;
  }
  return m;
}

TrialSummary trial(std::string algo, std::string env, std::uint64_t seed, double mean, bool converged = true,
                   bool diverged = false, bool stalled = false) {
  TrialSummary t;
  t.run_id = algo + "-" + env + "-" + std::to_string(seed);
  t.algorithm = std::move(algo);
  t.environment = std::move(env);
  t.seed = seed;
  t.test_mean = mean;
  t.converged = converged;
  t.diverged = diverged;
  t.stalled = stalled;
  t.train_episodes = 1000;
  t.test_episodes = 10;
  return t;
}

std::map<std::string, double> means_of(std::initializer_list<double> vs) {
  std::map<std::string, double> m;
  int i = 0;
  for (double v : vs) m["g" + std::to_string(i++)] = v;
  return m;
}

}  // namespace

TEST(RelativePerformance, Examples) {
  EXPECT_EQ(relative_performance(means_of({3, 5, 8}), means_of({3, 5, 8})).value, 1.0);
  EXPECT_DOUBLE_EQ(relative_performance(means_of({0.5, 1.0, 1.5}), means_of({1, 1, 1})).value, 1.0);
  const auto single = relative_performance(means_of({4}), means_of({2}));
  EXPECT_EQ(single.value, 2.0);
  EXPECT_EQ(single.trimmed_per_tail, 0u);
  EXPECT_EQ(trim_count(3), 1u);
  EXPECT_EQ(trim_count(2), 0u);
  EXPECT_EQ(trim_count(20), 1u);
  EXPECT_EQ(trim_count(21), 2u);
  EXPECT_EQ(trim_count(55), 3u);
}

TEST(RelativePerformance, ZeroBaselineExcludedAndErrors) {
  const auto r = relative_performance(means_of({2, 9}), means_of({1, 0}));
  EXPECT_EQ(r.value, 2.0);
  EXPECT_EQ(r.zero_baseline, (std::vector<std::string>{"g1"}));
  EXPECT_THROW(relative_performance(means_of({1}), std::map<std::string, double>{{"other", 1.0}}), UsageError);
  EXPECT_THROW(relative_performance(means_of({1}), means_of({0})), UsageError);
}

TEST(RelativePerformance, SelfIsExactlyOne) {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto m = random_means(rng, 1 + uniform_index(rng, 50));
    EXPECT_EQ(relative_performance(m, m).value, 1.0);
  }
}

TEST(RelativePerformance, MatchesOracle) {
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 1 + uniform_index(rng, 50);
    const auto x = random_means(rng, n), b = random_means(rng, n, true);
    bool any = false;
    for (const auto& [k, v] : b) any = any || v != 0.0;
    if (!any) continue;
    EXPECT_NEAR(relative_performance(x, b).value, oracle::trimmed_ratio_mean(x, b), 1e-9);
  }
}

TEST(SdQuartiles, Examples) {
  const Quartiles one = sd_quartiles(std::vector<double>{0.41});
  EXPECT_EQ(one.q1, 0.41);
  EXPECT_EQ(one.q2, 0.41);
  EXPECT_EQ(one.q3, 0.41);
  const Quartiles q = sd_quartiles(std::vector<double>{1, 2, 3, 4});
  EXPECT_DOUBLE_EQ(q.q1, 1.75);
  EXPECT_DOUBLE_EQ(q.q2, 2.5);
  EXPECT_DOUBLE_EQ(q.q3, 3.25);
  EXPECT_THROW(sd_quartiles(std::vector<double>{}), UsageError);
}

TEST(SdQuartiles, MatchesOracleAndIgnoresOrder) {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> v(1 + uniform_index(rng, 50));
    for (auto& x : v) x = uniform_real(rng) * 20.0;
    const Quartiles q = sd_quartiles(v);
    EXPECT_NEAR(q.q1, oracle::quantile(v, 0.25), 1e-9);
    EXPECT_NEAR(q.q2, oracle::quantile(v, 0.50), 1e-9);
    EXPECT_NEAR(q.q3, oracle::quantile(v, 0.75), 1e-9);
    std::shuffle(v.begin(), v.end(), rng);
    const Quartiles s = sd_quartiles(v);
    EXPECT_EQ(s.q1, q.q1);
    EXPECT_EQ(s.q2, q.q2);
    EXPECT_EQ(s.q3, q.q3);
  }
}

TEST(PairwiseWins, Examples) {
  const WinLoss w = pairwise_wins(means_of({1, 2, 3}), means_of({0, 3, 1}));
  EXPECT_EQ(w.wins, 2);
  EXPECT_EQ(w.losses, 1);
  const WinLoss tie = pairwise_wins(means_of({1, 2}), means_of({1, 2}));
  EXPECT_EQ(tie.wins + tie.losses, 0);
  EXPECT_EQ(format_win_loss({49, 5}), "49/5");
}

TEST(PairwiseWins, AntisymmetricAndMatchesOracle) {
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 1 + uniform_index(rng, 50);
    auto a = random_means(rng, n), b = random_means(rng, n);
    for (auto& [k, v] : a)
      if (uniform_index(rng, 5) == 0) v = b[k];
    const WinLoss ab = pairwise_wins(a, b), ba = pairwise_wins(b, a), o = oracle::wins(a, b);
    EXPECT_EQ(ab.wins, ba.losses);
    EXPECT_EQ(ab.losses, ba.wins);
    EXPECT_EQ(ab.wins, o.wins);
    EXPECT_EQ(ab.losses, o.losses);
  }
}

TEST(Correlation, Examples) {
  const std::vector<double> a{1, 2, 3};
  EXPECT_NEAR(*correlation(a, a), 1.0, 1e-12);
  EXPECT_NEAR(*correlation(a, std::vector<double>{-1, -2, -3}), -1.0, 1e-12);
  EXPECT_NEAR(*correlation(a, std::vector<double>{2, 4, 7}), 15.0 / std::sqrt(228.0), 1e-12);
  EXPECT_FALSE(correlation(a, std::vector<double>{5, 5, 5}).has_value());
  EXPECT_FALSE(correlation(std::vector<double>{1}, std::vector<double>{2}).has_value());
}

TEST(Correlation, AffineInvarianceAndOracle) {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 2 + uniform_index(rng, 49);
    std::vector<double> a(n), b(n);
    for (std::size_t k = 0; k < n; ++k) {
      a[k] = uniform_real(rng) * 10.0;
      b[k] = a[k] * (uniform_real(rng) - 0.3) + uniform_real(rng) * 5.0;
    }
    const double r = *correlation(a, b);
    EXPECT_NEAR(r, oracle::pearson(a, b), 1e-9);
    const double scale = 0.1 + uniform_real(rng) * 10.0, shift = uniform_real(rng) * 100.0 - 50.0;
    std::vector<double> t = a;
    for (auto& v : t) v = scale * v + shift;
    EXPECT_NEAR(*correlation(t, b), r, 1e-12);
    EXPECT_NEAR(*correlation(b, a), r, 1e-12);
  }
}

TEST(ConvergenceRate, Examples) {
  std::vector<TrialSummary> ts;
  for (int i = 0; i < 20; ++i) ts.push_back(trial("sarsa", "g", static_cast<std::uint64_t>(i), 1.0, i < 17));
  EXPECT_DOUBLE_EQ(*convergence_rate(ts), 85.0);

  std::vector<TrialSummary> mixed;
  for (int i = 0; i < 3; ++i) mixed.push_back(trial("q", "g", static_cast<std::uint64_t>(i), 1.0, true));
  mixed.push_back(trial("q", "g", 3, 0.0, false, true));
  mixed.push_back(trial("q", "g", 4, 0.0, false, true));
  EXPECT_DOUBLE_EQ(*convergence_rate(mixed), 100.0);

  std::vector<TrialSummary> none{trial("q", "g", 0, 0.0, false, true), trial("q", "g", 1, 0.0, false, false, true)};
  EXPECT_FALSE(convergence_rate(none).has_value());
}

TEST(Summaries, ExcludeUnfinishedTrials) {
  const std::vector<TrialSummary> ts{trial("sarsa", "a", 1, 2.0), trial("sarsa", "a", 2, 4.0),
                                     trial("sarsa", "a", 3, 1e9, false, true), trial("sarsa", "b", 1, 0.0, false, false, true)};
  const auto s = summarize(ts);
  const auto& a = s.at({"a", "sarsa"});
  EXPECT_EQ(a.finished, 2);
  EXPECT_EQ(a.diverged, 1);
  EXPECT_EQ(a.mean, 3.0);
  EXPECT_NEAR(a.sd, std::sqrt(2.0), 1e-12);
  EXPECT_EQ(game_means(s, "sarsa"), (std::map<std::string, double>{{"a", 3.0}}));
}

TEST(Summaries, MetricsArePermutationInvariant) {
  Rng rng(6);
  std::vector<TrialSummary> ts;
  for (const char* algo : {"sarsa", "q", "ettr"})
    for (int g = 0; g < 12; ++g)
      for (std::uint64_t s = 0; s < 4; ++s)
        ts.push_back(trial(algo, "g" + std::to_string(g), s, uniform_real(rng) * 10.0 + 0.1, uniform_index(rng, 2) == 1,
                           uniform_index(rng, 10) == 0));
  std::ostringstream first;
  write_report_csv(first, build_report(ts, "sarsa"));
  for (int k = 0; k < 5; ++k) {
    std::shuffle(ts.begin(), ts.end(), rng);
    std::ostringstream again;
    write_report_csv(again, build_report(ts, "sarsa"));
    EXPECT_EQ(again.str(), first.str());
  }
}

TEST(Report, StructureAndInvariants) {
  Rng rng(7);
  std::vector<TrialSummary> ts;
  for (const char* algo : {"sarsa", "gq", "q"})
    for (int g = 0; g < 8; ++g)
      for (std::uint64_t s = 0; s < 3; ++s)
        ts.push_back(trial(algo, "g" + std::to_string(g), s, uniform_real(rng) * 10.0 + 1.0, s != 0));
  const ComparisonReport rep = build_report(ts, "sarsa");
  ASSERT_EQ(rep.algorithms, (std::vector<std::string>{"sarsa", "gq", "q"}));
  EXPECT_EQ(rep.rows[0].relative->value, 1.0);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(*rep.correlations[i][i], 1.0, 1e-12);
    EXPECT_NEAR(*rep.rows[i].convergence_pct, 200.0 / 3.0, 1e-9);
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_EQ(rep.wins[i][j].wins, rep.wins[j][i].losses);
      ASSERT_EQ(rep.correlations[i][j].has_value(), rep.correlations[j][i].has_value());
      if (rep.correlations[i][j]) EXPECT_NEAR(*rep.correlations[i][j], *rep.correlations[j][i], 1e-12);
    }
  }
  std::ostringstream text;
  write_report_text(text, rep);
  EXPECT_NE(text.str().find("sarsa"), std::string::npos);
  EXPECT_NE(text.str().find("1.00"), std::string::npos);
}

TEST(Report, FootnoteCountsExcludedTrials) {
  std::vector<TrialSummary> ts{trial("sarsa", "a", 1, 1.0), trial("q", "a", 1, 2.0), trial("q", "a", 2, 0.0, false, true)};
  std::ostringstream text;
  write_report_text(text, build_report(ts, "sarsa"));
  EXPECT_NE(text.str().find("* 1 trial(s) excluded"), std::string::npos);
}

TEST(Report, Errors) {
  const std::vector<TrialSummary> one{trial("sarsa", "a", 1, 1.0)};
  EXPECT_THROW(build_report(one, "sarsa"), UsageError);
  const std::vector<TrialSummary> no_base{trial("q", "a", 1, 1.0), trial("gq", "a", 1, 1.0)};
  EXPECT_THROW(build_report(no_base, "sarsa"), UsageError);
  const std::vector<TrialSummary> disjoint{trial("sarsa", "a", 1, 1.0), trial("q", "b", 1, 1.0)};
  try {
    build_report(disjoint, "sarsa");
    FAIL();
  } catch (const UsageError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("'q' (b)"), std::string::npos) << msg;
    EXPECT_NE(msg.find("'sarsa' (a)"), std::string::npos) << msg;
  }
}

TEST(Report, ZeroBaselineProducesWarning) {
  const std::vector<TrialSummary> ts{trial("sarsa", "a", 1, 0.0), trial("sarsa", "b", 1, 2.0), trial("q", "a", 1, 1.0),
                                     trial("q", "b", 1, 3.0)};
  const ComparisonReport rep = build_report(ts, "sarsa");
  EXPECT_EQ(rep.rows[1].relative->value, 1.5);
  ASSERT_FALSE(rep.warnings.empty());
  EXPECT_NE(rep.warnings[0].find("'a'"), std::string::npos);
}
