#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "wasserquick/detect.hpp"
#include "wasserquick/error.hpp"

using namespace wasserquick;

namespace {

std::vector<double> draws(std::mt19937_64& rng, std::size_t n, double mean) {
  std::normal_distribution<double> d(mean, 1.0);
  std::vector<double> out(n);
  for (auto& v : out) v = d(rng);
  return out;
}

// Direct (non log-sum-exp) evaluation of the smoothed log-ratio.
double direct_smoothed(const SmoothedLfd& m, double x) {
  double num = 0.0, den = 0.0;
  const double h = m.bandwidth();
  for (std::size_t l = 0; l < m.support().size(); ++l) {
    const double k = std::exp(-(x - m.support()[l]) * (x - m.support()[l]) / (2 * h * h));
    num += m.p2()[l] * k;
    den += m.p1()[l] * k;
  }
  return std::log(num / den);
}

}  // namespace

TEST(GaussianLlr, Examples) {
  EXPECT_EQ(llr_gaussian_mean(0.5, 1.0), 0.0);
  EXPECT_EQ(llr_gaussian_mean(1.0, 1.0), 0.5);
  EXPECT_EQ(llr_gaussian_mean(0.0, 1.0), -0.5);
  EXPECT_NEAR(llr_gaussian_mean(1.3, 2.0), 0.6, 1e-15);
}

TEST(GaussianLlr, GeneralFormMatchesDensities) {
  const GaussianExact g{0.5, 1.5, -1.0, 0.7};
  auto logpdf = [](double x, double m, double s) { return -0.5 * std::pow((x - m) / s, 2) - std::log(s); };
  for (double x : {-3.0, -0.2, 0.0, 1.7}) {
    EXPECT_NEAR(g(x), logpdf(x, -1.0, 0.7) - logpdf(x, 0.5, 1.5), 1e-12);
  }
  EXPECT_NEAR(GaussianExact::mean_shift(1.0)(1.0), 0.5, 1e-15);
}

TEST(Smoothed, IdenticalMixturesGiveZero) {
  const SmoothedLfd m({0.0, 1.0, 2.5}, {0.2, 0.3, 0.5}, {0.2, 0.3, 0.5}, 0.25);
  for (double x = -5; x <= 5; x += 0.37) EXPECT_EQ(llr_smoothed(m, x), 0.0);
}

TEST(Smoothed, TwoPointMassesClosedForm) {
  for (double h : {0.25, 0.5, 1.0}) {
    const SmoothedLfd m({0.0, 1.0}, {1.0, 0.0}, {0.0, 1.0}, h);
    EXPECT_NEAR(m(0.5), 0.0, 1e-12);
    for (double x : {-0.3, 0.1, 0.9, 1.2}) {
      const double expect = (2 * x - 1) / (2 * h * h);
      EXPECT_NEAR(m(x), std::clamp(expect, -30.0, 30.0), 1e-9);
    }
  }
  // Far in the tail the value is clamped rather than overflowing.
  const SmoothedLfd m({0.0, 1.0}, {1.0, 0.0}, {0.0, 1.0}, 0.25);
  EXPECT_EQ(m(50.0), 30.0);
  EXPECT_EQ(m(-50.0), -30.0);
}

TEST(Smoothed, SolvedLfdMatchesDirectSum) {
  std::mt19937_64 rng(100);
  const auto pre = draws(rng, 50, 0), post = draws(rng, 50, 1);
  const auto sol = solve_lfd({to_points(pre), to_points(post), 0.3, 0.3, GroundMetric::L1});
  const SmoothedLfd m(sol, 0.25);
  for (double x = -3.0; x <= 4.0; x += 0.05) {
    const double v = m(x);
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_NEAR(v, std::clamp(direct_smoothed(m, x), -30.0, 30.0), 1e-9);
  }
}

TEST(Smoothed, DerivativeMatchesFiniteDifference) {
  const SmoothedLfd m({-0.4, 0.3, 1.2}, {0.5, 0.3, 0.2}, {0.1, 0.4, 0.5}, 0.3);
  for (double x : {-1.0, 0.0, 0.7, 2.0}) {
    const double fd = (direct_smoothed(m, x + 1e-6) - direct_smoothed(m, x - 1e-6)) / 2e-6;
    EXPECT_NEAR(m.derivative(x), fd, 1e-5);
  }
}

TEST(Smoothed, Validation) {
  EXPECT_THROW(SmoothedLfd({0.0}, {1.0}, {1.0}, 0.0), InvalidInput);
  EXPECT_THROW(SmoothedLfd({0.0, 1.0}, {1.0}, {1.0, 0.0}, 0.25), InvalidInput);
}

TEST(InterpolatedLlr, TracksExactEvaluation) {
  std::mt19937_64 rng(6);
  const auto sol = solve_lfd({to_points(draws(rng, 50, 0)), to_points(draws(rng, 50, 1)), 0.3, 0.3, GroundMetric::L1});
  const SmoothedLfd m(sol, 0.25);
  const InterpolatedLlr fast(m);
  std::uniform_real_distribution<double> u(-8.0, 9.0);
  for (int i = 0; i < 20000; ++i) {
    const double x = u(rng);
    EXPECT_NEAR(fast(x), m(x), 1e-6) << x;
  }
}

TEST(BinEdges, ExactNormalQuantiles) {
  auto e = bin_edges_uniform_prechange(standard_normal_quantile, 4);
  ASSERT_EQ(e.size(), 3u);
  EXPECT_NEAR(e[0], oracle::normal_quantile(0.25), 1e-9);
  EXPECT_NEAR(e[1], 0.0, 1e-12);
  EXPECT_NEAR(e[2], oracle::normal_quantile(0.75), 1e-9);
  EXPECT_NEAR(e[2], 0.6745, 1e-4);
  e = bin_edges_uniform_prechange(standard_normal_quantile, 2);
  ASSERT_EQ(e.size(), 1u);
  EXPECT_NEAR(e[0], 0.0, 1e-12);
}

TEST(BinEdges, EmpiricalConvention) {
  const std::vector<double> s{4, 1, 3, 2};
  auto e = bin_edges_uniform_prechange(s, 2);
  ASSERT_EQ(e.size(), 1u);
  EXPECT_EQ(e[0], 2.5);
  e = bin_edges_uniform_prechange(s, 4);
  EXPECT_EQ(e, (std::vector<double>{1.75, 2.5, 3.25}));

  std::mt19937_64 rng(1);
  const auto pre = draws(rng, 50, 0);
  e = bin_edges_uniform_prechange(pre, 20);
  ASSERT_EQ(e.size(), 19u);
  for (std::size_t i = 1; i < e.size(); ++i) EXPECT_LT(e[i - 1], e[i]);

  EXPECT_THROW(bin_edges_uniform_prechange(s, 1), InvalidInput);
  EXPECT_THROW(bin_edges_uniform_prechange(std::vector<double>{1.0}, 2), InvalidInput);
  EXPECT_THROW(bin_edges_uniform_prechange(std::vector<double>{1, 1, 1, 1}, 4), InvalidInput);
}

TEST(Binned, Examples) {
  const std::vector<double> edges{-1.0, 1.0};
  EXPECT_EQ(binned_distribution(std::vector<double>{0.0}, std::vector<double>{1.0}, edges),
            (std::vector<double>{0, 1, 0}));
  const auto floored = binned_distribution(std::vector<double>{0.0}, std::vector<double>{1.0}, edges, kBinFloor);
  for (double v : floored) EXPECT_GE(v, kBinFloor / 2);
  EXPECT_NEAR(floored[0] + floored[1] + floored[2], 1.0, 1e-15);

  // Uniform empirical on its own quantile edges.
  std::vector<double> s;
  for (int i = 0; i < 100; ++i) s.push_back(i + 0.5 * (i % 3));
  const auto e = bin_edges_uniform_prechange(s, 5);
  for (double v : binned_distribution(s, e, kBinFloor)) EXPECT_NEAR(v, 0.2, 0.011);
}

TEST(Binned, GaussianDrawsAgainstIntegration) {
  std::mt19937_64 rng(77);
  const auto x = draws(rng, 10000, 1.0);
  const auto e = bin_edges_uniform_prechange(standard_normal_quantile, 4);
  const auto mass = binned_distribution(x, e);
  std::vector<double> cuts{-12.0, e[0], e[1], e[2], 14.0};
  for (std::size_t i = 0; i < 4; ++i) {
    const double ref = oracle::normal_mass_simpson(1.0, cuts[i], cuts[i + 1]);
    // Four binomial standard deviations at n = 1e4.
    EXPECT_NEAR(mass[i], ref, 4.0 * std::sqrt(ref * (1 - ref) / 1e4)) << i;
  }
  EXPECT_NEAR(oracle::normal_mass_simpson(1.0, -12.0, e[0]), 0.047, 1e-3);
  EXPECT_NEAR(oracle::normal_mass_simpson(1.0, e[2], 14.0), 0.63, 5e-3);
}

TEST(BinnedTable, LookupAndTies) {
  const BinnedTable zero({-1.0, 1.0}, {0, 0, 0});
  for (double x : {-5.0, -1.0, 0.0, 1.0, 7.0}) EXPECT_EQ(llr_binned(zero, x), 0.0);
  const BinnedTable t({-1.0, 1.0}, {-2.0, 0.5, 3.0});
  EXPECT_EQ(t(-10.0), -2.0);
  EXPECT_EQ(t(-1.0), -2.0);
  EXPECT_EQ(t(0.0), 0.5);
  EXPECT_EQ(t(1.0), 0.5);
  EXPECT_EQ(t(1.0000001), 3.0);
  EXPECT_EQ(bin_index(std::vector<double>{-1.0, 1.0}, -1.0), 0u);
  EXPECT_THROW(BinnedTable({1.0, 1.0}, {0, 0, 0}), InvalidInput);
  EXPECT_THROW(BinnedTable({1.0}, {0, 0, 0}), InvalidInput);
  EXPECT_THROW(BinnedTable({1.0}, {0, NAN}), InvalidInput);
}

TEST(BinnedTable, FromSolvedLfd) {
  std::mt19937_64 rng(8);
  const auto pre = draws(rng, 50, 0);
  const auto sol = solve_lfd({to_points(pre), to_points(draws(rng, 50, 1)), 0.3, 0.3, GroundMetric::L1});
  const auto e = bin_edges_uniform_prechange(pre, 20);
  const auto t = binned_lfd_table(sol, e);
  ASSERT_EQ(t.logRatio.size(), 20u);
  for (double v : t.logRatio) EXPECT_TRUE(std::isfinite(v));
  // Larger observations favor the post-change law overall.
  EXPECT_LT(t.logRatio.front(), t.logRatio.back());
}

TEST(Cusum, Examples) {
  CusumState s{0.0, 10.0, 0, false};
  s = cusum_update(s, 0.5);
  EXPECT_EQ(s.statistic, 0.5);
  EXPECT_EQ(s.time, 1u);
  s.statistic = -0.2;
  s = cusum_update(s, -0.1);
  EXPECT_NEAR(s.statistic, -0.1, 1e-15);
  CusumState t{0.9, 1.0, 5, false};
  t = cusum_update(t, 0.2);
  EXPECT_NEAR(t.statistic, 1.1, 1e-15);
  EXPECT_TRUE(t.stopped);
  EXPECT_EQ(t.time, 6u);
  EXPECT_THROW(cusum_update(t, 0.0), UsageError);
}

TEST(Cusum, RecursionEqualsMaxForm) {
  std::mt19937_64 rng(15);
  std::normal_distribution<double> n(-0.2, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> llr(200);
    for (auto& v : llr) v = n(rng);
    CusumState s{0.0, INFINITY, 0, false};
    for (std::size_t t = 0; t < llr.size(); ++t) {
      s = cusum_update(s, llr[t]);
      EXPECT_NEAR(s.statistic, oracle::cusum_max_form(llr, t + 1), 1e-9);
    }
  }
}

TEST(Glr, Examples) {
  GlrState s(50, INFINITY);
  s.push(0.0);
  s.push(0.0);
  EXPECT_EQ(glr_statistic(s), 0.0);

  GlrState one(50, INFINITY);
  one.push(1.3);
  EXPECT_NEAR(glr_statistic(one), 1.3 * 1.3 / 2, 1e-15);

  GlrState two(2, INFINITY);
  two = glr_update(two, 1.0);
  two = glr_update(two, 1.0);
  EXPECT_NEAR(two.statistic(), 1.0, 1e-15);
  EXPECT_NEAR(oracle::glr_grid({1.0, 1.0}, -5, 5, 1e-4), 1.0, 1e-6);
}

TEST(Glr, WindowKeepsTheLastObservations) {
  GlrState s(3, INFINITY);
  for (double x : {1.0, 2.0, 3.0, 4.0, 5.0}) s.push(x);
  EXPECT_EQ(s.contents(), (std::vector<double>{3.0, 4.0, 5.0}));
  EXPECT_EQ(s.time(), 5u);
  EXPECT_NEAR(s.statistic(), 144.0 / 6.0, 1e-12);
}

TEST(Glr, MatchesGridMaximization) {
  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t w = 5 + 5 * (trial % 10);
    const auto x = draws(rng, w + trial, trial % 2 ? 0.8 : 0.0);
    GlrState s(w, INFINITY);
    for (double v : x) s.push(v);
    EXPECT_NEAR(s.statistic(), oracle::glr_grid(s.contents(), -5, 5, 1e-4), 1e-6) << "trial " << trial;
  }
}

TEST(Glr, StopsAndRefusesFurtherInput) {
  GlrState s(10, 2.0);
  s.push(1.0);
  EXPECT_FALSE(s.stopped());
  s.push(3.0);
  EXPECT_TRUE(s.stopped());
  EXPECT_THROW(s.push(0.0), UsageError);
  EXPECT_THROW(GlrState(0, 1.0), InvalidInput);
}

TEST(RunDetector, Examples) {
  const CusumDetector up{[](double) { return 1.0; }, 3.0};
  const std::vector<double> stream(100, 0.0);
  auto d = run_detector(up, stream, 100);
  ASSERT_TRUE(d.stoppedAt.has_value());
  EXPECT_EQ(*d.stoppedAt, 3u);
  EXPECT_FALSE(d.truncated);

  const CusumDetector down{[](double) { return -1.0; }, 3.0};
  d = run_detector(down, stream, 100);
  EXPECT_TRUE(d.truncated);
  EXPECT_FALSE(d.stoppedAt.has_value());

  const GlrDetector glr{50, 2.0};
  d = run_detector(glr, std::vector<double>{0.5, 0.5, 3.0}, 3);
  ASSERT_TRUE(d.stoppedAt.has_value());
  EXPECT_EQ(*d.stoppedAt, 3u);
}

TEST(RunDetector, DeterministicAndPrefixEquivalent) {
  std::mt19937_64 rng(90);
  const auto x = draws(rng, 500, 0.5);
  const std::vector<DetectorSpec> specs{CusumDetector{GaussianExact::mean_shift(1.0), 4.0}, GlrDetector{50, 6.0}};
  for (const auto& spec : specs) {
    const auto a = run_detector(spec, x, 500);
    const auto b = run_detector(spec, x, 500);
    ASSERT_TRUE(a.stoppedAt.has_value());
    EXPECT_EQ(a.stoppedAt, b.stoppedAt);
    EXPECT_EQ(a.finalStatistic, b.finalStatistic);
    // Changing observations after the stop cannot change the decision.
    auto tail = x;
    for (std::size_t i = *a.stoppedAt; i < tail.size(); ++i) tail[i] = 100.0;
    const auto c = run_detector(spec, tail, 500);
    EXPECT_EQ(c.stoppedAt, a.stoppedAt);
    // A horizon shorter than the stop truncates.
    EXPECT_TRUE(run_detector(spec, x, *a.stoppedAt - 1).truncated);
  }
}

TEST(StatisticStream, MatchesStateMachines) {
  std::mt19937_64 rng(3);
  const auto x = draws(rng, 300, 0.3);
  const auto llr = GaussianExact::mean_shift(1.0);
  const DetectorSpec cusum = CusumDetector{llr, INFINITY};
  StatisticStream s(cusum);
  CusumState st{0.0, INFINITY, 0, false};
  for (double v : x) {
    st = cusum_update(st, llr(v));
    EXPECT_EQ(s.push(v), st.statistic);
  }
  const DetectorSpec glr = GlrDetector{20, INFINITY};
  StatisticStream g(glr);
  GlrState gs(20, INFINITY);
  for (double v : x) {
    gs.push(v);
    EXPECT_NEAR(g.push(v), gs.statistic(), 1e-12);
  }
}
