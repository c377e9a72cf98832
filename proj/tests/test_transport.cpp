#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "wasserquick/error.hpp"
#include "wasserquick/transport.hpp"

using namespace wasserquick;

namespace {

DiscreteDistribution uniform_on(const std::vector<double>& xs) {
  return DiscreteDistribution(to_points(xs), std::vector<double>(xs.size(), 1.0 / xs.size()));
}

DiscreteDistribution random_distribution(std::mt19937_64& rng, std::size_t k, std::size_t d) {
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<Point> pts;
  std::vector<double> w;
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<double> c(d);
    for (auto& v : c) v = n(rng);
    pts.emplace_back(c);
    w.push_back(u(rng));
    total += w.back();
  }
  for (auto& v : w) v /= total;
  return DiscreteDistribution(pts, w);
}

void expect_plan_valid(const TransportPlan& plan, const Matrix& costs) {
  EXPECT_LE(plan.max_residual(costs), 1e-9);
}

}  // namespace

TEST(Wasserstein, Examples) {
  const auto p = uniform_on({0.0, 2.0});
  EXPECT_NEAR(wasserstein_distance(p, p, GroundMetric::L1).value, 0.0, 1e-15);
  EXPECT_NEAR(wasserstein_distance(uniform_on({0.0}), uniform_on({1.0}), GroundMetric::L1).value, 1.0, 1e-15);
  EXPECT_NEAR(wasserstein_distance(p, uniform_on({1.0, 3.0}), GroundMetric::L1).value, 1.0, 1e-12);
}

TEST(Wasserstein, SortedEmpiricalOracle) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 1 + trial % 40;
    std::vector<double> a(k), b(k);
    for (auto& v : a) v = n(rng);
    for (auto& v : b) v = 1.0 + 2.0 * n(rng);
    const auto res = wasserstein_distance(uniform_on(a), uniform_on(b), GroundMetric::L1);
    EXPECT_NEAR(res.value, oracle::sorted_w1(a, b), 1e-8) << "trial " << trial;
    expect_plan_valid(res.plan, cost_matrix(GroundMetric::L1, to_points(a), to_points(b)));
  }
}

TEST(Wasserstein, AssignmentOracleInTwoDimensions) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n;
  for (auto metric : {GroundMetric::L1, GroundMetric::L2, GroundMetric::Linf}) {
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t k = 2 + trial % 5;
      std::vector<Point> a, b;
      for (std::size_t i = 0; i < k; ++i) {
        a.push_back(Point{n(rng), n(rng)});
        b.push_back(Point{n(rng), n(rng)});
      }
      std::vector<std::vector<double>> c(k, std::vector<double>(k));
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) c[i][j] = ground_cost(metric, a[i], b[j]);
      }
      const std::vector<double> w(k, 1.0 / k);
      const auto res = wasserstein_distance(DiscreteDistribution(a, w), DiscreteDistribution(b, w), metric);
      EXPECT_NEAR(res.value, oracle::assignment_cost(c), 1e-9);
    }
  }
}

TEST(Wasserstein, MetricPropertiesOnRandomTriples) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 1 + trial % 2;
    const auto p = random_distribution(rng, 1 + trial % 7, d);
    const auto q = random_distribution(rng, 1 + (trial + 3) % 9, d);
    const auto r = random_distribution(rng, 1 + (trial + 5) % 6, d);
    const auto m = trial % 3 == 0 ? GroundMetric::L1 : (trial % 3 == 1 ? GroundMetric::L2 : GroundMetric::Linf);
    const double pq = wasserstein_distance(p, q, m).value;
    const double qp = wasserstein_distance(q, p, m).value;
    const double pr = wasserstein_distance(p, r, m).value;
    const double rq = wasserstein_distance(r, q, m).value;
    EXPECT_NEAR(pq, qp, 1e-8);
    EXPECT_LE(pq, pr + rq + 1e-8);
    EXPECT_NEAR(wasserstein_distance(p, p, m).value, 0.0, 1e-12);
  }
}

TEST(Wasserstein, PlanInvariantsOnLargerInstance) {
  std::mt19937_64 rng(4);
  const auto p = random_distribution(rng, 120, 1);
  const auto q = random_distribution(rng, 80, 1);
  const auto res = wasserstein_distance(p, q, GroundMetric::L1);
  const Matrix costs = cost_matrix(GroundMetric::L1, p.support(), q.support());
  expect_plan_valid(res.plan, costs);
  EXPECT_NEAR(res.plan.cost, res.value, 1e-9);
}

TEST(Wasserstein, DimensionMismatch) {
  EXPECT_THROW(wasserstein_distance(uniform_on({0.0}), DiscreteDistribution({Point{0, 1}}, {1.0}), GroundMetric::L1),
               InvalidInput);
}

TEST(WorstCase, Examples) {
  const auto z = to_points(std::vector<double>{0, 1});
  const Matrix c = cost_matrix(GroundMetric::L1, z, z);
  const std::vector<double> nominal{1.0, 0.0};
  const std::vector<double> f{0.0, 1.0};

  auto r = worst_case_expectation(f, nominal, c, 0.0);
  EXPECT_NEAR(r.value, 0.0, 1e-15);

  const std::vector<double> constant{2.5, 2.5};
  EXPECT_NEAR(worst_case_expectation(constant, nominal, c, 0.7).value, 2.5, 1e-12);

  r = worst_case_expectation(f, nominal, c, 0.3);
  EXPECT_NEAR(r.value, 0.3, 1e-12);
  EXPECT_NEAR(r.witness[0], 0.7, 1e-12);
  EXPECT_NEAR(r.witness[1], 0.3, 1e-12);
  EXPECT_LE(r.plan.max_residual(c), 1e-9);
}

TEST(WorstCase, AmbiguitySpecOverload) {
  const auto z = to_points(std::vector<double>{0, 1});
  AmbiguitySpec spec(DiscreteDistribution({Point{0}}, {1.0}), 0.3, GroundMetric::L1);
  const std::vector<double> f{0.0, 1.0};
  const auto r = worst_case_expectation(f, spec, z);
  EXPECT_NEAR(r.value, 0.3, 1e-12);
  EXPECT_EQ(r.witness.size(), 2u);
}

TEST(WorstCase, GridOracleOnThreeAtoms) {
  // Nominal is a point mass, so the ball is {w : sum_l w_l c_l <= r}.
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<double> xs{0.0, 0.4 + 0.5 * (u(rng) + 1.0), -0.3 - 0.5 * (u(rng) + 1.0)};
    const auto z = to_points(xs);
    const Matrix c = cost_matrix(GroundMetric::L1, z, z);
    const std::vector<double> f{u(rng), u(rng), u(rng)};
    const double radius = 0.5 * (u(rng) + 1.0);
    double best = -1e300;
    const double step = 1e-3;
    for (int i = 0; i <= 1000; ++i) {
      for (int j = 0; i + j <= 1000; ++j) {
        const double w1 = i * step, w2 = j * step, w0 = 1.0 - w1 - w2;
        if (w1 * c(0, 1) + w2 * c(0, 2) > radius) continue;
        best = std::max(best, w0 * f[0] + w1 * f[1] + w2 * f[2]);
      }
    }
    const double value = worst_case_expectation(f, std::vector<double>{1, 0, 0}, c, radius).value;
    EXPECT_GE(value, best - 1e-12);
    EXPECT_LE(value, best + 2e-3 * 3.0);
  }
}

TEST(WorstCase, MonotoneInRadiusAndReachesMax) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_distribution(rng, 8, 1);
    const auto& z = p.support();
    const Matrix c = cost_matrix(GroundMetric::L1, z, z);
    std::normal_distribution<double> n;
    std::vector<double> f(z.size());
    for (auto& v : f) v = n(rng);
    const double nominalMean = [&] {
      double s = 0;
      for (std::size_t l = 0; l < f.size(); ++l) s += p.weights()[l] * f[l];
      return s;
    }();
    double prev = -1e300;
    for (double r : {0.0, 0.05, 0.1, 0.3, 0.8, 2.0}) {
      const double v = worst_case_expectation(f, p.weights(), c, r).value;
      EXPECT_GE(v, prev - 1e-12);
      EXPECT_GE(v, nominalMean - 1e-12);
      prev = v;
    }
    const auto arg = std::max_element(f.begin(), f.end()) - f.begin();
    double needed = 0.0;
    for (std::size_t l = 0; l < f.size(); ++l) needed += p.weights()[l] * c(l, arg);
    EXPECT_NEAR(worst_case_expectation(f, p.weights(), c, needed).value, f[arg], 1e-9);
  }
}

TEST(WorstCase, ExcludedAtoms) {
  const auto z = to_points(std::vector<double>{0, 1, 2});
  const Matrix c = cost_matrix(GroundMetric::L1, z, z);
  const double ninf = -std::numeric_limits<double>::infinity();
  const std::vector<double> f{0.0, ninf, 1.0};
  const auto r = worst_case_expectation(f, std::vector<double>{1, 0, 0}, c, 1.0);
  EXPECT_NEAR(r.value, 0.5, 1e-12);
  EXPECT_EQ(r.witness[1], 0.0);
  // The nominal itself sits on an excluded atom and cannot move far enough.
  EXPECT_THROW(worst_case_expectation(f, std::vector<double>{0, 1, 0}, c, 0.5), InfeasibleProblem);
}
