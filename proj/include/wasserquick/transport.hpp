#pragma once

#include <span>
#include <vector>

#include "wasserquick/core.hpp"

namespace wasserquick {

/// Coupling between two discrete distributions: matrix(i, j) is the mass
/// moved from row atom i to column atom j.
struct TransportPlan {
  Matrix matrix;
  std::vector<double> rowMarginal;
  std::vector<double> colMarginal;
  double cost = 0.0;

  /// Largest violation among row sums, column sums, negativity and the
  /// recorded cost against `costs`.
  double max_residual(const Matrix& costs) const;
};

inline constexpr double kMarginalTol = 1e-9;
inline constexpr double kOptimalityTol = 1e-8;

struct WassersteinResult {
  double value;
  TransportPlan plan;
};

/// Exact order-1 Wasserstein distance by the transportation simplex method.
WassersteinResult wasserstein_distance(const DiscreteDistribution& p, const DiscreteDistribution& q,
                                       GroundMetric metric);

/// Same, for raw marginals and a precomputed cost matrix. Both marginals
/// must sum to one.
WassersteinResult transport_lp(std::span<const double> rowMarginal, std::span<const double> colMarginal,
                               const Matrix& costs);

struct WorstCaseResult {
  double value;
  std::vector<double> witness;  // distribution over the candidate support
  TransportPlan plan;           // nominal (rows) -> witness (columns)
};

/// max sum_l mu_l f_l over distributions mu on the candidate support whose
/// transport cost from `nominal` is at most `radius`. Rows and columns of
/// `costs` both index the candidate support. Entries of `f` equal to -inf
/// mark atoms that may not receive mass.
///
/// The LP decouples into one fractional knapsack over the concave envelopes
/// of each row's (cost, value) options, so the optimum is computed exactly.
WorstCaseResult worst_case_expectation(std::span<const double> f, std::span<const double> nominal,
                                       const Matrix& costs, double radius);

struct WorstCaseDistribution {
  double value;
  DiscreteDistribution witness;
};

/// Convenience overload: the nominal of `spec` must be supported on `support`.
WorstCaseDistribution worst_case_expectation(std::span<const double> f, const AmbiguitySpec& spec,
                                             std::span<const Point> support);

/// Spreads the weights of `dist` onto the matching atoms of `support`.
std::vector<double> weights_on_support(const DiscreteDistribution& dist, std::span<const Point> support);

}  // namespace wasserquick
