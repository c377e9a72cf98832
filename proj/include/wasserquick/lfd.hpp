#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "wasserquick/core.hpp"
#include "wasserquick/transport.hpp"

namespace wasserquick {

/// Pre- and post-change training samples with the two Wasserstein radii.
struct LfdProblem {
  std::vector<Point> preSamples;
  std::vector<Point> postSamples;
  double r1 = 0.0;
  double r2 = 0.0;
  GroundMetric metric = GroundMetric::L1;

  void validate() const;
};

/// Multipliers of the dual program. `g` is the per-atom log-ratio potential
/// (g_l = 1 + log(p2_l / p1_l) at optimality); u1/u2 are the row potentials
/// of the pre/post nominal atoms and lambda1/lambda2 the budget prices.
struct DualVariables {
  std::vector<double> g;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  std::vector<double> u1;
  std::vector<double> u2;
};

struct SolverCertificate {
  double primalResidual = 0.0;
  double dualBound = 0.0;
  double relativeGap = 0.0;
  std::size_t iterations = 0;
  DualVariables dualVariables;
};

struct LfdSolution {
  std::vector<Point> jointSupport;
  std::vector<double> mu0;  // pre-change nominal on the joint support
  std::vector<double> nu0;  // post-change nominal on the joint support
  std::vector<double> p1;   // least favorable pre-change distribution
  std::vector<double> p2;   // least favorable post-change distribution
  TransportPlan plan1;      // mu0 -> p1
  TransportPlan plan2;      // nu0 -> p2
  double objective = 0.0;   // KL(p2 || p1)
  double r1 = 0.0;
  double r2 = 0.0;
  GroundMetric metric = GroundMetric::L1;
  SolverCertificate certificate;

  /// Throws InvariantViolation naming the first broken invariant.
  void check_invariants(double feasTol = 1e-8) const;
};

struct SolverTolerances {
  double feasTol = 1e-8;
  double gapTol = 1e-6;
  std::size_t maxIterations = 100000;
};

struct JointSupport {
  std::vector<Point> support;
  std::vector<double> mu0;
  std::vector<double> nu0;
};

/// Pre samples followed by post samples, duplicates merged.
JointSupport build_joint_support(const LfdProblem& problem);

/// KL(p2 || p1) with 0 log 0 = 0; +inf when p2 is not absolutely continuous
/// with respect to p1.
double kl_divergence(std::span<const double> p2, std::span<const double> p1);

/// Least favorable distributions over the two Wasserstein balls.
///
/// The convex program is solved through its dual, a smooth program in the
/// per-atom potentials g, the budget prices and the row potentials, by a
/// primal-dual interior-point method. The transport plans are the
/// multipliers of the dual's coupling constraints. The returned primal point
/// is repaired to exact feasibility and certified by an independent exact
/// evaluation of the dual function.
///
/// Throws InfeasibleProblem when no absolutely continuous pair exists and
/// NumericalError when the certificate misses the tolerances.
LfdSolution solve_lfd(const LfdProblem& problem, const SolverTolerances& tol = {});

/// Exact dual function value for a potential vector g; a lower bound on the
/// optimal KL for every g. Atoms with g = +inf are excluded from p2, atoms
/// with g = -inf carry no weight in the p1 term.
double lfd_dual_bound(std::span<const double> g, std::span<const double> mu0, std::span<const double> nu0,
                      const Matrix& costs, double r1, double r2);

struct WeakBoundednessReport {
  double worstCaseMeanLR;
  bool satisfied;
  std::vector<double> witness;  // on the joint support
};

inline constexpr double kWeakBoundednessTol = 1e-6;

/// Worst case of E_mu[p2/p1] over the pre-change ball (restricted to the
/// joint support); the pair is weakly bounded when it does not exceed one.
WeakBoundednessReport verify_weak_boundedness(const LfdSolution& solution);

inline constexpr double kLogRatioClamp = 30.0;

struct LlrTable {
  std::vector<Point> support;
  std::vector<double> logRatio;
};

LlrTable llr_table(const LfdSolution& solution);

/// Same conventions as llr_table for plain vectors.
std::vector<double> log_ratio(std::span<const double> p1, std::span<const double> p2);

struct KlLfdSolution {
  std::vector<double> p1;
  std::vector<double> p2;
  double objective = 0.0;
  double r1 = 0.0;
  double r2 = 0.0;
  SolverCertificate certificate;
};

/// Least favorable distributions over two KL balls around strictly positive
/// binned nominals: min KL(p2||p1) s.t. KL(p1||mu0) <= r1, KL(p2||nu0) <= r2.
KlLfdSolution solve_lfd_kl(std::span<const double> mu0, std::span<const double> nu0, double r1, double r2,
                           const SolverTolerances& tol = {});

}  // namespace wasserquick
