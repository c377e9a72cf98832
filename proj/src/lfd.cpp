#include "wasserquick/lfd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "wasserquick/error.hpp"

namespace wasserquick {

void LfdProblem::validate() const {
  if (preSamples.empty()) throw InvalidInput("no pre-change samples");
  if (postSamples.empty()) throw InvalidInput("no post-change samples");
  if (!(r1 >= 0.0) || !std::isfinite(r1)) throw InvalidInput("r1 must be finite and >= 0");
  if (!(r2 >= 0.0) || !std::isfinite(r2)) throw InvalidInput("r2 must be finite and >= 0");
  const std::size_t d = preSamples.front().dim();
  require_dimension(preSamples, d, "pre-change samples");
  require_dimension(postSamples, d, "post-change samples");
}

JointSupport build_joint_support(const LfdProblem& problem) {
  problem.validate();
  JointSupport out;
  std::map<Point, std::size_t> index;
  auto atom = [&](const Point& p) {
    auto [it, inserted] = index.try_emplace(p, out.support.size());
    if (inserted) out.support.push_back(p);
    return it->second;
  };
  std::vector<std::size_t> preIdx, postIdx;
  for (const auto& p : problem.preSamples) preIdx.push_back(atom(p));
  for (const auto& p : problem.postSamples) postIdx.push_back(atom(p));
  out.mu0.assign(out.support.size(), 0.0);
  out.nu0.assign(out.support.size(), 0.0);
  const double w1 = 1.0 / static_cast<double>(preIdx.size());
  const double w2 = 1.0 / static_cast<double>(postIdx.size());
  for (auto l : preIdx) out.mu0[l] += w1;
  for (auto l : postIdx) out.nu0[l] += w2;
  return out;
}

double kl_divergence(std::span<const double> p2, std::span<const double> p1) {
  double acc = 0.0;
  for (std::size_t l = 0; l < p2.size(); ++l) {
    if (p2[l] <= 0.0) continue;
    if (p1[l] <= 0.0) return std::numeric_limits<double>::infinity();
    acc += p2[l] * std::log(p2[l] / p1[l]);
  }
  return acc;
}

void LfdSolution::check_invariants(double feasTol) const {
  const std::size_t n = jointSupport.size();
  auto fail = [](const std::string& what) { throw InvariantViolation("LfdSolution: " + what); };
  if (n == 0) fail("empty support");
  if (p1.size() != n || p2.size() != n || mu0.size() != n || nu0.size() != n) fail("vector sizes disagree");
  for (std::size_t l = 0; l < n; ++l) {
    if (p1[l] < 0.0 || p2[l] < 0.0) fail("negative mass");
    if (p2[l] > 0.0 && p1[l] <= 0.0) fail("p2 is not absolutely continuous with respect to p1");
  }
  const Matrix costs = cost_matrix(metric, jointSupport, jointSupport);
  auto check_plan = [&](const TransportPlan& plan, const std::vector<double>& rows, const std::vector<double>& cols,
                        double radius, const char* name) {
    if (plan.matrix.rows() != static_cast<Eigen::Index>(n) || plan.matrix.cols() != static_cast<Eigen::Index>(n)) {
      fail(std::string(name) + " has the wrong shape");
    }
    for (std::size_t l = 0; l < n; ++l) {
      if (std::abs(plan.matrix.row(l).sum() - rows[l]) > feasTol) fail(std::string(name) + " row marginal mismatch");
      if (std::abs(plan.matrix.col(l).sum() - cols[l]) > feasTol) fail(std::string(name) + " column marginal mismatch");
    }
    if (plan.matrix.minCoeff() < -feasTol) fail(std::string(name) + " has negative entries");
    const double cost = plan.matrix.cwiseProduct(costs).sum();
    if (cost > radius + feasTol) fail(std::string(name) + " exceeds its transport budget");
  };
  check_plan(plan1, mu0, p1, r1, "plan1");
  check_plan(plan2, nu0, p2, r2, "plan2");
  if (std::abs(kl_divergence(p2, p1) - objective) > 1e-8) fail("objective does not match KL(p2 || p1)");
  if (certificate.relativeGap < -1e-9) fail("negative duality gap");
}

WeakBoundednessReport verify_weak_boundedness(const LfdSolution& solution) {
  const std::size_t n = solution.jointSupport.size();
  std::vector<double> ratio(n, 0.0);
  for (std::size_t l = 0; l < n; ++l) {
    if (solution.p1[l] > 0.0) {
      ratio[l] = solution.p2[l] / solution.p1[l];
    } else if (solution.p2[l] > 0.0) {
      throw InvariantViolation("p2 puts mass where p1 has none");
    }
  }
  const Matrix costs = cost_matrix(solution.metric, solution.jointSupport, solution.jointSupport);
  WorstCaseResult wc = worst_case_expectation(ratio, solution.mu0, costs, solution.r1);
  return {wc.value, wc.value <= 1.0 + kWeakBoundednessTol, std::move(wc.witness)};
}

std::vector<double> log_ratio(std::span<const double> p1, std::span<const double> p2) {
  if (p1.size() != p2.size()) throw InvalidInput("p1 and p2 differ in length");
  std::vector<double> out(p1.size(), 0.0);
  for (std::size_t l = 0; l < p1.size(); ++l) {
    if (p2[l] > 0.0 && p1[l] <= 0.0) {
      throw InvariantViolation("log-ratio undefined: p2 > 0 where p1 = 0 at atom " + std::to_string(l));
    }
    if (p1[l] > 0.0 && p2[l] > 0.0) {
      out[l] = std::clamp(std::log(p2[l] / p1[l]), -kLogRatioClamp, kLogRatioClamp);
    } else if (p1[l] > 0.0) {
      out[l] = -kLogRatioClamp;
    }
  }
  return out;
}

LlrTable llr_table(const LfdSolution& solution) {
  return {solution.jointSupport, log_ratio(solution.p1, solution.p2)};
}

}  // namespace wasserquick
