// Least favorable distributions over Wasserstein balls.
//
// With g1 = -exp(g - 1) and g2 = g, Fenchel-Young gives
//   KL(p2 || p1) >= <g1, p1> + <g2, p2>   for all p1, p2 >= 0,
// and the minimum of a linear function over a ball around a nominal with
// weights w is  max_{lambda >= 0} -lambda r + sum_i w_i min_l (g_l + lambda C_il).
// Writing the inner minima with epigraph variables gives the smooth dual
//
//   max  -l2 r2 + sum_j nu_j s_j  -  l1 r1 + sum_i mu_i t_i
//   s.t. s_j <= g_l + l2 C_jl                 (multiplier Gamma2_jl)
//        t_i <= -exp(g_l - 1) + l1 C_il       (multiplier Gamma1_il)
//        l1, l2 >= 0
//
// whose multipliers are exactly the transport plans of the primal program.
// A radius of zero pins the corresponding LFD to its nominal; the dual then
// carries the nominal term directly.

#include <algorithm>
#include <cmath>
#include <limits>

#include "wasserquick/error.hpp"
#include "wasserquick/lfd.hpp"

namespace wasserquick {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Layout {
  std::vector<std::size_t> gAtoms;    // atoms with a finite potential
  std::vector<long> gIndex;           // atom -> position in gAtoms, or -1
  std::vector<std::size_t> preRows;   // atoms with mu0 > 0 (only when r1 > 0)
  std::vector<std::size_t> postRows;  // atoms with nu0 > 0 (only when r2 > 0)
  bool freePre = false;
  bool freePost = false;

  std::size_t nG() const { return gAtoms.size(); }
  long lambda1() const { return freePre ? static_cast<long>(nG()) : -1; }
  long lambda2() const { return freePost ? static_cast<long>(nG() + (freePre ? 1 : 0)) : -1; }
  std::size_t tOffset() const { return nG() + (freePre ? 1 : 0) + (freePost ? 1 : 0); }
  std::size_t sOffset() const { return tOffset() + (freePre ? preRows.size() : 0); }
  std::size_t size() const { return sOffset() + (freePost ? postRows.size() : 0); }
};

class DualInteriorPoint {
 public:
  DualInteriorPoint(const std::vector<double>& mu0, const std::vector<double>& nu0, const Matrix& costs,
                    double r1, double r2)
      : mu0_(mu0), nu0_(nu0), costs_(costs), r1_(r1), r2_(r2), n_(mu0.size()) {
    lay_.freePre = r1 > 0.0;
    lay_.freePost = r2 > 0.0;
    lay_.gIndex.assign(n_, -1);
    for (std::size_t l = 0; l < n_; ++l) {
      bool finite = true;
      if (!lay_.freePre) finite = mu0[l] > 0.0;   // p2 must stay on supp(mu0)
      if (!lay_.freePost) finite = nu0[l] > 0.0;  // p1 mass elsewhere is free
      if (finite) {
        lay_.gIndex[l] = static_cast<long>(lay_.gAtoms.size());
        lay_.gAtoms.push_back(l);
      }
    }
    if (lay_.freePre) {
      for (std::size_t i = 0; i < n_; ++i) if (mu0[i] > 0.0) lay_.preRows.push_back(i);
    }
    if (lay_.freePost) {
      for (std::size_t j = 0; j < n_; ++j) if (nu0[j] > 0.0) lay_.postRows.push_back(j);
    }
    numA_ = lay_.freePost ? lay_.postRows.size() * lay_.nG() : 0;
    numB_ = lay_.freePre ? lay_.preRows.size() * n_ : 0;
    m_ = numA_ + numB_ + (lay_.freePre ? 1 : 0) + (lay_.freePost ? 1 : 0);
  }

  const Layout& layout() const { return lay_; }

  struct Result {
    Eigen::VectorXd x;
    Eigen::VectorXd z;
    std::size_t iterations;
  };

  Result run(std::size_t budget) {
    const std::size_t N = lay_.size();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(N);
    if (lay_.freePre) x(lay_.lambda1()) = 1.0;
    if (lay_.freePost) x(lay_.lambda2()) = 1.0;
    if (lay_.freePre) {
      for (std::size_t a = 0; a < lay_.preRows.size(); ++a) {
        double best = kInf;
        for (std::size_t l = 0; l < n_; ++l) best = std::min(best, x(lay_.lambda1()) * costs_(lay_.preRows[a], l) - expg(x, l));
        x(lay_.tOffset() + a) = best - 1.0;
      }
    }
    if (lay_.freePost) {
      for (std::size_t a = 0; a < lay_.postRows.size(); ++a) {
        double best = kInf;
        for (std::size_t l : lay_.gAtoms) best = std::min(best, x(lay_.gIndex[l]) + x(lay_.lambda2()) * costs_(lay_.postRows[a], l));
        x(lay_.sOffset() + a) = best - 1.0;
      }
    }
    Eigen::VectorXd z(m_);
    {
      std::size_t k = 0;
      for (std::size_t a = 0; a < lay_.postRows.size() && lay_.freePost; ++a) {
        for (std::size_t b = 0; b < lay_.nG(); ++b) z(k++) = nu0_[lay_.postRows[a]] / static_cast<double>(lay_.nG());
      }
      for (std::size_t a = 0; a < lay_.preRows.size() && lay_.freePre; ++a) {
        for (std::size_t l = 0; l < n_; ++l) z(k++) = mu0_[lay_.preRows[a]] / static_cast<double>(n_);
      }
      for (; k < m_; ++k) z(k) = 1.0;
    }

    Eigen::VectorXd f(m_), fTrial(m_), grad(N), gradTrial(N);
    std::size_t iterations = 0;
    constexpr double kMu = 10.0;
    constexpr double kAlpha = 0.01;
    constexpr double kBeta = 0.5;
    while (iterations < budget) {
      ++iterations;
      if (!constraints(x, f)) throw NumericalError("interior point left the feasible region", kInf);
      const double eta = -f.dot(z);
      const double tau = kMu * static_cast<double>(m_) / eta;
      dual_residual(x, z, grad);
      const double rDual = grad.lpNorm<Eigen::Infinity>();
      if (rDual <= 1e-11 && eta <= 1e-10) break;

      Eigen::MatrixXd M = Eigen::MatrixXd::Zero(N, N);
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(N);
      assemble(x, z, f, tau, M, rhs);
      Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
      Eigen::VectorXd dx = ldlt.solve(rhs);
      if (!dx.allFinite()) throw NumericalError("Newton system is singular", rDual);
      Eigen::VectorXd dz(m_);
      constraint_directional(x, dx, dz);  // dz <- grad f_k . dx
      for (std::size_t k = 0; k < m_; ++k) {
        const double slack = -f(k);
        dz(k) = z(k) / slack * dz(k) - z(k) + 1.0 / (tau * slack);
      }

      double step = 1.0;
      for (std::size_t k = 0; k < m_; ++k) {
        if (dz(k) < 0.0) step = std::min(step, -z(k) / dz(k));
      }
      step *= 0.99;
      const double r0 = residual_norm(grad, f, z, tau);
      Eigen::VectorXd xTrial, zTrial;
      bool accepted = false;
      while (step > 1e-14 && iterations < budget) {
        xTrial = x + step * dx;
        zTrial = z + step * dz;
        if (constraints(xTrial, fTrial)) {
          dual_residual(xTrial, zTrial, gradTrial);
          if (residual_norm(gradTrial, fTrial, zTrial, tau) <= (1.0 - kAlpha * step) * r0) {
            accepted = true;
            break;
          }
        }
        step *= kBeta;
        ++iterations;
      }
      if (!accepted) break;  // stalled at working precision; the certificate decides
      x = std::move(xTrial);
      z = std::move(zTrial);
    }
    return {std::move(x), std::move(z), iterations};
  }

  std::size_t numA() const { return numA_; }
  std::size_t numB() const { return numB_; }

 private:
  double expg(const Eigen::VectorXd& x, std::size_t atom) const {
    const long gi = lay_.gIndex[atom];
    return gi < 0 ? 0.0 : std::exp(x(gi) - 1.0);
  }

  // Constraint values f_k(x); false if any is not strictly negative.
  bool constraints(const Eigen::VectorXd& x, Eigen::VectorXd& f) const {
    std::size_t k = 0;
    if (lay_.freePost) {
      const double l2 = x(lay_.lambda2());
      for (std::size_t a = 0; a < lay_.postRows.size(); ++a) {
        const double s = x(lay_.sOffset() + a);
        const std::size_t j = lay_.postRows[a];
        for (std::size_t b = 0; b < lay_.nG(); ++b) f(k++) = s - x(b) - l2 * costs_(j, lay_.gAtoms[b]);
      }
    }
    if (lay_.freePre) {
      const double l1 = x(lay_.lambda1());
      std::vector<double> e(n_);
      for (std::size_t l = 0; l < n_; ++l) e[l] = expg(x, l);
      for (std::size_t a = 0; a < lay_.preRows.size(); ++a) {
        const double t = x(lay_.tOffset() + a);
        const std::size_t i = lay_.preRows[a];
        for (std::size_t l = 0; l < n_; ++l) f(k++) = t + e[l] - l1 * costs_(i, l);
      }
      f(k++) = -l1;
    }
    if (lay_.freePost) f(k++) = -x(lay_.lambda2());
    for (Eigen::Index q = 0; q < f.size(); ++q) {
      if (!(f(q) < 0.0)) return false;
    }
    return true;
  }

  // Gradient of the (minimized) dual objective.
  void objective_gradient(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const {
    grad.setZero();
    if (lay_.freePost) {
      grad(lay_.lambda2()) = r2_;
      for (std::size_t a = 0; a < lay_.postRows.size(); ++a) grad(lay_.sOffset() + a) = -nu0_[lay_.postRows[a]];
    } else {
      for (std::size_t b = 0; b < lay_.nG(); ++b) grad(b) -= nu0_[lay_.gAtoms[b]];
    }
    if (lay_.freePre) {
      grad(lay_.lambda1()) = r1_;
      for (std::size_t a = 0; a < lay_.preRows.size(); ++a) grad(lay_.tOffset() + a) = -mu0_[lay_.preRows[a]];
    } else {
      for (std::size_t b = 0; b < lay_.nG(); ++b) grad(b) += mu0_[lay_.gAtoms[b]] * std::exp(x(b) - 1.0);
    }
  }

  // grad F0 + sum_k z_k grad f_k
  void dual_residual(const Eigen::VectorXd& x, const Eigen::VectorXd& z, Eigen::VectorXd& r) const {
    objective_gradient(x, r);
    std::size_t k = 0;
    if (lay_.freePost) {
      const long il2 = lay_.lambda2();
      for (std::size_t a = 0; a < lay_.postRows.size(); ++a) {
        const std::size_t j = lay_.postRows[a];
        for (std::size_t b = 0; b < lay_.nG(); ++b, ++k) {
          r(lay_.sOffset() + a) += z(k);
          r(b) -= z(k);
          r(il2) -= z(k) * costs_(j, lay_.gAtoms[b]);
        }
      }
    }
    if (lay_.freePre) {
      const long il1 = lay_.lambda1();
      for (std::size_t a = 0; a < lay_.preRows.size(); ++a) {
        const std::size_t i = lay_.preRows[a];
        for (std::size_t l = 0; l < n_; ++l, ++k) {
          r(lay_.tOffset() + a) += z(k);
          const long gi = lay_.gIndex[l];
          if (gi >= 0) r(gi) += z(k) * std::exp(x(gi) - 1.0);
          r(il1) -= z(k) * costs_(i, l);
        }
      }
      r(il1) -= z(k++);
    }
    if (lay_.freePost) r(lay_.lambda2()) -= z(k++);
  }

  void constraint_directional(const Eigen::VectorXd& x, const Eigen::VectorXd& dx, Eigen::VectorXd& out) const {
    std::size_t k = 0;
    if (lay_.freePost) {
      const double dl2 = dx(lay_.lambda2());
      for (std::size_t a = 0; a < lay_.postRows.size(); ++a) {
        const std::size_t j = lay_.postRows[a];
        for (std::size_t b = 0; b < lay_.nG(); ++b) {
          out(k++) = dx(lay_.sOffset() + a) - dx(b) - dl2 * costs_(j, lay_.gAtoms[b]);
        }
      }
    }
    if (lay_.freePre) {
      const double dl1 = dx(lay_.lambda1());
      for (std::size_t a = 0; a < lay_.preRows.size(); ++a) {
        const std::size_t i = lay_.preRows[a];
        for (std::size_t l = 0; l < n_; ++l) {
          const long gi = lay_.gIndex[l];
          const double dg = gi >= 0 ? std::exp(x(gi) - 1.0) * dx(gi) : 0.0;
          out(k++) = dx(lay_.tOffset() + a) + dg - dl1 * costs_(i, l);
        }
      }
      out(k++) = -dl1;
    }
    if (lay_.freePost) out(k++) = -dx(lay_.lambda2());
  }

  double residual_norm(const Eigen::VectorXd& rDual, const Eigen::VectorXd& f, const Eigen::VectorXd& z,
                       double tau) const {
    double acc = rDual.squaredNorm();
    for (std::size_t k = 0; k < m_; ++k) {
      const double rc = -z(k) * f(k) - 1.0 / tau;
      acc += rc * rc;
    }
    return std::sqrt(acc);
  }

  // M = hess F0 + sum z_k hess f_k + sum w_k grad f_k grad f_k^T,
  // rhs = -grad F0 - (1/tau) sum grad f_k / (-f_k).
  void assemble(const Eigen::VectorXd& x, const Eigen::VectorXd& z, const Eigen::VectorXd& f, double tau,
                Eigen::MatrixXd& M, Eigen::VectorXd& rhs) const {
    objective_gradient(x, rhs);
    rhs = -rhs;
    if (!lay_.freePre) {
      for (std::size_t b = 0; b < lay_.nG(); ++b) M(b, b) += mu0_[lay_.gAtoms[b]] * std::exp(x(b) - 1.0);
    }
    std::size_t k = 0;
    if (lay_.freePost) {
      const long il2 = lay_.lambda2();
      for (std::size_t a = 0; a < lay_.postRows.size(); ++a) {
        const std::size_t j = lay_.postRows[a];
        const long is = static_cast<long>(lay_.sOffset() + a);
        for (std::size_t b = 0; b < lay_.nG(); ++b, ++k) {
          const double slack = -f(k);
          const double w = z(k) / slack;
          const double c = costs_(j, lay_.gAtoms[b]);
          const long ig = static_cast<long>(b);
          // gradient: +1 at s, -1 at g, -c at lambda2
          M(is, is) += w;
          M(ig, ig) += w;
          M(il2, il2) += w * c * c;
          M(is, ig) -= w;
          M(ig, is) -= w;
          M(is, il2) -= w * c;
          M(il2, is) -= w * c;
          M(ig, il2) += w * c;
          M(il2, ig) += w * c;
          const double bar = 1.0 / (tau * slack);
          rhs(is) -= bar;
          rhs(ig) += bar;
          rhs(il2) += bar * c;
        }
      }
    }
    if (lay_.freePre) {
      const long il1 = lay_.lambda1();
      std::vector<double> e(n_);
      for (std::size_t l = 0; l < n_; ++l) e[l] = expg(x, l);
      for (std::size_t a = 0; a < lay_.preRows.size(); ++a) {
        const std::size_t i = lay_.preRows[a];
        const long it = static_cast<long>(lay_.tOffset() + a);
        for (std::size_t l = 0; l < n_; ++l, ++k) {
          const double slack = -f(k);
          const double w = z(k) / slack;
          const double c = costs_(i, l);
          const double bar = 1.0 / (tau * slack);
          const long ig = lay_.gIndex[l];
          // gradient: +1 at t, +e at g, -c at lambda1; hessian e at (g, g)
          M(it, it) += w;
          M(il1, il1) += w * c * c;
          M(it, il1) -= w * c;
          M(il1, it) -= w * c;
          rhs(it) -= bar;
          rhs(il1) += bar * c;
          if (ig >= 0) {
            const double g = e[l];
            M(ig, ig) += w * g * g + z(k) * g;
            M(it, ig) += w * g;
            M(ig, it) += w * g;
            M(ig, il1) -= w * g * c;
            M(il1, ig) -= w * g * c;
            rhs(ig) -= bar * g;
          }
        }
      }
      const double slack = -f(k);
      M(il1, il1) += z(k) / slack;
      rhs(il1) += 1.0 / (tau * slack);
      ++k;
    }
    if (lay_.freePost) {
      const long il2 = lay_.lambda2();
      const double slack = -f(k);
      M(il2, il2) += z(k) / slack;
      rhs(il2) += 1.0 / (tau * slack);
      ++k;
    }
  }

  const std::vector<double>& mu0_;
  const std::vector<double>& nu0_;
  const Matrix& costs_;
  double r1_, r2_;
  std::size_t n_;
  Layout lay_;
  std::size_t numA_ = 0, numB_ = 0, m_ = 0;
};

// Rescales rows to the nominal exactly, then pulls the plan toward the
// cheapest admissible plan until the budget holds.
void repair_plan(Matrix& plan, const std::vector<double>& nominal, const Matrix& costs, double radius,
                 const std::vector<std::size_t>& admissible) {
  const Eigen::Index n = plan.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = plan.row(i).sum();
    if (nominal[i] <= 0.0) {
      plan.row(i).setZero();
    } else if (s > 0.0) {
      plan.row(i) *= nominal[i] / s;
    }
  }
  double cost = plan.cwiseProduct(costs).sum();
  if (cost <= radius) return;
  Matrix cheapest = Matrix::Zero(n, plan.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (nominal[i] <= 0.0) continue;
    std::size_t best = admissible.front();
    for (std::size_t l : admissible) if (costs(i, l) < costs(i, best)) best = l;
    cheapest(i, best) = nominal[i];
  }
  const double base = cheapest.cwiseProduct(costs).sum();
  if (base >= radius) {
    plan = cheapest;
    return;
  }
  // Slightly overshoot so rounding cannot leave the budget violated.
  const double theta = std::min(1.0, (cost - radius) / (cost - base) * (1.0 + 1e-12) + 1e-16);
  plan = (1.0 - theta) * plan + theta * cheapest;
}

TransportPlan make_plan(Matrix matrix, const std::vector<double>& rows, const Matrix& costs) {
  TransportPlan plan;
  plan.rowMarginal = rows;
  plan.colMarginal.resize(matrix.cols());
  for (Eigen::Index l = 0; l < matrix.cols(); ++l) plan.colMarginal[l] = matrix.col(l).sum();
  plan.cost = matrix.cwiseProduct(costs).sum();
  plan.matrix = std::move(matrix);
  return plan;
}

Matrix diagonal_plan(const std::vector<double>& w) {
  Matrix m = Matrix::Zero(w.size(), w.size());
  for (std::size_t i = 0; i < w.size(); ++i) m(i, i) = w[i];
  return m;
}

}  // namespace

double lfd_dual_bound(std::span<const double> g, std::span<const double> mu0, std::span<const double> nu0,
                      const Matrix& costs, double r1, double r2) {
  const std::size_t n = g.size();
  double post = 0.0;
  if (r2 > 0.0) {
    std::vector<double> negG(n);
    for (std::size_t l = 0; l < n; ++l) negG[l] = -g[l];
    post = -worst_case_expectation(negG, nu0, costs, r2).value;
  } else {
    for (std::size_t l = 0; l < n; ++l) if (nu0[l] > 0.0) post += nu0[l] * g[l];
  }
  double pre = 0.0;
  if (r1 > 0.0) {
    std::vector<double> e(n);
    for (std::size_t l = 0; l < n; ++l) e[l] = std::exp(g[l] - 1.0);
    pre = -worst_case_expectation(e, mu0, costs, r1).value;
  } else {
    for (std::size_t l = 0; l < n; ++l) if (mu0[l] > 0.0) pre -= mu0[l] * std::exp(g[l] - 1.0);
  }
  return post + pre;
}

LfdSolution solve_lfd(const LfdProblem& problem, const SolverTolerances& tol) {
  problem.validate();
  JointSupport joint = build_joint_support(problem);
  const std::size_t n = joint.support.size();
  const Matrix costs = cost_matrix(problem.metric, joint.support, joint.support);
  const double r1 = problem.r1, r2 = problem.r2;

  LfdSolution sol;
  sol.jointSupport = joint.support;
  sol.mu0 = joint.mu0;
  sol.nu0 = joint.nu0;
  sol.r1 = r1;
  sol.r2 = r2;
  sol.metric = problem.metric;

  std::vector<std::size_t> preSupport, allAtoms(n);
  for (std::size_t l = 0; l < n; ++l) {
    allAtoms[l] = l;
    if (joint.mu0[l] > 0.0) preSupport.push_back(l);
  }

  if (r1 == 0.0) {
    // p1 is pinned to mu0, so p2 must live on supp(mu0).
    double base = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (joint.nu0[j] <= 0.0) continue;
      double best = kInf;
      for (std::size_t l : preSupport) best = std::min(best, costs(j, l));
      base += joint.nu0[j] * best;
    }
    if (base > r2) {
      throw InfeasibleProblem("no post-change distribution within radius r2 = " + format_shortest(r2) +
                              " is absolutely continuous with respect to the pre-change nominal (r1 = 0); "
                              "the cheapest one is at distance " + format_shortest(base));
    }
  }

  if (r1 == 0.0 && r2 == 0.0) {
    sol.p1 = joint.mu0;
    sol.p2 = joint.nu0;
    sol.plan1 = make_plan(diagonal_plan(joint.mu0), joint.mu0, costs);
    sol.plan2 = make_plan(diagonal_plan(joint.nu0), joint.nu0, costs);
    sol.objective = kl_divergence(sol.p2, sol.p1);
    std::vector<double> g(n);
    for (std::size_t l = 0; l < n; ++l) {
      if (joint.mu0[l] > 0.0 && joint.nu0[l] > 0.0) g[l] = 1.0 + std::log(joint.nu0[l] / joint.mu0[l]);
      else g[l] = joint.mu0[l] > 0.0 ? -kInf : kInf;
    }
    sol.certificate.dualBound = sol.objective;
    sol.certificate.dualVariables.g = std::move(g);
    sol.certificate.relativeGap = 0.0;
    sol.certificate.primalResidual = 0.0;
    return sol;
  }

  DualInteriorPoint ipm(joint.mu0, joint.nu0, costs, r1, r2);
  const auto result = ipm.run(tol.maxIterations);
  const Layout& lay = ipm.layout();

  std::vector<double> g(n);
  for (std::size_t l = 0; l < n; ++l) {
    const long gi = lay.gIndex[l];
    if (gi >= 0) g[l] = result.x(gi);
    else g[l] = lay.freePre ? -kInf : kInf;
  }

  Matrix gamma2, gamma1;
  std::size_t k = 0;
  if (lay.freePost) {
    gamma2 = Matrix::Zero(n, n);
    for (std::size_t a = 0; a < lay.postRows.size(); ++a) {
      for (std::size_t b = 0; b < lay.nG(); ++b) gamma2(lay.postRows[a], lay.gAtoms[b]) = result.z(k++);
    }
    repair_plan(gamma2, joint.nu0, costs, r2, lay.freePre ? allAtoms : preSupport);
  } else {
    gamma2 = diagonal_plan(joint.nu0);
  }
  if (lay.freePre) {
    gamma1 = Matrix::Zero(n, n);
    for (std::size_t a = 0; a < lay.preRows.size(); ++a) {
      for (std::size_t l = 0; l < n; ++l) gamma1(lay.preRows[a], l) = result.z(k++);
    }
    repair_plan(gamma1, joint.mu0, costs, r1, allAtoms);
  } else {
    gamma1 = diagonal_plan(joint.mu0);
  }
  sol.plan1 = make_plan(std::move(gamma1), joint.mu0, costs);
  sol.plan2 = make_plan(std::move(gamma2), joint.nu0, costs);
  sol.p1 = sol.plan1.colMarginal;
  sol.p2 = sol.plan2.colMarginal;
  sol.objective = kl_divergence(sol.p2, sol.p1);

  SolverCertificate& cert = sol.certificate;
  cert.iterations = result.iterations;
  cert.dualBound = lfd_dual_bound(g, joint.mu0, joint.nu0, costs, r1, r2);
  cert.relativeGap = (sol.objective - cert.dualBound) / std::max(1.0, std::abs(sol.objective));
  cert.primalResidual = std::max({sol.plan1.max_residual(costs), sol.plan2.max_residual(costs),
                                  sol.plan1.cost - r1, sol.plan2.cost - r2, 0.0});
  DualVariables& dv = cert.dualVariables;
  dv.g = std::move(g);
  if (lay.freePre) {
    dv.lambda1 = result.x(lay.lambda1());
    for (std::size_t a = 0; a < lay.preRows.size(); ++a) dv.u1.push_back(result.x(lay.tOffset() + a));
  }
  if (lay.freePost) {
    dv.lambda2 = result.x(lay.lambda2());
    for (std::size_t a = 0; a < lay.postRows.size(); ++a) dv.u2.push_back(result.x(lay.sOffset() + a));
  }

  if (!std::isfinite(sol.objective)) {
    throw NumericalError("recovered LFD pair is not absolutely continuous", kInf);
  }
  if (cert.primalResidual > tol.feasTol) {
    throw NumericalError("LFD solution violates feasibility tolerance", cert.primalResidual);
  }
  if (cert.relativeGap > tol.gapTol) {
    throw NumericalError("LFD duality gap above tolerance after " + std::to_string(cert.iterations) + " iterations",
                         cert.relativeGap);
  }
  return sol;
}

}  // namespace wasserquick
