// Least favorable distributions over KL balls around binned nominals.
//
// Primal: barrier method with equality-constrained Newton steps on the
// free blocks. Certificate: for g = 1 + log(p2/p1),
//   KL* >= min_{K1} <-exp(g - 1), p1> + min_{K2} <g, p2>,
// and each linear minimum over a KL ball has the one-dimensional dual
//   max_{K(mu, r)} <h, p> = min_{a > 0} a r + a log E_mu exp(h / a).

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "wasserquick/error.hpp"
#include "wasserquick/lfd.hpp"

namespace wasserquick {

namespace {

struct Support {
  double value;
  double alpha;
};

// max <h, p> over {p : KL(p || w) <= r}; returns the bound and its alpha.
Support kl_ball_support(std::span<const double> h, std::span<const double> w, double r) {
  double hmax = -std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < h.size(); ++l) if (w[l] > 0.0) hmax = std::max(hmax, h[l]);
  auto psi = [&](double logAlpha) {
    const double a = std::exp(logAlpha);
    double acc = 0.0;
    for (std::size_t l = 0; l < h.size(); ++l) {
      if (w[l] > 0.0) acc += w[l] * std::exp((h[l] - hmax) / a);
    }
    return a * r + hmax + a * std::log(acc);
  };
  const auto [logAlpha, value] = boost::math::tools::brent_find_minima(psi, -40.0, 40.0, 52);
  if (hmax <= value) return {hmax, 0.0};
  return {value, std::exp(logAlpha)};
}

double kl_to(std::span<const double> p, std::span<const double> q) { return kl_divergence(p, q); }

struct BarrierProblem {
  std::vector<double> mu0, nu0;
  double r1, r2;
  bool free1, free2;
  std::size_t L;

  // Assemble p1, p2 from the free-variable vector.
  void unpack(const Eigen::VectorXd& v, std::vector<double>& p1, std::vector<double>& p2) const {
    std::size_t off = 0;
    if (free1) {
      for (std::size_t l = 0; l < L; ++l) p1[l] = v(off + l);
      off += L;
    } else {
      p1 = mu0;
    }
    if (free2) {
      for (std::size_t l = 0; l < L; ++l) p2[l] = v(off + l);
    } else {
      p2 = nu0;
    }
  }

  // Barrier value; +inf outside the domain.
  double value(const Eigen::VectorXd& v, double tau) const {
    std::vector<double> p1(L), p2(L);
    unpack(v, p1, p2);
    for (std::size_t l = 0; l < L; ++l) {
      if (!(p1[l] > 0.0) || !(p2[l] > 0.0)) return std::numeric_limits<double>::infinity();
    }
    double f = tau * kl_to(p2, p1);
    if (free1) {
      const double slack = r1 - kl_to(p1, mu0);
      if (!(slack > 0.0)) return std::numeric_limits<double>::infinity();
      f -= std::log(slack);
    }
    if (free2) {
      const double slack = r2 - kl_to(p2, nu0);
      if (!(slack > 0.0)) return std::numeric_limits<double>::infinity();
      f -= std::log(slack);
    }
    return f;
  }

  void derivatives(const Eigen::VectorXd& v, double tau, Eigen::VectorXd& grad, Eigen::MatrixXd& hess) const {
    std::vector<double> p1(L), p2(L);
    unpack(v, p1, p2);
    const std::size_t n = v.size();
    grad.setZero(n);
    hess.setZero(n, n);
    const long o1 = free1 ? 0 : -1;
    const long o2 = free2 ? (free1 ? static_cast<long>(L) : 0) : -1;
    for (std::size_t l = 0; l < L; ++l) {
      const double a = p1[l], b = p2[l];
      if (o1 >= 0) {
        grad(o1 + l) += -tau * b / a;
        hess(o1 + l, o1 + l) += tau * b / (a * a);
      }
      if (o2 >= 0) {
        grad(o2 + l) += tau * (std::log(b / a) + 1.0);
        hess(o2 + l, o2 + l) += tau / b;
      }
      if (o1 >= 0 && o2 >= 0) {
        hess(o1 + l, o2 + l) += -tau / a;
        hess(o2 + l, o1 + l) += -tau / a;
      }
    }
    auto barrier = [&](long off, const std::vector<double>& p, const std::vector<double>& q, double r) {
      const double slack = r - kl_to(p, q);
      Eigen::VectorXd dk(L);
      for (std::size_t l = 0; l < L; ++l) dk(l) = std::log(p[l] / q[l]) + 1.0;
      grad.segment(off, L) += dk / slack;
      hess.block(off, off, L, L) += dk * dk.transpose() / (slack * slack);
      for (std::size_t l = 0; l < L; ++l) hess(off + l, off + l) += 1.0 / (p[l] * slack);
    };
    if (o1 >= 0) barrier(o1, p1, mu0, r1);
    if (o2 >= 0) barrier(o2, p2, nu0, r2);
  }
};

void check_positive_vector(std::span<const double> p, const char* what) {
  double total = 0.0;
  for (double x : p) {
    if (!(x > 0.0) || !std::isfinite(x)) {
      throw InvalidInput(std::string(what) + " must be strictly positive (floor the binned vector first)");
    }
    total += x;
  }
  if (std::abs(total - 1.0) > kWeightRenormTol) throw InvalidInput(std::string(what) + " does not sum to 1");
}

}  // namespace

KlLfdSolution solve_lfd_kl(std::span<const double> mu0, std::span<const double> nu0, double r1, double r2,
                           const SolverTolerances& tol) {
  if (mu0.size() != nu0.size() || mu0.empty()) throw InvalidInput("binned nominals differ in length");
  check_positive_vector(mu0, "mu0");
  check_positive_vector(nu0, "nu0");
  if (!(r1 >= 0.0) || !(r2 >= 0.0)) throw InvalidInput("KL radii must be >= 0");

  BarrierProblem bp{{mu0.begin(), mu0.end()}, {nu0.begin(), nu0.end()}, r1, r2, r1 > 0.0, r2 > 0.0, mu0.size()};
  const std::size_t L = bp.L;
  const std::size_t nFree = (bp.free1 ? L : 0) + (bp.free2 ? L : 0);
  const std::size_t nEq = (bp.free1 ? 1 : 0) + (bp.free2 ? 1 : 0);

  Eigen::VectorXd v(nFree);
  {
    std::size_t off = 0;
    if (bp.free1) { for (std::size_t l = 0; l < L; ++l) v(off + l) = mu0[l]; off += L; }
    if (bp.free2) { for (std::size_t l = 0; l < L; ++l) v(off + l) = nu0[l]; }
  }
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(nEq, nFree);
  {
    std::size_t row = 0, off = 0;
    if (bp.free1) { A.block(row++, off, 1, L).setOnes(); off += L; }
    if (bp.free2) { A.block(row, off, 1, L).setOnes(); }
  }

  std::size_t iterations = 0;
  if (nFree > 0) {
    const double mConstraints = static_cast<double>(nEq);
    double tau = 1.0;
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
    Eigen::MatrixXd kkt(nFree + nEq, nFree + nEq);
    Eigen::VectorXd rhs(nFree + nEq);
    while (true) {
      for (int newton = 0; newton < 200 && iterations < tol.maxIterations; ++newton) {
        ++iterations;
        bp.derivatives(v, tau, grad, hess);
        kkt.setZero();
        kkt.topLeftCorner(nFree, nFree) = hess;
        kkt.topRightCorner(nFree, nEq) = A.transpose();
        kkt.bottomLeftCorner(nEq, nFree) = A;
        rhs.setZero();
        rhs.head(nFree) = -grad;
        const Eigen::VectorXd sol = kkt.partialPivLu().solve(rhs);
        const Eigen::VectorXd dv = sol.head(nFree);
        const double decrement = dv.dot(hess * dv);
        if (!(decrement >= 0.0) || decrement / 2.0 <= 1e-15) break;
        const double f0 = bp.value(v, tau);
        double step = 1.0;
        while (step > 1e-16 && bp.value(v + step * dv, tau) > f0 - 0.25 * step * decrement) step *= 0.5;
        if (step <= 1e-16) break;
        v += step * dv;
        // Keep the simplex constraints exact against drift.
        std::size_t off = 0;
        if (bp.free1) { v.segment(off, L) /= v.segment(off, L).sum(); off += L; }
        if (bp.free2) { v.segment(off, L) /= v.segment(off, L).sum(); }
      }
      if (mConstraints / tau < 1e-11 || iterations >= tol.maxIterations) break;
      tau *= 20.0;
    }
  }

  KlLfdSolution out;
  out.p1.resize(L);
  out.p2.resize(L);
  bp.unpack(v, out.p1, out.p2);
  out.r1 = r1;
  out.r2 = r2;
  out.objective = kl_divergence(out.p2, out.p1);

  std::vector<double> g(L), ratio(L);
  for (std::size_t l = 0; l < L; ++l) {
    ratio[l] = out.p2[l] / out.p1[l];
    g[l] = 1.0 + std::log(ratio[l]);
  }
  double post = 0.0, pre = 0.0;
  SolverCertificate& cert = out.certificate;
  if (bp.free2) {
    std::vector<double> negG(L);
    for (std::size_t l = 0; l < L; ++l) negG[l] = -g[l];
    const Support s = kl_ball_support(negG, nu0, r2);
    post = -s.value;
    cert.dualVariables.lambda2 = s.alpha;
  } else {
    for (std::size_t l = 0; l < L; ++l) post += nu0[l] * g[l];
  }
  if (bp.free1) {
    const Support s = kl_ball_support(ratio, mu0, r1);
    pre = -s.value;
    cert.dualVariables.lambda1 = s.alpha;
  } else {
    for (std::size_t l = 0; l < L; ++l) pre -= mu0[l] * ratio[l];
  }
  cert.dualBound = post + pre;
  cert.iterations = iterations;
  cert.relativeGap = (out.objective - cert.dualBound) / std::max(1.0, std::abs(out.objective));
  double residual = std::max(std::abs(std::accumulate(out.p1.begin(), out.p1.end(), 0.0) - 1.0),
                             std::abs(std::accumulate(out.p2.begin(), out.p2.end(), 0.0) - 1.0));
  if (bp.free1) residual = std::max(residual, kl_divergence(out.p1, mu0) - r1);
  if (bp.free2) residual = std::max(residual, kl_divergence(out.p2, nu0) - r2);
  cert.primalResidual = std::max(residual, 0.0);
  cert.dualVariables.g = std::move(g);

  if (cert.primalResidual > tol.feasTol) {
    throw NumericalError("KL LFD solution violates feasibility tolerance", cert.primalResidual);
  }
  if (cert.relativeGap > tol.gapTol) {
    throw NumericalError("KL LFD duality gap above tolerance", cert.relativeGap);
  }
  return out;
}

}  // namespace wasserquick
