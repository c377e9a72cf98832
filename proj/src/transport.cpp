#include "wasserquick/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "wasserquick/error.hpp"

namespace wasserquick {

double TransportPlan::max_residual(const Matrix& costs) const {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    worst = std::max(worst, std::abs(matrix.row(i).sum() - rowMarginal[i]));
  }
  for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
    worst = std::max(worst, std::abs(matrix.col(j).sum() - colMarginal[j]));
  }
  if (matrix.size() > 0) worst = std::max(worst, -matrix.minCoeff());
  worst = std::max(worst, std::abs(matrix.cwiseProduct(costs).sum() - cost));
  return worst;
}

namespace {

// Transportation simplex on the compressed problem (all marginals > 0).
// The basis is a spanning tree over row nodes [0, k) and column nodes
// [k, k + m) with exactly k + m - 1 cells, degenerate ones included.
class TransportationSimplex {
 public:
  TransportationSimplex(std::vector<double> supply, std::vector<double> demand, Matrix costs)
      : k_(supply.size()), m_(demand.size()), supply_(std::move(supply)), demand_(std::move(demand)),
        costs_(std::move(costs)), adjacency_(k_ + m_), u_(k_), v_(m_) {}

  Matrix solve(std::size_t maxPivots) {
    northwest_corner();
    const double scale = std::max(1.0, costs_.cwiseAbs().maxCoeff());
    const double tol = 1e-12 * scale;
    std::size_t degenerateRun = 0;
    for (std::size_t pivot = 0; pivot < maxPivots; ++pivot) {
      compute_potentials();
      const bool bland = degenerateRun > 2 * (k_ + m_);
      auto [ei, ej, reduced] = price(bland, tol);
      if (reduced >= -tol) return flows();
      const bool degenerate = !pivot_in(ei, ej);
      degenerateRun = degenerate ? degenerateRun + 1 : 0;
    }
    throw NumericalError("transportation simplex exceeded its pivot budget", residual());
  }

 private:
  struct Cell {
    std::size_t row, col;
    double flow;
  };

  void add_cell(std::size_t i, std::size_t j, double flow) {
    const std::size_t id = cells_.size();
    cells_.push_back({i, j, flow});
    adjacency_[i].push_back(id);
    adjacency_[k_ + j].push_back(id);
  }

  void northwest_corner() {
    std::vector<double> s = supply_;
    std::vector<double> d = demand_;
    std::size_t i = 0, j = 0;
    for (std::size_t step = 0; step + 1 < k_ + m_; ++step) {
      const double x = std::max(0.0, std::min(s[i], d[j]));
      add_cell(i, j, x);
      s[i] -= x;
      d[j] -= x;
      if (i == k_ - 1) {
        ++j;
      } else if (j == m_ - 1) {
        ++i;
      } else if (s[i] <= d[j]) {
        ++i;
      } else {
        ++j;
      }
    }
    // Any rounding remainder lands on the last row/column cell.
    if (!cells_.empty()) {
      Cell& last = cells_.back();
      last.flow = std::max(0.0, last.flow + std::min(s[last.row], d[last.col]));
    }
  }

  void compute_potentials() {
    std::vector<char> seen(k_ + m_, 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    u_[0] = 0.0;
    while (!stack.empty()) {
      const std::size_t node = stack.back();
      stack.pop_back();
      for (std::size_t id : adjacency_[node]) {
        const Cell& c = cells_[id];
        const std::size_t other = node < k_ ? k_ + c.col : c.row;
        if (seen[other]) continue;
        seen[other] = 1;
        if (node < k_) {
          v_[c.col] = costs_(c.row, c.col) - u_[c.row];
        } else {
          u_[c.row] = costs_(c.row, c.col) - v_[c.col];
        }
        stack.push_back(other);
      }
    }
  }

  std::tuple<std::size_t, std::size_t, double> price(bool bland, double tol) const {
    std::size_t bi = 0, bj = 0;
    double best = 0.0;
    for (std::size_t i = 0; i < k_; ++i) {
      for (std::size_t j = 0; j < m_; ++j) {
        const double r = costs_(i, j) - u_[i] - v_[j];
        if (r < best) {
          best = r;
          bi = i;
          bj = j;
          if (bland && r < -tol) return {bi, bj, best};
        }
      }
    }
    return {bi, bj, best};
  }

  // Returns false for a degenerate pivot (zero step).
  bool pivot_in(std::size_t ei, std::size_t ej) {
    // Tree path from column node ej to row node ei.
    const std::size_t target = ei;
    std::vector<std::size_t> parentCell(k_ + m_, kNone);
    std::vector<char> seen(k_ + m_, 0);
    std::vector<std::size_t> stack{k_ + ej};
    seen[k_ + ej] = 1;
    while (!stack.empty() && !seen[target]) {
      const std::size_t node = stack.back();
      stack.pop_back();
      for (std::size_t id : adjacency_[node]) {
        const Cell& c = cells_[id];
        const std::size_t other = node < k_ ? k_ + c.col : c.row;
        if (seen[other]) continue;
        seen[other] = 1;
        parentCell[other] = id;
        stack.push_back(other);
      }
    }
    // Walk back from the row node; edges alternate -, +, -, ... starting at
    // the edge incident to the row node.
    std::vector<std::size_t> path;
    for (std::size_t node = target; node != k_ + ej;) {
      const std::size_t id = parentCell[node];
      path.push_back(id);
      const Cell& c = cells_[id];
      node = node < k_ ? k_ + c.col : c.row;
    }
    double theta = std::numeric_limits<double>::infinity();
    std::size_t leaving = kNone;
    for (std::size_t p = 0; p < path.size(); p += 2) {
      const Cell& c = cells_[path[p]];
      if (c.flow < theta || (c.flow == theta && path[p] < leaving)) {
        theta = c.flow;
        leaving = path[p];
      }
    }
    theta = std::max(theta, 0.0);
    for (std::size_t p = 0; p < path.size(); ++p) {
      Cell& c = cells_[path[p]];
      c.flow = p % 2 == 0 ? std::max(0.0, c.flow - theta) : c.flow + theta;
    }
    // Replace the leaving cell in place with the entering one.
    Cell& out = cells_[leaving];
    auto detach = [&](std::size_t node) {
      auto& adj = adjacency_[node];
      adj.erase(std::find(adj.begin(), adj.end(), leaving));
    };
    detach(out.row);
    detach(k_ + out.col);
    out = Cell{ei, ej, theta};
    adjacency_[ei].push_back(leaving);
    adjacency_[k_ + ej].push_back(leaving);
    return theta > 0.0;
  }

  Matrix flows() const {
    Matrix x = Matrix::Zero(k_, m_);
    for (const Cell& c : cells_) x(c.row, c.col) += c.flow;
    return x;
  }

  double residual() const {
    const Matrix x = flows();
    double worst = 0.0;
    for (std::size_t i = 0; i < k_; ++i) worst = std::max(worst, std::abs(x.row(i).sum() - supply_[i]));
    for (std::size_t j = 0; j < m_; ++j) worst = std::max(worst, std::abs(x.col(j).sum() - demand_[j]));
    return worst;
  }

  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  std::size_t k_, m_;
  std::vector<double> supply_, demand_;
  Matrix costs_;
  std::vector<Cell> cells_;
  std::vector<std::vector<std::size_t>> adjacency_;
  std::vector<double> u_, v_;
};

void check_marginal(std::span<const double> w, const char* what) {
  double total = 0.0;
  for (double x : w) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw InvalidInput(std::string(what) + " has a negative or non-finite entry");
    total += x;
  }
  if (std::abs(total - 1.0) > kWeightRenormTol) {
    throw InvalidInput(std::string(what) + " sums to " + std::to_string(total) + ", expected 1");
  }
}

}  // namespace

WassersteinResult transport_lp(std::span<const double> rowMarginal, std::span<const double> colMarginal,
                               const Matrix& costs) {
  check_marginal(rowMarginal, "row marginal");
  check_marginal(colMarginal, "column marginal");
  if (costs.rows() != static_cast<Eigen::Index>(rowMarginal.size()) ||
      costs.cols() != static_cast<Eigen::Index>(colMarginal.size())) {
    throw InvalidInput("cost matrix shape does not match the marginals");
  }
  std::vector<std::size_t> rows, cols;
  for (std::size_t i = 0; i < rowMarginal.size(); ++i) if (rowMarginal[i] > 0.0) rows.push_back(i);
  for (std::size_t j = 0; j < colMarginal.size(); ++j) if (colMarginal[j] > 0.0) cols.push_back(j);

  std::vector<double> supply, demand;
  for (auto i : rows) supply.push_back(rowMarginal[i]);
  for (auto j : cols) demand.push_back(colMarginal[j]);
  Matrix sub(rows.size(), cols.size());
  for (std::size_t a = 0; a < rows.size(); ++a) {
    for (std::size_t b = 0; b < cols.size(); ++b) sub(a, b) = costs(rows[a], cols[b]);
  }
  TransportationSimplex simplex(std::move(supply), std::move(demand), sub);
  const std::size_t budget = 50 * (rows.size() + cols.size()) * (rows.size() + cols.size()) + 1000;
  const Matrix flows = simplex.solve(budget);

  TransportPlan plan;
  plan.matrix = Matrix::Zero(costs.rows(), costs.cols());
  for (std::size_t a = 0; a < rows.size(); ++a) {
    for (std::size_t b = 0; b < cols.size(); ++b) plan.matrix(rows[a], cols[b]) = flows(a, b);
  }
  plan.rowMarginal.assign(rowMarginal.begin(), rowMarginal.end());
  plan.colMarginal.assign(colMarginal.begin(), colMarginal.end());
  plan.cost = plan.matrix.cwiseProduct(costs).sum();
  const double residual = plan.max_residual(costs);
  if (residual > kMarginalTol) throw NumericalError("transport plan violates its marginals", residual);
  return {plan.cost, std::move(plan)};
}

WassersteinResult wasserstein_distance(const DiscreteDistribution& p, const DiscreteDistribution& q,
                                       GroundMetric metric) {
  if (p.dim() != q.dim()) throw InvalidInput("distributions differ in dimension");
  const Matrix costs = cost_matrix(metric, p.support(), q.support());
  return transport_lp(p.weights(), q.weights(), costs);
}

WorstCaseResult worst_case_expectation(std::span<const double> f, std::span<const double> nominal,
                                       const Matrix& costs, double radius) {
  const std::size_t n = f.size();
  if (nominal.size() != n || costs.rows() != static_cast<Eigen::Index>(n) ||
      costs.cols() != static_cast<Eigen::Index>(n)) {
    throw InvalidInput("worst_case_expectation: inconsistent sizes");
  }
  if (!(radius >= 0.0)) throw InvalidInput("radius must be >= 0");
  for (double x : f) {
    if (std::isnan(x) || x == std::numeric_limits<double>::infinity()) {
      throw InvalidInput("worst_case_expectation: f must be finite (or -inf to exclude an atom)");
    }
  }

  struct Vertex {
    double cost, value;
    std::size_t atom;
  };
  struct Segment {
    double slope;
    std::size_t row, index;  // moves row from hull vertex `index` to `index + 1`
  };
  std::vector<std::vector<Vertex>> hulls(n);
  std::vector<Segment> segments;
  double value = 0.0;
  double baseCost = 0.0;

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (nominal[i] <= 0.0) continue;
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (costs(i, a) != costs(i, b)) return costs(i, a) < costs(i, b);
      return f[a] > f[b];
    });
    auto& hull = hulls[i];
    for (std::size_t l : order) {
      if (f[l] == -std::numeric_limits<double>::infinity()) continue;
      const Vertex v{costs(i, l), f[l], l};
      if (hull.empty()) {
        hull.push_back(v);
        continue;
      }
      if (v.value <= hull.back().value || v.cost <= hull.back().cost) continue;
      auto slope = [](const Vertex& a, const Vertex& b) { return (b.value - a.value) / (b.cost - a.cost); };
      while (hull.size() >= 2 && slope(hull[hull.size() - 2], hull.back()) <= slope(hull.back(), v)) {
        hull.pop_back();
      }
      hull.push_back(v);
    }
    if (hull.empty()) throw InfeasibleProblem("no admissible atom for nominal atom " + std::to_string(i));
    value += nominal[i] * hull.front().value;
    baseCost += nominal[i] * hull.front().cost;
    for (std::size_t s = 0; s + 1 < hull.size(); ++s) {
      segments.push_back({(hull[s + 1].value - hull[s].value) / (hull[s + 1].cost - hull[s].cost), i, s});
    }
  }
  double budget = radius - baseCost;
  if (budget < -kMarginalTol) {
    throw InfeasibleProblem("cheapest admissible transport costs " + format_shortest(baseCost) +
                            ", above the radius " + format_shortest(radius));
  }
  budget = std::max(budget, 0.0);
  std::stable_sort(segments.begin(), segments.end(),
                   [](const Segment& a, const Segment& b) { return a.slope > b.slope; });

  std::vector<std::size_t> position(n, 0);
  std::vector<double> fraction(n, 0.0);
  for (const Segment& s : segments) {
    if (budget <= 0.0) break;
    const auto& hull = hulls[s.row];
    const Vertex& a = hull[s.index];
    const Vertex& b = hull[s.index + 1];
    const double need = nominal[s.row] * (b.cost - a.cost);
    if (need <= budget) {
      budget -= need;
      value += nominal[s.row] * (b.value - a.value);
      position[s.row] = s.index + 1;
    } else {
      const double theta = budget / need;
      value += nominal[s.row] * (b.value - a.value) * theta;
      fraction[s.row] = theta;
      budget = 0.0;
    }
  }

  WorstCaseResult out;
  out.value = value;
  out.witness.assign(n, 0.0);
  out.plan.matrix = Matrix::Zero(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (nominal[i] <= 0.0) continue;
    const auto& hull = hulls[i];
    const Vertex& here = hull[position[i]];
    out.plan.matrix(i, here.atom) += nominal[i] * (1.0 - fraction[i]);
    if (fraction[i] > 0.0) out.plan.matrix(i, hull[position[i] + 1].atom) += nominal[i] * fraction[i];
  }
  for (std::size_t l = 0; l < n; ++l) out.witness[l] = out.plan.matrix.col(l).sum();
  out.plan.rowMarginal.assign(nominal.begin(), nominal.end());
  out.plan.colMarginal = out.witness;
  out.plan.cost = out.plan.matrix.cwiseProduct(costs).sum();
  return out;
}

std::vector<double> weights_on_support(const DiscreteDistribution& dist, std::span<const Point> support) {
  std::map<Point, std::size_t> index;
  for (std::size_t l = 0; l < support.size(); ++l) index.emplace(support[l], l);
  std::vector<double> w(support.size(), 0.0);
  for (std::size_t a = 0; a < dist.size(); ++a) {
    auto it = index.find(dist.support()[a]);
    if (it == index.end()) {
      if (dist.weights()[a] > 0.0) throw InvalidInput("nominal atom is not in the candidate support");
      continue;
    }
    w[it->second] += dist.weights()[a];
  }
  return w;
}

WorstCaseDistribution worst_case_expectation(std::span<const double> f, const AmbiguitySpec& spec,
                                             std::span<const Point> support) {
  if (f.size() != support.size()) throw InvalidInput("f and support differ in length");
  const std::vector<double> nominal = weights_on_support(spec.nominal, support);
  const Matrix costs = cost_matrix(spec.metric, support, support);
  WorstCaseResult r = worst_case_expectation(f, nominal, costs, spec.radius);
  std::vector<Point> pts(support.begin(), support.end());
  return {r.value, DiscreteDistribution(std::move(pts), std::move(r.witness))};
}

}  // namespace wasserquick
