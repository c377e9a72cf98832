#include "wasserquick/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>

#include "wasserquick/error.hpp"

namespace wasserquick {

namespace {

void check_finite(const std::vector<double>& coords) {
  if (coords.empty()) throw InvalidInput("point must have at least one coordinate");
  for (double c : coords) {
    if (!std::isfinite(c)) throw InvalidInput("point coordinates must be finite");
  }
}

}  // namespace

Point::Point(std::vector<double> coords) : coords_(std::move(coords)) { check_finite(coords_); }

Point::Point(std::initializer_list<double> coords) : coords_(coords) { check_finite(coords_); }

std::string to_string(GroundMetric metric) {
  switch (metric) {
    case GroundMetric::L1: return "L1";
    case GroundMetric::L2: return "L2";
    case GroundMetric::Linf: return "Linf";
  }
  return "?";
}

GroundMetric parse_metric(std::string_view name) {
  if (name == "L1" || name == "l1") return GroundMetric::L1;
  if (name == "L2" || name == "l2") return GroundMetric::L2;
  if (name == "Linf" || name == "linf" || name == "LINF") return GroundMetric::Linf;
  throw InvalidInput("unknown metric '" + std::string(name) + "' (expected L1, L2 or Linf)");
}

DiscreteDistribution::DiscreteDistribution(std::vector<Point> support, std::vector<double> weights)
    : support_(std::move(support)), weights_(std::move(weights)) {
  if (support_.empty()) throw InvalidInput("distribution support is empty");
  if (support_.size() != weights_.size()) {
    throw InvalidInput("support and weight vectors differ in length");
  }
  require_dimension(support_, support_.front().dim(), "distribution support");
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidInput("weights must be finite and nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > kWeightRenormTol) {
    throw InvalidInput("weights sum to " + std::to_string(total) + ", expected 1");
  }
  if (std::abs(total - 1.0) > kWeightSumTol) {
    for (double& w : weights_) w /= total;
  }
  std::vector<const Point*> sorted;
  sorted.reserve(support_.size());
  for (const auto& p : support_) sorted.push_back(&p);
  std::sort(sorted.begin(), sorted.end(), [](const Point* a, const Point* b) { return *a < *b; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (*sorted[i] == *sorted[i - 1]) throw InvalidInput("support points must be distinct");
  }
}

AmbiguitySpec::AmbiguitySpec(DiscreteDistribution nominal_, double radius_, GroundMetric metric_)
    : nominal(std::move(nominal_)), radius(radius_), metric(metric_) {
  if (!(radius >= 0.0) || !std::isfinite(radius)) throw InvalidInput("radius must be finite and >= 0");
}

DiscreteDistribution empirical_from_samples(std::span<const Point> samples) {
  if (samples.empty()) throw InvalidInput("cannot build an empirical distribution from no samples");
  require_dimension(samples, samples.front().dim(), "samples");
  std::map<Point, std::size_t> index;
  std::vector<Point> support;
  std::vector<double> counts;
  for (const auto& s : samples) {
    auto [it, inserted] = index.try_emplace(s, support.size());
    if (inserted) {
      support.push_back(s);
      counts.push_back(0.0);
    }
    counts[it->second] += 1.0;
  }
  const double n = static_cast<double>(samples.size());
  for (double& c : counts) c /= n;
  return DiscreteDistribution(std::move(support), std::move(counts));
}

double ground_cost(GroundMetric metric, const Point& x, const Point& y) {
  if (x.dim() != y.dim()) {
    throw InvalidInput("dimension mismatch: " + std::to_string(x.dim()) + " vs " + std::to_string(y.dim()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < x.dim(); ++i) {
    const double d = std::abs(x[i] - y[i]);
    switch (metric) {
      case GroundMetric::L1: acc += d; break;
      case GroundMetric::L2: acc += d * d; break;
      case GroundMetric::Linf: acc = std::max(acc, d); break;
    }
  }
  return metric == GroundMetric::L2 ? std::sqrt(acc) : acc;
}

Matrix cost_matrix(GroundMetric metric, std::span<const Point> a, std::span<const Point> b) {
  if (!a.empty() && !b.empty()) require_dimension(b, a.front().dim(), "cost matrix columns");
  if (!a.empty()) require_dimension(a, a.front().dim(), "cost matrix rows");
  Matrix c(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) c(i, j) = ground_cost(metric, a[i], b[j]);
  }
  return c;
}

void require_dimension(std::span<const Point> points, std::size_t dim, std::string_view what) {
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].dim() != dim) {
      throw InvalidInput(std::string(what) + ": point " + std::to_string(i) + " has dimension " +
                         std::to_string(points[i].dim()) + ", expected " + std::to_string(dim));
    }
  }
}

std::vector<Point> to_points(std::span<const double> xs) {
  std::vector<Point> out;
  out.reserve(xs.size());
  for (double x : xs) out.push_back(Point::scalar(x));
  return out;
}

std::string format_shortest(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return {buf, res.ptr};
}

}  // namespace wasserquick
