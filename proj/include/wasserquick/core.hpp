#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wasserquick {

using Matrix = Eigen::MatrixXd;

/// An observation in R^d. All coordinates are finite.
class Point {
 public:
  Point() = default;
  explicit Point(std::vector<double> coords);
  Point(std::initializer_list<double> coords);
  static Point scalar(double x) { return Point{x}; }

  std::size_t dim() const { return coords_.size(); }
  double operator[](std::size_t i) const { return coords_[i]; }
  const std::vector<double>& coords() const { return coords_; }

  friend bool operator==(const Point&, const Point&) = default;
  friend auto operator<=>(const Point& a, const Point& b) { return a.coords_ <=> b.coords_; }

 private:
  std::vector<double> coords_;
};

enum class GroundMetric { L1, L2, Linf };

std::string to_string(GroundMetric metric);
GroundMetric parse_metric(std::string_view name);

/// Finite-support probability distribution with pairwise distinct atoms.
///
/// Weights must sum to one within 1e-12; sums off by at most 1e-9 are
/// renormalized on construction, anything further is rejected.
class DiscreteDistribution {
 public:
  DiscreteDistribution(std::vector<Point> support, std::vector<double> weights);

  std::size_t size() const { return support_.size(); }
  std::size_t dim() const { return support_.front().dim(); }
  const std::vector<Point>& support() const { return support_; }
  const std::vector<double>& weights() const { return weights_; }

 private:
  std::vector<Point> support_;
  std::vector<double> weights_;
};

struct AmbiguitySpec {
  DiscreteDistribution nominal;
  double radius;
  GroundMetric metric;

  AmbiguitySpec(DiscreteDistribution nominal, double radius, GroundMetric metric);
};

inline constexpr double kWeightSumTol = 1e-12;
inline constexpr double kWeightRenormTol = 1e-9;

/// Empirical distribution; repeated samples are merged into one atom with
/// summed weight. Atoms keep the order of first appearance.
DiscreteDistribution empirical_from_samples(std::span<const Point> samples);

double ground_cost(GroundMetric metric, const Point& x, const Point& y);

Matrix cost_matrix(GroundMetric metric, std::span<const Point> a, std::span<const Point> b);

/// Throws InvalidInput unless every point has dimension `dim`.
void require_dimension(std::span<const Point> points, std::size_t dim, std::string_view what);

std::vector<Point> to_points(std::span<const double> xs);

/// Shortest decimal text that parses back to the same double.
std::string format_shortest(double x);

}  // namespace wasserquick
