#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "wasserquick/lfd.hpp"

namespace wasserquick {

/// log dN(m,1)/dN(0,1) at x, i.e. m x - m^2 / 2.
double llr_gaussian_mean(double x, double m);

/// Log density ratio between two known Gaussians.
struct GaussianExact {
  double preMean = 0.0;
  double preStd = 1.0;
  double postMean = 1.0;
  double postStd = 1.0;

  static GaussianExact mean_shift(double m) { return {0.0, 1.0, m, 1.0}; }
  double operator()(double x) const;
};

/// LFD pair convolved with a Gaussian kernel of bandwidth h (1-D only).
class SmoothedLfd {
 public:
  SmoothedLfd(std::vector<double> support, std::vector<double> p1, std::vector<double> p2, double h);
  SmoothedLfd(const LfdSolution& solution, double h);

  double operator()(double x) const;
  /// Derivative of the (unclamped) log-ratio.
  double derivative(double x) const;

  double bandwidth() const { return h_; }
  const std::vector<double>& support() const { return support_; }
  const std::vector<double>& p1() const { return p1_; }
  const std::vector<double>& p2() const { return p2_; }

 private:
  std::vector<double> support_, p1_, p2_;
  double h_;
};

/// Table lookup over bins (-inf, e1], (e1, e2], ..., (e_{L-1}, inf).
struct BinnedTable {
  std::vector<double> edges;
  std::vector<double> logRatio;

  BinnedTable(std::vector<double> edges, std::vector<double> logRatio);
  double operator()(double x) const;
};

class LikelihoodRatioModel {
 public:
  using Variant = std::variant<GaussianExact, SmoothedLfd, BinnedTable>;

  LikelihoodRatioModel(Variant v) : model_(std::move(v)) {}  // NOLINT(google-explicit-constructor)
  double operator()(double x) const;
  const Variant& variant() const { return model_; }

 private:
  Variant model_;
};

double llr_smoothed(const SmoothedLfd& model, double x);
double llr_binned(const BinnedTable& model, double x);

/// Index of the bin containing x; ties fall to the lower bin.
std::size_t bin_index(std::span<const double> edges, double x);

/// i/L empirical quantiles (linear interpolation between order statistics).
std::vector<double> bin_edges_uniform_prechange(std::span<const double> preSamples, std::size_t L);
/// i/L quantiles of a known distribution.
std::vector<double> bin_edges_uniform_prechange(const std::function<double(double)>& quantile, std::size_t L);

double standard_normal_cdf(double x);
double standard_normal_quantile(double p);

inline constexpr double kBinFloor = 1e-6;

/// Mass per bin. A positive floor clamps every bin from below and
/// renormalizes, as needed by the KL-ball baseline.
std::vector<double> binned_distribution(std::span<const double> points, std::span<const double> weights,
                                        std::span<const double> edges, double floor = 0.0);
std::vector<double> binned_distribution(std::span<const double> samples, std::span<const double> edges,
                                        double floor = 0.0);
std::vector<double> floor_and_normalize(std::vector<double> masses, double floor);

/// Binned log-likelihood-ratio table for a sample-supported LFD pair.
BinnedTable binned_lfd_table(const LfdSolution& solution, std::vector<double> edges);

struct CusumState {
  double statistic = 0.0;
  double threshold = 0.0;
  std::size_t time = 0;
  bool stopped = false;
};

/// S <- max(S, 0) + llr; stops once S >= threshold.
CusumState cusum_update(CusumState state, double llr);

/// Window-limited GLR for a mean shift of N(0,1) observations.
class GlrState {
 public:
  GlrState(std::size_t window, double threshold);

  void push(double x);
  double statistic() const;

  std::size_t window() const { return window_; }
  std::size_t time() const { return time_; }
  double threshold() const { return threshold_; }
  bool stopped() const { return stopped_; }
  /// Observations in the window, oldest first.
  std::vector<double> contents() const;

 private:
  std::size_t window_;
  double threshold_;
  std::size_t time_ = 0;
  bool stopped_ = false;
  std::vector<double> ring_;
  std::size_t head_ = 0;
  std::size_t count_ = 0;
};

/// max over the window start k of (sum_{i=k}^t x_i)^2 / (2 (t - k + 1)).
double glr_statistic(const GlrState& state);
GlrState glr_update(GlrState state, double x);

struct StoppingDecision {
  std::optional<std::size_t> stoppedAt;
  double finalStatistic = 0.0;
  bool truncated = false;
};

using LlrFunction = std::function<double(double)>;

struct CusumDetector {
  LlrFunction llr;
  double threshold;
};

struct GlrDetector {
  std::size_t window = 50;
  double threshold = 0.0;
  double preMean = 0.0;  // observations are standardized before the statistic
  double preStd = 1.0;
};

using DetectorSpec = std::variant<CusumDetector, GlrDetector>;

/// First time the statistic reaches the threshold within `horizon` steps.
StoppingDecision run_detector(const DetectorSpec& detector, std::span<const double> stream, std::size_t horizon);

/// Streaming form of a detector that reports the statistic after each
/// observation without stopping; used to read off stopping times for many
/// thresholds from one pass.
class StatisticStream {
 public:
  explicit StatisticStream(const DetectorSpec& detector);
  double push(double x);
  void reset();

 private:
  const DetectorSpec* spec_;
  double cusum_ = 0.0;
  GlrState glr_;
};

/// Cubic Hermite table of a smoothed LFD's log-ratio over the atoms' range
/// padded by eight bandwidths; exact evaluation outside it.
class InterpolatedLlr {
 public:
  explicit InterpolatedLlr(SmoothedLfd model, std::size_t nodes = 8192);
  double operator()(double x) const;

 private:
  SmoothedLfd model_;
  double lo_, hi_, step_;
  std::vector<double> value_, slope_;
};

}  // namespace wasserquick
