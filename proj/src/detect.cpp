#include "wasserquick/detect.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "wasserquick/error.hpp"

namespace wasserquick {

double llr_gaussian_mean(double x, double m) { return m * x - 0.5 * m * m; }

double GaussianExact::operator()(double x) const {
  const double z1 = (x - postMean) / postStd;
  const double z0 = (x - preMean) / preStd;
  return -0.5 * z1 * z1 + 0.5 * z0 * z0 - std::log(postStd / preStd);
}

namespace {

double log_sum_exp(const std::vector<double>& terms) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double t : terms) hi = std::max(hi, t);
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - hi);
  return hi + std::log(acc);
}

}  // namespace

SmoothedLfd::SmoothedLfd(std::vector<double> support, std::vector<double> p1, std::vector<double> p2, double h)
    : h_(h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw InvalidInput("bandwidth must be positive");
  if (support.size() != p1.size() || support.size() != p2.size() || support.empty()) {
    throw InvalidInput("smoothed LFD: support and masses differ in length");
  }
  bool any1 = false, any2 = false;
  for (std::size_t l = 0; l < support.size(); ++l) {
    if (p1[l] < 0.0 || p2[l] < 0.0) throw InvalidInput("smoothed LFD: negative mass");
    if (p1[l] == 0.0 && p2[l] == 0.0) continue;
    support_.push_back(support[l]);
    p1_.push_back(p1[l]);
    p2_.push_back(p2[l]);
    any1 = any1 || p1[l] > 0.0;
    any2 = any2 || p2[l] > 0.0;
  }
  if (!any1 || !any2) throw InvalidInput("smoothed LFD: a distribution has no mass");
}

namespace {

std::vector<double> scalar_support(const LfdSolution& s) {
  std::vector<double> out;
  out.reserve(s.jointSupport.size());
  for (const auto& p : s.jointSupport) {
    if (p.dim() != 1) throw InvalidInput("smoothed LFD requires one-dimensional samples");
    out.push_back(p[0]);
  }
  return out;
}

}  // namespace

SmoothedLfd::SmoothedLfd(const LfdSolution& solution, double h)
    : SmoothedLfd(scalar_support(solution), solution.p1, solution.p2, h) {}

double SmoothedLfd::operator()(double x) const {
  std::vector<double> a, b;
  a.reserve(support_.size());
  b.reserve(support_.size());
  for (std::size_t l = 0; l < support_.size(); ++l) {
    const double z = (x - support_[l]) / h_;
    const double k = -0.5 * z * z;
    if (p1_[l] > 0.0) a.push_back(std::log(p1_[l]) + k);
    if (p2_[l] > 0.0) b.push_back(std::log(p2_[l]) + k);
  }
  const double lr = log_sum_exp(b) - log_sum_exp(a);
  if (std::isnan(lr)) return 0.0;
  return std::clamp(lr, -kLogRatioClamp, kLogRatioClamp);
}

double SmoothedLfd::derivative(double x) const {
  // d/dx log sum_l p_l K((x - z_l)/h) is the posterior mean of -(x - z)/h^2.
  auto slope = [&](const std::vector<double>& p) {
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < support_.size(); ++l) {
      if (p[l] <= 0.0) continue;
      const double z = (x - support_[l]) / h_;
      hi = std::max(hi, std::log(p[l]) - 0.5 * z * z);
    }
    double num = 0.0, den = 0.0;
    for (std::size_t l = 0; l < support_.size(); ++l) {
      if (p[l] <= 0.0) continue;
      const double z = (x - support_[l]) / h_;
      const double w = std::exp(std::log(p[l]) - 0.5 * z * z - hi);
      num += w * (-(x - support_[l]) / (h_ * h_));
      den += w;
    }
    return num / den;
  };
  return slope(p2_) - slope(p1_);
}

BinnedTable::BinnedTable(std::vector<double> e, std::vector<double> lr) : edges(std::move(e)), logRatio(std::move(lr)) {
  if (logRatio.size() != edges.size() + 1) throw InvalidInput("binned table needs one more ratio than edges");
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i - 1] < edges[i])) throw InvalidInput("bin edges must be strictly increasing");
  }
  for (double v : logRatio) {
    if (!std::isfinite(v)) throw InvalidInput("binned log-ratio entries must be finite");
  }
}

double BinnedTable::operator()(double x) const { return logRatio[bin_index(edges, x)]; }

double LikelihoodRatioModel::operator()(double x) const {
  return std::visit([x](const auto& m) { return m(x); }, model_);
}

double llr_smoothed(const SmoothedLfd& model, double x) { return model(x); }
double llr_binned(const BinnedTable& model, double x) { return model(x); }

std::size_t bin_index(std::span<const double> edges, double x) {
  return static_cast<std::size_t>(std::lower_bound(edges.begin(), edges.end(), x) - edges.begin());
}

std::vector<double> bin_edges_uniform_prechange(std::span<const double> preSamples, std::size_t L) {
  if (L < 2) throw InvalidInput("need at least two bins");
  if (preSamples.size() < 2) throw InvalidInput("need at least two samples for quantile edges");
  std::vector<double> sorted(preSamples.begin(), preSamples.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  std::vector<double> edges;
  for (std::size_t i = 1; i < L; ++i) {
    const double h = (n - 1.0) * static_cast<double>(i) / static_cast<double>(L);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double e = sorted[lo] + (h - std::floor(h)) * (sorted[hi] - sorted[lo]);
    if (!edges.empty() && !(e > edges.back())) {
      throw InvalidInput("too many ties in the pre-change samples for " + std::to_string(L) + " bins");
    }
    edges.push_back(e);
  }
  return edges;
}

std::vector<double> bin_edges_uniform_prechange(const std::function<double(double)>& quantile, std::size_t L) {
  if (L < 2) throw InvalidInput("need at least two bins");
  std::vector<double> edges;
  for (std::size_t i = 1; i < L; ++i) edges.push_back(quantile(static_cast<double>(i) / static_cast<double>(L)));
  return edges;
}

double standard_normal_cdf(double x) { return boost::math::cdf(boost::math::normal_distribution<>(), x); }
double standard_normal_quantile(double p) { return boost::math::quantile(boost::math::normal_distribution<>(), p); }

std::vector<double> floor_and_normalize(std::vector<double> masses, double floor) {
  if (floor <= 0.0) return masses;
  double total = 0.0;
  for (double& m : masses) {
    m = std::max(m, floor);
    total += m;
  }
  for (double& m : masses) m /= total;
  return masses;
}

std::vector<double> binned_distribution(std::span<const double> points, std::span<const double> weights,
                                        std::span<const double> edges, double floor) {
  if (points.size() != weights.size()) throw InvalidInput("points and weights differ in length");
  std::vector<double> out(edges.size() + 1, 0.0);
  for (std::size_t i = 0; i < points.size(); ++i) out[bin_index(edges, points[i])] += weights[i];
  return floor_and_normalize(std::move(out), floor);
}

std::vector<double> binned_distribution(std::span<const double> samples, std::span<const double> edges,
                                        double floor) {
  if (samples.empty()) throw InvalidInput("no samples to bin");
  std::vector<double> w(samples.size(), 1.0 / static_cast<double>(samples.size()));
  return binned_distribution(samples, w, edges, floor);
}

BinnedTable binned_lfd_table(const LfdSolution& solution, std::vector<double> edges) {
  const std::vector<double> pts = scalar_support(solution);
  const auto b1 = binned_distribution(pts, solution.p1, edges);
  const auto b2 = binned_distribution(pts, solution.p2, edges);
  return {std::move(edges), log_ratio(b1, b2)};
}

CusumState cusum_update(CusumState state, double llr) {
  if (state.stopped) throw UsageError("CUSUM update after the detector has stopped");
  state.statistic = std::max(state.statistic, 0.0) + llr;
  ++state.time;
  if (state.statistic >= state.threshold) state.stopped = true;
  return state;
}

GlrState::GlrState(std::size_t window, double threshold) : window_(window), threshold_(threshold), ring_(window) {
  if (window == 0) throw InvalidInput("GLR window must be positive");
}

void GlrState::push(double x) {
  if (stopped_) throw UsageError("GLR update after the detector has stopped");
  ring_[head_] = x;
  head_ = (head_ + 1) % window_;
  count_ = std::min(count_ + 1, window_);
  ++time_;
  if (std::isfinite(threshold_) && statistic() >= threshold_) stopped_ = true;
}

double GlrState::statistic() const {
  double best = 0.0, sum = 0.0;
  for (std::size_t j = 1; j <= count_; ++j) {
    sum += ring_[(head_ + window_ - j) % window_];
    best = std::max(best, sum * sum / (2.0 * static_cast<double>(j)));
  }
  return best;
}

std::vector<double> GlrState::contents() const {
  std::vector<double> out;
  for (std::size_t j = count_; j >= 1; --j) out.push_back(ring_[(head_ + window_ - j) % window_]);
  return out;
}

double glr_statistic(const GlrState& state) { return state.statistic(); }

GlrState glr_update(GlrState state, double x) {
  state.push(x);
  return state;
}

StatisticStream::StatisticStream(const DetectorSpec& detector)
    : spec_(&detector),
      glr_(std::holds_alternative<GlrDetector>(detector) ? std::get<GlrDetector>(detector).window : 1,
           std::numeric_limits<double>::infinity()) {}

double StatisticStream::push(double x) {
  if (const auto* c = std::get_if<CusumDetector>(spec_)) {
    cusum_ = std::max(cusum_, 0.0) + c->llr(x);
    return cusum_;
  }
  const auto& g = std::get<GlrDetector>(*spec_);
  glr_.push((x - g.preMean) / g.preStd);
  return glr_.statistic();
}

void StatisticStream::reset() {
  cusum_ = 0.0;
  glr_ = GlrState(glr_.window(), std::numeric_limits<double>::infinity());
}

StoppingDecision run_detector(const DetectorSpec& detector, std::span<const double> stream, std::size_t horizon) {
  const double b = std::visit([](const auto& d) { return d.threshold; }, detector);
  StatisticStream s(detector);
  StoppingDecision out;
  const std::size_t n = std::min(horizon, stream.size());
  for (std::size_t t = 0; t < n; ++t) {
    out.finalStatistic = s.push(stream[t]);
    if (out.finalStatistic >= b) {
      out.stoppedAt = t + 1;
      return out;
    }
  }
  out.truncated = true;
  return out;
}

InterpolatedLlr::InterpolatedLlr(SmoothedLfd model, std::size_t nodes) : model_(std::move(model)) {
  if (nodes < 2) throw InvalidInput("interpolation needs at least two nodes");
  const auto [mn, mx] = std::minmax_element(model_.support().begin(), model_.support().end());
  lo_ = *mn - 8.0 * model_.bandwidth();
  hi_ = *mx + 8.0 * model_.bandwidth();
  step_ = (hi_ - lo_) / static_cast<double>(nodes - 1);
  value_.resize(nodes);
  slope_.resize(nodes);
  for (std::size_t i = 0; i < nodes; ++i) {
    const double x = lo_ + step_ * static_cast<double>(i);
    value_[i] = model_(x);
    // A clamped node has zero slope.
    slope_[i] = std::abs(value_[i]) >= kLogRatioClamp ? 0.0 : model_.derivative(x);
  }
}

double InterpolatedLlr::operator()(double x) const {
  if (!(x >= lo_ && x < hi_)) return model_(x);
  const double u = (x - lo_) / step_;
  const auto i = std::min(static_cast<std::size_t>(u), value_.size() - 2);
  const double t = u - static_cast<double>(i);
  const double t2 = t * t, t3 = t2 * t;
  const double v = (2 * t3 - 3 * t2 + 1) * value_[i] + (t3 - 2 * t2 + t) * step_ * slope_[i] +
                   (-2 * t3 + 3 * t2) * value_[i + 1] + (t3 - t2) * step_ * slope_[i + 1];
  return std::clamp(v, -kLogRatioClamp, kLogRatioClamp);
}

}  // namespace wasserquick
