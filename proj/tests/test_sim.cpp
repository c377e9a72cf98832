#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>

#include "wasserquick/error.hpp"
#include "wasserquick/sim.hpp"

using namespace wasserquick;

namespace {

double mean_of(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

// Siegmund's approximation to the ARL of the N(0,1) -> N(1,1) CUSUM, and
// its inverse by bisection.
double siegmund_arl(double b) {
  const double shift = 2.0 * 0.583;
  return 2.0 * (std::exp(b + shift) - b - shift - 1.0);
}

double siegmund_threshold(double gamma) {
  double lo = 0.0, hi = 30.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (siegmund_arl(mid) < gamma ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

const DetectorSpec kRamp = CusumDetector{[](double) { return 1.0; }, 0.0};

class ThreadsEnv {
 public:
  explicit ThreadsEnv(const char* value) {
    const char* old = std::getenv("WASSERQUICK_THREADS");
    if (old) saved_ = old;
    setenv("WASSERQUICK_THREADS", value, 1);
  }
  ~ThreadsEnv() {
    if (saved_) {
      setenv("WASSERQUICK_THREADS", saved_->c_str(), 1);
    } else {
      unsetenv("WASSERQUICK_THREADS");
    }
  }

 private:
  std::optional<std::string> saved_;
};

}  // namespace

TEST(GenStream, ChangePointPlacement) {
  ScenarioConfig c;
  c.preMean = -100.0;
  c.postMean = 100.0;
  c.horizon = 50;
  c.changePoint = std::nullopt;
  for (double x : gen_stream(c)) EXPECT_LT(x, 0.0);
  c.changePoint = 1;
  for (double x : gen_stream(c)) EXPECT_GT(x, 0.0);
  c.changePoint = 11;
  const auto s = gen_stream(c);
  for (std::size_t t = 0; t < s.size(); ++t) EXPECT_EQ(s[t] > 0.0, t >= 10) << t;
}

TEST(GenStream, SampleMeanAndReproducibility) {
  ScenarioConfig c;
  c.horizon = 1000000;
  c.seed = 5;
  const auto s = gen_stream(c);
  EXPECT_NEAR(mean_of(s), 1.0, 3e-3);
  EXPECT_EQ(s, gen_stream(c));
  c.seed = 6;
  EXPECT_NE(s, gen_stream(c));
}

TEST(GenStream, Validation) {
  ScenarioConfig c;
  c.preStd = 0.0;
  EXPECT_THROW(gen_stream(c), InvalidInput);
  c = {};
  c.horizon = 0;
  EXPECT_THROW(gen_stream(c), InvalidInput);
  c = {};
  c.contaminationEps = -0.1;
  EXPECT_THROW(gen_stream(c), InvalidInput);
}

TEST(Contaminate, IdentitySupportAndMean) {
  Rng rng = make_rng(1, 0, stream_tag::kContamination);
  const std::vector<double> base(1000000, 2.0);
  EXPECT_EQ(contaminate(base, 0.0, rng), base);
  const auto c = contaminate(base, 0.5, rng);
  for (double x : c) {
    ASSERT_LE(x, 2.0);
    ASSERT_GE(x, 1.5);
  }
  EXPECT_NEAR(mean_of(c) - 2.0, -0.25, 1e-3);
  EXPECT_THROW(contaminate(base, -1.0, rng), InvalidInput);
}

TEST(Samplers, MixtureAndBinFrequencies) {
  Rng rng = make_rng(3, 0, 99);
  const auto mix = kernel_mixture_sampler({0.0, 4.0}, {0.25, 0.75}, 0.25);
  double s = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) s += mix(rng);
  EXPECT_NEAR(s / n, 3.0, 0.02);

  const std::vector<double> edges{-1.0, 1.0};
  const auto bins = bin_sampler(edges, {0.2, 0.5, 0.3});
  std::vector<int> count(3, 0);
  for (int i = 0; i < n; ++i) ++count[bin_index(edges, bins(rng))];
  EXPECT_NEAR(count[0] / double(n), 0.2, 0.005);
  EXPECT_NEAR(count[1] / double(n), 0.5, 0.005);
  EXPECT_NEAR(count[2] / double(n), 0.3, 0.005);
}

TEST(EstimateArl, DeterministicRamp) {
  const auto pre = gaussian_sampler(0, 1);
  auto r = estimate_arl(kRamp, 3.0, pre, {100, 1000, 1});
  EXPECT_EQ(r.mean, 3.0);
  EXPECT_EQ(r.standardError, 0.0);
  EXPECT_EQ(r.truncationCount, 0u);
  r = estimate_edd(kRamp, 3.0, pre, {100, 1000, 1});
  EXPECT_EQ(r.mean, 3.0);
  r = estimate_edd(kRamp, 0.0, pre, {100, 1000, 1});
  EXPECT_EQ(r.mean, 1.0);
}

TEST(EstimateArl, TruncationIsFlagged) {
  const DetectorSpec exact = CusumDetector{GaussianExact::mean_shift(1.0), 0.0};
  const auto r = estimate_arl(exact, 20.0, gaussian_sampler(0, 1), {200, 30, 1});
  EXPECT_TRUE(r.truncationWarning);
  EXPECT_EQ(r.truncationCount, 200u);
  EXPECT_EQ(r.mean, 30.0);
  EXPECT_THROW(estimate_arl(exact, 1.0, gaussian_sampler(0, 1), {0, 30, 1}), InvalidInput);
}

TEST(EstimateArl, ReproducibleAcrossThreadCounts) {
  const DetectorSpec exact = CusumDetector{GaussianExact::mean_shift(1.0), 0.0};
  RunLengthEstimate a, b;
  {
    ThreadsEnv env("1");
    a = estimate_arl(exact, 3.0, gaussian_sampler(0, 1), {500, 2000, 9});
  }
  {
    ThreadsEnv env("4");
    b = estimate_arl(exact, 3.0, gaussian_sampler(0, 1), {500, 2000, 9});
  }
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.standardError, b.standardError);
}

TEST(EstimateEdd, MonotoneInShift) {
  const auto d1 = estimate_edd(CusumDetector{GaussianExact::mean_shift(1.0), 5.0}, 5.0, gaussian_sampler(1.0, 1.0),
                               {2000, 10000, 3});
  const auto d05 = estimate_edd(CusumDetector{GaussianExact::mean_shift(0.5), 5.0}, 5.0, gaussian_sampler(0.5, 1.0),
                                {2000, 10000, 3});
  EXPECT_GE(d05.mean, d1.mean);
}

TEST(Calibrate, DeterministicRamp) {
  const auto r = calibrate_threshold(kRamp, 5.0, gaussian_sampler(0, 1), {50, 100, 1});
  EXPECT_GT(r.threshold, 4.0);
  EXPECT_LE(r.threshold, 5.0);
  EXPECT_EQ(r.achievedArl, 5.0);
}

TEST(Calibrate, ExactCusumMatchesSiegmund) {
  const DetectorSpec exact = CusumDetector{GaussianExact::mean_shift(1.0), 0.0};
  const auto r = calibrate_threshold(exact, 100.0, gaussian_sampler(0, 1), {4000, 2000, 1, stream_tag::kCalibration});
  EXPECT_NEAR(r.threshold, siegmund_threshold(100.0), 0.15);
  EXPECT_GE(r.achievedArl, 100.0 - 2 * r.arlStderr);
  EXPECT_LE(r.achievedArl, 105.0 + 2 * r.arlStderr);
  // A fresh set of paths confirms the constraint.
  const auto check = estimate_arl(exact, r.threshold, gaussian_sampler(0, 1), {4000, 2000, 1, stream_tag::kArlCheck});
  EXPECT_GE(check.mean, 100.0 - 2.5 * check.standardError);
}

TEST(Calibrate, ThresholdNondecreasingInGamma) {
  const DetectorSpec exact = CusumDetector{GaussianExact::mean_shift(1.0), 0.0};
  double prev = -1.0;
  for (double gamma : {25.0, 50.0, 100.0, 200.0, 400.0}) {
    const auto r = calibrate_threshold(exact, gamma, gaussian_sampler(0, 1), {1000, 0, 2, stream_tag::kCalibration});
    EXPECT_GE(r.threshold, prev);
    prev = r.threshold;
  }
}

TEST(Calibrate, ArlMonotoneInThresholdWithCommonPaths) {
  const DetectorSpec glr = GlrDetector{50, 0.0};
  double prev = 0.0;
  for (double b = 1.0; b <= 4.0; b += 0.25) {
    const auto r = estimate_arl(glr, b, gaussian_sampler(0, 1), {500, 5000, 4});
    EXPECT_GE(r.mean, prev);
    prev = r.mean;
  }
}

TEST(Calibrate, Errors) {
  const DetectorSpec exact = CusumDetector{GaussianExact::mean_shift(1.0), 0.0};
  EXPECT_THROW(calibrate_threshold(exact, 100.0, gaussian_sampler(0, 1), {100, 50, 1}), CalibrationError);
  EXPECT_THROW(calibrate_threshold(exact, 1.0, gaussian_sampler(0, 1), {100, 50, 1}), InvalidInput);
  // A detector that never stops cannot be calibrated.
  const DetectorSpec never = CusumDetector{[](double) { return -1.0; }, 0.0};
  EXPECT_THROW(calibrate_threshold(never, 10.0, gaussian_sampler(0, 1), {50, 500, 1}), CalibrationError);
}

TEST(Calibrate, RobustArlUnderNominalNotBelowLfd) {
  ExperimentConfig cfg;
  cfg.scenario.seed = 11;
  const auto training = draw_training(cfg);
  const auto m = prepare_method("robust-was", cfg, training);
  const MonteCarloOptions opt{1000, 2000, 11, stream_tag::kCalibration};
  const auto cal = calibrate_threshold(m.detector, 100.0, m.calibration, opt);
  const auto nominal = estimate_arl(m.detector, cal.threshold, m.nominalPre, {1000, 2000, 11, stream_tag::kArlCheck});
  EXPECT_GE(nominal.mean, cal.achievedArl - 2 * cal.arlStderr);
}

TEST(Compare, SmokeAndLabels) {
  ExperimentConfig cfg;
  cfg.methods = {"exact"};
  cfg.gammas = {20.0};
  cfg.reps = 50;
  auto pts = compare_methods(cfg);
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_EQ(pts[0].method, "exact");
  EXPECT_EQ(pts[0].reps, 50u);
  EXPECT_GE(pts[0].arlStderr, 0.0);
  EXPECT_GE(pts[0].eddStderr, 0.0);

  cfg.epsList = {0.0, 0.3};
  pts = compare_methods(cfg);
  ASSERT_EQ(pts.size(), 2u);
  EXPECT_EQ(pts[0].method, "exact[eps=0]");
  EXPECT_EQ(pts[1].method, "exact[eps=0.3]");
  EXPECT_EQ(pts[0].threshold, pts[1].threshold);
  // Shifting mass toward the pre-change side slows detection.
  EXPECT_GE(pts[1].edd, pts[0].edd - 2 * pts[0].eddStderr);

  const std::string csv = curve_csv(pts);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "method,gamma,arl,arl_stderr,edd,edd_stderr,reps");
}

TEST(Compare, AllMethodsAndReproducibility) {
  ExperimentConfig cfg;
  cfg.methods = {"exact", "glr", "robust-was", "robust-was-binned", "robust-kl"};
  cfg.gammas = {20.0};
  cfg.reps = 100;
  cfg.scenario.seed = 3;
  const auto a = compare_methods(cfg);
  ASSERT_EQ(a.size(), 5u);
  for (const auto& p : a) {
    EXPECT_TRUE(std::isfinite(p.edd)) << p.method;
    EXPECT_GT(p.threshold, 0.0) << p.method;
  }
  EXPECT_EQ(curve_csv(a), curve_csv(compare_methods(cfg)));

  cfg.methods = {"bogus"};
  EXPECT_THROW(compare_methods(cfg), InvalidInput);
}

TEST(CalibrationReference, Names) {
  EXPECT_EQ(parse_calibration_reference("lfd"), CalibrationReference::Lfd);
  EXPECT_EQ(parse_calibration_reference("nominal"), CalibrationReference::Nominal);
  EXPECT_EQ(to_string(CalibrationReference::Nominal), "nominal");
  EXPECT_THROW(parse_calibration_reference("x"), InvalidInput);
}
