#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "wasserquick/core.hpp"
#include "wasserquick/detect.hpp"

namespace wasserquick {

using Rng = std::mt19937_64;

/// Independent generator for replication `rep` of stream family `tag`.
Rng make_rng(std::uint64_t seed, std::uint64_t rep, std::uint64_t tag);

namespace stream_tag {
inline constexpr std::uint64_t kScenario = 1;
inline constexpr std::uint64_t kTrainPre = 2;
inline constexpr std::uint64_t kTrainPost = 3;
inline constexpr std::uint64_t kCalibration = 4;
inline constexpr std::uint64_t kArlCheck = 5;
inline constexpr std::uint64_t kDelay = 6;
inline constexpr std::uint64_t kContamination = 7;
}  // namespace stream_tag

struct ScenarioConfig {
  double preMean = 0.0;
  double preStd = 1.0;
  double postMean = 1.0;
  double postStd = 1.0;
  std::optional<std::size_t> changePoint = 1;  // nullopt: no change
  double contaminationEps = 0.0;
  std::size_t horizon = 1000;
  std::uint64_t seed = 0;

  void validate() const;
};

std::vector<double> gen_stream(const ScenarioConfig& config);
std::vector<double> gen_stream(const ScenarioConfig& config, Rng& rng);

/// x -> x + U[-eps, 0], independently per observation.
std::vector<double> contaminate(std::vector<double> stream, double eps, Rng& rng);

using Sampler = std::function<double(Rng&)>;

Sampler gaussian_sampler(double mean, double stddev);
Sampler discrete_sampler(std::vector<double> points, std::vector<double> weights);
/// Atom drawn by weight plus N(0, h^2) noise.
Sampler kernel_mixture_sampler(std::vector<double> points, std::vector<double> weights, double h);
/// Bin drawn by mass, then a fixed point inside it (a binned detector only
/// sees the bin).
Sampler bin_sampler(std::vector<double> edges, std::vector<double> masses);
Sampler with_contamination(Sampler base, double eps);

struct MonteCarloOptions {
  std::size_t reps = 10000;
  std::size_t horizon = 0;  // 0: 20 * gamma where a target exists
  std::uint64_t seed = 0;
  std::uint64_t tag = stream_tag::kArlCheck;
};

/// Worker count from WASSERQUICK_THREADS (unset or 0: hardware concurrency).
unsigned worker_threads();

struct RunLengthEstimate {
  double mean = 0.0;
  double standardError = 0.0;
  std::size_t truncationCount = 0;
  bool truncationWarning = false;  // more than 10% of runs hit the horizon
  std::size_t replications = 0;
};

/// Mean stopping time under pre-change data; truncated runs count as the
/// horizon.
RunLengthEstimate estimate_arl(const DetectorSpec& detector, double threshold, const Sampler& preChange,
                               const MonteCarloOptions& options);
/// Mean stopping time with every observation drawn post-change.
RunLengthEstimate estimate_edd(const DetectorSpec& detector, double threshold, const Sampler& postChange,
                               const MonteCarloOptions& options);

struct CalibrationResult {
  double threshold = 0.0;
  double achievedArl = 0.0;
  double arlStderr = 0.0;
  std::size_t replications = 0;
  std::size_t truncationCount = 0;
};

/// Smallest threshold (to bracket width 1e-3) whose Monte Carlo ARL reaches
/// gamma. All candidate thresholds share the same replication paths, so the
/// estimated ARL is monotone in b.
CalibrationResult calibrate_threshold(const DetectorSpec& detector, double gamma, const Sampler& preChange,
                                      const MonteCarloOptions& options, double tolFraction = 0.05);

struct CurvePoint {
  std::string method;
  double gamma = 0.0;
  double threshold = 0.0;
  double arl = 0.0;
  double arlStderr = 0.0;
  double edd = 0.0;
  double eddStderr = 0.0;
  std::size_t reps = 0;
};

/// Pre-change law the thresholds of robust detectors are calibrated under:
/// the least favorable one (worst-case false alarm) or the true nominal.
enum class CalibrationReference { Lfd, Nominal };

std::string to_string(CalibrationReference ref);
CalibrationReference parse_calibration_reference(std::string_view name);

struct ExperimentConfig {
  ScenarioConfig scenario;
  double r1 = 0.3;
  double r2 = 0.3;
  GroundMetric metric = GroundMetric::L1;
  double h = 0.25;
  std::size_t L = 20;
  std::size_t W = 50;
  double klR1 = 0.05;
  double klR2 = 0.05;
  std::size_t trainPre = 50;
  std::size_t trainPost = 50;
  /// exact, glr, robust-was, robust-was-binned, robust-kl
  std::vector<std::string> methods{"exact", "robust-was", "glr"};
  std::vector<double> gammas{100.0, 1000.0};
  std::vector<double> epsList;  // contamination sweep; empty: scenario value
  std::size_t reps = 10000;
  std::size_t horizon = 0;  // 0: 20 * gamma
  double tolFraction = 0.05;
  CalibrationReference calibrateUnder = CalibrationReference::Lfd;

  void validate() const;
};

struct TrainingData {
  std::vector<double> pre;
  std::vector<double> post;
};

TrainingData draw_training(const ExperimentConfig& config);

/// A method ready to run: its detector, the sampler its threshold is
/// calibrated under, and the true pre-change sampler.
struct PreparedMethod {
  std::string name;
  DetectorSpec detector;
  Sampler calibration;
  Sampler nominalPre;
};

PreparedMethod prepare_method(const std::string& name, const ExperimentConfig& config, const TrainingData& training);

/// Calibrate every method at every gamma, then estimate the delay (for each
/// contamination level when a sweep is given; the method column then reads
/// `name[eps=value]`).
std::vector<CurvePoint> compare_methods(const ExperimentConfig& config);

std::string curve_csv(const std::vector<CurvePoint>& points);

}  // namespace wasserquick
