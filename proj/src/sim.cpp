#include "wasserquick/sim.hpp"

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include "wasserquick/error.hpp"
#include "wasserquick/lfd.hpp"

namespace wasserquick {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double normal(Rng& rng) { return boost::random::normal_distribution<double>()(rng); }
double uniform01(Rng& rng) { return boost::random::uniform_real_distribution<double>(0.0, 1.0)(rng); }

// Runs f(i) for i in [0, n) on the worker pool; every result is written by
// index so the outcome never depends on scheduling.
template <class F>
void parallel_for(std::size_t n, F&& f) {
  const std::size_t k = std::min<std::size_t>(worker_threads(), n);
  if (k <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failureMutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < k; ++w) {
    pool.emplace_back([&] {
      try {
        for (std::size_t i = next++; i < n; i = next++) f(i);
      } catch (...) {
        std::lock_guard lock(failureMutex);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

RunLengthEstimate summarize(const std::vector<double>& times, std::size_t truncated) {
  RunLengthEstimate out;
  const double n = static_cast<double>(times.size());
  double sum = 0.0;
  for (double t : times) sum += t;
  out.mean = sum / n;
  double ss = 0.0;
  for (double t : times) ss += (t - out.mean) * (t - out.mean);
  out.standardError = times.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  out.truncationCount = truncated;
  out.truncationWarning = static_cast<double>(truncated) > 0.1 * n;
  out.replications = times.size();
  return out;
}

RunLengthEstimate run_lengths(const DetectorSpec& detector, double threshold, const Sampler& sampler,
                              const MonteCarloOptions& options) {
  if (options.reps == 0) throw InvalidInput("reps must be >= 1");
  if (options.horizon == 0) throw InvalidInput("horizon must be >= 1");
  std::vector<double> times(options.reps);
  std::vector<char> truncated(options.reps, 0);
  parallel_for(options.reps, [&](std::size_t i) {
    Rng rng = make_rng(options.seed, i, options.tag);
    StatisticStream s(detector);
    for (std::size_t t = 1; t <= options.horizon; ++t) {
      if (s.push(sampler(rng)) >= threshold) {
        times[i] = static_cast<double>(t);
        return;
      }
    }
    times[i] = static_cast<double>(options.horizon);
    truncated[i] = 1;
  });
  return summarize(times, static_cast<std::size_t>(std::count(truncated.begin(), truncated.end(), 1)));
}

// One calibration replication, simulated lazily: the statistic's running
// maximum is recorded so the stopping time for any threshold up to the
// level reached so far is a lookup.
struct Path {
  Rng rng;
  StatisticStream stat;
  std::size_t t = 0;
  double runMax = -std::numeric_limits<double>::infinity();
  std::vector<std::pair<std::size_t, double>> records;

  Path(Rng r, const DetectorSpec& d) : rng(std::move(r)), stat(d) {}

  void advance(double level, std::size_t horizon, const Sampler& sampler) {
    while (runMax < level && t < horizon) {
      const double s = stat.push(sampler(rng));
      ++t;
      if (s > runMax) {
        runMax = s;
        records.emplace_back(t, s);
      }
    }
  }

  // Stopping time for threshold b, or 0 when truncated.
  std::size_t stop_time(double b) const {
    auto it = std::lower_bound(records.begin(), records.end(), b,
                               [](const auto& rec, double v) { return rec.second < v; });
    return it == records.end() ? 0 : it->first;
  }
};

}  // namespace

Rng make_rng(std::uint64_t seed, std::uint64_t rep, std::uint64_t tag) {
  const std::uint64_t a = splitmix64(seed ^ splitmix64(tag));
  const std::uint64_t b = splitmix64(a + splitmix64(rep + 0x632be59bd9b4e019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32)};
  return Rng(seq);
}

unsigned worker_threads() {
  unsigned n = 0;
  if (const char* env = std::getenv("WASSERQUICK_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) n = static_cast<unsigned>(v);
  }
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

void ScenarioConfig::validate() const {
  if (!(preStd > 0.0) || !(postStd > 0.0)) throw InvalidInput("scenario: standard deviations must be positive");
  if (!std::isfinite(preMean) || !std::isfinite(postMean)) throw InvalidInput("scenario: means must be finite");
  if (horizon == 0) throw InvalidInput("scenario: horizon must be >= 1");
  if (!(contaminationEps >= 0.0)) throw InvalidInput("scenario: contaminationEps must be >= 0");
  if (changePoint && *changePoint == 0) throw InvalidInput("scenario: changePoint counts from 1");
}

std::vector<double> gen_stream(const ScenarioConfig& config) {
  Rng rng = make_rng(config.seed, 0, stream_tag::kScenario);
  return gen_stream(config, rng);
}

std::vector<double> gen_stream(const ScenarioConfig& config, Rng& rng) {
  config.validate();
  std::vector<double> out(config.horizon);
  for (std::size_t t = 1; t <= config.horizon; ++t) {
    const bool post = config.changePoint && t >= *config.changePoint;
    out[t - 1] = post ? config.postMean + config.postStd * normal(rng) : config.preMean + config.preStd * normal(rng);
  }
  return out;
}

std::vector<double> contaminate(std::vector<double> stream, double eps, Rng& rng) {
  if (!(eps >= 0.0)) throw InvalidInput("contamination eps must be >= 0");
  if (eps == 0.0) return stream;
  for (double& x : stream) x -= eps * uniform01(rng);
  return stream;
}

Sampler gaussian_sampler(double mean, double stddev) {
  if (!(stddev > 0.0)) throw InvalidInput("standard deviation must be positive");
  return [mean, stddev](Rng& rng) { return mean + stddev * normal(rng); };
}

namespace {

std::shared_ptr<const std::vector<double>> cumulative(const std::vector<double>& weights) {
  auto cdf = std::make_shared<std::vector<double>>(weights.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] >= 0.0)) throw InvalidInput("sampler weights must be nonnegative");
    acc += weights[i];
    (*cdf)[i] = acc;
  }
  if (!(acc > 0.0)) throw InvalidInput("sampler weights have no mass");
  for (double& c : *cdf) c /= acc;
  return cdf;
}

std::size_t draw_index(const std::vector<double>& cdf, Rng& rng) {
  const double u = uniform01(rng);
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return std::min<std::size_t>(it - cdf.begin(), cdf.size() - 1);
}

}  // namespace

Sampler discrete_sampler(std::vector<double> points, std::vector<double> weights) {
  if (points.size() != weights.size() || points.empty()) throw InvalidInput("sampler: points and weights differ");
  auto cdf = cumulative(weights);
  auto pts = std::make_shared<const std::vector<double>>(std::move(points));
  return [cdf, pts](Rng& rng) { return (*pts)[draw_index(*cdf, rng)]; };
}

Sampler kernel_mixture_sampler(std::vector<double> points, std::vector<double> weights, double h) {
  if (!(h > 0.0)) throw InvalidInput("bandwidth must be positive");
  Sampler atoms = discrete_sampler(std::move(points), std::move(weights));
  return [atoms, h](Rng& rng) {
    const double z = atoms(rng);
    return z + h * normal(rng);
  };
}

Sampler bin_sampler(std::vector<double> edges, std::vector<double> masses) {
  if (masses.size() != edges.size() + 1) throw InvalidInput("bin sampler: masses need one more entry than edges");
  std::vector<double> reps(masses.size());
  for (std::size_t l = 0; l < masses.size(); ++l) {
    if (edges.empty()) {
      reps[l] = 0.0;
    } else if (l == 0) {
      reps[l] = edges.front() - 1.0;
    } else if (l == edges.size()) {
      reps[l] = edges.back() + 1.0;
    } else {
      reps[l] = 0.5 * (edges[l - 1] + edges[l]);
    }
  }
  return discrete_sampler(std::move(reps), std::move(masses));
}

Sampler with_contamination(Sampler base, double eps) {
  if (!(eps >= 0.0)) throw InvalidInput("contamination eps must be >= 0");
  if (eps == 0.0) return base;
  return [base = std::move(base), eps](Rng& rng) {
    const double x = base(rng);
    return x - eps * uniform01(rng);
  };
}

RunLengthEstimate estimate_arl(const DetectorSpec& detector, double threshold, const Sampler& preChange,
                               const MonteCarloOptions& options) {
  return run_lengths(detector, threshold, preChange, options);
}

RunLengthEstimate estimate_edd(const DetectorSpec& detector, double threshold, const Sampler& postChange,
                               const MonteCarloOptions& options) {
  return run_lengths(detector, threshold, postChange, options);
}

CalibrationResult calibrate_threshold(const DetectorSpec& detector, double gamma, const Sampler& preChange,
                                      const MonteCarloOptions& options, double tolFraction) {
  if (!(gamma > 1.0) || !std::isfinite(gamma)) throw InvalidInput("gamma must be > 1");
  if (options.reps == 0) throw InvalidInput("reps must be >= 1");
  if (!(tolFraction >= 0.0)) throw InvalidInput("tolFraction must be >= 0");
  const std::size_t horizon =
      options.horizon > 0 ? options.horizon : static_cast<std::size_t>(std::ceil(20.0 * gamma));
  if (static_cast<double>(horizon) < gamma) {
    throw CalibrationError("horizon " + std::to_string(horizon) + " cannot realize an ARL of " +
                           format_shortest(gamma));
  }

  std::vector<Path> paths;
  paths.reserve(options.reps);
  for (std::size_t i = 0; i < options.reps; ++i) paths.emplace_back(make_rng(options.seed, i, options.tag), detector);

  struct Eval {
    RunLengthEstimate arl;
    bool saturated;  // no path can stop later than it already does
  };
  auto evaluate = [&](double b) {
    parallel_for(paths.size(), [&](std::size_t i) { paths[i].advance(b, horizon, preChange); });
    std::vector<double> times(paths.size());
    std::size_t truncated = 0;
    bool saturated = true;
    for (std::size_t i = 0; i < paths.size(); ++i) {
      const std::size_t t = paths[i].stop_time(b);
      if (t == 0) {
        times[i] = static_cast<double>(horizon);
        ++truncated;
      } else {
        times[i] = static_cast<double>(t);
        saturated = false;
      }
    }
    return Eval{summarize(times, truncated), saturated};
  };

  const double b0 = std::abs(std::log(gamma));
  double lo = 0.5 * b0;
  Eval atLo = evaluate(lo);
  while (atLo.arl.mean >= gamma && lo > 1e-9) {
    lo *= 0.5;
    atLo = evaluate(lo);
  }
  if (atLo.arl.mean >= gamma) {
    if (atLo.saturated) {
      throw CalibrationError("no replication stops within horizon " + std::to_string(horizon) +
                             " even at threshold " + format_shortest(lo));
    }
    return {lo, atLo.arl.mean, atLo.arl.standardError, options.reps, atLo.arl.truncationCount};
  }

  // Raise the level in small steps so no path runs far past the target; the
  // step widens once the level leaves the initial bracket [b0/2, 2 b0].
  double step = std::max(1e-3, 0.005 * b0);
  double hi = lo;
  Eval atHi = atLo;
  while (atHi.arl.mean < gamma) {
    if (atHi.saturated) {
      throw CalibrationError("every replication is truncated at horizon " + std::to_string(horizon) +
                             " before reaching an ARL of " + format_shortest(gamma));
    }
    lo = hi;
    hi += step;
    if (hi > 2.0 * b0) step *= 1.5;
    atHi = evaluate(hi);
  }

  while (hi - lo >= 1e-3 && atHi.arl.mean > (1.0 + tolFraction) * gamma) {
    const double mid = 0.5 * (lo + hi);
    Eval atMid = evaluate(mid);
    if (atMid.arl.mean >= gamma) {
      hi = mid;
      atHi = atMid;
    } else {
      lo = mid;
    }
  }
  return {hi, atHi.arl.mean, atHi.arl.standardError, options.reps, atHi.arl.truncationCount};
}

std::string to_string(CalibrationReference ref) { return ref == CalibrationReference::Lfd ? "lfd" : "nominal"; }

CalibrationReference parse_calibration_reference(std::string_view name) {
  if (name == "lfd") return CalibrationReference::Lfd;
  if (name == "nominal") return CalibrationReference::Nominal;
  throw InvalidInput("unknown calibration reference '" + std::string(name) + "' (expected lfd or nominal)");
}

void ExperimentConfig::validate() const {
  scenario.validate();
  if (!(r1 >= 0.0) || !(r2 >= 0.0)) throw InvalidInput("ambiguity: radii must be >= 0");
  if (!(h > 0.0)) throw InvalidInput("detector: h must be positive");
  if (L < 2) throw InvalidInput("detector: L must be >= 2");
  if (W < 1) throw InvalidInput("detector: W must be >= 1");
  if (!(klR1 >= 0.0) || !(klR2 >= 0.0)) throw InvalidInput("detector: klRadii must be >= 0");
  if (trainPre < 1 || trainPost < 1) throw InvalidInput("training sample counts must be >= 1");
  if (methods.empty()) throw InvalidInput("no methods given");
  for (double g : gammas) {
    if (!(g > 1.0) || !std::isfinite(g)) throw InvalidInput("sim: every gamma must be > 1");
  }
  if (gammas.empty()) throw InvalidInput("sim: gammaList is empty");
  for (double e : epsList) {
    if (!(e >= 0.0)) throw InvalidInput("scenario: contamination levels must be >= 0");
  }
  if (reps < 1) throw InvalidInput("sim: reps must be >= 1");
  if (!(tolFraction >= 0.0)) throw InvalidInput("sim: tolFraction must be >= 0");
}

TrainingData draw_training(const ExperimentConfig& config) {
  const auto& s = config.scenario;
  TrainingData out;
  Rng pre = make_rng(s.seed, 0, stream_tag::kTrainPre);
  Rng post = make_rng(s.seed, 0, stream_tag::kTrainPost);
  for (std::size_t i = 0; i < config.trainPre; ++i) out.pre.push_back(s.preMean + s.preStd * normal(pre));
  for (std::size_t i = 0; i < config.trainPost; ++i) out.post.push_back(s.postMean + s.postStd * normal(post));
  return out;
}

namespace {

LfdSolution training_lfd(const ExperimentConfig& config, const TrainingData& training) {
  LfdProblem problem{to_points(training.pre), to_points(training.post), config.r1, config.r2, config.metric};
  return solve_lfd(problem);
}

std::vector<double> scalar(const std::vector<Point>& pts) {
  std::vector<double> out;
  for (const auto& p : pts) out.push_back(p[0]);
  return out;
}

}  // namespace

PreparedMethod prepare_method(const std::string& name, const ExperimentConfig& config, const TrainingData& training) {
  const auto& s = config.scenario;
  PreparedMethod out{name, GlrDetector{}, gaussian_sampler(s.preMean, s.preStd), gaussian_sampler(s.preMean, s.preStd)};
  if (name == "exact") {
    out.detector = CusumDetector{GaussianExact{s.preMean, s.preStd, s.postMean, s.postStd}, 0.0};
  } else if (name == "glr") {
    out.detector = GlrDetector{config.W, 0.0, s.preMean, s.preStd};
  } else if (name == "robust-was") {
    const LfdSolution sol = training_lfd(config, training);
    auto llr = std::make_shared<const InterpolatedLlr>(SmoothedLfd(sol, config.h));
    out.detector = CusumDetector{[llr](double x) { return (*llr)(x); }, 0.0};
    out.calibration = kernel_mixture_sampler(scalar(sol.jointSupport), sol.p1, config.h);
  } else if (name == "robust-was-binned") {
    const LfdSolution sol = training_lfd(config, training);
    auto edges = bin_edges_uniform_prechange(training.pre, config.L);
    auto table = std::make_shared<const BinnedTable>(binned_lfd_table(sol, edges));
    out.detector = CusumDetector{[table](double x) { return (*table)(x); }, 0.0};
    out.calibration = bin_sampler(edges, binned_distribution(scalar(sol.jointSupport), sol.p1, edges));
  } else if (name == "robust-kl") {
    auto edges = bin_edges_uniform_prechange(training.pre, config.L);
    const auto mu0 = binned_distribution(training.pre, edges, kBinFloor);
    const auto nu0 = binned_distribution(training.post, edges, kBinFloor);
    const KlLfdSolution kl = solve_lfd_kl(mu0, nu0, config.klR1, config.klR2);
    auto table = std::make_shared<const BinnedTable>(edges, log_ratio(kl.p1, kl.p2));
    out.detector = CusumDetector{[table](double x) { return (*table)(x); }, 0.0};
    out.calibration = bin_sampler(edges, kl.p1);
  } else {
    throw InvalidInput("unknown method '" + name + "' (expected exact, glr, robust-was, robust-was-binned, robust-kl)");
  }
  return out;
}

std::vector<CurvePoint> compare_methods(const ExperimentConfig& config) {
  config.validate();
  const auto& s = config.scenario;
  const TrainingData training = draw_training(config);
  const bool sweep = !config.epsList.empty();
  const std::vector<double> epsList = sweep ? config.epsList : std::vector<double>{s.contaminationEps};

  std::vector<CurvePoint> out;
  for (const auto& name : config.methods) {
    const PreparedMethod method = prepare_method(name, config, training);
    for (double gamma : config.gammas) {
      const std::size_t horizon =
          config.horizon > 0 ? config.horizon : static_cast<std::size_t>(std::ceil(20.0 * gamma));
      const Sampler& pre =
          config.calibrateUnder == CalibrationReference::Lfd ? method.calibration : method.nominalPre;
      const CalibrationResult cal = calibrate_threshold(
          method.detector, gamma, pre, {config.reps, horizon, s.seed, stream_tag::kCalibration}, config.tolFraction);
      for (double eps : epsList) {
        const Sampler post = with_contamination(gaussian_sampler(s.postMean, s.postStd), eps);
        const RunLengthEstimate edd =
            estimate_edd(method.detector, cal.threshold, post, {config.reps, horizon, s.seed, stream_tag::kDelay});
        CurvePoint p;
        p.method = sweep ? name + "[eps=" + format_shortest(eps) + "]" : name;
        p.gamma = gamma;
        p.threshold = cal.threshold;
        p.arl = cal.achievedArl;
        p.arlStderr = cal.arlStderr;
        p.edd = edd.mean;
        p.eddStderr = edd.standardError;
        p.reps = config.reps;
        out.push_back(std::move(p));
      }
    }
  }
  return out;
}

std::string curve_csv(const std::vector<CurvePoint>& points) {
  std::ostringstream os;
  os << "method,gamma,arl,arl_stderr,edd,edd_stderr,reps\n";
  for (const auto& p : points) {
    os << p.method << ',' << format_shortest(p.gamma) << ',' << format_shortest(p.arl) << ','
       << format_shortest(p.arlStderr) << ',' << format_shortest(p.edd) << ',' << format_shortest(p.eddStderr)
       << ',' << p.reps << '\n';
  }
  return os.str();
}

}  // namespace wasserquick
