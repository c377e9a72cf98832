#include "wasserquick/cli.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "wasserquick/error.hpp"
#include "wasserquick/io.hpp"

namespace wasserquick {

namespace {

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format;
  bool quiet = false;
};

struct Context {
  GlobalOptions global;
  std::ostream& out;
  std::ostream& err;

  std::ostream& note() {
    static std::ostream null(nullptr);
    return global.quiet ? null : err;
  }

  // Writes a result to --out when given, else to the result stream.
  void emit(const std::string& path, const std::string& text) {
    if (path.empty()) {
      out << text;
    } else {
      write_text_file(path, text);
    }
  }
};

struct LoadedConfig {
  ExperimentConfig experiment;
  IoOptions io;
  Json raw;
};

LoadedConfig load_config(const Context& ctx) {
  if (ctx.global.config.empty()) throw InvalidInput("--config is required for this command");
  LoadedConfig c;
  c.raw = read_json_file(ctx.global.config);
  c.experiment = config_from_json(c.raw);
  c.io = io_options_from_json(c.raw);
  if (ctx.global.seed) c.experiment.scenario.seed = *ctx.global.seed;
  if (!ctx.global.out.empty()) c.io.outputPath = ctx.global.out;
  if (!ctx.global.format.empty()) c.io.format = ctx.global.format;
  return c;
}

std::size_t horizon_for(const ExperimentConfig& c, double gamma) {
  return c.horizon > 0 ? c.horizon : static_cast<std::size_t>(std::ceil(20.0 * gamma));
}

std::string curve_output(const std::vector<CurvePoint>& points, const std::string& format) {
  return format == "json" ? curve_to_json(points).dump(2) + "\n" : curve_csv(points);
}

void warn_truncation(Context& ctx, const std::string& what, const RunLengthEstimate& r) {
  if (r.truncationWarning) {
    ctx.note() << "warning: " << what << ": " << r.truncationCount << " of " << r.replications
               << " runs reached the horizon\n";
  }
}

int cmd_solve_lfd(Context& ctx, const std::string& prePath, const std::string& postPath, double r1, double r2,
                  const std::string& metric, std::optional<double> h, std::optional<std::size_t> L) {
  LfdProblem problem{read_samples_csv(prePath), read_samples_csv(postPath), r1, r2, parse_metric(metric)};
  const LfdSolution sol = solve_lfd(problem);
  Json j = lfd_to_json(sol);
  if (h) j["smoothed"] = model_to_json(SmoothedLfd(sol, *h));
  if (L) {
    const auto pre = scalar_samples(problem.preSamples, prePath);
    j["binned"] = model_to_json(binned_lfd_table(sol, bin_edges_uniform_prechange(pre, *L)));
  }
  const WeakBoundednessReport wb = verify_weak_boundedness(sol);
  j["weakBoundedness"] = {{"worstCaseMeanLR", wb.worstCaseMeanLR}, {"satisfied", wb.satisfied}};

  std::ostream& summary = ctx.global.out.empty() || ctx.global.quiet ? ctx.note() : ctx.out;
  summary << "objective " << format_shortest(sol.objective) << "\n"
          << "relative gap " << format_shortest(sol.certificate.relativeGap) << "\n"
          << "worst-case mean likelihood ratio " << format_shortest(wb.worstCaseMeanLR) << " ("
          << (wb.satisfied ? "weakly bounded" : "NOT weakly bounded") << ")\n";
  ctx.emit(ctx.global.out, j.dump(2) + "\n");
  return kExitOk;
}

int cmd_verify(Context& ctx, const std::string& path) {
  const LfdSolution sol = lfd_from_json(read_json_file(path));
  sol.check_invariants();
  const WeakBoundednessReport wb = verify_weak_boundedness(sol);
  const Matrix costs = cost_matrix(sol.metric, sol.jointSupport, sol.jointSupport);
  const auto& g = sol.certificate.dualVariables.g;
  std::optional<double> bound;
  if (g.size() == sol.jointSupport.size()) bound = lfd_dual_bound(g, sol.mu0, sol.nu0, costs, sol.r1, sol.r2);
  Json report{{"invariants", "ok"},
              {"objective", sol.objective},
              {"worstCaseMeanLR", wb.worstCaseMeanLR},
              {"weaklyBounded", wb.satisfied}};
  if (bound) {
    report["dualBound"] = *bound;
    report["relativeGap"] = (sol.objective - *bound) / std::max(1.0, std::abs(sol.objective));
  }
  ctx.emit(ctx.global.out, report.dump(2) + "\n");
  if (!wb.satisfied) {
    ctx.note() << "warning: worst-case mean likelihood ratio " << format_shortest(wb.worstCaseMeanLR)
               << " exceeds 1; the pair is not weakly bounded\n";
  }
  return kExitOk;
}

int cmd_bin(Context& ctx, const std::string& prePath, std::size_t L, const std::string& postPath) {
  if (L < 2) throw InvalidInput("--L must be >= 2");
  const auto pre = scalar_samples(read_samples_csv(prePath), prePath);
  if (pre.size() < L) {
    throw InvalidInput(prePath + ": " + std::to_string(pre.size()) + " samples are fewer than L = " +
                       std::to_string(L));
  }
  const auto edges = bin_edges_uniform_prechange(pre, L);
  Json j{{"L", L},
         {"edges", edges},
         {"mu0", binned_distribution(pre, edges)},
         {"mu0Floored", binned_distribution(pre, edges, kBinFloor)}};
  if (!postPath.empty()) {
    const auto post = scalar_samples(read_samples_csv(postPath), postPath);
    j["nu0"] = binned_distribution(post, edges);
    j["nu0Floored"] = binned_distribution(post, edges, kBinFloor);
  }
  ctx.emit(ctx.global.out, j.dump(2) + "\n");
  return kExitOk;
}

int cmd_calibrate(Context& ctx) {
  const LoadedConfig c = load_config(ctx);
  const auto& e = c.experiment;
  const TrainingData training = draw_training(e);
  Json rows = Json::array();
  std::ostringstream csv;
  csv << "method,gamma,threshold,arl,arl_stderr,reps,truncated\n";
  for (const auto& name : e.methods) {
    const PreparedMethod m = prepare_method(name, e, training);
    const Sampler& pre = e.calibrateUnder == CalibrationReference::Lfd ? m.calibration : m.nominalPre;
    for (double gamma : e.gammas) {
      const CalibrationResult r = calibrate_threshold(
          m.detector, gamma, pre, {e.reps, horizon_for(e, gamma), e.scenario.seed, stream_tag::kCalibration},
          e.tolFraction);
      csv << name << ',' << format_shortest(gamma) << ',' << format_shortest(r.threshold) << ','
          << format_shortest(r.achievedArl) << ',' << format_shortest(r.arlStderr) << ',' << r.replications << ','
          << r.truncationCount << '\n';
      rows.push_back({{"method", name},
                      {"gamma", gamma},
                      {"threshold", r.threshold},
                      {"achievedArl", r.achievedArl},
                      {"arlStderr", r.arlStderr},
                      {"replications", r.replications},
                      {"truncated", r.truncationCount}});
    }
  }
  ctx.emit(c.io.outputPath, c.io.format == "json" ? rows.dump(2) + "\n" : csv.str());
  return kExitOk;
}

int cmd_simulate(Context& ctx) {
  const LoadedConfig c = load_config(ctx);
  const auto& e = c.experiment;
  const auto given = thresholds_from_json(c.raw);
  for (const auto& [name, b] : given) {
    if (std::find(e.methods.begin(), e.methods.end(), name) == e.methods.end()) {
      throw InvalidInput("sim.thresholds." + name + ": not among the configured methods");
    }
  }
  const TrainingData training = draw_training(e);
  const auto& s = e.scenario;
  std::vector<CurvePoint> points;
  for (const auto& name : e.methods) {
    const PreparedMethod m = prepare_method(name, e, training);
    const auto it = std::find_if(given.begin(), given.end(), [&](const auto& p) { return p.first == name; });
    for (double gamma : e.gammas) {
      // Without a given threshold, the asymptotic choice |log gamma|.
      const double b = it != given.end() ? it->second : std::abs(std::log(gamma));
      const std::size_t horizon = horizon_for(e, gamma);
      const RunLengthEstimate arl =
          estimate_arl(m.detector, b, m.nominalPre, {e.reps, horizon, s.seed, stream_tag::kArlCheck});
      const RunLengthEstimate edd =
          estimate_edd(m.detector, b, with_contamination(gaussian_sampler(s.postMean, s.postStd), s.contaminationEps),
                       {e.reps, horizon, s.seed, stream_tag::kDelay});
      warn_truncation(ctx, name + " ARL at gamma " + format_shortest(gamma), arl);
      warn_truncation(ctx, name + " delay at gamma " + format_shortest(gamma), edd);
      points.push_back({name, gamma, b, arl.mean, arl.standardError, edd.mean, edd.standardError, e.reps});
    }
  }
  ctx.emit(c.io.outputPath, curve_output(points, c.io.format));
  return kExitOk;
}

int cmd_compare(Context& ctx) {
  const LoadedConfig c = load_config(ctx);
  ctx.emit(c.io.outputPath, curve_output(compare_methods(c.experiment), c.io.format));
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const argv[], std::ostream& out, std::ostream& err) {
  CLI::App app{"Robust quickest change detection with Wasserstein ambiguity sets", "wasserquick"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config, "Experiment configuration (JSON)");
  app.add_option("--seed", g.seed, "Seed overriding the configuration");
  app.add_option("--out", g.out, "Output path (default: standard output)");
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  app.add_flag("--quiet", g.quiet, "Suppress diagnostics");

  std::string prePath, postPath, metric = "l1";
  double r1 = 0.0, r2 = 0.0;
  std::optional<double> h;
  std::optional<std::size_t> binsForModel;
  auto* solve = app.add_subcommand("solve-lfd", "Solve for the least favorable distributions");
  solve->add_option("pre", prePath, "Pre-change samples (CSV)")->required();
  solve->add_option("post", postPath, "Post-change samples (CSV)")->required();
  solve->add_option("--r1", r1, "Pre-change radius")->required();
  solve->add_option("--r2", r2, "Post-change radius")->required();
  solve->add_option("--metric", metric, "Ground metric: l1, l2 or linf");
  solve->add_option("--bandwidth", h, "Also write the kernel-smoothed model with this bandwidth");
  solve->add_option("--L", binsForModel, "Also write the binned model with L bins");

  std::string lfdPath;
  auto* verify = app.add_subcommand("verify", "Check a stored LFD solution");
  verify->add_option("lfd", lfdPath, "LFD solution (JSON)")->required();

  std::size_t L = 20;
  std::string binPost;
  auto* bin = app.add_subcommand("bin", "Quantile bin edges from pre-change samples");
  bin->add_option("pre", prePath, "Pre-change samples (CSV)")->required();
  bin->add_option("--L", L, "Number of bins");
  bin->add_option("--post", binPost, "Post-change samples to bin as well");

  auto* calibrate = app.add_subcommand("calibrate", "Calibrate thresholds to target ARLs");
  auto* simulate = app.add_subcommand("simulate", "Estimate ARL and delay at given thresholds");
  auto* compare = app.add_subcommand("compare", "Calibrate, then compare detection delays");
  for (auto* sub : {solve, verify, bin, calibrate, simulate, compare}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  Context ctx{g, out, err};
  try {
    if (*solve) return cmd_solve_lfd(ctx, prePath, postPath, r1, r2, metric, h, binsForModel);
    if (*verify) return cmd_verify(ctx, lfdPath);
    if (*bin) return cmd_bin(ctx, prePath, L, binPost);
    if (*calibrate) return cmd_calibrate(ctx);
    if (*simulate) return cmd_simulate(ctx);
    if (*compare) return cmd_compare(ctx);
  } catch (const InfeasibleProblem& e) {
    err << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const InvariantViolation& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const CalibrationError& e) {
    err << "calibration error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::logic_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const Json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}

}  // namespace wasserquick
