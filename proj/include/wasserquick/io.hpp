#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "wasserquick/detect.hpp"
#include "wasserquick/lfd.hpp"
#include "wasserquick/sim.hpp"

namespace wasserquick {

using Json = nlohmann::json;

/// One sample per row, one coordinate per comma-separated column. A first
/// row that does not parse as numbers is taken as a header; blank lines and
/// lines starting with '#' are skipped. Errors name the row and column.
std::vector<Point> parse_samples_csv(std::istream& in, const std::string& name);
std::vector<Point> read_samples_csv(const std::string& path);

/// Scalar view of one-dimensional samples.
std::vector<double> scalar_samples(const std::vector<Point>& samples, const std::string& name);

Json lfd_to_json(const LfdSolution& solution);
/// Rebuilds the solution, recomputing plan costs from the ground metric.
LfdSolution lfd_from_json(const Json& j);

Json model_to_json(const BinnedTable& table);
Json model_to_json(const SmoothedLfd& model);

Json curve_to_json(const std::vector<CurvePoint>& points);

/// Experiment configuration; unknown keys are rejected with their path.
ExperimentConfig config_from_json(const Json& j);
Json config_to_json(const ExperimentConfig& config);

struct IoOptions {
  std::string outputPath;
  std::string format = "csv";
};

IoOptions io_options_from_json(const Json& j);

/// Thresholds given per method for `simulate`; empty when absent.
std::vector<std::pair<std::string, double>> thresholds_from_json(const Json& j);

Json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace wasserquick
