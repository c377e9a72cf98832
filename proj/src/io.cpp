#include "wasserquick/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "wasserquick/error.hpp"

namespace wasserquick {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) return out;
    start = comma + 1;
  }
}

bool parse_double(const std::string& field, double& value) {
  if (field.empty()) return false;
  const char* first = field.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, field.data() + field.size(), value);
  return ec == std::errc() && ptr == field.data() + field.size();
}

}  // namespace

std::vector<Point> parse_samples_csv(std::istream& in, const std::string& name) {
  std::vector<Point> out;
  std::string line;
  std::size_t row = 0, columns = 0;
  bool seenData = false, seenHeader = false;
  while (std::getline(in, line)) {
    ++row;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto fields = split(t);
    std::vector<double> coords(fields.size());
    std::size_t bad = fields.size();
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (!parse_double(fields[c], coords[c])) {
        bad = c;
        break;
      }
    }
    if (bad < fields.size()) {
      if (!seenData && !seenHeader) {
        seenHeader = true;
        columns = fields.size();
        continue;
      }
      throw InvalidInput(name + ":" + std::to_string(row) + ":" + std::to_string(bad + 1) + ": cannot parse '" +
                         fields[bad] + "' as a number");
    }
    for (std::size_t c = 0; c < coords.size(); ++c) {
      if (!std::isfinite(coords[c])) {
        throw InvalidInput(name + ":" + std::to_string(row) + ":" + std::to_string(c + 1) + ": value is not finite");
      }
    }
    if (columns == 0) columns = fields.size();
    if (fields.size() != columns) {
      throw InvalidInput(name + ":" + std::to_string(row) + ": expected " + std::to_string(columns) +
                         " columns, found " + std::to_string(fields.size()));
    }
    seenData = true;
    out.emplace_back(std::move(coords));
  }
  if (out.empty()) throw InvalidInput(name + ": no samples");
  return out;
}

std::vector<Point> read_samples_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  return parse_samples_csv(in, path);
}

std::vector<double> scalar_samples(const std::vector<Point>& samples, const std::string& name) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& p : samples) {
    if (p.dim() != 1) throw InvalidInput(name + ": expected one column");
    out.push_back(p[0]);
  }
  return out;
}

namespace {

Json matrix_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

// Non-finite potentials have no JSON number; they are written as null with
// the sign recorded separately.
Json potentials_json(const std::vector<double>& g) {
  Json out = Json::array();
  for (double v : g) {
    if (std::isfinite(v)) {
      out.push_back(v);
    } else {
      out.push_back(nullptr);
    }
  }
  return out;
}

[[noreturn]] void bad_field(const std::string& path, const std::string& what) {
  throw InvalidInput(path + ": " + what);
}

const Json& field(const Json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) bad_field(path + key, "missing");
  return j.at(key);
}

double number(const Json& j, const std::string& path) {
  if (!j.is_number()) bad_field(path, "expected a number");
  return j.get<double>();
}

std::vector<double> numbers(const Json& j, const std::string& path) {
  if (!j.is_array()) bad_field(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

std::size_t count(const Json& j, const std::string& path, std::size_t min) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) bad_field(path, "expected an integer");
  const auto v = j.get<long long>();
  if (v < static_cast<long long>(min)) bad_field(path, "must be >= " + std::to_string(min));
  return static_cast<std::size_t>(v);
}

std::string text(const Json& j, const std::string& path) {
  if (!j.is_string()) bad_field(path, "expected a string");
  return j.get<std::string>();
}

Matrix matrix(const Json& j, std::size_t n, const std::string& path) {
  if (!j.is_array() || j.size() != n) bad_field(path, "expected " + std::to_string(n) + " rows");
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = numbers(j[i], path + "[" + std::to_string(i) + "]");
    if (row.size() != n) bad_field(path + "[" + std::to_string(i) + "]", "expected " + std::to_string(n) + " entries");
    for (std::size_t k = 0; k < n; ++k) m(i, k) = row[k];
  }
  return m;
}

void reject_unknown(const Json& j, const std::set<std::string>& known, const std::string& path) {
  if (!j.is_object()) bad_field(path.empty() ? "config" : path.substr(0, path.size() - 1), "expected an object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) bad_field(path + key, "unknown key");
  }
}

}  // namespace

Json lfd_to_json(const LfdSolution& s) {
  Json support = Json::array();
  for (const auto& p : s.jointSupport) support.push_back(p.coords());
  const auto& c = s.certificate;
  Json gSign = Json::array();
  for (double v : c.dualVariables.g) gSign.push_back(std::isfinite(v) ? 0 : (v > 0 ? 1 : -1));
  return Json{
      {"support", support},
      {"mu0", s.mu0},
      {"nu0", s.nu0},
      {"p1", s.p1},
      {"p2", s.p2},
      {"objective", s.objective},
      {"gap", c.relativeGap},
      {"r1", s.r1},
      {"r2", s.r2},
      {"metric", to_string(s.metric)},
      {"plan1", matrix_json(s.plan1.matrix)},
      {"plan2", matrix_json(s.plan2.matrix)},
      {"certificate",
       {{"primalResidual", c.primalResidual},
        {"dualBound", c.dualBound},
        {"relativeGap", c.relativeGap},
        {"iterations", c.iterations},
        {"g", potentials_json(c.dualVariables.g)},
        {"gInfinite", gSign},
        {"lambda1", c.dualVariables.lambda1},
        {"lambda2", c.dualVariables.lambda2},
        {"u1", potentials_json(c.dualVariables.u1)},
        {"u2", potentials_json(c.dualVariables.u2)}}},
  };
}

LfdSolution lfd_from_json(const Json& j) {
  LfdSolution s;
  const Json& support = field(j, "support", "");
  if (!support.is_array() || support.empty()) bad_field("support", "expected a nonempty array of points");
  for (std::size_t i = 0; i < support.size(); ++i) {
    s.jointSupport.emplace_back(numbers(support[i], "support[" + std::to_string(i) + "]"));
  }
  const std::size_t n = s.jointSupport.size();
  auto vec = [&](const char* key) {
    auto v = numbers(field(j, key, ""), key);
    if (v.size() != n) bad_field(key, "expected " + std::to_string(n) + " entries");
    return v;
  };
  s.mu0 = vec("mu0");
  s.nu0 = vec("nu0");
  s.p1 = vec("p1");
  s.p2 = vec("p2");
  s.objective = number(field(j, "objective", ""), "objective");
  s.r1 = number(field(j, "r1", ""), "r1");
  s.r2 = number(field(j, "r2", ""), "r2");
  s.metric = parse_metric(text(field(j, "metric", ""), "metric"));
  const Matrix costs = cost_matrix(s.metric, s.jointSupport, s.jointSupport);
  auto plan = [&](const char* key, const std::vector<double>& rows, const std::vector<double>& cols) {
    TransportPlan p{matrix(field(j, key, ""), n, key), rows, cols, 0.0};
    p.cost = p.matrix.cwiseProduct(costs).sum();
    return p;
  };
  s.plan1 = plan("plan1", s.mu0, s.p1);
  s.plan2 = plan("plan2", s.nu0, s.p2);
  if (j.contains("certificate")) {
    const Json& c = j.at("certificate");
    auto& out = s.certificate;
    out.primalResidual = number(field(c, "primalResidual", "certificate."), "certificate.primalResidual");
    out.dualBound = number(field(c, "dualBound", "certificate."), "certificate.dualBound");
    out.relativeGap = number(field(c, "relativeGap", "certificate."), "certificate.relativeGap");
    out.iterations = count(field(c, "iterations", "certificate."), "certificate.iterations", 0);
    out.dualVariables.lambda1 = number(field(c, "lambda1", "certificate."), "certificate.lambda1");
    out.dualVariables.lambda2 = number(field(c, "lambda2", "certificate."), "certificate.lambda2");
    const Json& g = field(c, "g", "certificate.");
    const Json sign = c.value("gInfinite", Json::array());
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (g[i].is_null()) {
        const int sg = i < sign.size() ? sign[i].get<int>() : 1;
        out.dualVariables.g.push_back(sg * std::numeric_limits<double>::infinity());
      } else {
        out.dualVariables.g.push_back(number(g[i], "certificate.g"));
      }
    }
    for (const char* key : {"u1", "u2"}) {
      auto& dst = std::string(key) == "u1" ? out.dualVariables.u1 : out.dualVariables.u2;
      for (const auto& v : c.value(key, Json::array())) {
        dst.push_back(v.is_null() ? -std::numeric_limits<double>::infinity() : v.get<double>());
      }
    }
  } else if (j.contains("gap")) {
    s.certificate.relativeGap = number(j.at("gap"), "gap");
  }
  return s;
}

Json model_to_json(const BinnedTable& table) {
  return Json{{"type", "binned"}, {"edges", table.edges}, {"logRatio", table.logRatio}};
}

Json model_to_json(const SmoothedLfd& model) {
  return Json{{"type", "smoothed"},
              {"h", model.bandwidth()},
              {"support", model.support()},
              {"p1", model.p1()},
              {"p2", model.p2()}};
}

Json curve_to_json(const std::vector<CurvePoint>& points) {
  Json out = Json::array();
  for (const auto& p : points) {
    out.push_back({{"method", p.method},
                   {"gamma", p.gamma},
                   {"threshold", p.threshold},
                   {"arlEst", p.arl},
                   {"arlStderr", p.arlStderr},
                   {"eddEst", p.edd},
                   {"eddStderr", p.eddStderr},
                   {"replications", p.reps}});
  }
  return out;
}

ExperimentConfig config_from_json(const Json& j) {
  ExperimentConfig c;
  reject_unknown(j, {"scenario", "ambiguity", "detector", "training", "methods", "sim", "io"}, "");
  if (j.contains("scenario")) {
    const Json& s = j.at("scenario");
    reject_unknown(s, {"preMean", "preStd", "postMean", "postStd", "changePoint", "contaminationEps", "horizon"},
                   "scenario.");
    auto& sc = c.scenario;
    if (s.contains("preMean")) sc.preMean = number(s.at("preMean"), "scenario.preMean");
    if (s.contains("preStd")) sc.preStd = number(s.at("preStd"), "scenario.preStd");
    if (s.contains("postMean")) sc.postMean = number(s.at("postMean"), "scenario.postMean");
    if (s.contains("postStd")) sc.postStd = number(s.at("postStd"), "scenario.postStd");
    if (s.contains("changePoint")) {
      if (s.at("changePoint").is_null()) {
        sc.changePoint.reset();
      } else {
        sc.changePoint = count(s.at("changePoint"), "scenario.changePoint", 1);
      }
    }
    if (s.contains("contaminationEps")) {
      sc.contaminationEps = number(s.at("contaminationEps"), "scenario.contaminationEps");
    }
    if (s.contains("horizon")) sc.horizon = count(s.at("horizon"), "scenario.horizon", 1);
  }
  if (j.contains("ambiguity")) {
    const Json& a = j.at("ambiguity");
    reject_unknown(a, {"r1", "r2", "metric"}, "ambiguity.");
    if (a.contains("r1")) c.r1 = number(a.at("r1"), "ambiguity.r1");
    if (a.contains("r2")) c.r2 = number(a.at("r2"), "ambiguity.r2");
    if (a.contains("metric")) {
      try {
        c.metric = parse_metric(text(a.at("metric"), "ambiguity.metric"));
      } catch (const InvalidInput& e) {
        bad_field("ambiguity.metric", e.what());
      }
    }
  }
  if (j.contains("detector")) {
    const Json& d = j.at("detector");
    reject_unknown(d, {"h", "L", "W", "klRadii", "calibrateUnder"}, "detector.");
    if (d.contains("h")) c.h = number(d.at("h"), "detector.h");
    if (d.contains("L")) c.L = count(d.at("L"), "detector.L", 2);
    if (d.contains("W")) c.W = count(d.at("W"), "detector.W", 1);
    if (d.contains("klRadii")) {
      const Json& k = d.at("klRadii");
      if (k.is_number()) {
        c.klR1 = c.klR2 = k.get<double>();
      } else {
        const auto v = numbers(k, "detector.klRadii");
        if (v.size() != 2) bad_field("detector.klRadii", "expected a number or two numbers");
        c.klR1 = v[0];
        c.klR2 = v[1];
      }
    }
    if (d.contains("calibrateUnder")) {
      try {
        c.calibrateUnder = parse_calibration_reference(text(d.at("calibrateUnder"), "detector.calibrateUnder"));
      } catch (const InvalidInput& e) {
        bad_field("detector.calibrateUnder", e.what());
      }
    }
  }
  if (j.contains("training")) {
    const Json& t = j.at("training");
    reject_unknown(t, {"pre", "post"}, "training.");
    if (t.contains("pre")) c.trainPre = count(t.at("pre"), "training.pre", 1);
    if (t.contains("post")) c.trainPost = count(t.at("post"), "training.post", 1);
  }
  if (j.contains("methods")) {
    const Json& m = j.at("methods");
    if (!m.is_array() || m.empty()) bad_field("methods", "expected a nonempty array of names");
    c.methods.clear();
    for (std::size_t i = 0; i < m.size(); ++i) c.methods.push_back(text(m[i], "methods[" + std::to_string(i) + "]"));
  }
  if (j.contains("sim")) {
    const Json& s = j.at("sim");
    reject_unknown(s, {"gammaList", "reps", "horizon", "seed", "epsList", "tolFraction", "thresholds"}, "sim.");
    if (s.contains("gammaList")) c.gammas = numbers(s.at("gammaList"), "sim.gammaList");
    if (s.contains("reps")) c.reps = count(s.at("reps"), "sim.reps", 1);
    if (s.contains("horizon")) c.horizon = count(s.at("horizon"), "sim.horizon", 0);
    if (s.contains("seed")) {
      const Json& v = s.at("seed");
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
        bad_field("sim.seed", "expected a nonnegative integer");
      }
      c.scenario.seed = v.get<std::uint64_t>();
    }
    if (s.contains("epsList")) c.epsList = numbers(s.at("epsList"), "sim.epsList");
    if (s.contains("tolFraction")) c.tolFraction = number(s.at("tolFraction"), "sim.tolFraction");
  }
  if (j.contains("io")) reject_unknown(j.at("io"), {"outputPath", "format"}, "io.");
  c.validate();
  return c;
}

Json config_to_json(const ExperimentConfig& c) {
  const auto& s = c.scenario;
  Json scenario{{"preMean", s.preMean},
                {"preStd", s.preStd},
                {"postMean", s.postMean},
                {"postStd", s.postStd},
                {"contaminationEps", s.contaminationEps},
                {"horizon", s.horizon}};
  scenario["changePoint"] = s.changePoint ? Json(*s.changePoint) : Json(nullptr);
  return Json{{"scenario", scenario},
              {"ambiguity", {{"r1", c.r1}, {"r2", c.r2}, {"metric", to_string(c.metric)}}},
              {"detector",
               {{"h", c.h},
                {"L", c.L},
                {"W", c.W},
                {"klRadii", {c.klR1, c.klR2}},
                {"calibrateUnder", to_string(c.calibrateUnder)}}},
              {"training", {{"pre", c.trainPre}, {"post", c.trainPost}}},
              {"methods", c.methods},
              {"sim",
               {{"gammaList", c.gammas},
                {"reps", c.reps},
                {"horizon", c.horizon},
                {"seed", s.seed},
                {"epsList", c.epsList},
                {"tolFraction", c.tolFraction}}}};
}

IoOptions io_options_from_json(const Json& j) {
  IoOptions out;
  if (!j.is_object() || !j.contains("io")) return out;
  const Json& io = j.at("io");
  if (io.contains("outputPath")) out.outputPath = text(io.at("outputPath"), "io.outputPath");
  if (io.contains("format")) {
    out.format = text(io.at("format"), "io.format");
    if (out.format != "csv" && out.format != "json") bad_field("io.format", "expected csv or json");
  }
  return out;
}

std::vector<std::pair<std::string, double>> thresholds_from_json(const Json& j) {
  std::vector<std::pair<std::string, double>> out;
  if (!j.is_object() || !j.contains("sim") || !j.at("sim").contains("thresholds")) return out;
  const Json& t = j.at("sim").at("thresholds");
  if (!t.is_object()) bad_field("sim.thresholds", "expected an object mapping method to threshold");
  for (const auto& [key, value] : t.items()) out.emplace_back(key, number(value, "sim.thresholds." + key));
  return out;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw InvalidInput(path + ": " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + path);
  out << text;
  if (!out) throw InvalidInput("failed writing " + path);
}

}  // namespace wasserquick
