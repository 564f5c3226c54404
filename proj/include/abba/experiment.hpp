#pragma once

// Experiment configs, the run driver behind `abba run`, and `abba compare`.
//
// Config grammar (line oriented, '#' starts a comment):
//
//   key = value                 top-level keys: seed, output, track_metrics,
//                               image_export_stride, timing
//   [problem]                   name, matched, noise, size, angles, bins,
//                               det_spacing, pixel_size, rows, cols
//   [solver NAME]               method, max_iter, lambda, stop, restart,
//                               reorthogonalize, ncp_window
//
// lambda: none | lcurve | gcv | fixed:VALUE
// stop:   none | dp[:TAU] | ncp[:THRESHOLD] | rns[:EPS]

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "abba/abba.hpp"
#include "json.hpp"

namespace abba {

/// Malformed config text; carries the line and field.
class ConfigParseError : public ConfigurationError {
 public:
  ConfigParseError(const std::string& source, int line, const std::string& field, const std::string& what)
      : ConfigurationError(source + ":" + std::to_string(line) + ": field '" + field + "': " + what),
        line_(line),
        field_(field) {}
  int line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  int line_;
  std::string field_;
};

inline constexpr const char* kOutDirEnv = "ABBA_OUT_DIR";

struct ProblemConfig {
  std::string name = "tp2";  // tp1-like | tp2 | tp3-desk | custom | dense
  bool matched = false;
  std::optional<double> noise;
  std::optional<std::size_t> size, angles, bins;
  std::optional<double> detSpacing, pixelSize;
  std::size_t rows = 10, cols = 10;  // dense only
};

struct StopSpec {
  StoppingRule::Kind kind = StoppingRule::Kind::None;
  std::optional<double> param;
  std::size_t ncpWindow = 0;

  std::string describe() const {
    std::string s;
    switch (kind) {
      case StoppingRule::Kind::None: return "none";
      case StoppingRule::Kind::Dp: s = "dp"; break;
      case StoppingRule::Kind::Ncp: s = "ncp"; break;
      case StoppingRule::Kind::Rns: s = "rns"; break;
    }
    if (param) {
      std::ostringstream os;
      os << ':' << *param;
      s += os.str();
    }
    return s;
  }
};

struct SolverSpec {
  std::string name;
  Method method = Method::Ab;
  int maxIter = 100;
  LambdaStrategy lambda;
  StopSpec stop;
  int restart = 0;
  bool reorthogonalize = true;
  int line = 0;
};

struct ExperimentConfig {
  std::string source = "<config>";
  std::uint64_t seed = 0;
  std::optional<std::string> output;
  bool trackMetrics = true;
  int imageExportStride = 0;
  bool timing = false;
  ProblemConfig problem;
  std::vector<SolverSpec> solvers;
};

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct FieldParser {
  const std::string& source;
  int line;
  const std::string& field;

  [[noreturn]] void fail(const std::string& what) const { throw ConfigParseError(source, line, field, what); }

  double real(const std::string& v) const {
    char* end = nullptr;
    const double d = std::strtod(v.c_str(), &end);
    if (v.empty() || *end != '\0' || !std::isfinite(d)) fail("expected a number, got '" + v + "'");
    return d;
  }
  long long integer(const std::string& v, long long lo) const {
    char* end = nullptr;
    const long long i = std::strtoll(v.c_str(), &end, 10);
    if (v.empty() || *end != '\0') fail("expected an integer, got '" + v + "'");
    if (i < lo) fail("must be at least " + std::to_string(lo) + ", got " + v);
    return i;
  }
  bool boolean(const std::string& v) const {
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    fail("expected true or false, got '" + v + "'");
  }
  LambdaStrategy lambda(const std::string& v) const {
    if (v == "none") return LambdaStrategy::none();
    if (v == "lcurve") return LambdaStrategy::lcurve();
    if (v == "gcv") return LambdaStrategy::gcv();
    if (v.rfind("fixed:", 0) == 0) {
      const double x = real(v.substr(6));
      if (x < 0) fail("fixed lambda must be nonnegative");
      return LambdaStrategy::fixed(x);
    }
    fail("expected none, lcurve, gcv or fixed:VALUE, got '" + v + "'");
  }
  StopSpec stop(const std::string& v) const {
    StopSpec s;
    const auto colon = v.find(':');
    const std::string kind = v.substr(0, colon);
    if (kind == "none") s.kind = StoppingRule::Kind::None;
    else if (kind == "dp") s.kind = StoppingRule::Kind::Dp;
    else if (kind == "ncp") s.kind = StoppingRule::Kind::Ncp;
    else if (kind == "rns") s.kind = StoppingRule::Kind::Rns;
    else fail("expected none, dp[:tau], ncp[:threshold] or rns[:eps], got '" + v + "'");
    if (colon != std::string::npos) {
      if (s.kind == StoppingRule::Kind::None) fail("'none' takes no parameter");
      s.param = real(v.substr(colon + 1));
    }
    return s;
  }
};

}  // namespace detail

inline ExperimentConfig parseExperimentConfig(std::istream& in, const std::string& source = "<config>") {
  ExperimentConfig cfg;
  cfg.source = source;
  enum class Section { Top, Problem, Solver } section = Section::Top;
  std::string raw;
  int lineNo = 0;
  bool sawProblem = false;
  while (std::getline(in, raw)) {
    ++lineNo;
    const auto hash = raw.find('#');
    const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigParseError(source, lineNo, "section", "unterminated section header");
      const std::string head = detail::trim(line.substr(1, line.size() - 2));
      if (head == "problem") {
        if (sawProblem) throw ConfigParseError(source, lineNo, "problem", "duplicate [problem] section");
        sawProblem = true;
        section = Section::Problem;
      } else if (head == "solver" || (head.rfind("solver", 0) == 0 && std::isspace(static_cast<unsigned char>(head[6])))) {
        const std::string name = detail::trim(head.substr(6));
        if (name.empty()) throw ConfigParseError(source, lineNo, "solver", "solver section needs a name");
        if (name.find_first_of("/\\ ") != std::string::npos)
          throw ConfigParseError(source, lineNo, "solver", "solver name '" + name + "' must not contain spaces or slashes");
        for (const auto& s : cfg.solvers)
          if (s.name == name) throw ConfigParseError(source, lineNo, "solver", "duplicate solver name '" + name + "'");
        SolverSpec spec;
        spec.name = name;
        spec.line = lineNo;
        cfg.solvers.push_back(spec);
        section = Section::Solver;
      } else {
        throw ConfigParseError(source, lineNo, "section", "unknown section [" + head + "]");
      }
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigParseError(source, lineNo, line, "expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    const detail::FieldParser p{source, lineNo, key};

    if (section == Section::Top) {
      if (key == "seed") cfg.seed = static_cast<std::uint64_t>(p.integer(value, 0));
      else if (key == "output") cfg.output = value;
      else if (key == "track_metrics") cfg.trackMetrics = p.boolean(value);
      else if (key == "image_export_stride") cfg.imageExportStride = static_cast<int>(p.integer(value, 0));
      else if (key == "timing") cfg.timing = p.boolean(value);
      else p.fail("unknown top-level key");
    } else if (section == Section::Problem) {
      auto& pr = cfg.problem;
      if (key == "name") {
        if (value != "tp1-like" && value != "tp2" && value != "tp3-desk" && value != "custom" && value != "dense")
          p.fail("expected tp1-like, tp2, tp3-desk, custom or dense, got '" + value + "'");
        pr.name = value;
      } else if (key == "matched") pr.matched = p.boolean(value);
      else if (key == "noise") {
        pr.noise = p.real(value);
        if (*pr.noise < 0) p.fail("noise level must be nonnegative");
      } else if (key == "size") pr.size = static_cast<std::size_t>(p.integer(value, 1));
      else if (key == "angles") pr.angles = static_cast<std::size_t>(p.integer(value, 1));
      else if (key == "bins") pr.bins = static_cast<std::size_t>(p.integer(value, 1));
      else if (key == "det_spacing") {
        pr.detSpacing = p.real(value);
        if (!(*pr.detSpacing > 0)) p.fail("must be positive");
      } else if (key == "pixel_size") {
        pr.pixelSize = p.real(value);
        if (!(*pr.pixelSize > 0)) p.fail("must be positive");
      } else if (key == "rows") pr.rows = static_cast<std::size_t>(p.integer(value, 1));
      else if (key == "cols") pr.cols = static_cast<std::size_t>(p.integer(value, 1));
      else p.fail("unknown problem key");
    } else {
      auto& s = cfg.solvers.back();
      if (key == "method") {
        try {
          s.method = parseMethod(value);
        } catch (const ConfigurationError&) {
          p.fail("unknown method '" + value + "'");
        }
      } else if (key == "max_iter") s.maxIter = static_cast<int>(p.integer(value, 1));
      else if (key == "lambda") s.lambda = p.lambda(value);
      else if (key == "stop") {
        const std::size_t window = s.stop.ncpWindow;
        s.stop = p.stop(value);
        s.stop.ncpWindow = window;
      } else if (key == "restart") s.restart = static_cast<int>(p.integer(value, 0));
      else if (key == "reorthogonalize") s.reorthogonalize = p.boolean(value);
      else if (key == "ncp_window") s.stop.ncpWindow = static_cast<std::size_t>(p.integer(value, 0));
      else p.fail("unknown solver key");
    }
  }
  if (cfg.solvers.empty()) throw ConfigParseError(source, lineNo, "solver", "config defines no [solver NAME] section");
  for (const auto& s : cfg.solvers) {
    const bool hybrid = isHybrid(s.method);
    const detail::FieldParser p{source, s.line, "lambda"};
    if (hybrid && s.lambda.kind == LambdaStrategy::Kind::None)
      p.fail("solver '" + s.name + "' uses hybrid method " + toString(s.method) + " and needs a lambda strategy");
    if (!hybrid && s.lambda.kind != LambdaStrategy::Kind::None)
      p.fail("solver '" + s.name + "' uses non-hybrid method " + toString(s.method) + "; lambda must be none");
  }
  return cfg;
}

inline ExperimentConfig loadExperimentConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigParseError(path.string(), 0, "file", "cannot open config");
  return parseExperimentConfig(in, path.string());
}

// ---------------------------------------------------------------------------
// problems

/// Everything a solver sweep needs: operators, data and ground truth.
struct ExperimentProblem {
  std::string name;
  LinearOperator A, B;
  Vector b, xTrue;
  double noiseNorm = 0.0;
  std::optional<ImageGrid> grid;  // absent for dense problems
  bool matched = false;
  nlohmann::ordered_json description;
};

inline ExperimentProblem buildExperimentProblem(const ProblemConfig& pc, std::uint64_t seed) {
  ExperimentProblem ep;
  ep.name = pc.name;
  ep.matched = pc.matched;
  if (pc.name == "dense") {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    DenseMatrix a(pc.rows, pc.cols);
    for (auto& v : a.data) v = g(rng);
    ep.xTrue.resize(pc.cols);
    for (auto& v : ep.xTrue) v = g(rng);
    ep.A = denseOperator(a, "A_dense");
    if (pc.matched) {
      ep.B = transposeOf(a, "A_dense^T");
    } else {
      DenseMatrix bm = a.transposed();
      for (auto& v : bm.data) v += 0.1 * g(rng);
      ep.B = denseOperator(bm, "B_dense");
    }
    const Vector clean = ep.A.apply(ep.xTrue);
    auto noisy = addNoise(clean, pc.noise.value_or(0.0), seed + 1);
    ep.b = std::move(noisy.noisy);
    ep.noiseNorm = noisy.noiseNorm;
    ep.description = {{"name", "dense"}, {"rows", pc.rows}, {"cols", pc.cols}, {"matched", pc.matched},
                      {"noise", pc.noise.value_or(0.0)}};
    return ep;
  }

  CtProblemSpec spec;
  if (pc.name == "custom") {
    spec.name = "custom";
  } else {
    spec = testProblemSpec(parseTestProblem(pc.name), pc.matched, seed);
  }
  spec.matched = pc.matched;
  spec.seed = seed;
  if (pc.size) spec.size = *pc.size;
  if (pc.angles) spec.angleCount = *pc.angles;
  if (pc.bins) spec.detCount = *pc.bins;
  if (pc.detSpacing) spec.detSpacing = *pc.detSpacing;
  if (pc.pixelSize) spec.pixelSize = *pc.pixelSize;
  if (pc.noise) spec.noiseLevel = *pc.noise;
  CtProblem ct = buildProblem(spec);
  ep.A = ct.forward;
  ep.B = ct.back;
  ep.b = std::move(ct.bNoisy);
  ep.xTrue = std::move(ct.xTrue);
  ep.noiseNorm = ct.noiseNorm;
  ep.grid = ct.grid;
  ep.description = {{"name", spec.name},
                    {"size", spec.size},
                    {"angles", ct.geometry.angles.size()},
                    {"bins", ct.geometry.detCount},
                    {"det_spacing", ct.geometry.detSpacing},
                    {"pixel_size", spec.pixelSize},
                    {"noise", spec.noiseLevel},
                    {"noise_norm", ct.noiseNorm},
                    {"matched", spec.matched},
                    {"rows", ct.forward.rows()},
                    {"cols", ct.forward.cols()}};
  return ep;
}

inline StoppingRule resolveStopping(const StopSpec& s, double noiseNorm) {
  switch (s.kind) {
    case StoppingRule::Kind::None: return StoppingRule::none();
    case StoppingRule::Kind::Dp: return StoppingRule::dp(noiseNorm, s.param.value_or(1.01));
    case StoppingRule::Kind::Ncp: return StoppingRule::ncp(s.param.value_or(0.05), s.ncpWindow);
    case StoppingRule::Kind::Rns: return StoppingRule::rns(s.param.value_or(1e-4));
  }
  return StoppingRule::none();
}

// ---------------------------------------------------------------------------
// outputs

inline const char* kCsvHeader = "k,lambda,data_residual,ba_residual,proj_residual,sol_norm,rre,ssim,elapsed_s";

namespace detail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
inline std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

}  // namespace detail

inline void writeRecordsCsv(const std::filesystem::path& path, const std::vector<IterationRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << kCsvHeader << '\n';
  for (const auto& r : records) {
    out << r.k << ',' << detail::fmt(r.lambda) << ',' << detail::fmt(r.dataResidual) << ','
        << detail::fmt(r.baResidual) << ',' << detail::fmt(r.projResidual) << ',' << detail::fmt(r.solutionNorm)
        << ',' << detail::fmt(r.rre) << ',' << detail::fmt(r.ssim) << ',' << detail::fmt(r.elapsed) << '\n';
  }
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

/// Parsed run CSV: column name -> values (NaN where empty).
struct RunTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::optional<std::size_t> column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    return std::nullopt;
  }
};

inline RunTable readRunCsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  RunTable t;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("'" + path.string() + "' is empty");
  std::stringstream hs(line);
  for (std::string c; std::getline(hs, c, ',');) t.columns.push_back(c);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      const std::string cell = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      row.push_back(cell.empty() ? std::numeric_limits<double>::quiet_NaN() : std::strtod(cell.c_str(), nullptr));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

struct SolverOutcome {
  std::string name;
  SolveResult result;
  std::filesystem::path csv, manifest;
};

struct ExperimentOptions {
  std::optional<std::string> outDir;
  std::optional<std::uint64_t> seed;
};

inline std::filesystem::path resolveOutputDir(const ExperimentConfig& cfg, const ExperimentOptions& opt) {
  if (opt.outDir) return *opt.outDir;
  if (cfg.output) return *cfg.output;
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
  return "abba-out";
}

namespace detail {

inline std::string imageName(const std::string& solver, int k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_k%04d.pgm", k);
  return solver + buf;
}

inline nlohmann::ordered_json solverJson(const SolverSpec& s) {
  return {{"name", s.name},
          {"method", toString(s.method)},
          {"max_iter", s.maxIter},
          {"lambda", s.lambda.describe()},
          {"stop", s.stop.describe()},
          {"ncp_window", s.stop.ncpWindow},
          {"restart", s.restart},
          {"reorthogonalize", s.reorthogonalize}};
}

}  // namespace detail

/// Runs one solver on a built problem and writes its CSV, images and manifest.
inline SolverOutcome runSolver(const ExperimentConfig& cfg, const SolverSpec& spec, const ExperimentProblem& prob,
                               std::uint64_t seed, const std::filesystem::path& outDir) {
  SolverConfig sc;
  sc.method = spec.method;
  sc.maxIter = spec.maxIter;
  sc.lambda = spec.lambda;
  sc.stopping = resolveStopping(spec.stop, prob.noiseNorm);
  sc.restartPeriod = spec.restart;
  sc.reorthogonalize = spec.reorthogonalize;
  sc.recordTiming = cfg.timing;

  const auto [loIt, hiIt] = std::minmax_element(prob.xTrue.begin(), prob.xTrue.end());
  const double lo = *loIt, hi = *hiIt;
  const bool images = prob.grid.has_value();
  const bool ssimOk = images && prob.grid->nx >= kSsimWindow && prob.grid->ny >= kSsimWindow && hi > lo;
  const int stride = cfg.imageExportStride;
  if (cfg.trackMetrics || (images && stride > 0)) {
    sc.onIterate = [&](std::span<const double> x, IterationRecord& rec) {
      if (cfg.trackMetrics) {
        rec.rre = rre(x, prob.xTrue);
        if (ssimOk) rec.ssim = ssimWithRange(x, prob.xTrue, *prob.grid, hi - lo);
      }
      if (images && stride > 0 && rec.k > 0 && rec.k % stride == 0)
        writePgm16((outDir / detail::imageName(spec.name, rec.k)).string(), x, prob.grid->nx, prob.grid->ny, lo, hi);
    };
  }

  SolverOutcome out;
  out.name = spec.name;
  out.result = solve(prob.A, prob.B, prob.b, sc);
  const SolveResult& res = out.result;

  out.csv = outDir / (spec.name + ".csv");
  writeRecordsCsv(out.csv, res.records);
  if (images) writePgm16((outDir / (spec.name + "_final.pgm")).string(), res.x, prob.grid->nx, prob.grid->ny, lo, hi);

  nlohmann::ordered_json m;
  m["solver"] = detail::solverJson(spec);
  m["problem"] = prob.description;
  m["seed"] = seed;
  m["noise_seed"] = seed;
  m["track_metrics"] = cfg.trackMetrics;
  m["image_export_stride"] = stride;
  m["stop_reason"] = toString(res.stopReason);
  m["iterations"] = res.records.back().k;
  m["cycles"] = res.cycles;
  m["lambda_fallbacks"] = res.lambdaFallbacks;
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < res.records.size(); ++i)
    if (res.records[i].rre && (!best || *res.records[i].rre < *res.records[*best].rre)) best = i;
  if (best) {
    m["min_rre_iteration"] = res.records[*best].k;
    m["min_rre_row"] = *best;
    m["min_rre"] = *res.records[*best].rre;
  } else {
    m["min_rre_iteration"] = nullptr;
    m["min_rre_row"] = nullptr;
    m["min_rre"] = nullptr;
  }
  nlohmann::ordered_json fin;
  fin["rre"] = rre(res.x, prob.xTrue);
  if (ssimOk) fin["ssim"] = ssimWithRange(res.x, prob.xTrue, *prob.grid, hi - lo);
  else fin["ssim"] = nullptr;
  fin["data_residual"] = res.records.back().dataResidual;
  fin["solution_norm"] = norm2(res.x);
  m["final"] = fin;
  m["csv"] = out.csv.filename().string();
  m["rows"] = res.records.size();
  m["final_image"] = images ? nlohmann::json(spec.name + "_final.pgm") : nlohmann::json(nullptr);

  out.manifest = outDir / (spec.name + ".manifest.json");
  std::ofstream mf(out.manifest, std::ios::binary);
  if (!mf) throw std::runtime_error("cannot open '" + out.manifest.string() + "' for writing");
  mf << m.dump(2) << '\n';
  return out;
}

/// Entry point of `abba run`. Exit codes: 0 ok, 1 solver failure, 2 config error.
inline int runExperiment(const ExperimentConfig& cfg, const ExperimentOptions& opt, std::ostream& log,
                         std::ostream& err) {
  const std::uint64_t seed = opt.seed.value_or(cfg.seed);
  const std::filesystem::path outDir = resolveOutputDir(cfg, opt);
  ExperimentProblem prob;
  try {
    prob = buildExperimentProblem(cfg.problem, seed);
  } catch (const ConfigurationError& e) {
    err << cfg.source << ": [problem]: " << e.what() << '\n';
    return 2;
  }
  std::error_code ec;
  std::filesystem::create_directories(outDir, ec);
  if (ec || !std::filesystem::is_directory(outDir)) {
    err << "output directory '" << outDir.string() << "' is not writable: " << ec.message() << '\n';
    return 2;
  }
  log << "problem " << prob.name << ": A " << prob.A.shapeString() << ", noise norm " << prob.noiseNorm << '\n';
  for (const auto& spec : cfg.solvers) {
    try {
      const SolverOutcome o = runSolver(cfg, spec, prob, seed, outDir);
      const auto& r = o.result;
      log << "solver " << spec.name << " (" << toString(spec.method) << "): " << r.records.size() << " rows, stop "
          << toString(r.stopReason) << ", final rre " << rre(r.x, prob.xTrue) << " -> " << o.manifest.string()
          << '\n';
    } catch (const std::exception& e) {
      err << "solver '" << spec.name << "' failed: " << e.what() << '\n';
      return 1;
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// compare

struct RunSummary {
  std::string manifest, solver, method, stopReason;
  std::size_t rows = 0;
  std::optional<double> minRre, finalRre, maxSsim, finalSsim;
  std::optional<int> minRreIteration;
};

inline RunSummary summarizeRun(const std::filesystem::path& manifestPath) {
  std::ifstream in(manifestPath);
  if (!in) throw std::runtime_error("cannot open manifest '" + manifestPath.string() + "'");
  nlohmann::json m;
  try {
    in >> m;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("manifest '" + manifestPath.string() + "' is not valid JSON: " + e.what());
  }
  RunSummary s;
  s.manifest = manifestPath.string();
  try {
    s.solver = m.at("solver").at("name").get<std::string>();
    s.method = m.at("solver").at("method").get<std::string>();
    s.stopReason = m.at("stop_reason").get<std::string>();
    const auto csv = manifestPath.parent_path() / m.at("csv").get<std::string>();
    const RunTable t = readRunCsv(csv);
    s.rows = t.rows.size();
    const auto kCol = t.column("k"), rreCol = t.column("rre"), ssimCol = t.column("ssim");
    if (!kCol || !rreCol || !ssimCol) throw std::runtime_error("'" + csv.string() + "' lacks k/rre/ssim columns");
    for (const auto& row : t.rows) {
      const double r = row[*rreCol], q = row[*ssimCol];
      if (!std::isnan(r) && (!s.minRre || r < *s.minRre)) {
        s.minRre = r;
        s.minRreIteration = static_cast<int>(row[*kCol]);
      }
      if (!std::isnan(q) && (!s.maxSsim || q > *s.maxSsim)) s.maxSsim = q;
    }
    const auto& fin = m.at("final");
    if (fin.at("rre").is_number()) s.finalRre = fin.at("rre").get<double>();
    if (fin.at("ssim").is_number()) s.finalSsim = fin.at("ssim").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("manifest '" + manifestPath.string() + "' is missing fields: " + e.what());
  }
  return s;
}

/// Entry point of `abba compare`. Exit 2 when a manifest or CSV is missing.
inline int compareRuns(const std::filesystem::path& a, const std::filesystem::path& b, std::ostream& out,
                       std::ostream& err) {
  RunSummary sa, sb;
  try {
    sa = summarizeRun(a);
    sb = summarizeRun(b);
  } catch (const std::exception& e) {
    err << e.what() << '\n';
    return 2;
  }
  auto num = [](const std::optional<double>& v) {
    if (!v) return std::string("-");
    std::ostringstream os;
    os << std::setprecision(6) << *v;
    return os.str();
  };
  auto ratio = [](const RunSummary& s) -> std::optional<double> {
    if (!s.finalRre || !s.minRre || *s.minRre == 0.0) return std::nullopt;
    return *s.finalRre / *s.minRre;
  };
  const std::vector<std::tuple<std::string, std::string, std::string>> rows{
      {"solver", sa.solver, sb.solver},
      {"method", sa.method, sb.method},
      {"iterations", std::to_string(sa.rows), std::to_string(sb.rows)},
      {"stop_reason", sa.stopReason, sb.stopReason},
      {"min_rre", num(sa.minRre), num(sb.minRre)},
      {"min_rre_iteration", sa.minRreIteration ? std::to_string(*sa.minRreIteration) : "-",
       sb.minRreIteration ? std::to_string(*sb.minRreIteration) : "-"},
      {"final_rre", num(sa.finalRre), num(sb.finalRre)},
      {"final/min_rre", num(ratio(sa)), num(ratio(sb))},
      {"max_ssim", num(sa.maxSsim), num(sb.maxSsim)},
      {"final_ssim", num(sa.finalSsim), num(sb.finalSsim)},
  };
  std::size_t w0 = 6, w1 = 1, w2 = 1;
  for (const auto& [k, x, y] : rows) {
    w0 = std::max(w0, k.size());
    w1 = std::max(w1, x.size());
    w2 = std::max(w2, y.size());
  }
  out << std::left << std::setw(static_cast<int>(w0)) << "metric" << "  " << std::setw(static_cast<int>(w1)) << "A"
      << "  " << "B" << '\n';
  for (const auto& [k, x, y] : rows)
    out << std::left << std::setw(static_cast<int>(w0)) << k << "  " << std::setw(static_cast<int>(w1)) << x << "  "
        << y << '\n';
  out << "A: " << sa.manifest << "\nB: " << sb.manifest << '\n';
  return 0;
}

}  // namespace abba
