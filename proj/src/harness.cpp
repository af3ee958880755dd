#include "sfrbsde/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "sfrbsde/csv.hpp"
#include "sfrbsde/error.hpp"
#include "sfrbsde/parallel.hpp"

namespace sfrbsde {

namespace {

std::string trim(std::string_view s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string_view::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return std::string(s.substr(a, b - a + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  return out;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument("not a number: '" + s + "'");
  return v;
}

template <class Int>
Int parse_int(const std::string& s) {
  Int v = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument("not an integer: '" + s + "'");
  return v;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (double x : v) out += (out.empty() ? "" : ", ") + format_double(x);
  return out;
}

struct Field {
  const char* key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <class T>
Field real_field(const char* key, T ExperimentConfig::*member) {
  return {key, [member](ExperimentConfig& c, const std::string& v) { c.*member = parse_double(v); },
          [member](const ExperimentConfig& c) { return format_double(c.*member); }};
}

template <class T>
Field int_field(const char* key, T ExperimentConfig::*member) {
  return {key, [member](ExperimentConfig& c, const std::string& v) { c.*member = parse_int<T>(v); },
          [member](const ExperimentConfig& c) { return std::to_string(c.*member); }};
}

Field text_field(const char* key, std::string ExperimentConfig::*member) {
  return {key, [member](ExperimentConfig& c, const std::string& v) { c.*member = v; },
          [member](const ExperimentConfig& c) { return c.*member; }};
}

Field preset_field(const char* key, CoefficientPreset ExperimentConfig::*member) {
  return {key, [member](ExperimentConfig& c, const std::string& v) { c.*member = CoefficientPreset::parse(v); },
          [member](const ExperimentConfig& c) { return (c.*member).to_text(); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      real_field("hurst", &ExperimentConfig::hurst),
      real_field("horizon", &ExperimentConfig::horizon),
      int_field("n_time", &ExperimentConfig::n_time),
      int_field("n_space", &ExperimentConfig::n_space),
      int_field("n_paths", &ExperimentConfig::n_paths),
      {"eps_list",
       [](ExperimentConfig& c, const std::string& v) {
         c.eps_list.clear();
         for (const auto& item : split(v, ',')) c.eps_list.push_back(parse_double(item));
       },
       [](const ExperimentConfig& c) { return join_doubles(c.eps_list); }},
      real_field("beta", &ExperimentConfig::beta),
      real_field("delta1", &ExperimentConfig::delta1),
      real_field("delta2", &ExperimentConfig::delta2),
      real_field("t0", &ExperimentConfig::t0),
      int_field("seed", &ExperimentConfig::seed),
      int_field("workers", &ExperimentConfig::workers),
      text_field("generator", &ExperimentConfig::generator),
      real_field("gen_a", &ExperimentConfig::gen_a),
      real_field("gen_b", &ExperimentConfig::gen_b),
      real_field("gen_c", &ExperimentConfig::gen_c),
      real_field("gen_d", &ExperimentConfig::gen_d),
      text_field("terminal", &ExperimentConfig::terminal),
      preset_field("drift", &ExperimentConfig::drift),
      preset_field("sigma1", &ExperimentConfig::sigma1),
      preset_field("sigma2", &ExperimentConfig::sigma2),
      real_field("eta0", &ExperimentConfig::eta0),
      int_field("quad_panels", &ExperimentConfig::quad_panels),
      text_field("quad_treatment", &ExperimentConfig::quad_treatment),
      real_field("quad_tolerance", &ExperimentConfig::quad_tolerance),
      real_field("kappa", &ExperimentConfig::kappa),
      real_field("theta", &ExperimentConfig::theta),
      int_field("picard_iterations", &ExperimentConfig::picard_iterations),
      real_field("picard_tolerance", &ExperimentConfig::picard_tolerance),
      text_field("fbm_method", &ExperimentConfig::fbm_method),
      real_field("solve_epsilon", &ExperimentConfig::solve_epsilon),
      real_field("probe_time", &ExperimentConfig::probe_time),
      int_field("export_paths", &ExperimentConfig::export_paths),
      int_field("field_max_rows", &ExperimentConfig::field_max_rows),
      int_field("covariance_nodes", &ExperimentConfig::covariance_nodes),
      text_field("output_dir", &ExperimentConfig::output_dir),
  };
  return table;
}

std::string now_utc() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::filesystem::path out_dir(const ExperimentConfig& c) {
  std::filesystem::path dir(c.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

CheckLine check(std::string name, bool passed, double value, double threshold, std::string detail = {}) {
  return CheckLine{std::move(name), passed, value, threshold, std::move(detail)};
}

std::vector<std::size_t> spread_nodes(const TimeGrid& grid, int count) {
  std::vector<std::size_t> out;
  const std::size_t n = static_cast<std::size_t>(grid.steps());
  const std::size_t m = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, count)));
  for (std::size_t i = 1; i <= m; ++i) out.push_back((i * n + m - 1) / m);
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

CoefficientPreset CoefficientPreset::parse(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.empty()) throw std::invalid_argument("empty coefficient preset");
  CoefficientPreset p;
  p.kind = parts[0];
  p.params.clear();
  for (std::size_t i = 1; i < parts.size(); ++i) p.params.push_back(parse_double(parts[i]));
  const std::size_t need = p.kind == "sinusoidal" ? 3 : 1;
  if (p.kind != "constant" && p.kind != "linear" && p.kind != "sinusoidal")
    throw std::invalid_argument("unknown coefficient preset '" + p.kind +
                                "' (expected constant:c, linear:c or sinusoidal:level:amplitude:cycles)");
  if (p.params.size() != need)
    throw std::invalid_argument("preset '" + p.kind + "' takes " + std::to_string(need) + " parameter(s)");
  return p;
}

std::string CoefficientPreset::to_text() const {
  std::string out = kind;
  for (double v : params) out += ":" + format_double(v);
  return out;
}

DeterministicFn CoefficientPreset::build(double horizon) const {
  if (kind == "constant") return DeterministicFn::constant(params.at(0));
  if (kind == "linear") return DeterministicFn::linear(params.at(0));
  if (kind == "sinusoidal") return DeterministicFn::sinusoidal(params.at(0), params.at(1), params.at(2), horizon);
  throw DomainError("unknown coefficient preset '" + kind + "'");
}

std::vector<std::string> ExperimentConfig::violations() const {
  std::vector<std::string> bad;
  if (!(hurst > 0.5 && hurst < 1.0)) bad.push_back("H must lie in (0.5, 1)");
  if (!(horizon > 0.0)) bad.push_back("horizon must be > 0");
  if (n_time < 2) bad.push_back("n_time must be >= 2");
  if (n_space < 63) bad.push_back("n_space must be >= 63 (at least 64 space nodes)");
  if (n_paths < 1000) bad.push_back("n_paths must be >= 1000");
  if (eps_list.empty()) bad.push_back("eps_list must not be empty");
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    if (!(eps_list[i] > 0.0 && eps_list[i] <= 1.0))
      bad.push_back("eps_list values must lie in (0, 1], got " + format_double(eps_list[i]));
    if (i > 0 && !(eps_list[i] < eps_list[i - 1])) bad.push_back("eps_list must be strictly decreasing");
  }
  if (!(beta >= 0.0 && beta < 1.0)) bad.push_back("beta must lie in [0, 1)");
  if (hurst > 0.5 && hurst < 1.0 && !(beta < 1.0 / (2.0 * hurst)))
    bad.push_back("beta must be < 1/(2H) = " + format_double(1.0 / (2.0 * hurst)));
  if (!(delta1 > 0.0)) bad.push_back("delta1 must be > 0");
  if (!(delta2 >= 0.0)) bad.push_back("delta2 must be >= 0 (0 selects the automatic value)");
  if (!(t0 > 0.0 && t0 <= horizon)) bad.push_back("t0 must lie in (0, horizon]");
  if (workers < 0) bad.push_back("workers must be >= 0");
  static const std::set<std::string> generators{"benchmark", "steady", "linear", "zero"};
  if (!generators.count(generator)) bad.push_back("generator must be one of benchmark, steady, linear, zero");
  if (terminal != "square" && terminal != "identity") bad.push_back("terminal must be square or identity");
  if (quad_panels < 8) bad.push_back("quad_panels must be >= 8");
  if (quad_treatment != "power-substitution" && quad_treatment != "graded-mesh")
    bad.push_back("quad_treatment must be power-substitution or graded-mesh");
  if (!(quad_tolerance > 0.0)) bad.push_back("quad_tolerance must be > 0");
  if (!(kappa >= 4.0)) bad.push_back("kappa must be >= 4");
  if (!(theta >= 0.0 && theta <= 1.0)) bad.push_back("theta must lie in [0, 1]");
  if (picard_iterations < 1) bad.push_back("picard_iterations must be >= 1");
  if (!(picard_tolerance > 0.0)) bad.push_back("picard_tolerance must be > 0");
  if (fbm_method != "auto" && fbm_method != "cholesky" && fbm_method != "circulant")
    bad.push_back("fbm_method must be auto, cholesky or circulant");
  if (!(solve_epsilon > 0.0 && solve_epsilon <= 1.0)) bad.push_back("solve_epsilon must lie in (0, 1]");
  if (!(probe_time >= 0.0 && probe_time <= horizon)) bad.push_back("probe_time must lie in [0, horizon]");
  if (field_max_rows < 1) bad.push_back("field_max_rows must be >= 1");
  if (covariance_nodes < 1) bad.push_back("covariance_nodes must be >= 1");
  if (output_dir.empty()) bad.push_back("output_dir must not be empty");
  return bad;
}

void ExperimentConfig::validate() const {
  auto bad = violations();
  if (!bad.empty()) throw ConfigError(std::move(bad));
}

int ExperimentConfig::effective_workers() const { return workers > 0 ? workers : default_workers(); }

QuadratureSpec ExperimentConfig::quadrature() const {
  QuadratureSpec q;
  q.panels = quad_panels;
  q.tolerance = quad_tolerance;
  q.treatment = quad_treatment == "graded-mesh" ? SingularityTreatment::GradedMesh
                                                : SingularityTreatment::PowerSubstitution;
  return q;
}

PdeConfig ExperimentConfig::pde() const {
  PdeConfig p;
  p.kappa = kappa;
  p.space_nodes = n_space + 1;
  p.theta = theta;
  p.picard_iterations = picard_iterations;
  p.picard_tolerance = picard_tolerance;
  return p;
}

FbmMethod ExperimentConfig::fbm() const {
  if (fbm_method == "cholesky") return FbmMethod::Cholesky;
  if (fbm_method == "circulant") return FbmMethod::Circulant;
  return FbmMethod::Auto;
}

SweepConfig ExperimentConfig::sweep() const {
  SweepConfig s;
  s.eps_list = eps_list;
  s.beta = beta;
  s.delta1 = delta1;
  s.delta2 = delta2;
  s.t0 = t0;
  s.n_paths = n_paths;
  s.seed = seed;
  s.workers = effective_workers();
  s.fbm_method = fbm();
  s.pde = pde();
  return s;
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig c;
  std::vector<std::string> bad;
  std::set<std::string> seen;
  std::istringstream is(text);
  std::string line;
  int number = 0;
  while (std::getline(is, line)) {
    ++number;
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    const std::string where = "line " + std::to_string(number) + ": ";
    if (eq == std::string::npos) {
      bad.push_back(where + "expected key = value");
      continue;
    }
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    const auto& table = fields();
    const auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return key == f.key; });
    if (it == table.end()) {
      bad.push_back(where + "unknown key '" + key + "'");
      continue;
    }
    if (!seen.insert(key).second) {
      bad.push_back(where + "duplicate key '" + key + "'");
      continue;
    }
    try {
      it->set(c, value);
    } catch (const std::exception& e) {
      bad.push_back(where + key + ": " + e.what());
    }
  }
  for (auto& v : c.violations()) bad.push_back(std::move(v));
  if (!bad.empty()) throw ConfigError(std::move(bad));
  return c;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config_text(os.str());
}

std::string to_text(const ExperimentConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(config) + "\n";
  return out;
}

std::string config_hash(const ExperimentConfig& config) {
  // Settings that cannot change any number are left out.
  ExperimentConfig c = config;
  c.output_dir = ExperimentConfig{}.output_dir;
  c.workers = ExperimentConfig{}.workers;
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : to_text(c)) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

CoefficientSet build_coefficients(const ExperimentConfig& c) {
  return CoefficientSet(c.drift.build(c.horizon), c.sigma1.build(c.horizon), c.sigma2.build(c.horizon),
                        c.hurst_model(), c.grid(), c.quadrature(), c.eta0);
}

Generator build_generator(const ExperimentConfig& c) {
  const double a = c.gen_a, b = c.gen_b, cc = c.gen_c, d = c.gen_d;
  Generator g;
  g.label = c.generator;
  if (c.generator == "benchmark") {
    const double omega = 2.0 * std::numbers::pi / c.horizon;
    g.rule = [=](double s, double, double y, double z1, double z2) {
      return (1.0 + std::sin(omega * s)) * (a * y + b * z1 + cc * z2 + d);
    };
    g.average = [=](double, double y, double z1, double z2) { return a * y + b * z1 + cc * z2 + d; };
    // |1 + sin| <= 2 and Cauchy-Schwarz on the linear part.
    g.lipschitz = 4.0 * (a * a + b * b + cc * cc);
  } else if (c.generator == "steady") {
    g.rule = [=](double, double, double y, double z1, double z2) { return a * y + b * z1 + cc * z2 + d; };
    g.time_independent = true;
    g.lipschitz = a * a + b * b + cc * cc;
  } else if (c.generator == "linear") {
    g.rule = [=](double, double, double y, double, double) { return a * y; };
    g.time_independent = true;
    g.lipschitz = a * a;
  } else if (c.generator == "zero") {
    g.rule = [](double, double, double, double, double) { return 0.0; };
    g.time_independent = true;
  } else {
    throw DomainError("unknown generator '" + c.generator + "'");
  }
  return g;
}

TerminalCondition build_terminal(const ExperimentConfig& c) {
  TerminalCondition t;
  t.label = c.terminal;
  if (c.terminal == "square") {
    t.rule = [](double x) { return x * x; };
    t.growth_degree = 2;
  } else if (c.terminal == "identity") {
    t.rule = [](double x) { return x; };
    t.growth_degree = 1;
  } else {
    throw DomainError("unknown terminal condition '" + c.terminal + "'");
  }
  return t;
}

RunManifest::RunManifest(std::string command, const ExperimentConfig& config)
    : command_(std::move(command)), hash_(config_hash(config)), seed_(config.seed), started_(now_utc()) {}

void RunManifest::add_file(const std::filesystem::path& path) { files_.push_back(path); }

std::filesystem::path RunManifest::write(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.csv";
  CsvWriter csv(path, {"section", "name", "value"});
  auto put = [&csv](const char* section, const std::string& name, const std::string& value) {
    csv.cell(section).cell(name).cell(value);
    csv.end_row();
  };
  put("run", "command", command_);
  put("run", "artifact_version", kArtifactVersion);
  put("run", "config_hash", hash_);
  put("run", "seed", std::to_string(seed_));
  put("run", "started_utc", started_);
  put("run", "finished_utc", now_utc());
  for (const auto& [name, seconds] : stages_) put("stage_seconds", name, format_double(seconds));
  for (const auto& f : files_) put("file", f.filename().string(), f.string());
  put("file", "manifest.csv", path.string());
  return path;
}

bool CommandResult::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckLine& c) { return c.passed; });
}

std::string format_checks(const std::vector<CheckLine>& checks) {
  std::size_t width = 5;
  for (const auto& c : checks) width = std::max(width, c.name.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(width)) << "check"
     << "  status  value / threshold\n";
  for (const auto& c : checks) {
    os << std::left << std::setw(static_cast<int>(width)) << c.name << "  " << (c.passed ? "PASS  " : "FAIL  ")
       << "  " << format_double(c.value) << " / " << format_double(c.threshold);
    if (!c.detail.empty()) os << "  (" << c.detail << ")";
    os << "\n";
  }
  return os.str();
}

CommandResult cmd_simulate_fbm(const ExperimentConfig& config) {
  config.validate();
  RunManifest manifest("simulate-fbm", config);
  const auto dir = out_dir(config);
  CommandResult result;
  const auto h = config.hurst_model();
  const auto grid = config.grid();
  const int workers = config.effective_workers();

  PathEnsemble ens = manifest.stage("sample", [&] {
    return make_ensemble(grid, h, config.n_paths, config.seed, config.fbm(), workers);
  });
  manifest.stage("eta", [&] {
    const auto coeffs = build_coefficients(config);
    ens.eta = simulate_eta(coeffs, ens, config.solve_epsilon);
    ens.epsilon = config.solve_epsilon;
    return 0;
  });
  const auto nodes = spread_nodes(grid, config.covariance_nodes);
  const auto entries = manifest.stage("covariance", [&] { return covariance_check(ens.fractional, grid, h, nodes); });

  const auto paths_csv = dir / "paths.csv";
  write_paths_csv(paths_csv, ens, config.export_paths);
  const auto cov_csv = dir / "fbm_covariance.csv";
  {
    CsvWriter csv(cov_csv, {"i", "j", "t_i", "t_j", "empirical", "analytic", "stderr", "z_score"});
    for (const auto& e : entries) {
      csv.cell(e.i).cell(e.j).cell(e.t_i).cell(e.t_j).cell(e.empirical).cell(e.analytic);
      csv.cell(e.stderr_mean).cell(e.z_score);
      csv.end_row();
    }
  }
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, std::abs(e.z_score));
  result.checks.push_back(check("fbm-covariance", worst <= 3.0, worst, 3.0, "max |z| over node pairs"));
  for (const auto& p : {paths_csv, cov_csv}) {
    manifest.add_file(p);
    result.files.push_back(p);
  }
  result.files.push_back(manifest.write(dir));
  return result;
}

CommandResult cmd_solve(const ExperimentConfig& config) {
  config.validate();
  RunManifest manifest("solve", config);
  const auto dir = out_dir(config);
  CommandResult result;
  const int workers = config.effective_workers();
  const double eps = config.solve_epsilon;

  const auto coeffs = manifest.stage("coefficients", [&] { return build_coefficients(config); });
  const auto gen = build_generator(config);
  const auto term = build_terminal(config);
  const auto field = manifest.stage("pde", [&] { return solve_psi(gen, term, coeffs, eps, config.pde()); });
  const auto ens = manifest.stage("paths", [&] {
    return make_ensemble(coeffs.grid(), coeffs.hurst(), config.n_paths, config.seed, config.fbm(), workers);
  });
  const auto eta = simulate_eta(coeffs, ens, eps);
  const auto triple = manifest.stage("extract", [&] { return extract_triple(field, eta, coeffs); });

  double proportionality = 0.0;
  for (std::size_t k = 0; k < coeffs.grid().nodes(); ++k) {
    const double t = coeffs.grid().at(k);
    const double s1 = coeffs.sigma1()(t), s2 = coeffs.sigma2()(t);
    for (std::size_t p = 0; p < eta.paths(); ++p)
      proportionality = std::max(proportionality, std::abs(triple.z2(p, k) * s1 - triple.z1(p, k) * s2));
  }
  const auto rep = malliavin_representation_check(triple, field, eta, coeffs, config.t0);
  const auto res = residual_mean_check(triple, field, gen, term, coeffs, eta, config.probe_time);

  result.checks.push_back(check("z-proportionality", proportionality == 0.0, proportionality, 0.0));
  result.checks.push_back(rep.applicable
                              ? check("malliavin-representation", rep.max_deviation <= 1e-12, rep.max_deviation,
                                      1e-12)
                              : check("malliavin-representation", true, 0.0, 0.0, rep.status));
  result.checks.push_back(check("residual-mean", res.passes, res.residual, res.allowance,
                                "t = " + format_double(res.t_probe)));

  const auto coeff_csv = dir / "coefficients.csv";
  coeffs.write_csv(coeff_csv);
  const auto field_csv = dir / "field.csv";
  write_field_csv(field_csv, field, config.field_max_rows);
  const auto triple_csv = dir / "triple_summary.csv";
  write_triple_summary_csv(triple_csv, triple, coeffs.grid());
  const auto checks_csv = dir / "solve_checks.csv";
  {
    CsvWriter csv(checks_csv, {"check", "value", "threshold", "pass"});
    for (const auto& c : result.checks) {
      csv.cell(c.name).cell(c.value).cell(c.threshold).cell(c.passed);
      csv.end_row();
    }
  }
  for (const auto& p : {coeff_csv, field_csv, triple_csv, checks_csv}) {
    manifest.add_file(p);
    result.files.push_back(p);
  }
  result.files.push_back(manifest.write(dir));
  return result;
}

namespace {

std::vector<CheckLine> sweep_checks(const SweepReport& report, double delta1) {
  std::vector<CheckLine> out;
  const auto rate = check_theorem_rate(report, delta1);
  const auto cheb = check_chebyshev(report, report.delta2);
  const auto& rows = report.rows;
  out.push_back(check("sup-mse-monotone", rate.monotone, rows.back().sup_mse, rows.front().sup_mse,
                      "non-increasing within 3 combined stderr"));
  out.push_back(check("sup-mse-final-vs-first", rate.final_to_first < 0.25, rate.final_to_first, 0.25));
  out.push_back(check("log-log-slope", rate.slope > 0.0, rate.slope, 0.0));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string at = "@" + format_double(rows[i].epsilon);
    out.push_back(check("theorem-bound" + at, rate.bound_holds[i], rows[i].sup_mse, rows[i].constants.rate_bound()));
    out.push_back(check("lemma1" + at, rows[i].pass_lemma1, rows[i].lemma1_lhs, rows[i].lemma1_rhs));
    out.push_back(check("chebyshev" + at, cheb.holds[i], rows[i].exceed_prob,
                        rows[i].constants.rate_bound() / (report.delta2 * report.delta2)));
  }
  out.push_back(check("chebyshev-trend", cheb.trend, rows.back().exceed_prob, rows.front().exceed_prob));
  return out;
}

std::string sweep_summary(const ExperimentConfig& config, const SweepReport& report,
                          const std::vector<CheckLine>& checks) {
  const auto rate = check_theorem_rate(report, config.delta1);
  std::ostringstream os;
  os << "averaging sweep summary\n";
  os << "config hash " << config_hash(config) << ", seed " << config.seed << ", paths " << report.n_paths
     << ", H " << format_double(report.hurst) << ", T " << format_double(report.horizon) << "\n";
  os << "generator " << config.generator << " (fbar " << report.fbar_provenance << "), L "
     << format_double(report.lipschitz) << (report.lipschitz_declared ? " declared" : " sampled") << ", phi "
     << format_double(report.phi_bound) << ", C1 " << format_double(report.c1) << " on [t0, T], t0 "
     << format_double(report.t0) << "\n";
  os << "delta1 " << format_double(report.delta1) << ", delta2 " << format_double(report.delta2) << "\n\n";
  os << "mean-square rate: slope " << format_double(rate.slope) << ", final/first "
     << format_double(rate.final_to_first) << ", epsilon1 "
     << (rate.epsilon1 ? format_double(*rate.epsilon1) : std::string("none")) << "\n";
  auto all = [&](const std::string& prefix) {
    return std::all_of(checks.begin(), checks.end(),
                       [&](const CheckLine& c) { return c.name.rfind(prefix, 0) != 0 || c.passed; });
  };
  os << "claim mean-square convergence: "
     << (all("sup-mse") && all("log-log") && all("theorem") ? "PASS" : "FAIL") << "\n";
  os << "claim Z-error inequality: " << (all("lemma1") ? "PASS" : "FAIL") << "\n";
  os << "claim convergence in probability: " << (all("chebyshev") ? "PASS" : "FAIL") << "\n\n";
  os << format_checks(checks) << "\n";
  for (const auto& n : report.notes) os << "note: " << n << "\n";
  return os.str();
}

}  // namespace

CommandResult cmd_sweep(const ExperimentConfig& config) {
  config.validate();
  RunManifest manifest("sweep", config);
  const auto dir = out_dir(config);
  CommandResult result;
  const auto coeffs = manifest.stage("coefficients", [&] { return build_coefficients(config); });
  const auto gen = build_generator(config);
  const auto term = build_terminal(config);
  const auto report = manifest.stage("sweep", [&] { return run_sweep(gen, coeffs, term, config.sweep()); });
  result.checks = sweep_checks(report, config.delta1);

  const auto report_csv = dir / "sweep_report.csv";
  write_sweep_csv(report_csv, report);
  const auto constants_csv = dir / "constants.csv";
  write_constants_csv(constants_csv, report);
  const auto summary = dir / "summary.txt";
  {
    std::ofstream out(summary);
    if (!out) throw IoError("cannot write " + summary.string());
    out << sweep_summary(config, report, result.checks);
  }
  for (const auto& p : {report_csv, constants_csv, summary}) {
    manifest.add_file(p);
    result.files.push_back(p);
  }
  result.files.push_back(manifest.write(dir));
  return result;
}

CommandResult cmd_verify(const ExperimentConfig& config, const std::vector<std::string>& expect_fail) {
  config.validate();
  for (const auto& name : expect_fail)
    if (name != "lemma1-null") throw ConfigError({"unknown negative control '" + name + "' (known: lemma1-null)"});
  RunManifest manifest("verify", config);
  const auto dir = out_dir(config);
  CommandResult result;
  auto& checks = result.checks;
  const auto h = config.hurst_model();
  const int workers = config.effective_workers();
  const std::size_t paths = 20000;

  checks.push_back(check("config-roundtrip", parse_config_text(to_text(config)) == config, 0.0, 0.0));

  manifest.stage("fbm", [&] {
    const TimeGrid grid(8.0, 8);
    const auto bh = fbm_cholesky(grid, h, paths, RngSpec{config.seed, kFractionalStream}, workers);
    const std::vector<std::size_t> nodes{1, 2, 3, 4, 5, 6, 7, 8};
    double worst = 0.0;
    for (const auto& e : covariance_check(bh, grid, h, nodes)) worst = std::max(worst, std::abs(e.z_score));
    checks.push_back(check("fbm-covariance", worst <= 3.0, worst, 3.0, "max |z|, 8 nodes"));

    const TimeGrid fine(1.0, 64);
    const auto a = fbm_cholesky(fine, h, paths, RngSpec{config.seed, 11}, workers);
    const auto b = fbm_circulant(fine, h, paths, RngSpec{config.seed, 12}, workers);
    const auto sa = numerics::summarize(a.column(64));
    const auto sb = numerics::summarize(b.column(64));
    // Standard error of a Gaussian sample variance: var sqrt(2 / n).
    const double se = std::hypot(sa.variance, sb.variance) * std::sqrt(2.0 / paths);
    const double gap = std::abs(sa.variance - sb.variance);
    checks.push_back(check("fbm-methods-agree", gap <= 4.0 * se, gap, 4.0 * se, "variance at T"));
    return 0;
  });

  manifest.stage("kernel", [&] {
    const DeterministicFn plain([](double) { return 1.0; }, "one");
    double worst = 0.0;
    for (double t : {0.25, 0.5, 1.0}) {
      const double n = norm_sq(plain, t, h, config.quadrature());
      const double s = kernel_transform(plain, t, h, config.quadrature());
      worst = std::max(worst, std::abs(n / std::pow(t, 2.0 * h.value()) - 1.0));
      worst = std::max(worst, std::abs(s / (h.value() * std::pow(t, 2.0 * h.value() - 1.0)) - 1.0));
    }
    checks.push_back(check("kernel-closed-form", worst <= 1e-6, worst, 1e-6, "relative error"));
    return 0;
  });

  manifest.stage("isometry", [&] {
    const TimeGrid grid(1.0, 1024);
    PathEnsemble ens{grid, h, paths, {}, {}, {}, 1.0};
    ens.fractional = fbm_circulant(grid, h, paths, RngSpec{config.seed, kFractionalStream}, workers);
    const auto xi = DeterministicFn::linear(1.0);
    auto v = wiener_integral_det(xi, ens, Driver::Fractional);
    const auto mean = numerics::summarize(v);
    for (double& x : v) x *= x;
    const auto second = numerics::summarize(v);
    const double target = norm_sq(xi, 1.0, h, config.quadrature());
    const double gap = std::abs(second.mean - target);
    checks.push_back(check("isometry", gap <= 3.0 * second.stderr_mean, gap, 3.0 * second.stderr_mean));
    checks.push_back(check("wiener-zero-mean", std::abs(mean.mean) <= 3.0 * mean.stderr_mean, std::abs(mean.mean),
                           3.0 * mean.stderr_mean));
    for (const auto& [name, fn] : {std::pair{"one", DeterministicFn::constant(1.0)},
                                   std::pair{"zero", DeterministicFn::constant(0.0)},
                                   std::pair{"identity", DeterministicFn::linear(1.0)}}) {
      const auto r = check_lemma_var_bound(fn, ens);
      checks.push_back(check(std::string("variance-bound-") + name, r.holds, r.lhs, r.rhs + 3.0 * r.lhs_stderr));
    }
    return 0;
  });

  manifest.stage("pde", [&] {
    ExperimentConfig small = config;
    small.n_time = 128;
    small.n_space = 128;
    const auto coeffs = build_coefficients(small);
    TerminalCondition square{[](double x) { return x * x; }, 2, "square"};
    TerminalCondition identity{[](double x) { return x; }, 1, "identity"};
    Generator zero{[](double, double, double, double, double) { return 0.0; }, 0.0, true, {}, "zero"};
    const double r = 0.1;
    Generator linear{[r](double, double, double y, double, double) { return r * y; }, r * r, true, {}, "linear"};

    auto sup_error = [&](const SolutionField& f, auto exact) {
      double worst = 0.0;
      for (std::size_t k = 0; k < f.grid.nodes(); ++k)
        for (std::size_t i = 0; i < f.space_nodes(); ++i)
          worst = std::max(worst, std::abs(f.psi(k, i) - exact(f.grid.at(k), f.x_at(i))));
      return worst;
    };
    const auto& sig = coeffs.sigma_abs_sq_table();
    const double total = sig.back();
    const auto fq = solve_psi(zero, square, coeffs, 1.0, small.pde());
    double eq = 0.0;
    for (std::size_t k = 0; k < fq.grid.nodes(); ++k)
      for (std::size_t i = 0; i < fq.space_nodes(); ++i) {
        const double x = fq.x_at(i);
        eq = std::max(eq, std::abs(fq.psi(k, i) - (x * x + total - sig[k])));
      }
    checks.push_back(check("pde-quadratic-terminal", eq <= 1e-3, eq, 1e-3));
    const auto fl = solve_psi(zero, identity, coeffs, 1.0, small.pde());
    const double el = sup_error(fl, [](double, double x) { return x; });
    checks.push_back(check("pde-linear-terminal", el <= 1e-3, el, 1e-3));
    const double horizon = coeffs.horizon();
    const auto fr = solve_psi(linear, identity, coeffs, 1.0, small.pde());
    const double er = sup_error(fr, [&](double t, double x) { return x * std::exp(r * (horizon - t)); });
    checks.push_back(check("pde-linear-generator", er <= 1e-3, er, 1e-3));

    // Representation identities on the benchmark generator at solve_epsilon.
    const auto gen = build_generator(small);
    const auto field = solve_psi(gen, square, coeffs, small.solve_epsilon, small.pde());
    const auto ens = make_ensemble(coeffs.grid(), h, 4000, config.seed, FbmMethod::Auto, workers);
    const auto eta = simulate_eta(coeffs, ens, small.solve_epsilon);
    const auto triple = extract_triple(field, eta, coeffs);
    double prop = 0.0;
    for (std::size_t k = 0; k < coeffs.grid().nodes(); ++k) {
      const double t = coeffs.grid().at(k);
      for (std::size_t p = 0; p < eta.paths(); ++p)
        prop = std::max(prop, std::abs(triple.z2(p, k) * coeffs.sigma1()(t) - triple.z1(p, k) * coeffs.sigma2()(t)));
    }
    checks.push_back(check("z-proportionality", prop == 0.0, prop, 0.0));
    const auto rep = malliavin_representation_check(triple, field, eta, coeffs, small.t0);
    checks.push_back(check("malliavin-representation", !rep.applicable || rep.max_deviation <= 1e-12,
                           rep.max_deviation, 1e-12, rep.status));
    const auto res = residual_mean_check(triple, field, gen, square, coeffs, eta, small.probe_time);
    checks.push_back(check("residual-mean", res.passes, res.residual, res.allowance));
    return 0;
  });

  manifest.stage("averaging", [&] {
    ExperimentConfig small = config;
    small.n_time = 128;
    small.n_space = 128;
    small.n_paths = 4000;
    const auto coeffs = build_coefficients(small);
    const auto term = build_terminal(small);

    ExperimentConfig steady = small;
    steady.generator = "steady";
    const auto flat = run_sweep(build_generator(steady), coeffs, term, steady.sweep());
    double flat_worst = 0.0;
    for (const auto& row : flat.rows)
      flat_worst = std::max({flat_worst, row.sup_mse, row.z_err_integral, row.exceed_prob});
    checks.push_back(check("degenerate-sweep-zero", flat_worst == 0.0, flat_worst, 0.0));

    const auto report = run_sweep(build_generator(small), coeffs, term, small.sweep());
    for (auto& c : sweep_checks(report, small.delta1)) checks.push_back(std::move(c));

    if (std::find(expect_fail.begin(), expect_fail.end(), "lemma1-null") != expect_fail.end()) {
      bool any_failed = false;
      double worst_lhs = 0.0;
      for (const auto& row : report.rows) {
        const auto l = check_lemma1(row, 0.0, 0.0, report.horizon);
        any_failed = any_failed || !l.holds;
        worst_lhs = std::max(worst_lhs, l.lhs);
      }
      checks.push_back(check("lemma1-null (expected failure)", any_failed, worst_lhs, 0.0,
                             any_failed ? "failure observed" : "no failure observed"));
    }
    return 0;
  });

  const auto table = dir / "verify.csv";
  {
    CsvWriter csv(table, {"check", "pass", "value", "threshold", "detail"});
    for (const auto& c : checks) {
      csv.cell(c.name).cell(c.passed).cell(c.value).cell(c.threshold).cell(c.detail);
      csv.end_row();
    }
  }
  manifest.add_file(table);
  result.files.push_back(table);
  result.files.push_back(manifest.write(dir));
  return result;
}

}  // namespace sfrbsde
