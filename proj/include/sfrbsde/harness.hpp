#pragma once

// Experiment configuration, run manifests, and the four CLI commands.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sfrbsde/averaging_lab.hpp"

namespace sfrbsde {

inline constexpr const char* kArtifactVersion = "0.1.0";

// A coefficient preset: "constant:c", "linear:c" or "sinusoidal:level:amplitude:cycles".
struct CoefficientPreset {
  std::string kind = "constant";
  std::vector<double> params{0.0};

  static CoefficientPreset parse(const std::string& text);
  std::string to_text() const;
  DeterministicFn build(double horizon) const;

  friend bool operator==(const CoefficientPreset&, const CoefficientPreset&) = default;
};

struct ExperimentConfig {
  double hurst = 0.75;
  double horizon = 1.0;
  int n_time = 256;
  int n_space = 256;  // space intervals; the PDE grid has n_space + 1 nodes
  std::size_t n_paths = 20000;
  std::vector<double> eps_list{0.5, 0.35, 0.25, 0.18, 0.125};
  double beta = 0.25;
  double delta1 = 1e-2;
  double delta2 = 0.0;  // 0: 2 sqrt(largest sup-MSE)
  double t0 = 0.7;
  std::uint64_t seed = 42;
  int workers = 0;  // 0: all available cores

  // benchmark: (1 + sin(2 pi s / T)) (a y + b z1 + c z2 + d)
  // steady:    a y + b z1 + c z2 + d
  // linear:    a y
  // zero:      0
  std::string generator = "benchmark";
  double gen_a = 0.5;
  double gen_b = 0.25;
  double gen_c = 0.25;
  double gen_d = 0.1;
  std::string terminal = "square";  // square: x^2, identity: x

  CoefficientPreset drift{"constant", {0.0}};
  CoefficientPreset sigma1{"constant", {1.0}};
  CoefficientPreset sigma2{"constant", {1.0}};
  double eta0 = 0.0;

  int quad_panels = 256;
  std::string quad_treatment = "power-substitution";
  double quad_tolerance = 1e-8;

  double kappa = 6.0;
  double theta = 0.5;
  int picard_iterations = 12;
  double picard_tolerance = 1e-10;
  std::string fbm_method = "auto";

  double solve_epsilon = 0.5;
  double probe_time = 0.5;
  std::size_t export_paths = 100;
  std::size_t field_max_rows = 200000;
  int covariance_nodes = 8;

  std::string output_dir = "out";

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;

  // Every violated range, empty when valid.
  std::vector<std::string> violations() const;
  void validate() const;  // throws ConfigError

  int effective_workers() const;
  HurstModel hurst_model() const { return HurstModel(hurst); }
  TimeGrid grid() const { return TimeGrid(horizon, n_time); }
  QuadratureSpec quadrature() const;
  PdeConfig pde() const;
  FbmMethod fbm() const;
  SweepConfig sweep() const;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config(const std::filesystem::path& path);
// key = value lines for every field; parse_config_text(to_text(c)) == c.
std::string to_text(const ExperimentConfig& config);
// FNV-1a of to_text(config) with output_dir and workers reset, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

CoefficientSet build_coefficients(const ExperimentConfig& config);
Generator build_generator(const ExperimentConfig& config);
TerminalCondition build_terminal(const ExperimentConfig& config);

// Timestamps, stage durations and the output inventory of one command run.
class RunManifest {
 public:
  RunManifest(std::string command, const ExperimentConfig& config);

  // Times `stage` around body().
  template <class Body>
  auto stage(const std::string& name, Body&& body) {
    const auto start = std::chrono::steady_clock::now();
    struct Record {
      RunManifest* self;
      std::string name;
      std::chrono::steady_clock::time_point start;
      ~Record() {
        self->stages_.emplace_back(
            name, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
      }
    } record{this, name, start};
    return body();
  }

  void add_file(const std::filesystem::path& path);
  const std::vector<std::filesystem::path>& files() const { return files_; }

  // Writes manifest.csv (section, name, value) into `dir` and returns its path.
  std::filesystem::path write(const std::filesystem::path& dir);

 private:
  std::string command_;
  std::string hash_;
  std::uint64_t seed_;
  std::string started_;
  std::vector<std::pair<std::string, double>> stages_;
  std::vector<std::filesystem::path> files_;
};

struct CheckLine {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string detail;
};

struct CommandResult {
  std::vector<std::filesystem::path> files;
  std::vector<CheckLine> checks;
  bool passed() const;
};

CommandResult cmd_simulate_fbm(const ExperimentConfig& config);
CommandResult cmd_solve(const ExperimentConfig& config);
CommandResult cmd_sweep(const ExperimentConfig& config);

// Reduced-scale invariant suite. Each name in expect_fail is a negative
// control ("lemma1-null") that must be observed failing.
CommandResult cmd_verify(const ExperimentConfig& config, const std::vector<std::string>& expect_fail = {});

// Fixed-width table of check, status, margin.
std::string format_checks(const std::vector<CheckLine>& checks);

}  // namespace sfrbsde
