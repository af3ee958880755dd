#pragma once

// Averaged generator, assumption estimates, the constants of the averaging
// bounds, and epsilon sweeps comparing the original and averaged systems on
// common paths.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sfrbsde/bsde_solver.hpp"

namespace sfrbsde {

struct AveragedGenerator {
  enum class Provenance { Analytic, Quadrature };
  using Rule = std::function<double(double x, double y, double z1, double z2)>;

  Rule rule;
  Provenance provenance = Provenance::Analytic;
  std::string label;

  double operator()(double x, double y, double z1, double z2) const { return rule(x, y, z1, z2); }
  // The same rule as a time-independent Generator, for solve_psi.
  Generator as_generator(std::optional<double> lipschitz = std::nullopt) const;
};

const char* to_string(AveragedGenerator::Provenance p);

// fbar = (1/T) int_0^T f(s, .) ds. Uses the generator's closed form when it
// has one, f itself when it is time-independent, and otherwise composite Gauss
// with q.panels / 8 panels (at least 8), checked against half that count on a
// sample box at build time.
AveragedGenerator build_fbar(const Generator& gen, double horizon, const QuadratureSpec& q = {});

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct SamplePoint {
  double x = 0.0;
  double y = 0.0;
  double z1 = 0.0;
  double z2 = 0.0;
};

// Uniform samples on a box in (x, y, z1, z2). Sample i depends only on
// (seed, i), so a larger sample count extends a smaller one.
struct DomainSampler {
  Interval x{-3.0, 3.0};
  Interval y{-10.0, 10.0};
  Interval z1{-10.0, 10.0};
  Interval z2{-10.0, 10.0};
  std::size_t samples = 256;
  std::uint64_t seed = 7;

  void validate() const;
  SamplePoint point(std::size_t i) const;
};

struct PhiEstimate {
  double bound = 0.0;
  double t = 0.0;   // arg-max window start
  double t1 = 0.0;  // arg-max window end
  SamplePoint at;
};

// (t, T1) pairs from `divisions` equal steps of [0, T].
std::vector<std::pair<double, double>> default_windows(double horizon, int divisions);

// Empirical sup of (1/(T1-t)) int_t^T1 |f - fbar|^2 ds / (1 + y^2 + z1^2 + z2^2).
PhiEstimate estimate_phi(const Generator& gen, const AveragedGenerator& fbar, const DomainSampler& sampler,
                         std::span<const std::pair<double, double>> windows);

struct LipschitzEstimate {
  double value = 0.0;         // declared value when there is one, else sampled_max
  double sampled_max = 0.0;   // sup of the sampled squared difference quotients
  bool declared = false;
};

// Sampled sup of |f(t,x,y,z) - f(t,x,y',z')|^2 / |(y,z) - (y',z')|^2 with t
// uniform on [0, T]. A declared constant is returned after checking that no
// sample exceeds it (ContractError otherwise).
LipschitzEstimate estimate_lipschitz(const Generator& gen, const DomainSampler& sampler, double horizon);

// Root of (eps^H / a) min{a - L eps^H, a C1 - L eps^H} = eps^{2H}, by
// bisection. Feasible iff eps^H < min(1, C1); InfeasibleError otherwise.
double solve_alpha0(double lipschitz, double c1, double epsilon, const HurstModel& h);

// Largest epsilon for which solve_alpha0 has a root: min(1, C1)^{1/H}.
double max_feasible_epsilon(double c1, const HurstModel& h);

// Sup over the window of the averaged system's second moments.
struct SolutionMoments {
  double y_sq = 0.0;
  double z1_sq = 0.0;
  double z2_sq = 0.0;
};

struct AveragingConstants {
  double lipschitz = 0.0;
  double c0 = 0.0;
  double c1 = 0.0;
  double phi_bound = 0.0;
  double alpha0 = 0.0;
  double l1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  double c4 = 0.0;
  double beta = 0.0;
  double t0 = 0.0;
  double u = 0.0;
  double epsilon = 0.0;
  double hurst = 0.0;

  // C4 eps^{1 - 2H beta}.
  double rate_bound() const;
};

struct ConstantsInput {
  double lipschitz = 0.0;
  double c1 = 0.0;
  double phi_bound = 0.0;
  double u = 0.0;  // window start
  double horizon = 1.0;
  double epsilon = 1.0;
  double beta = 0.25;
  double t0 = 0.0;  // where c1 was evaluated; recorded only
  SolutionMoments moments;
};

// C2 = sqrt((T-u) phi [1 + moments]), C3 = 4 phi [1 + moments],
// L1 = alpha0 + L/alpha0 + C2, and
// C4 = P eps^{2H(1+beta)-1} exp((T-u)[4(T-u) L eps^{4H} (L1+1) + 2 L1 eps^{2H} H T^{2H-1}]),
// P = (4(T-u) L eps^{2H} + 2H T^{2H-1}) C2 (T-u) + C3 (T-u)^2 eps^{2H} + 4 C0 T^2.
AveragingConstants compute_constants(const ConstantsInput& in, const HurstModel& h);

struct SweepConfig {
  std::vector<double> eps_list{0.5, 0.35, 0.25, 0.18, 0.125};
  double beta = 0.25;
  double delta1 = 1e-2;
  double delta2 = 0.0;  // <= 0: 2 sqrt(largest sup-MSE)
  double t0 = 0.7;
  std::size_t n_paths = 20000;
  std::uint64_t seed = 42;
  int workers = 1;
  FbmMethod fbm_method = FbmMethod::Auto;
  PdeConfig pde;
  DomainSampler sampler;
  int phi_divisions = 8;

  void validate(const HurstModel& h) const;
};

struct SweepRow {
  double epsilon = 0.0;
  std::size_t n_paths = 0;
  double t_lo = 0.0;
  double sup_mse = 0.0;          // max over window nodes of mean |dY_t|^2
  double sup_mse_stderr = 0.0;
  double sup_mse_time = 0.0;     // node attaining the max
  double z_err_integral = 0.0;   // mean of int (|dZ1|^2 + |dZ2|^2) ds over the window
  double z_err_stderr = 0.0;
  double y_err_integral = 0.0;   // mean of int |dY|^2 ds over the window
  double y_err_stderr = 0.0;
  double zy_covariance = 0.0;    // sample covariance of the two per-path integrals
  double mean_sup_sq = 0.0;      // mean of sup_t |dY_t|^2
  double exceed_prob = 0.0;
  double exceed_stderr = 0.0;
  std::size_t clamped = 0;
  AveragingConstants constants;
  SolutionMoments moments;
  double lemma1_lhs = 0.0;
  double lemma1_rhs = 0.0;
  bool pass_lemma1 = false;
  bool pass_theorem = false;
  bool pass_chebyshev = false;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  std::size_t n_paths = 0;
  double horizon = 1.0;
  double hurst = 0.75;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double lipschitz = 0.0;
  bool lipschitz_declared = false;
  double phi_bound = 0.0;
  double c1 = 0.0;
  double t0 = 0.0;
  std::string fbar_provenance;
  std::vector<std::string> notes;
  // Per-path sup_t |dY_t| for each row, kept for exceedance re-evaluation.
  std::vector<std::vector<double>> sup_abs_dy;
};

SweepReport run_sweep(const Generator& original, const CoefficientSet& coeffs, const TerminalCondition& terminal,
                      const SweepConfig& config);

struct Lemma1Check {
  double lhs = 0.0;
  double rhs = 0.0;
  double stderr_combined = 0.0;
  bool holds = false;
};

// E int |dZ|^2 <= L1 E int |dY|^2 + C2 (T - u), within 3 standard errors of
// the per-path difference.
Lemma1Check check_lemma1(const SweepRow& row, double l1, double c2, double horizon);
std::vector<Lemma1Check> check_lemma1(const SweepReport& report);

struct RateCheck {
  double slope = 0.0;                  // NaN when some sup-MSE is 0
  std::optional<double> epsilon1;      // largest swept eps with sup-MSE <= delta1 at it and every smaller eps
  std::vector<bool> bound_holds;       // sup-MSE <= C4 eps^{1-2H beta}
  bool monotone = false;               // non-increasing within 3 combined stderr
  double final_to_first = 0.0;
};

// Least-squares slope of log y against log x. Requires >= 3 points, all positive.
double fit_log_slope(std::span<const double> x, std::span<const double> y);

RateCheck check_theorem_rate(const SweepReport& report, double delta1);

struct ChebyshevCheck {
  std::vector<bool> holds;             // freq <= C4 eps^{1-2H beta} / delta2^2 + 3 stderr
  std::vector<bool> self_consistent;   // freq <= E sup|dY|^2 / delta2^2 + 3 stderr
  bool trend = false;                  // freq at the smallest eps <= freq at the largest
};

ChebyshevCheck check_chebyshev(const SweepReport& report, double delta2);

// Columns epsilon, t_lo, sup_mse, sup_mse_stderr, z_err_integral, z_err_stderr,
// exceed_prob, exceed_stderr, c4_bound, lemma1_lhs, lemma1_rhs, pass_lemma1,
// pass_theorem, pass_chebyshev.
void write_sweep_csv(const std::filesystem::path& path, const SweepReport& report);

// Columns name, value. Per-epsilon constants are named e.g. "C4@0.5".
void write_constants_csv(const std::filesystem::path& path, const SweepReport& report);

}  // namespace sfrbsde
