#pragma once

// Matched Brownian / fractional Brownian path ensembles on a shared grid,
// Wiener integrals of deterministic integrands, and the forward process
// eta^eps_t = eta_0 + eps^{2H} int b + eps^H int sigma1 dB + eps^H int sigma2 dB^H.

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "sfrbsde/frac_kernel.hpp"
#include "sfrbsde/grid.hpp"
#include "sfrbsde/numerics.hpp"

namespace sfrbsde {

// Stream ids used by make_ensemble for the two Gaussian sources.
inline constexpr std::uint64_t kBrownianStream = 0;
inline constexpr std::uint64_t kFractionalStream = 1;

struct RngSpec {
  std::uint64_t seed = 42;
  std::uint64_t stream = 0;

  // Independent engine for one path of this stream.
  std::mt19937_64 engine_for_path(std::uint64_t path) const;
};

// Row-major paths x nodes matrix.
class PathMatrix {
 public:
  PathMatrix() = default;
  PathMatrix(std::size_t paths, std::size_t nodes) : paths_(paths), nodes_(nodes), data_(paths * nodes, 0.0) {}

  std::size_t paths() const { return paths_; }
  std::size_t nodes() const { return nodes_; }
  bool empty() const { return data_.empty(); }

  std::span<double> row(std::size_t p) { return {data_.data() + p * nodes_, nodes_}; }
  std::span<const double> row(std::size_t p) const { return {data_.data() + p * nodes_, nodes_}; }
  double operator()(std::size_t p, std::size_t k) const { return data_[p * nodes_ + k]; }
  double& operator()(std::size_t p, std::size_t k) { return data_[p * nodes_ + k]; }

  // Column k across all paths.
  std::vector<double> column(std::size_t k) const;

  friend bool operator==(const PathMatrix&, const PathMatrix&) = default;

 private:
  std::size_t paths_ = 0;
  std::size_t nodes_ = 0;
  std::vector<double> data_;
};

enum class FbmMethod { Auto, Cholesky, Circulant };

// Cholesky is used up to this many steps under FbmMethod::Auto.
inline constexpr int kCirculantThreshold = 512;

struct PathEnsemble {
  TimeGrid grid;
  HurstModel hurst;
  std::size_t n_paths = 0;
  PathMatrix brownian;    // B
  PathMatrix fractional;  // B^H
  PathMatrix eta;         // optional, filled by callers that need it
  double epsilon = 1.0;
};

// Exact sampling of B^H on the grid nodes via the lower Cholesky factor of
// Gamma_jk = (t_j^{2H} + t_k^{2H} - |t_j - t_k|^{2H}) / 2 over the interior nodes.
PathMatrix fbm_cholesky(const TimeGrid& grid, const HurstModel& h, std::size_t n_paths, const RngSpec& rng,
                        int workers = 1);

// Circulant embedding of the stationary increment autocovariance,
// cumulatively summed. Distributionally equivalent to fbm_cholesky.
PathMatrix fbm_circulant(const TimeGrid& grid, const HurstModel& h, std::size_t n_paths, const RngSpec& rng,
                         int workers = 1);

// Eigenvalues of the circulant embedding (length 2n), exposed for checks.
std::vector<double> circulant_eigenvalues(int n_steps, const HurstModel& h);

// Increment autocovariance at integer lag k in unit steps:
// (|k+1|^{2H} - 2|k|^{2H} + |k-1|^{2H}) / 2.
double fgn_autocovariance(int lag, const HurstModel& h);

PathMatrix bm_paths(const TimeGrid& grid, std::size_t n_paths, const RngSpec& rng, int workers = 1);

// B from stream kBrownianStream, B^H from kFractionalStream of the same seed.
PathEnsemble make_ensemble(const TimeGrid& grid, const HurstModel& h, std::size_t n_paths, std::uint64_t seed,
                           FbmMethod method = FbmMethod::Auto, int workers = 1);

enum class Driver { Brownian, Fractional };

// Forward Riemann-Stieltjes sum sum_k xi(t_k) (W_{k+1} - W_k), one value per path.
std::vector<double> wiener_integral_det(const DeterministicFn& xi, const PathEnsemble& ensemble, Driver which);

struct VarBoundReport {
  double lhs = 0.0;         // empirical E[(int |xi| dB^H)^2]
  double lhs_stderr = 0.0;  // standard error of lhs
  double rhs = 0.0;         // C0 int xi^2 ds + C0 T^2
  bool holds = false;       // lhs <= rhs + 3 stderr
};

VarBoundReport check_lemma_var_bound(const DeterministicFn& xi, const PathEnsemble& ensemble);

// eta^eps on every path and node of the ensemble grid, which must equal the
// CoefficientSet grid.
PathMatrix simulate_eta(const CoefficientSet& coeffs, const PathEnsemble& ensemble, double epsilon);

// Single-path variant writing into `out` (size = grid nodes).
void simulate_eta_path(const CoefficientSet& coeffs, const PathEnsemble& ensemble, double epsilon,
                       std::size_t path, std::span<double> out);

struct CovarianceEntry {
  std::size_t i = 0;
  std::size_t j = 0;
  double t_i = 0.0;
  double t_j = 0.0;
  double empirical = 0.0;  // mean of W_i W_j (the mean is known to be 0)
  double analytic = 0.0;
  double stderr_mean = 0.0;
  double z_score = 0.0;
};

// fBm covariance (t^{2H} + s^{2H} - |t-s|^{2H}) / 2.
double fbm_covariance(double t, double s, const HurstModel& h);

// Empirical against analytic covariance for every pair i <= j of `nodes`.
std::vector<CovarianceEntry> covariance_check(const PathMatrix& paths, const TimeGrid& grid, const HurstModel& h,
                                              std::span<const std::size_t> nodes);

// Columns path_id, t, B, BH, eta for the first min(n_paths, max_paths) paths.
void write_paths_csv(const std::filesystem::path& path, const PathEnsemble& ensemble, std::size_t max_paths);

}  // namespace sfrbsde
