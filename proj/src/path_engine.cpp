#include "sfrbsde/path_engine.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>
#include <algorithm>
#include <cmath>
#include <complex>

#include "sfrbsde/csv.hpp"
#include "sfrbsde/error.hpp"
#include "sfrbsde/parallel.hpp"

namespace sfrbsde {

namespace {

constexpr std::size_t kPathBlock = 256;
constexpr double kJitter = 1e-12;
constexpr double kNegativeEigenTolerance = -1e-10;

template <class PerPath>
void for_each_path_block(std::size_t n_paths, int workers, PerPath&& per_path) {
  const std::size_t blocks = (n_paths + kPathBlock - 1) / kPathBlock;
  parallel_for(blocks, workers, [&](std::size_t b) {
    const std::size_t lo = b * kPathBlock;
    const std::size_t hi = std::min(n_paths, lo + kPathBlock);
    per_path(lo, hi);
  });
}

}  // namespace

std::mt19937_64 RngSpec::engine_for_path(std::uint64_t path) const {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32)};
  return std::mt19937_64(seq);
}

std::vector<double> PathMatrix::column(std::size_t k) const {
  std::vector<double> out(paths_);
  for (std::size_t p = 0; p < paths_; ++p) out[p] = data_[p * nodes_ + k];
  return out;
}

PathMatrix fbm_cholesky(const TimeGrid& grid, const HurstModel& h, std::size_t n_paths, const RngSpec& rng,
                        int workers) {
  const int n = grid.steps();
  const double two_h = 2.0 * h.value();
  Eigen::MatrixXd gamma(n, n);
  for (int j = 0; j < n; ++j) {
    const double tj = grid.at(j + 1);
    for (int k = 0; k < n; ++k) {
      const double tk = grid.at(k + 1);
      gamma(j, k) = 0.5 * (std::pow(tj, two_h) + std::pow(tk, two_h) - std::pow(std::abs(tj - tk), two_h));
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(gamma);
  if (llt.info() != Eigen::Success) {
    gamma.diagonal().array() += kJitter;
    llt.compute(gamma);
    if (llt.info() != Eigen::Success)
      throw NumericError("fbm_cholesky: covariance is not positive definite even after 1e-12 jitter");
  }
  const Eigen::MatrixXd lower = llt.matrixL();

  // One triangular product per fixed block of paths; the partition does not
  // depend on the worker count, so neither do the samples.
  PathMatrix out(n_paths, grid.nodes());
  for_each_path_block(n_paths, workers, [&](std::size_t lo, std::size_t hi) {
    const auto cols = static_cast<Eigen::Index>(hi - lo);
    Eigen::MatrixXd z(n, cols);
    for (std::size_t p = lo; p < hi; ++p) {
      auto engine = rng.engine_for_path(p);
      std::normal_distribution<double> normal;
      for (int k = 0; k < n; ++k) z(k, static_cast<Eigen::Index>(p - lo)) = normal(engine);
    }
    const Eigen::MatrixXd x = lower.triangularView<Eigen::Lower>() * z;
    for (std::size_t p = lo; p < hi; ++p) {
      auto row = out.row(p);
      row[0] = 0.0;
      for (int j = 0; j < n; ++j) row[j + 1] = x(j, static_cast<Eigen::Index>(p - lo));
    }
  });
  return out;
}

double fgn_autocovariance(int lag, const HurstModel& h) {
  const double two_h = 2.0 * h.value();
  const double k = std::abs(static_cast<double>(lag));
  return 0.5 * (std::pow(k + 1.0, two_h) - 2.0 * std::pow(k, two_h) + std::pow(std::abs(k - 1.0), two_h));
}

std::vector<double> circulant_eigenvalues(int n_steps, const HurstModel& h) {
  const int m = 2 * n_steps;
  std::vector<std::complex<double>> row(m);
  for (int k = 0; k <= n_steps; ++k) row[k] = fgn_autocovariance(k, h);
  for (int k = n_steps + 1; k < m; ++k) row[k] = fgn_autocovariance(m - k, h);
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spectrum;
  fft.fwd(spectrum, row);
  std::vector<double> out(m);
  for (int k = 0; k < m; ++k) out[k] = spectrum[k].real();
  return out;
}

PathMatrix fbm_circulant(const TimeGrid& grid, const HurstModel& h, std::size_t n_paths, const RngSpec& rng,
                         int workers) {
  const int n = grid.steps();
  const int m = 2 * n;
  auto eigen = circulant_eigenvalues(n, h);
  std::vector<double> scale(m);
  for (int k = 0; k < m; ++k) {
    if (eigen[k] < kNegativeEigenTolerance)
      throw NumericError("fbm_circulant: negative circulant eigenvalue " + format_double(eigen[k]));
    scale[k] = std::sqrt(std::max(eigen[k], 0.0) / m);
  }
  const double step_scale = std::pow(grid.dt(), h.value());

  // Real and imaginary parts of one transform are independent draws with the
  // target covariance; paths 2q and 2q+1 share the engine of pair q.
  PathMatrix out(n_paths, grid.nodes());
  for_each_path_block(n_paths, workers, [&](std::size_t lo, std::size_t hi) {
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> weights(m);
    std::vector<std::complex<double>> sample;
    for (std::size_t p = lo; p < hi; p += 2) {
      auto engine = rng.engine_for_path(p / 2);
      std::normal_distribution<double> normal;
      for (int k = 0; k < m; ++k) {
        const double re = normal(engine);
        const double im = normal(engine);
        weights[k] = scale[k] * std::complex<double>(re, im);
      }
      fft.fwd(sample, weights);
      for (std::size_t q = p; q < std::min(hi, p + 2); ++q) {
        auto row = out.row(q);
        row[0] = 0.0;
        double acc = 0.0;
        for (int j = 0; j < n; ++j) {
          acc += step_scale * (q == p ? sample[j].real() : sample[j].imag());
          row[j + 1] = acc;
        }
      }
    }
  });
  return out;
}

PathMatrix bm_paths(const TimeGrid& grid, std::size_t n_paths, const RngSpec& rng, int workers) {
  const int n = grid.steps();
  const double sd = std::sqrt(grid.dt());
  PathMatrix out(n_paths, grid.nodes());
  for_each_path_block(n_paths, workers, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      auto engine = rng.engine_for_path(p);
      std::normal_distribution<double> normal;
      auto row = out.row(p);
      row[0] = 0.0;
      for (int k = 0; k < n; ++k) row[k + 1] = row[k] + sd * normal(engine);
    }
  });
  return out;
}

PathEnsemble make_ensemble(const TimeGrid& grid, const HurstModel& h, std::size_t n_paths, std::uint64_t seed,
                           FbmMethod method, int workers) {
  if (n_paths == 0) throw DomainError("make_ensemble: n_paths must be >= 1");
  PathEnsemble ens{grid, h, n_paths, {}, {}, {}, 1.0};
  ens.brownian = bm_paths(grid, n_paths, RngSpec{seed, kBrownianStream}, workers);
  const RngSpec frac{seed, kFractionalStream};
  const bool circulant =
      method == FbmMethod::Circulant || (method == FbmMethod::Auto && grid.steps() > kCirculantThreshold);
  ens.fractional = circulant ? fbm_circulant(grid, h, n_paths, frac, workers)
                             : fbm_cholesky(grid, h, n_paths, frac, workers);
  return ens;
}

std::vector<double> wiener_integral_det(const DeterministicFn& xi, const PathEnsemble& ensemble, Driver which) {
  const auto& grid = ensemble.grid;
  const PathMatrix& w = which == Driver::Brownian ? ensemble.brownian : ensemble.fractional;
  const int n = grid.steps();
  std::vector<double> values(n);
  for (int k = 0; k < n; ++k) values[k] = xi(grid.at(k));
  std::vector<double> out(ensemble.n_paths);
  for (std::size_t p = 0; p < ensemble.n_paths; ++p) {
    const auto row = w.row(p);
    double acc = 0.0;
    for (int k = 0; k < n; ++k) acc += values[k] * (row[k + 1] - row[k]);
    out[p] = acc;
  }
  return out;
}

VarBoundReport check_lemma_var_bound(const DeterministicFn& xi, const PathEnsemble& ensemble) {
  const DeterministicFn abs_xi([&xi](double t) { return std::abs(xi(t)); }, "|" + xi.label() + "|");
  auto integral = wiener_integral_det(abs_xi, ensemble, Driver::Fractional);
  for (double& v : integral) v *= v;
  const auto stats = numerics::summarize(integral);

  const double horizon = ensemble.grid.horizon();
  const auto rule = numerics::composite_gauss(numerics::uniform_breaks(0.0, horizon, 64));
  const double xi_sq = rule.integrate([&](double s) { return xi(s) * xi(s); });
  const double c0 = c0_const(ensemble.hurst, horizon);

  VarBoundReport r;
  r.lhs = stats.mean;
  r.lhs_stderr = stats.stderr_mean;
  r.rhs = c0 * xi_sq + c0 * horizon * horizon;
  r.holds = r.lhs <= r.rhs + 3.0 * r.lhs_stderr;
  return r;
}

void simulate_eta_path(const CoefficientSet& coeffs, const PathEnsemble& ensemble, double epsilon,
                       std::size_t path, std::span<double> out) {
  const auto& grid = ensemble.grid;
  if (!(grid == coeffs.grid())) throw DomainError("simulate_eta: ensemble and coefficient grids differ");
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw DomainError("simulate_eta: epsilon must lie in (0, 1]");
  const double h = ensemble.hurst.value();
  const double eps_h = std::pow(epsilon, h);
  const double eps_2h = eps_h * eps_h;
  const auto b = ensemble.brownian.row(path);
  const auto bh = ensemble.fractional.row(path);
  const auto& drift = coeffs.drift_integral_table();
  const auto& s1 = coeffs.sigma1();
  const auto& s2 = coeffs.sigma2();
  double noise = 0.0;
  out[0] = coeffs.eta0();
  for (int k = 0; k < grid.steps(); ++k) {
    const double t = grid.at(k);
    noise += s1(t) * (b[k + 1] - b[k]) + s2(t) * (bh[k + 1] - bh[k]);
    out[k + 1] = coeffs.eta0() + eps_2h * drift[k + 1] + eps_h * noise;
  }
}

PathMatrix simulate_eta(const CoefficientSet& coeffs, const PathEnsemble& ensemble, double epsilon) {
  PathMatrix out(ensemble.n_paths, ensemble.grid.nodes());
  for (std::size_t p = 0; p < ensemble.n_paths; ++p) simulate_eta_path(coeffs, ensemble, epsilon, p, out.row(p));
  return out;
}

double fbm_covariance(double t, double s, const HurstModel& h) {
  const double two_h = 2.0 * h.value();
  return 0.5 * (std::pow(t, two_h) + std::pow(s, two_h) - std::pow(std::abs(t - s), two_h));
}

std::vector<CovarianceEntry> covariance_check(const PathMatrix& paths, const TimeGrid& grid, const HurstModel& h,
                                              std::span<const std::size_t> nodes) {
  std::vector<CovarianceEntry> out;
  std::vector<double> products(paths.paths());
  for (std::size_t a = 0; a < nodes.size(); ++a) {
    for (std::size_t b = a; b < nodes.size(); ++b) {
      const std::size_t i = nodes[a];
      const std::size_t j = nodes[b];
      if (i >= grid.nodes() || j >= grid.nodes()) throw DomainError("covariance_check: node index out of range");
      for (std::size_t p = 0; p < paths.paths(); ++p) products[p] = paths(p, i) * paths(p, j);
      const auto stats = numerics::summarize(products);
      CovarianceEntry e;
      e.i = i;
      e.j = j;
      e.t_i = grid.at(i);
      e.t_j = grid.at(j);
      e.empirical = stats.mean;
      e.analytic = fbm_covariance(e.t_i, e.t_j, h);
      e.stderr_mean = stats.stderr_mean;
      e.z_score = e.stderr_mean > 0.0 ? (e.empirical - e.analytic) / e.stderr_mean : 0.0;
      out.push_back(e);
    }
  }
  return out;
}

void write_paths_csv(const std::filesystem::path& path, const PathEnsemble& ensemble, std::size_t max_paths) {
  CsvWriter csv(path, {"path_id", "t", "B", "BH", "eta"});
  const std::size_t n = std::min(ensemble.n_paths, max_paths);
  const bool has_eta = !ensemble.eta.empty();
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t k = 0; k < ensemble.grid.nodes(); ++k) {
      csv.cell(p).cell(ensemble.grid.at(k)).cell(ensemble.brownian(p, k)).cell(ensemble.fractional(p, k));
      csv.cell(has_eta ? ensemble.eta(p, k) : std::nan(""));
      csv.end_row();
    }
  }
}

}  // namespace sfrbsde
