#include "sfrbsde/bsde_solver.hpp"

#include <algorithm>
#include <cmath>

#include "sfrbsde/csv.hpp"
#include "sfrbsde/error.hpp"
#include "sfrbsde/numerics.hpp"

namespace sfrbsde {

namespace {

void differentiate(std::span<const double> psi, double dx, std::span<double> out) {
  const std::size_t n = psi.size();
  for (std::size_t i = 1; i + 1 < n; ++i) out[i] = (psi[i + 1] - psi[i - 1]) / (2.0 * dx);
  out[0] = (-3.0 * psi[0] + 4.0 * psi[1] - psi[2]) / (2.0 * dx);
  out[n - 1] = (3.0 * psi[n - 1] - 4.0 * psi[n - 2] + psi[n - 3]) / (2.0 * dx);
}

// Solves rows 1..n-2 of  lower[i] u[i-1] + diag[i] u[i] + upper[i] u[i+1] = rhs[i]
// with u[0], u[n-1] eliminated by quadratic extrapolation, then fills the ends.
void solve_with_closure(std::vector<double> lower, std::vector<double> diag, std::vector<double> upper,
                        std::vector<double> rhs, std::span<double> u) {
  const std::size_t n = u.size();
  const std::size_t first = 1;
  const std::size_t last = n - 2;
  constexpr double kTiny = 1e-300;

  // Left: u0 = 3u1 - 3u2 + u3.
  if (lower[first] != 0.0) {
    const double a = lower[first];
    diag[first] += 3.0 * a;
    upper[first] -= 3.0 * a;
    if (std::abs(upper[first + 1]) > kTiny) {
      const double factor = a / upper[first + 1];
      diag[first] -= factor * lower[first + 1];
      upper[first] -= factor * diag[first + 1];
      rhs[first] -= factor * rhs[first + 1];
    } else {
      // Fall back to linear extrapolation u0 = 2u1 - u2.
      diag[first] -= a;
      upper[first] += 2.0 * a;
    }
    lower[first] = 0.0;
  }
  // Right: u[n-1] = 3u[n-2] - 3u[n-3] + u[n-4].
  if (upper[last] != 0.0) {
    const double c = upper[last];
    diag[last] += 3.0 * c;
    lower[last] -= 3.0 * c;
    if (std::abs(lower[last - 1]) > kTiny) {
      const double factor = c / lower[last - 1];
      diag[last] -= factor * upper[last - 1];
      lower[last] -= factor * diag[last - 1];
      rhs[last] -= factor * rhs[last - 1];
    } else {
      diag[last] -= c;
      lower[last] += 2.0 * c;
    }
    upper[last] = 0.0;
  }

  // Thomas sweep over rows first..last.
  for (std::size_t i = first + 1; i <= last; ++i) {
    if (diag[i - 1] == 0.0) throw NumericError("solve_psi: tridiagonal solver breakdown (zero pivot)");
    const double m = lower[i] / diag[i - 1];
    diag[i] -= m * upper[i - 1];
    rhs[i] -= m * rhs[i - 1];
  }
  if (diag[last] == 0.0) throw NumericError("solve_psi: tridiagonal solver breakdown (zero pivot)");
  u[last] = rhs[last] / diag[last];
  for (std::size_t i = last; i-- > first;) u[i] = (rhs[i] - upper[i] * u[i + 1]) / diag[i];
  u[0] = 3.0 * u[1] - 3.0 * u[2] + u[3];
  u[n - 1] = 3.0 * u[n - 2] - 3.0 * u[n - 3] + u[n - 4];
}

}  // namespace

void PdeConfig::validate() const {
  std::vector<std::string> bad;
  if (!(kappa >= 4.0)) bad.push_back("PdeConfig: kappa must be >= 4");
  if (space_nodes < 64) bad.push_back("PdeConfig: space_nodes must be >= 64");
  if (!(theta >= 0.0 && theta <= 1.0)) bad.push_back("PdeConfig: theta must lie in [0, 1]");
  if (picard_iterations < 1) bad.push_back("PdeConfig: picard_iterations must be >= 1");
  if (!(picard_tolerance > 0.0)) bad.push_back("PdeConfig: picard_tolerance must be > 0");
  if (!bad.empty()) {
    std::string msg;
    for (const auto& s : bad) msg += (msg.empty() ? "" : "; ") + s;
    throw DomainError(msg);
  }
}

PdeCoefficients build_pde_coefficients(const CoefficientSet& coeffs, double epsilon) {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw DomainError("build_pde_coefficients: epsilon must lie in (0, 1]");
  if (!coeffs.nondegenerate()) throw NumericError("build_pde_coefficients: " + coeffs.degeneracy());
  const auto& grid = coeffs.grid();
  const double eps_2h = std::pow(epsilon, 2.0 * coeffs.hurst().value());
  const std::size_t n = grid.nodes();
  PdeCoefficients out;
  out.epsilon = epsilon;
  out.drift.resize(n);
  out.diffusion.resize(n);
  const auto& lam = coeffs.lambda_table();
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0 && !(lam[k] > 0.0))
      throw NumericError("build_pde_coefficients: lambda <= 0 at t = " + format_double(grid.at(k)));
    out.drift[k] = eps_2h * coeffs.drift()(grid.at(k));
    out.diffusion[k] = 0.5 * eps_2h * lam[k];
  }
  const auto& sig = coeffs.sigma_abs_sq_table();
  const auto& drift_int = coeffs.drift_integral_table();
  out.drift_step.resize(n - 1);
  out.diffusion_step.resize(n - 1);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    out.drift_step[k] = eps_2h * (drift_int[k + 1] - drift_int[k]) / grid.dt();
    out.diffusion_step[k] = 0.5 * eps_2h * (sig[k + 1] - sig[k]) / grid.dt();
  }
  return out;
}

double SolutionField::value(std::size_t k, double x) const { return numerics::interp_uniform(psi.row(k), x0, dx, x); }

double SolutionField::gradient(std::size_t k, double x) const {
  return numerics::interp_uniform(psi_x.row(k), x0, dx, x);
}

SolutionField solve_psi(const Generator& gen, const TerminalCondition& terminal, const CoefficientSet& coeffs,
                        double epsilon, const PdeConfig& pde) {
  pde.validate();
  const PdeCoefficients pc = build_pde_coefficients(coeffs, epsilon);
  const auto& grid = coeffs.grid();
  const double eps_2h = std::pow(epsilon, 2.0 * coeffs.hurst().value());

  // Space domain: the range of E[eta_t] widened by kappa standard deviations of eta_T.
  const auto& drift_int = coeffs.drift_integral_table();
  double mean_lo = coeffs.eta0();
  double mean_hi = coeffs.eta0();
  for (double d : drift_int) {
    mean_lo = std::min(mean_lo, coeffs.eta0() + eps_2h * d);
    mean_hi = std::max(mean_hi, coeffs.eta0() + eps_2h * d);
  }
  const double sd = std::sqrt(eps_2h * coeffs.sigma_abs_sq_table().back());
  const std::size_t nx = static_cast<std::size_t>(pde.space_nodes);
  const std::size_t nt = grid.nodes();

  SolutionField field{grid, epsilon, mean_lo - pde.kappa * sd, 1.0, PathMatrix(nt, nx), PathMatrix(nt, nx)};
  field.dx = (mean_hi - mean_lo + 2.0 * pde.kappa * sd) / static_cast<double>(nx - 1);
  const double dx = field.dx;
  const double dt = grid.dt();

  std::vector<double> x(nx);
  for (std::size_t i = 0; i < nx; ++i) x[i] = field.x_at(i);
  std::vector<double> s1(nt), s2(nt);
  for (std::size_t k = 0; k < nt; ++k) {
    s1[k] = coeffs.sigma1()(grid.at(k));
    s2[k] = coeffs.sigma2()(grid.at(k));
  }

  auto forcing = [&](std::size_t k, std::span<const double> psi, std::span<const double> psi_x,
                     std::vector<double>& out) {
    const double t = grid.at(k);
    for (std::size_t i = 0; i < nx; ++i)
      out[i] = eps_2h * gen(t, x[i], psi[i], s1[k] * psi_x[i], s2[k] * psi_x[i]);
  };

  {
    auto row = field.psi.row(nt - 1);
    for (std::size_t i = 0; i < nx; ++i) row[i] = terminal(x[i]);
    differentiate(row, dx, field.psi_x.row(nt - 1));
  }
  std::vector<double> f_next(nx), f_cur(nx), rhs_base(nx), rhs(nx), guess(nx), guess_x(nx), solved(nx);
  std::vector<double> lower(nx), diag(nx), upper(nx);
  forcing(nt - 1, field.psi.row(nt - 1), field.psi_x.row(nt - 1), f_next);

  const double theta = pde.theta;
  for (std::size_t k = nt - 1; k-- > 0;) {
    const double d = pc.diffusion_step[k];
    const double mu = pc.drift_step[k];
    const double a = d / (dx * dx) - mu / (2.0 * dx);
    const double c = d / (dx * dx) + mu / (2.0 * dx);
    const double b = -2.0 * d / (dx * dx);

    const auto next = field.psi.row(k + 1);
    for (std::size_t i = 1; i + 1 < nx; ++i) {
      const double l_next = a * next[i - 1] + b * next[i] + c * next[i + 1];
      rhs_base[i] = next[i] + (1.0 - theta) * dt * (l_next + f_next[i]);
    }

    std::copy(next.begin(), next.end(), guess.begin());
    const auto next_x = field.psi_x.row(k + 1);
    std::copy(next_x.begin(), next_x.end(), guess_x.begin());
    bool converged = false;
    double change = 0.0;
    for (int it = 0; it < pde.picard_iterations; ++it) {
      forcing(k, guess, guess_x, f_cur);
      for (std::size_t i = 1; i + 1 < nx; ++i) {
        lower[i] = -theta * dt * a;
        diag[i] = 1.0 - theta * dt * b;
        upper[i] = -theta * dt * c;
        rhs[i] = rhs_base[i] + theta * dt * f_cur[i];
      }
      solve_with_closure(lower, diag, upper, rhs, solved);
      change = 0.0;
      double scale = 0.0;
      for (std::size_t i = 0; i < nx; ++i) {
        change = std::max(change, std::abs(solved[i] - guess[i]));
        scale = std::max(scale, std::abs(solved[i]));
      }
      std::swap(guess, solved);
      differentiate(guess, dx, guess_x);
      if (!std::isfinite(change)) throw NumericError("solve_psi: non-finite iterate at t = " + format_double(grid.at(k)));
      if (change <= pde.picard_tolerance * (1.0 + scale)) {
        converged = true;
        break;
      }
    }
    if (!converged)
      throw NumericError("solve_psi: Picard iteration did not converge at t = " + format_double(grid.at(k)) +
                         " (last change " + format_double(change) + ")");
    std::copy(guess.begin(), guess.end(), field.psi.row(k).begin());
    std::copy(guess_x.begin(), guess_x.end(), field.psi_x.row(k).begin());
    forcing(k, guess, guess_x, f_next);
  }
  return field;
}

TriplePath extract_triple(const SolutionField& field, const PathMatrix& eta, const CoefficientSet& coeffs) {
  const auto& grid = field.grid;
  const std::size_t nt = grid.nodes();
  if (eta.nodes() != nt) throw DomainError("extract_triple: eta paths do not match the field time grid");
  TriplePath out{PathMatrix(eta.paths(), nt), PathMatrix(eta.paths(), nt), PathMatrix(eta.paths(), nt), 0};
  std::vector<double> s1(nt), s2(nt);
  for (std::size_t k = 0; k < nt; ++k) {
    s1[k] = coeffs.sigma1()(grid.at(k));
    s2[k] = coeffs.sigma2()(grid.at(k));
  }
  for (std::size_t p = 0; p < eta.paths(); ++p) {
    for (std::size_t k = 0; k < nt; ++k) {
      const double x = eta(p, k);
      if (!field.contains(x)) ++out.clamped;
      const double grad = field.gradient(k, x);
      out.y(p, k) = field.value(k, x);
      out.z1(p, k) = s1[k] * grad;
      out.z2(p, k) = s2[k] * grad;
    }
  }
  const double total = static_cast<double>(eta.paths() * nt);
  if (static_cast<double>(out.clamped) > kMaxClampFraction * total)
    throw DomainError("extract_triple: " + std::to_string(out.clamped) +
                      " path-nodes fell outside the space domain; increase kappa");
  return out;
}

RepresentationCheck malliavin_representation_check(const TriplePath& triple, const SolutionField& field,
                                                   const PathMatrix& eta, const CoefficientSet& coeffs,
                                                   double t0) {
  const auto& grid = field.grid;
  RepresentationCheck out;
  std::vector<std::size_t> nodes;
  for (std::size_t k = 0; k < grid.nodes(); ++k)
    if (grid.at(k) >= t0 && grid.at(k) > 0.0) nodes.push_back(k);
  for (std::size_t k : nodes) {
    if (coeffs.sigma2()(grid.at(k)) == 0.0) {
      out.status = "not applicable: sigma2 vanishes on the checked range";
      return out;
    }
  }
  out.applicable = true;
  const auto& hat = coeffs.sigma2_hat_table();
  for (std::size_t k : nodes) {
    const double ratio = hat[k] / coeffs.sigma2()(grid.at(k));
    for (std::size_t p = 0; p < eta.paths(); ++p) {
      const double rho_derivative = hat[k] * field.gradient(k, eta(p, k));
      out.max_deviation = std::max(out.max_deviation, std::abs(rho_derivative - ratio * triple.z2(p, k)));
    }
  }
  out.status = "checked";
  return out;
}

ResidualReport residual_mean_check(const TriplePath& triple, const SolutionField& field, const Generator& gen,
                                   const TerminalCondition& terminal, const CoefficientSet& coeffs,
                                   const PathMatrix& eta, double t_probe) {
  const auto& grid = field.grid;
  const std::size_t n = grid.nodes() - 1;
  const auto kp = static_cast<std::size_t>(
      std::clamp(std::lround(t_probe / grid.dt()), 0L, static_cast<long>(n)));
  const double eps_2h = std::pow(field.epsilon, 2.0 * coeffs.hurst().value());
  const double dt = grid.dt();

  std::vector<double> diff(eta.paths());
  for (std::size_t p = 0; p < eta.paths(); ++p) {
    double integral = 0.0;
    for (std::size_t k = kp; k < n; ++k) {
      const double fa = gen(grid.at(k), eta(p, k), triple.y(p, k), triple.z1(p, k), triple.z2(p, k));
      const double fb = gen(grid.at(k + 1), eta(p, k + 1), triple.y(p, k + 1), triple.z1(p, k + 1),
                            triple.z2(p, k + 1));
      integral += 0.5 * dt * (fa + fb);
    }
    diff[p] = triple.y(p, kp) - terminal(eta(p, n)) - eps_2h * integral;
  }
  const auto stats = numerics::summarize(diff);
  ResidualReport r;
  r.t_probe = grid.at(kp);
  r.residual = std::abs(stats.mean);
  r.stderr_mean = stats.stderr_mean;
  r.allowance = 3.0 * stats.stderr_mean + (dt + field.dx * field.dx);
  r.passes = r.residual <= r.allowance;
  return r;
}

void write_field_csv(const std::filesystem::path& path, const SolutionField& field, std::size_t max_rows) {
  const std::size_t nt = field.grid.nodes();
  const std::size_t nx = field.space_nodes();
  std::size_t stride = 1;
  while (((nt + stride - 1) / stride) * ((nx + stride - 1) / stride) > max_rows) ++stride;
  CsvWriter csv(path, {"t", "x", "psi", "psi_x"});
  for (std::size_t k = 0; k < nt; k += stride)
    for (std::size_t i = 0; i < nx; i += stride) {
      csv.cell(field.grid.at(k)).cell(field.x_at(i)).cell(field.psi(k, i)).cell(field.psi_x(k, i));
      csv.end_row();
    }
}

void write_triple_summary_csv(const std::filesystem::path& path, const TriplePath& triple, const TimeGrid& grid) {
  CsvWriter csv(path, {"t", "mean_Y", "var_Y", "mean_Z1", "mean_Z2"});
  for (std::size_t k = 0; k < grid.nodes(); ++k) {
    const auto y = numerics::summarize(triple.y.column(k));
    const auto z1 = numerics::summarize(triple.z1.column(k));
    const auto z2 = numerics::summarize(triple.z2.column(k));
    csv.cell(grid.at(k)).cell(y.mean).cell(y.variance).cell(z1.mean).cell(z2.mean);
    csv.end_row();
  }
}

}  // namespace sfrbsde
