#include "sfrbsde/averaging_lab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "sfrbsde/csv.hpp"
#include "sfrbsde/error.hpp"
#include "sfrbsde/numerics.hpp"
#include "sfrbsde/parallel.hpp"

namespace sfrbsde {

namespace {

constexpr std::size_t kPathBlock = 256;
constexpr std::uint64_t kPointStream = 0;
constexpr std::uint64_t kLipschitzStream = 1;
constexpr int kWindowPanels = 32;
constexpr int kAlphaBisectionSteps = 400;
constexpr double kAlphaResidual = 1e-12;
constexpr double kDeclaredSlack = 1e-9;

double uniform(std::mt19937_64& engine, const Interval& box) {
  return std::uniform_real_distribution<double>(box.lo, box.hi)(engine);
}

// Rethrows the active library error with the epsilon it belongs to.
[[noreturn]] void rethrow_for_epsilon(double eps) {
  const std::string prefix = "epsilon " + format_double(eps) + ": ";
  try {
    throw;
  } catch (const InfeasibleError& e) {
    throw InfeasibleError(prefix + e.what(), e.max_feasible_epsilon());
  } catch (const QuadratureError& e) {
    throw QuadratureError(prefix + e.what(), e.coarse(), e.fine());
  } catch (const NumericError& e) {
    throw NumericError(prefix + e.what());
  } catch (const DomainError& e) {
    throw DomainError(prefix + e.what());
  } catch (const ContractError& e) {
    throw ContractError(prefix + e.what());
  }
}

double binomial_stderr(double p, std::size_t n) { return std::sqrt(std::max(0.0, p * (1.0 - p)) / n); }

}  // namespace

Generator AveragedGenerator::as_generator(std::optional<double> lipschitz) const {
  Generator g;
  const Rule r = rule;
  g.rule = [r](double, double x, double y, double z1, double z2) { return r(x, y, z1, z2); };
  g.average = r;
  g.lipschitz = lipschitz;
  g.time_independent = true;
  g.label = label;
  return g;
}

const char* to_string(AveragedGenerator::Provenance p) {
  return p == AveragedGenerator::Provenance::Analytic ? "analytic" : "quadrature";
}

AveragedGenerator build_fbar(const Generator& gen, double horizon, const QuadratureSpec& q) {
  q.validate();
  if (!(horizon > 0.0)) throw DomainError("build_fbar: horizon must be > 0");
  AveragedGenerator out;
  out.label = "average of " + gen.label;
  if (gen.average) {
    out.rule = gen.average;
    out.provenance = AveragedGenerator::Provenance::Analytic;
    return out;
  }
  if (gen.time_independent) {
    const Generator::Rule f = gen.rule;
    out.rule = [f](double x, double y, double z1, double z2) { return f(0.0, x, y, z1, z2); };
    out.provenance = AveragedGenerator::Provenance::Analytic;
    return out;
  }

  const int panels = std::max(8, q.panels / 8);
  const auto fine = numerics::composite_gauss(numerics::uniform_breaks(0.0, horizon, panels));
  const auto coarse = numerics::composite_gauss(numerics::uniform_breaks(0.0, horizon, panels / 2));
  const Generator::Rule f = gen.rule;
  auto average_with = [f, horizon](const numerics::QuadratureRule& rule, double x, double y, double z1, double z2) {
    return rule.integrate([&](double s) { return f(s, x, y, z1, z2); }) / horizon;
  };
  const DomainSampler probe;
  for (std::size_t i = 0; i < 64; ++i) {
    const auto p = probe.point(i);
    const double a = average_with(fine, p.x, p.y, p.z1, p.z2);
    const double b = average_with(coarse, p.x, p.y, p.z1, p.z2);
    if (!std::isfinite(a) || std::abs(a - b) > q.tolerance * std::max(1.0, std::abs(a)))
      throw QuadratureError("build_fbar: time average did not converge at a probe point (" +
                                format_double(b) + " vs " + format_double(a) + ")",
                            b, a);
  }
  out.rule = [fine, average_with](double x, double y, double z1, double z2) {
    return average_with(fine, x, y, z1, z2);
  };
  out.provenance = AveragedGenerator::Provenance::Quadrature;
  return out;
}

void DomainSampler::validate() const {
  for (const Interval* b : {&x, &y, &z1, &z2})
    if (!(b->lo <= b->hi)) throw DomainError("DomainSampler: interval bounds must satisfy lo <= hi");
  if (samples == 0) throw DomainError("DomainSampler: samples must be >= 1");
}

SamplePoint DomainSampler::point(std::size_t i) const {
  auto engine = RngSpec{seed, kPointStream}.engine_for_path(i);
  SamplePoint p;
  p.x = uniform(engine, x);
  p.y = uniform(engine, y);
  p.z1 = uniform(engine, z1);
  p.z2 = uniform(engine, z2);
  return p;
}

std::vector<std::pair<double, double>> default_windows(double horizon, int divisions) {
  if (divisions < 1) throw DomainError("default_windows: divisions must be >= 1");
  std::vector<std::pair<double, double>> out;
  for (int i = 0; i < divisions; ++i)
    for (int j = i + 1; j <= divisions; ++j)
      out.emplace_back(horizon * i / divisions, j == divisions ? horizon : horizon * j / divisions);
  return out;
}

PhiEstimate estimate_phi(const Generator& gen, const AveragedGenerator& fbar, const DomainSampler& sampler,
                         std::span<const std::pair<double, double>> windows) {
  sampler.validate();
  PhiEstimate best;
  std::vector<SamplePoint> points(sampler.samples);
  for (std::size_t i = 0; i < points.size(); ++i) points[i] = sampler.point(i);
  for (const auto& [t, t1] : windows) {
    if (!(t1 > t)) throw DomainError("estimate_phi: each window needs t < T1");
    const auto rule = numerics::composite_gauss(numerics::uniform_breaks(t, t1, kWindowPanels));
    for (const auto& p : points) {
      const double fb = fbar(p.x, p.y, p.z1, p.z2);
      const double mean_sq = rule.integrate([&](double s) {
                               const double d = gen(s, p.x, p.y, p.z1, p.z2) - fb;
                               return d * d;
                             }) /
                             (t1 - t);
      const double ratio = mean_sq / (1.0 + p.y * p.y + p.z1 * p.z1 + p.z2 * p.z2);
      if (ratio > best.bound) {
        best.bound = ratio;
        best.t = t;
        best.t1 = t1;
        best.at = p;
      }
    }
  }
  return best;
}

LipschitzEstimate estimate_lipschitz(const Generator& gen, const DomainSampler& sampler, double horizon) {
  sampler.validate();
  LipschitzEstimate out;
  const RngSpec rng{sampler.seed, kLipschitzStream};
  for (std::size_t i = 0; i < sampler.samples; ++i) {
    auto engine = rng.engine_for_path(i);
    const double t = uniform(engine, Interval{0.0, horizon});
    const double x = uniform(engine, sampler.x);
    const double y = uniform(engine, sampler.y), y2 = uniform(engine, sampler.y);
    const double a = uniform(engine, sampler.z1), a2 = uniform(engine, sampler.z1);
    const double b = uniform(engine, sampler.z2), b2 = uniform(engine, sampler.z2);
    const double dist = (y - y2) * (y - y2) + (a - a2) * (a - a2) + (b - b2) * (b - b2);
    if (dist == 0.0) continue;
    const double df = gen(t, x, y, a, b) - gen(t, x, y2, a2, b2);
    out.sampled_max = std::max(out.sampled_max, df * df / dist);
  }
  if (gen.lipschitz) {
    const double declared = *gen.lipschitz;
    if (out.sampled_max > declared * (1.0 + kDeclaredSlack))
      throw ContractError("estimate_lipschitz: declared L = " + format_double(declared) +
                          " is exceeded by a sampled quotient " + format_double(out.sampled_max));
    out.value = declared;
    out.declared = true;
  } else {
    out.value = out.sampled_max;
  }
  return out;
}

double max_feasible_epsilon(double c1, const HurstModel& h) {
  return std::pow(std::min(1.0, c1), 1.0 / h.value());
}

double solve_alpha0(double lipschitz, double c1, double epsilon, const HurstModel& h) {
  if (!(lipschitz > 0.0)) throw DomainError("solve_alpha0: L must be > 0");
  if (!(c1 > 0.0)) throw DomainError("solve_alpha0: C1 must be > 0");
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw DomainError("solve_alpha0: epsilon must lie in (0, 1]");
  const double e_h = std::pow(epsilon, h.value());
  const double e_2h = e_h * e_h;
  const double m = std::min(1.0, c1);
  if (e_h >= m)
    throw InfeasibleError("solve_alpha0: no admissible root for epsilon = " + format_double(epsilon) +
                              " (requires epsilon < " + format_double(max_feasible_epsilon(c1, h)) + ")",
                          max_feasible_epsilon(c1, h));

  auto residual = [&](double a) {
    return (e_h / a) * std::min(a - lipschitz * e_h, a * c1 - lipschitz * e_h) - e_2h;
  };
  double lo = lipschitz * e_h / m * (1.0 + 1e-12);
  double hi = 2.0 * lo;
  while (residual(hi) < 0.0) {
    hi *= 2.0;
    if (!std::isfinite(hi)) throw NumericError("solve_alpha0: failed to bracket the root");
  }
  for (int i = 0; i < kAlphaBisectionSteps && hi - lo > 0.0; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (residual(mid) < 0.0 ? lo : hi) = mid;
  }
  const double root = std::abs(residual(lo)) <= std::abs(residual(hi)) ? lo : hi;
  if (std::abs(residual(root)) > kAlphaResidual)
    throw NumericError("solve_alpha0: residual " + format_double(residual(root)) + " above 1e-12");
  return root;
}

double AveragingConstants::rate_bound() const { return c4 * std::pow(epsilon, 1.0 - 2.0 * hurst * beta); }

AveragingConstants compute_constants(const ConstantsInput& in, const HurstModel& h) {
  const double hv = h.value();
  if (!(in.beta >= 0.0 && in.beta < 1.0 && in.beta < 1.0 / (2.0 * hv)))
    throw DomainError("compute_constants: beta must lie in [0, 1) with beta < 1/(2H)");
  const double span = in.horizon - in.u;
  const double moments = 1.0 + in.moments.y_sq + in.moments.z1_sq + in.moments.z2_sq;
  const double under_root = span * in.phi_bound * moments;
  if (span < 0.0 || in.phi_bound < 0.0 || under_root < 0.0 || !std::isfinite(under_root))
    throw DomainError("compute_constants: negative quantity under the square root of C2");

  AveragingConstants c;
  c.lipschitz = in.lipschitz;
  c.c0 = c0_const(h, in.horizon);
  c.c1 = in.c1;
  c.phi_bound = in.phi_bound;
  c.beta = in.beta;
  c.t0 = in.t0;
  c.u = in.u;
  c.epsilon = in.epsilon;
  c.hurst = hv;
  c.alpha0 = solve_alpha0(in.lipschitz, in.c1, in.epsilon, h);
  c.c2 = std::sqrt(under_root);
  c.c3 = 4.0 * in.phi_bound * moments;
  c.l1 = c.alpha0 + in.lipschitz / c.alpha0 + c.c2;

  const double e_2h = std::pow(in.epsilon, 2.0 * hv);
  const double e_4h = e_2h * e_2h;
  const double ht = hv * std::pow(in.horizon, 2.0 * hv - 1.0);
  const double prefactor = (4.0 * span * in.lipschitz * e_2h + 2.0 * ht) * c.c2 * span +
                           c.c3 * span * span * e_2h + 4.0 * c.c0 * in.horizon * in.horizon;
  const double exponent = span * (4.0 * span * in.lipschitz * e_4h * (c.l1 + 1.0) + 2.0 * c.l1 * e_2h * ht);
  c.c4 = prefactor * std::pow(in.epsilon, 2.0 * hv * (1.0 + in.beta) - 1.0) * std::exp(exponent);
  return c;
}

void SweepConfig::validate(const HurstModel& h) const {
  std::vector<std::string> bad;
  if (eps_list.empty()) bad.push_back("eps_list must not be empty");
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    if (!(eps_list[i] > 0.0 && eps_list[i] <= 1.0)) bad.push_back("eps values must lie in (0, 1]");
    if (i > 0 && !(eps_list[i] < eps_list[i - 1])) bad.push_back("eps_list must be strictly decreasing");
  }
  if (!(beta >= 0.0 && beta < 1.0 && beta < 1.0 / (2.0 * h.value())))
    bad.push_back("beta must lie in [0, 1) with beta < 1/(2H)");
  if (!(delta1 > 0.0)) bad.push_back("delta1 must be > 0");
  if (!(t0 > 0.0)) bad.push_back("t0 must be > 0");
  if (n_paths < 2) bad.push_back("n_paths must be >= 2");
  if (phi_divisions < 1) bad.push_back("phi_divisions must be >= 1");
  if (!bad.empty()) throw ConfigError(bad);
  pde.validate();
  sampler.validate();
}

namespace {

// Sums over one block of paths for one epsilon.
struct BlockSums {
  std::vector<double> dy2;
  std::vector<double> dy4;
  std::vector<double> ybar2;
  std::vector<double> z1bar2;
  std::vector<double> z2bar2;
  std::size_t clamped = 0;
};

}  // namespace

SweepReport run_sweep(const Generator& original, const CoefficientSet& coeffs, const TerminalCondition& terminal,
                      const SweepConfig& config) {
  const HurstModel& h = coeffs.hurst();
  config.validate(h);
  const auto& grid = coeffs.grid();
  const double horizon = grid.horizon();
  const std::size_t nt = grid.nodes();
  const std::size_t n_paths = config.n_paths;

  SweepReport report;
  report.n_paths = n_paths;
  report.horizon = horizon;
  report.hurst = h.value();
  report.delta1 = config.delta1;
  report.t0 = config.t0;
  report.notes.push_back("error window [T eps^(1-beta), T]; the proof's alternative window K eps^(-2H beta) is not used");
  report.notes.push_back("C2, C3, C4 are recomputed per epsilon with u = t_lo(eps)");

  const AveragedGenerator fbar = build_fbar(original, horizon, coeffs.quadrature());
  report.fbar_provenance = to_string(fbar.provenance);
  const Generator averaged = fbar.as_generator(original.lipschitz);
  const LipschitzEstimate lip = estimate_lipschitz(original, config.sampler, horizon);
  report.lipschitz = lip.value;
  report.lipschitz_declared = lip.declared;
  const auto windows = default_windows(horizon, config.phi_divisions);
  report.phi_bound = estimate_phi(original, fbar, config.sampler, windows).bound;
  report.c1 = c1_lower_bound(coeffs, config.t0);

  const PathEnsemble ensemble = make_ensemble(grid, h, n_paths, config.seed, config.fbm_method, config.workers);

  std::vector<double> s1(nt), s2(nt);
  for (std::size_t k = 0; k < nt; ++k) {
    s1[k] = coeffs.sigma1()(grid.at(k));
    s2[k] = coeffs.sigma2()(grid.at(k));
  }

  const std::size_t blocks = (n_paths + kPathBlock - 1) / kPathBlock;
  for (double eps : config.eps_list) {
    try {
      SweepRow row;
      row.epsilon = eps;
      row.n_paths = n_paths;
      row.t_lo = horizon * std::pow(eps, 1.0 - config.beta);
      std::size_t k_lo = 0;
      while (k_lo < nt - 1 && grid.at(k_lo) < row.t_lo * (1.0 - 1e-12)) ++k_lo;

      std::vector<std::optional<SolutionField>> fields(2);
      parallel_for(2, config.workers, [&](std::size_t i) {
        fields[i] = solve_psi(i == 0 ? original : averaged, terminal, coeffs, eps, config.pde);
      });
      const SolutionField& fo = *fields[0];
      const SolutionField& fa = *fields[1];

      std::vector<double> z_int(n_paths), y_int(n_paths), sup_abs(n_paths), sup_sq(n_paths);
      std::vector<BlockSums> partial(blocks);
      parallel_for(blocks, config.workers, [&](std::size_t b) {
        BlockSums& acc = partial[b];
        acc.dy2.assign(nt, 0.0);
        acc.dy4.assign(nt, 0.0);
        acc.ybar2.assign(nt, 0.0);
        acc.z1bar2.assign(nt, 0.0);
        acc.z2bar2.assign(nt, 0.0);
        std::vector<double> eta(nt), dy2(nt), dz2(nt);
        const std::size_t lo = b * kPathBlock;
        const std::size_t hi = std::min(n_paths, lo + kPathBlock);
        for (std::size_t p = lo; p < hi; ++p) {
          simulate_eta_path(coeffs, ensemble, eps, p, eta);
          double worst = 0.0;
          for (std::size_t k = k_lo; k < nt; ++k) {
            const double x = eta[k];
            if (!fo.contains(x)) ++acc.clamped;
            const double y = fo.value(k, x);
            const double ybar = fa.value(k, x);
            const double gbar = fa.gradient(k, x);
            const double dg = fo.gradient(k, x) - gbar;
            const double dy = y - ybar;
            dy2[k] = dy * dy;
            dz2[k] = (s1[k] * s1[k] + s2[k] * s2[k]) * dg * dg;
            worst = std::max(worst, std::abs(dy));
            acc.dy2[k] += dy2[k];
            acc.dy4[k] += dy2[k] * dy2[k];
            acc.ybar2[k] += ybar * ybar;
            acc.z1bar2[k] += s1[k] * s1[k] * gbar * gbar;
            acc.z2bar2[k] += s2[k] * s2[k] * gbar * gbar;
          }
          double zi = 0.0, yi = 0.0;
          for (std::size_t k = k_lo; k + 1 < nt; ++k) {
            zi += 0.5 * grid.dt() * (dz2[k] + dz2[k + 1]);
            yi += 0.5 * grid.dt() * (dy2[k] + dy2[k + 1]);
          }
          z_int[p] = zi;
          y_int[p] = yi;
          sup_abs[p] = worst;
          sup_sq[p] = worst * worst;
        }
      });

      BlockSums total;
      total.dy2.assign(nt, 0.0);
      total.dy4.assign(nt, 0.0);
      total.ybar2.assign(nt, 0.0);
      total.z1bar2.assign(nt, 0.0);
      total.z2bar2.assign(nt, 0.0);
      for (const auto& part : partial) {
        for (std::size_t k = 0; k < nt; ++k) {
          total.dy2[k] += part.dy2[k];
          total.dy4[k] += part.dy4[k];
          total.ybar2[k] += part.ybar2[k];
          total.z1bar2[k] += part.z1bar2[k];
          total.z2bar2[k] += part.z2bar2[k];
        }
        total.clamped += part.clamped;
      }
      row.clamped = total.clamped;
      const double window_nodes = static_cast<double>(n_paths * (nt - k_lo));
      if (static_cast<double>(total.clamped) > kMaxClampFraction * window_nodes)
        throw DomainError("run_sweep: " + std::to_string(total.clamped) +
                          " path-nodes fell outside the space domain; increase kappa");

      const double n = static_cast<double>(n_paths);
      row.sup_mse = -1.0;
      for (std::size_t k = k_lo; k < nt; ++k) {
        const double mean = total.dy2[k] / n;
        if (mean > row.sup_mse) {
          row.sup_mse = mean;
          row.sup_mse_time = grid.at(k);
          const double var = std::max(0.0, (total.dy4[k] - n * mean * mean) / (n - 1.0));
          row.sup_mse_stderr = std::sqrt(var / n);
        }
        row.moments.y_sq = std::max(row.moments.y_sq, total.ybar2[k] / n);
        row.moments.z1_sq = std::max(row.moments.z1_sq, total.z1bar2[k] / n);
        row.moments.z2_sq = std::max(row.moments.z2_sq, total.z2bar2[k] / n);
      }
      const auto zs = numerics::summarize(z_int);
      const auto ys = numerics::summarize(y_int);
      row.z_err_integral = zs.mean;
      row.z_err_stderr = zs.stderr_mean;
      row.y_err_integral = ys.mean;
      row.y_err_stderr = ys.stderr_mean;
      double cov = 0.0;
      for (std::size_t p = 0; p < n_paths; ++p) cov += (z_int[p] - zs.mean) * (y_int[p] - ys.mean);
      row.zy_covariance = cov / (n - 1.0);
      row.mean_sup_sq = numerics::summarize(sup_sq).mean;

      ConstantsInput in;
      in.lipschitz = report.lipschitz;
      in.c1 = report.c1;
      in.phi_bound = report.phi_bound;
      in.u = row.t_lo;
      in.horizon = horizon;
      in.epsilon = eps;
      in.beta = config.beta;
      in.t0 = config.t0;
      in.moments = row.moments;
      row.constants = compute_constants(in, h);

      report.rows.push_back(row);
      report.sup_abs_dy.push_back(std::move(sup_abs));
    } catch (const Error&) {
      rethrow_for_epsilon(eps);
    }
  }

  double largest = 0.0;
  for (const auto& row : report.rows) largest = std::max(largest, row.sup_mse);
  report.delta2 = config.delta2 > 0.0 ? config.delta2 : 2.0 * std::sqrt(largest);
  if (!(report.delta2 > 0.0)) report.delta2 = std::numeric_limits<double>::min();

  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    SweepRow& row = report.rows[i];
    std::size_t exceed = 0;
    for (double v : report.sup_abs_dy[i])
      if (v > report.delta2) ++exceed;
    row.exceed_prob = static_cast<double>(exceed) / static_cast<double>(n_paths);
    row.exceed_stderr = binomial_stderr(row.exceed_prob, n_paths);
    const auto l1 = check_lemma1(row, row.constants.l1, row.constants.c2, horizon);
    row.lemma1_lhs = l1.lhs;
    row.lemma1_rhs = l1.rhs;
    row.pass_lemma1 = l1.holds;
    row.pass_theorem = row.sup_mse <= row.constants.rate_bound();
  }
  const auto cheb = check_chebyshev(report, report.delta2);
  for (std::size_t i = 0; i < report.rows.size(); ++i) report.rows[i].pass_chebyshev = cheb.holds[i];
  return report;
}

Lemma1Check check_lemma1(const SweepRow& row, double l1, double c2, double horizon) {
  Lemma1Check out;
  out.lhs = row.z_err_integral;
  out.rhs = l1 * row.y_err_integral + c2 * (horizon - row.t_lo);
  // Standard error of the per-path difference Zint - L1 Yint.
  const double n = static_cast<double>(std::max<std::size_t>(row.n_paths, 1));
  const double var_mean = row.z_err_stderr * row.z_err_stderr + l1 * l1 * row.y_err_stderr * row.y_err_stderr -
                          2.0 * l1 * row.zy_covariance / n;
  out.stderr_combined = std::sqrt(std::max(0.0, var_mean));
  out.holds = out.lhs <= out.rhs + 3.0 * out.stderr_combined;
  return out;
}

std::vector<Lemma1Check> check_lemma1(const SweepReport& report) {
  std::vector<Lemma1Check> out;
  for (const auto& row : report.rows)
    out.push_back(check_lemma1(row, row.constants.l1, row.constants.c2, report.horizon));
  return out;
}

double fit_log_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DomainError("fit_log_slope: x and y differ in length");
  if (x.size() < 3) throw DomainError("fit_log_slope: at least 3 points are required");
  std::vector<double> lx(x.size()), ly(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw DomainError("fit_log_slope: values must be > 0");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  return numerics::least_squares_slope(lx, ly);
}

RateCheck check_theorem_rate(const SweepReport& report, double delta1) {
  const auto& rows = report.rows;
  if (rows.size() < 3) throw DomainError("check_theorem_rate: at least 3 epsilon values are required");
  RateCheck out;
  std::vector<double> eps, mse;
  bool positive = true;
  for (const auto& r : rows) {
    eps.push_back(r.epsilon);
    mse.push_back(r.sup_mse);
    positive = positive && r.sup_mse > 0.0;
    out.bound_holds.push_back(r.sup_mse <= r.constants.rate_bound());
  }
  out.slope = positive ? fit_log_slope(eps, mse) : std::numeric_limits<double>::quiet_NaN();
  // rows run from the largest to the smallest epsilon.
  for (std::size_t i = rows.size(); i-- > 0;) {
    if (rows[i].sup_mse > delta1) break;
    out.epsilon1 = rows[i].epsilon;
  }
  out.monotone = true;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double se = std::hypot(rows[i].sup_mse_stderr, rows[i - 1].sup_mse_stderr);
    if (rows[i].sup_mse > rows[i - 1].sup_mse + 3.0 * se) out.monotone = false;
  }
  out.final_to_first = rows.front().sup_mse > 0.0 ? rows.back().sup_mse / rows.front().sup_mse : 0.0;
  return out;
}

ChebyshevCheck check_chebyshev(const SweepReport& report, double delta2) {
  if (!(delta2 > 0.0)) throw DomainError("check_chebyshev: delta2 must be > 0");
  ChebyshevCheck out;
  const double d2 = delta2 * delta2;
  std::vector<double> freqs;
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const auto& row = report.rows[i];
    double freq = row.exceed_prob;
    double se = row.exceed_stderr;
    if (i < report.sup_abs_dy.size() && delta2 != report.delta2) {
      std::size_t exceed = 0;
      for (double v : report.sup_abs_dy[i])
        if (v > delta2) ++exceed;
      freq = static_cast<double>(exceed) / static_cast<double>(report.sup_abs_dy[i].size());
      se = binomial_stderr(freq, report.sup_abs_dy[i].size());
    }
    out.holds.push_back(freq <= row.constants.rate_bound() / d2 + 3.0 * se);
    out.self_consistent.push_back(freq <= row.mean_sup_sq / d2 + 3.0 * se);
    freqs.push_back(freq);
  }
  out.trend = freqs.empty() || freqs.back() <= freqs.front();
  return out;
}

void write_sweep_csv(const std::filesystem::path& path, const SweepReport& report) {
  CsvWriter csv(path, {"epsilon", "t_lo", "sup_mse", "sup_mse_stderr", "z_err_integral", "z_err_stderr",
                       "exceed_prob", "exceed_stderr", "c4_bound", "lemma1_lhs", "lemma1_rhs", "pass_lemma1",
                       "pass_theorem", "pass_chebyshev"});
  for (const auto& r : report.rows) {
    csv.cell(r.epsilon).cell(r.t_lo).cell(r.sup_mse).cell(r.sup_mse_stderr).cell(r.z_err_integral);
    csv.cell(r.z_err_stderr).cell(r.exceed_prob).cell(r.exceed_stderr).cell(r.constants.rate_bound());
    csv.cell(r.lemma1_lhs).cell(r.lemma1_rhs).cell(r.pass_lemma1).cell(r.pass_theorem).cell(r.pass_chebyshev);
    csv.end_row();
  }
}

void write_constants_csv(const std::filesystem::path& path, const SweepReport& report) {
  CsvWriter csv(path, {"name", "value"});
  auto put = [&csv](const std::string& name, double v) {
    csv.cell(name).cell(v);
    csv.end_row();
  };
  put("L", report.lipschitz);
  put("C0", report.rows.empty() ? 0.0 : report.rows.front().constants.c0);
  put("C1", report.c1);
  put("phi_bound", report.phi_bound);
  put("beta", report.rows.empty() ? 0.0 : report.rows.front().constants.beta);
  put("t0", report.t0);
  put("delta1", report.delta1);
  put("delta2", report.delta2);
  for (const auto& r : report.rows) {
    const std::string at = "@" + format_double(r.epsilon);
    put("alpha0" + at, r.constants.alpha0);
    put("L1" + at, r.constants.l1);
    put("C2" + at, r.constants.c2);
    put("C3" + at, r.constants.c3);
    put("C4" + at, r.constants.c4);
  }
}

}  // namespace sfrbsde
