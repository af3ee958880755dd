#include "sfrbsde/frac_kernel.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

#include "sfrbsde/csv.hpp"
#include "sfrbsde/error.hpp"
#include "sfrbsde/numerics.hpp"

namespace sfrbsde {

namespace {

constexpr double kPanelGrading = 3.0;
constexpr double kLambdaRelTolerance = 1e-3;
constexpr double kFiniteDifferenceStep = 1e-3;  // relative to t

// Substituted-variable rules for one (H, panel count) pair.
//   hat-f(u)   = H u^{2H-1} int_0^1 f(u (1 - s^p)) ds,        p = 1/(2H-1)
//   <xi,eta>_t = t^{2H}/2 int_0^1 [xi(t a) hat-eta(t a) + eta(t a) hat-xi(t a)] / (H (t a)^{2H-1}) dr,
//                a = r^{1/(2H)}
class SubstitutionRule {
 public:
  SubstitutionRule(const HurstModel& h, int panels) : h_(h) {
    const double alpha = 2.0 * h.value() - 1.0;
    const auto breaks = numerics::graded_breaks(panels, kPanelGrading);
    inner_ = numerics::composite_gauss(breaks);
    outer_ = numerics::composite_gauss(breaks);
    for (double& s : inner_.nodes) s = 1.0 - std::pow(s, 1.0 / alpha);
    for (double& r : outer_.nodes) r = std::pow(r, 1.0 / (2.0 * h.value()));
  }

  // int_0^1 f(u (1 - s^p)) ds
  double scaled_average(const DeterministicFn& f, double u) const {
    return inner_.integrate([&](double b) { return f(u * b); });
  }

  double transform(const DeterministicFn& f, double t) const {
    if (t <= 0.0) return 0.0;
    return h_.value() * std::pow(t, 2.0 * h_.value() - 1.0) * scaled_average(f, t);
  }

  double product(const DeterministicFn& xi, const DeterministicFn& eta, double t, bool same) const {
    if (t <= 0.0) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < outer_.nodes.size(); ++i) {
      const double u = t * outer_.nodes[i];
      double term = xi(u) * scaled_average(eta, u);
      term = same ? 2.0 * term : term + eta(u) * scaled_average(xi, u);
      sum += outer_.weights[i] * term;
    }
    return 0.5 * std::pow(t, 2.0 * h_.value()) * sum;
  }

 private:
  HurstModel h_;
  numerics::QuadratureRule inner_;
  numerics::QuadratureRule outer_;
};

// Original variables: the inner axis d = (u - v) / u is split into Gauss
// panels, 3/4 of them graded geometrically from kGeometricFloor up to a switch
// point d_s and the rest uniform on [d_s, 1], with d_s chosen so the last
// geometric width equals the uniform width. The innermost panel [0, floor] is
// integrated against the exact kernel moment with f frozen at u.
class GradedMeshRule {
 public:
  GradedMeshRule(const HurstModel& h, int panels)
      : h_(h), outer_(numerics::composite_gauss(numerics::graded_breaks(panels, kPanelGrading))) {
    const double alpha = 2.0 * h.value() - 1.0;
    const int n_geo = 3 * panels / 4;
    const int n_uni = panels - n_geo;
    double d_s = 0.1;
    for (int it = 0; it < 100; ++it) {
      const double ratio = std::pow(d_s / kGeometricFloor, 1.0 / n_geo);
      d_s = 1.0 / (n_uni * (ratio - 1.0) + 1.0);
    }
    std::vector<double> breaks;
    breaks.reserve(panels + 1);
    for (int j = 0; j <= n_geo; ++j)
      breaks.push_back(d_s * std::pow(kGeometricFloor / d_s, static_cast<double>(n_geo - j) / n_geo));
    for (int j = 1; j <= n_uni; ++j) breaks.push_back(j == n_uni ? 1.0 : d_s + (1.0 - d_s) * j / n_uni);
    first_moment_ = std::pow(breaks.front(), alpha) / alpha;
    inner_ = numerics::composite_gauss(breaks);
    for (std::size_t i = 0; i < inner_.nodes.size(); ++i)
      inner_.weights[i] *= std::pow(inner_.nodes[i], alpha - 1.0);
  }

  double transform(const DeterministicFn& f, double u) const {
    if (u <= 0.0) return 0.0;
    const double alpha = 2.0 * h_.value() - 1.0;
    // int_0^u (u-v)^{alpha-1} f(v) dv = u^alpha int_0^1 d^{alpha-1} f(u(1-d)) dd
    const double sum = f(u) * first_moment_ + inner_.integrate([&](double d) { return f(u * (1.0 - d)); });
    return h_.kernel_scale() * std::pow(u, alpha) * sum;
  }

  double product(const DeterministicFn& xi, const DeterministicFn& eta, double t, bool same) const {
    if (t <= 0.0) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < outer_.nodes.size(); ++i) {
      const double u = t * outer_.nodes[i];
      double term = xi(u) * transform(eta, u);
      term = same ? 2.0 * term : term + eta(u) * transform(xi, u);
      sum += outer_.weights[i] * term;
    }
    return t * sum;
  }

 private:
  static constexpr double kGeometricFloor = 1e-12;

  HurstModel h_;
  numerics::QuadratureRule outer_;
  numerics::QuadratureRule inner_;
  double first_moment_ = 0.0;
};

template <class Eval>
double refine_and_check(const QuadratureSpec& q, const char* what, Eval&& eval) {
  q.validate();
  const double fine = eval(q.panels);
  const double coarse = eval(q.panels / 2);
  if (!std::isfinite(fine) || std::abs(fine - coarse) > q.tolerance * std::max(1.0, std::abs(fine))) {
    std::ostringstream os;
    os.precision(17);
    os << what << ": quadrature did not converge (" << q.panels / 2 << " panels: " << coarse << ", "
       << q.panels << " panels: " << fine << ", tolerance " << q.tolerance << ")";
    throw QuadratureError(os.str(), coarse, fine);
  }
  return fine;
}

void check_time(double t, const char* what) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError(std::string(what) + ": time must be >= 0");
}

}  // namespace

HurstModel::HurstModel(double h) : h_(h) {
  if (!(h > 0.5 && h < 1.0)) throw DomainError("H must lie in (0.5, 1)");
}

DeterministicFn::DeterministicFn(Rule rule, std::string label) : rule_(std::move(rule)), label_(std::move(label)) {
  if (!rule_) throw DomainError("DeterministicFn: empty rule");
}

DeterministicFn DeterministicFn::constant(double c) {
  std::ostringstream os;
  os << "constant " << format_double(c);
  DeterministicFn f([c](double) { return c; }, os.str());
  f.constant_ = c;
  f.antiderivative_ = [c](double t) { return c * t; };
  return f;
}

DeterministicFn DeterministicFn::linear(double slope) {
  std::ostringstream os;
  os << "linear " << format_double(slope);
  DeterministicFn f([slope](double t) { return slope * t; }, os.str());
  f.antiderivative_ = [slope](double t) { return 0.5 * slope * t * t; };
  return f;
}

DeterministicFn DeterministicFn::sinusoidal(double level, double amplitude, double cycles, double period) {
  if (!(period > 0.0)) throw DomainError("sinusoidal: period must be > 0");
  std::ostringstream os;
  os << "sinusoidal " << format_double(level) << ' ' << format_double(amplitude) << ' ' << format_double(cycles);
  const double omega = 2.0 * std::numbers::pi * cycles / period;
  DeterministicFn f([=](double t) { return level + amplitude * std::sin(omega * t); }, os.str());
  if (amplitude == 0.0 || cycles == 0.0) f.constant_ = level;
  if (omega != 0.0)
    f.antiderivative_ = [=](double t) { return level * t - amplitude * std::cos(omega * t) / omega; };
  else
    f.antiderivative_ = [=](double t) { return level * t; };
  return f;
}

DeterministicFn DeterministicFn::with_antiderivative(Rule antiderivative) const {
  DeterministicFn out = *this;
  out.antiderivative_ = std::move(antiderivative);
  return out;
}

void QuadratureSpec::validate() const {
  if (panels < 8) throw DomainError("QuadratureSpec: panel count must be >= 8");
  if (!(tolerance > 0.0)) throw DomainError("QuadratureSpec: tolerance must be > 0");
}

double rho(double t, double s, const HurstModel& h) {
  if (t < 0.0 || s < 0.0) throw DomainError("rho: times must be >= 0");
  if (t == s) throw DomainError("rho: kernel is singular on the diagonal t = s");
  return h.kernel_scale() * std::pow(std::abs(t - s), h.kernel_exponent());
}

double inner_product(const DeterministicFn& xi, const DeterministicFn& eta, double t, const HurstModel& h,
                     const QuadratureSpec& q) {
  check_time(t, "inner_product");
  if (t == 0.0) return 0.0;
  if (xi.constant_value() && eta.constant_value())
    return *xi.constant_value() * *eta.constant_value() * std::pow(t, 2.0 * h.value());
  const bool same = &xi == &eta;
  return refine_and_check(q, "inner_product", [&](int panels) {
    if (q.treatment == SingularityTreatment::PowerSubstitution)
      return SubstitutionRule(h, panels).product(xi, eta, t, same);
    return GradedMeshRule(h, panels).product(xi, eta, t, same);
  });
}

double norm_sq(const DeterministicFn& xi, double t, const HurstModel& h, const QuadratureSpec& q) {
  return std::max(0.0, inner_product(xi, xi, t, h, q));
}

double kernel_transform(const DeterministicFn& f, double t, const HurstModel& h, const QuadratureSpec& q) {
  check_time(t, "kernel_transform");
  if (t == 0.0) return 0.0;
  if (f.constant_value()) return *f.constant_value() * h.value() * std::pow(t, 2.0 * h.value() - 1.0);
  return refine_and_check(q, "kernel_transform", [&](int panels) {
    if (q.treatment == SingularityTreatment::PowerSubstitution)
      return SubstitutionRule(h, panels).transform(f, t);
    return GradedMeshRule(h, panels).transform(f, t);
  });
}

double c0_const(const HurstModel& h, double horizon) {
  if (!(horizon > 0.0)) throw DomainError("c0_const: horizon must be > 0");
  return h.value() * std::pow(horizon, 2.0 * h.value() - 1.0);
}

// ---------------------------------------------------------------------------
// CoefficientSet

CoefficientSet::CoefficientSet(DeterministicFn drift, DeterministicFn sigma1, DeterministicFn sigma2,
                               HurstModel hurst, TimeGrid grid, QuadratureSpec quadrature, double eta0)
    : drift_(std::move(drift)),
      sigma1_(std::move(sigma1)),
      sigma2_(std::move(sigma2)),
      hurst_(hurst),
      grid_(grid),
      quadrature_(quadrature),
      eta0_(eta0) {
  quadrature_.validate();
  build_tables();
  validate_lambda();

  const std::size_t n = grid_.nodes();
  lambda_.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = grid_.at(k);
    const double s1 = sigma1_(t);
    lambda_[k] = s1 * s1 + lambda_validation_.adopted_factor * sigma2_(t) * sigma2_hat_[k];
  }
  for (std::size_t k = 1; k < n && degeneracy_.empty(); ++k) {
    if (!(sigma_abs_sq_[k] > sigma_abs_sq_[k - 1]))
      degeneracy_ = "|sigma|_t^2 is not strictly increasing near t = " + format_double(grid_.at(k));
    else if (!(lambda_[k] > 0.0))
      degeneracy_ = "d/dt |sigma|_t^2 must be > 0 on (0, T]; fails at t = " + format_double(grid_.at(k));
  }
}

double CoefficientSet::sigma1_sq_integral(double t) const {
  if (t <= 0.0) return 0.0;
  if (sigma1_.constant_value()) return *sigma1_.constant_value() * *sigma1_.constant_value() * t;
  const auto rule = numerics::composite_gauss(numerics::uniform_breaks(0.0, t, quadrature_.panels));
  return rule.integrate([&](double s) {
    const double v = sigma1_(s);
    return v * v;
  });
}

double CoefficientSet::norm_sq_at(double t) const {
  if (sigma2_.constant_value())
    return *sigma2_.constant_value() * *sigma2_.constant_value() * std::pow(t, 2.0 * hurst_.value());
  return norm_sq(sigma2_, t, hurst_, quadrature_);
}

double CoefficientSet::sigma2_hat_at(double t) const { return kernel_transform(sigma2_, t, hurst_, quadrature_); }

double CoefficientSet::sigma_abs_sq_at(double t) const { return sigma1_sq_integral(t) + norm_sq_at(t); }

double CoefficientSet::lambda_at(double t) const {
  const double s1 = sigma1_(t);
  return s1 * s1 + lambda_validation_.adopted_factor * sigma2_(t) * sigma2_hat_at(t);
}

void CoefficientSet::build_tables() {
  const std::size_t n = grid_.nodes();
  norm_sq_.resize(n);
  sigma2_hat_.resize(n);
  sigma1_sq_int_.resize(n);
  sigma_abs_sq_.resize(n);
  drift_int_.resize(n);

  const auto step_rule = numerics::composite_gauss(numerics::uniform_breaks(0.0, 1.0, 4));
  double s1_acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = grid_.at(k);
    norm_sq_[k] = norm_sq_at(t);
    sigma2_hat_[k] = sigma2_hat_at(t);
    if (k > 0) {
      if (sigma1_.constant_value()) {
        s1_acc = *sigma1_.constant_value() * *sigma1_.constant_value() * t;
      } else {
        const double a = grid_.at(k - 1);
        const double h = t - a;
        s1_acc += h * step_rule.integrate([&](double x) {
          const double v = sigma1_(a + h * x);
          return v * v;
        });
      }
    }
    sigma1_sq_int_[k] = s1_acc;
    sigma_abs_sq_[k] = sigma1_sq_int_[k] + norm_sq_[k];
  }

  if (drift_.has_antiderivative()) {
    const double f0 = drift_.antiderivative(0.0);
    for (std::size_t k = 0; k < n; ++k) drift_int_[k] = drift_.antiderivative(grid_.at(k)) - f0;
  } else {
    drift_int_[0] = 0.0;
    for (std::size_t k = 1; k < n; ++k)
      drift_int_[k] = drift_int_[k - 1] + 0.5 * grid_.dt() * (drift_(grid_.at(k - 1)) + drift_(grid_.at(k)));
  }
}

void CoefficientSet::validate_lambda() {
  LambdaValidation v;
  const double horizon = grid_.horizon();
  v.probes = {horizon / 8.0, 3.0 * horizon / 8.0, 5.0 * horizon / 8.0, 7.0 * horizon / 8.0};
  bool factor1_ok = true;
  bool factor2_ok = true;
  for (double t : v.probes) {
    const double h = kFiniteDifferenceStep * t;
    const double fd = (norm_sq_at(t + h) - norm_sq_at(t - h)) / (2.0 * h);
    const double base = sigma2_(t) * sigma2_hat_at(t);
    const double denom = std::max(std::abs(fd), 1e-12);
    const double e1 = std::abs(base - fd) / denom;
    const double e2 = std::abs(2.0 * base - fd) / denom;
    v.finite_difference.push_back(fd);
    v.rel_error_factor1.push_back(e1);
    v.rel_error_factor2.push_back(e2);
    factor1_ok = factor1_ok && e1 <= kLambdaRelTolerance;
    factor2_ok = factor2_ok && e2 <= kLambdaRelTolerance;
  }
  if (factor1_ok)
    v.adopted_factor = 1.0;
  else if (factor2_ok)
    v.adopted_factor = 2.0;
  else
    throw ConsistencyError(
        "CoefficientSet: neither sigma2*hat-sigma2 nor 2*sigma2*hat-sigma2 matches the finite-difference "
        "derivative of ||sigma2||_t^2");
  lambda_validation_ = std::move(v);
}

void CoefficientSet::write_csv(const std::filesystem::path& path) const {
  CsvWriter csv(path, {"t", "norm_sq", "sigma2_hat", "sigma_abs_sq", "lambda"});
  for (std::size_t k = 0; k < grid_.nodes(); ++k) {
    csv.cell(grid_.at(k)).cell(norm_sq_[k]).cell(sigma2_hat_[k]).cell(sigma_abs_sq_[k]).cell(lambda_[k]);
    csv.end_row();
  }
}

double sigma2_hat(double t, const CoefficientSet& coeffs) { return coeffs.sigma2_hat_at(t); }
double sigma_abs_sq(double t, const CoefficientSet& coeffs) { return coeffs.sigma_abs_sq_at(t); }
double lambda(double t, const CoefficientSet& coeffs) { return coeffs.lambda_at(t); }

double c1_lower_bound(const CoefficientSet& coeffs, double t0) {
  const double horizon = coeffs.horizon();
  if (!(t0 > 0.0 && t0 <= horizon)) throw DomainError("c1_lower_bound: t0 must lie in (0, T]");
  auto ratio = [&](double t, double hat) {
    const double s2 = coeffs.sigma2()(t);
    if (s2 == 0.0) throw DomainError("c1_lower_bound: sigma2 vanishes at t = " + format_double(t));
    return hat / s2;
  };
  double best = ratio(t0, coeffs.sigma2_hat_at(t0));
  const auto& grid = coeffs.grid();
  for (std::size_t k = 0; k < grid.nodes(); ++k) {
    const double t = grid.at(k);
    if (t > t0) best = std::min(best, ratio(t, coeffs.sigma2_hat_table()[k]));
  }
  return best;
}

}  // namespace sfrbsde
