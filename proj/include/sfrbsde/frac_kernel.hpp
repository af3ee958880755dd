#pragma once

// Fractional covariance kernel rho(t,s) = H(2H-1)|t-s|^{2H-2}, the Hilbert
// products it induces on deterministic functions, and the derived tables
// (||sigma2||_t^2, hat-sigma2, |sigma|_t^2, lambda) consumed by the path
// engine and the PDE solver.

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sfrbsde/grid.hpp"

namespace sfrbsde {

class HurstModel {
 public:
  explicit HurstModel(double h);

  double value() const { return h_; }
  // 2H - 2, in (-1, 0).
  double kernel_exponent() const { return 2.0 * h_ - 2.0; }
  // H (2H - 1).
  double kernel_scale() const { return h_ * (2.0 * h_ - 1.0); }

  friend bool operator==(const HurstModel&, const HurstModel&) = default;

 private:
  double h_;
};

// Deterministic function of time. Presets carry metadata (known constant value,
// closed-form antiderivative) that the kernel code exploits.
class DeterministicFn {
 public:
  using Rule = std::function<double(double)>;

  explicit DeterministicFn(Rule rule, std::string label = "custom");

  static DeterministicFn constant(double c);
  // c * t
  static DeterministicFn linear(double slope);
  // level + amplitude * sin(2 pi cycles t / period)
  static DeterministicFn sinusoidal(double level, double amplitude, double cycles, double period);

  DeterministicFn with_antiderivative(Rule antiderivative) const;

  double operator()(double t) const { return rule_(t); }
  const std::optional<double>& constant_value() const { return constant_; }
  bool has_antiderivative() const { return static_cast<bool>(antiderivative_); }
  // F(t) with F(0) = 0 not required; callers use differences.
  double antiderivative(double t) const { return antiderivative_(t); }
  const std::string& label() const { return label_; }

 private:
  Rule rule_;
  Rule antiderivative_;
  std::optional<double> constant_;
  std::string label_;
};

enum class SingularityTreatment {
  // w = (t - v)^{2H-1} on the inner axis, u = r^{1/(2H)} on the outer axis,
  // algebraically graded Gauss panels in the substituted variables.
  PowerSubstitution,
  // Original variables; Gauss panels graded geometrically toward the diagonal,
  // the innermost panel integrated against the exact kernel moment.
  GradedMesh,
};

struct QuadratureSpec {
  int panels = 256;
  SingularityTreatment treatment = SingularityTreatment::PowerSubstitution;
  double tolerance = 1e-8;

  void validate() const;
};

// rho(t, s). Throws DomainError on the diagonal or for negative times.
double rho(double t, double s, const HurstModel& h);

// <xi, eta>_t = int_0^t int_0^t rho(u,v) xi(u) eta(v) du dv.
// Throws QuadratureError when the panel count and its half disagree by more
// than q.tolerance * max(1, |result|).
double inner_product(const DeterministicFn& xi, const DeterministicFn& eta, double t,
                     const HurstModel& h, const QuadratureSpec& q = {});

double norm_sq(const DeterministicFn& xi, double t, const HurstModel& h, const QuadratureSpec& q = {});

// int_0^t rho(t, v) f(v) dv; with f = sigma2 this is hat-sigma2(t).
double kernel_transform(const DeterministicFn& f, double t, const HurstModel& h,
                        const QuadratureSpec& q = {});

// H T^{2H-1}.
double c0_const(const HurstModel& h, double horizon);

// Result of checking the candidate closed forms for d/dt ||sigma2||_t^2
// against central finite differences of the quadrature.
struct LambdaValidation {
  double adopted_factor = 0.0;  // d/dt ||sigma2||^2 = factor * sigma2 * hat-sigma2
  std::vector<double> probes;
  std::vector<double> finite_difference;
  std::vector<double> rel_error_factor1;
  std::vector<double> rel_error_factor2;
};

class CoefficientSet {
 public:
  CoefficientSet(DeterministicFn drift, DeterministicFn sigma1, DeterministicFn sigma2,
                 HurstModel hurst, TimeGrid grid, QuadratureSpec quadrature = {}, double eta0 = 0.0);

  const DeterministicFn& drift() const { return drift_; }
  const DeterministicFn& sigma1() const { return sigma1_; }
  const DeterministicFn& sigma2() const { return sigma2_; }
  const HurstModel& hurst() const { return hurst_; }
  const TimeGrid& grid() const { return grid_; }
  const QuadratureSpec& quadrature() const { return quadrature_; }
  double horizon() const { return grid_.horizon(); }
  double eta0() const { return eta0_; }

  // Tables on the grid nodes.
  const std::vector<double>& norm_sq_table() const { return norm_sq_; }
  const std::vector<double>& sigma2_hat_table() const { return sigma2_hat_; }
  const std::vector<double>& sigma1_sq_integral_table() const { return sigma1_sq_int_; }
  const std::vector<double>& sigma_abs_sq_table() const { return sigma_abs_sq_; }
  const std::vector<double>& lambda_table() const { return lambda_; }
  // int_0^{t_k} b(s) ds (trapezoid unless an antiderivative is known).
  const std::vector<double>& drift_integral_table() const { return drift_int_; }

  const LambdaValidation& lambda_validation() const { return lambda_validation_; }

  // True when |sigma|_t^2 is strictly increasing and lambda > 0 on the grid
  // nodes in (0, T]. Degenerate sets still drive simulate_eta but are
  // rejected by the PDE solver.
  bool nondegenerate() const { return degeneracy_.empty(); }
  const std::string& degeneracy() const { return degeneracy_; }

  // Pointwise evaluations at arbitrary t in [0, T] (fresh quadrature).
  double norm_sq_at(double t) const;
  double sigma2_hat_at(double t) const;
  double sigma_abs_sq_at(double t) const;
  double lambda_at(double t) const;

  // Columns: t, norm_sq, sigma2_hat, sigma_abs_sq, lambda.
  void write_csv(const std::filesystem::path& path) const;

 private:
  double sigma1_sq_integral(double t) const;
  void build_tables();
  void validate_lambda();

  DeterministicFn drift_;
  DeterministicFn sigma1_;
  DeterministicFn sigma2_;
  HurstModel hurst_;
  TimeGrid grid_;
  QuadratureSpec quadrature_;
  double eta0_;

  std::vector<double> norm_sq_;
  std::vector<double> sigma2_hat_;
  std::vector<double> sigma1_sq_int_;
  std::vector<double> sigma_abs_sq_;
  std::vector<double> lambda_;
  std::vector<double> drift_int_;
  LambdaValidation lambda_validation_;
  std::string degeneracy_;
};

// Free-function views of the CoefficientSet quantities.
double sigma2_hat(double t, const CoefficientSet& coeffs);
double sigma_abs_sq(double t, const CoefficientSet& coeffs);
double lambda(double t, const CoefficientSet& coeffs);

// min over {t0} and the grid nodes in (t0, T] of hat-sigma2 / sigma2.
// Requires 0 < t0 <= T; throws DomainError if sigma2 vanishes on [t0, T].
double c1_lower_bound(const CoefficientSet& coeffs, double t0);

}  // namespace sfrbsde
