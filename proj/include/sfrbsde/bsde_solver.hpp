#pragma once

// Markovian solution of the eps-scaled backward equation
//   Y_t = g(eta_T) + eps^{2H} int_t^T f(s, eta_s, Y, Z1, Z2) ds - eps^H int Z1 dB - eps^H int Z2 dB^H
// through Y_t = psi(t, eta_t), Z1 = sigma1 psi_x, Z2 = sigma2 psi_x, where psi solves
//   psi_t + mu(t) psi_x + diff(t) psi_xx + eps^{2H} f(t, x, psi, sigma1 psi_x, sigma2 psi_x) = 0,
//   psi(T, .) = g,  mu = eps^{2H} b,  diff = eps^{2H} lambda / 2.

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sfrbsde/frac_kernel.hpp"
#include "sfrbsde/path_engine.hpp"

namespace sfrbsde {

struct Generator {
  using Rule = std::function<double(double t, double x, double y, double z1, double z2)>;
  using AverageRule = std::function<double(double x, double y, double z1, double z2)>;

  Rule rule;
  // Declared constant L of |f(y,z) - f(y',z')|^2 <= L (|dy|^2 + |dz1|^2 + |dz2|^2).
  std::optional<double> lipschitz;
  bool time_independent = false;
  // Closed form of (1/T) int_0^T f(s, .) ds when known.
  AverageRule average;
  std::string label = "custom";

  double operator()(double t, double x, double y, double z1, double z2) const { return rule(t, x, y, z1, z2); }
};

struct TerminalCondition {
  std::function<double(double)> rule;
  int growth_degree = 2;
  std::string label = "custom";

  double operator()(double x) const { return rule(x); }
};

struct PdeConfig {
  double kappa = 6.0;        // half-width of the space domain in standard deviations of eta_T
  int space_nodes = 257;
  double theta = 0.5;        // 0.5 = Crank-Nicolson
  int picard_iterations = 12;
  double picard_tolerance = 1e-10;  // on max |change| / (1 + max |psi|)

  void validate() const;
};

struct PdeCoefficients {
  double epsilon = 1.0;
  // Pointwise on the time grid.
  std::vector<double> drift;      // eps^{2H} b(t_k)
  std::vector<double> diffusion;  // eps^{2H} lambda(t_k) / 2
  // Step averages over [t_k, t_{k+1}], taken from the integrated tables.
  std::vector<double> drift_step;
  std::vector<double> diffusion_step;
};

PdeCoefficients build_pde_coefficients(const CoefficientSet& coeffs, double epsilon);

struct SolutionField {
  TimeGrid grid;
  double epsilon = 1.0;
  double x0 = 0.0;
  double dx = 1.0;
  PathMatrix psi;    // [time node][space node]
  PathMatrix psi_x;  // centered differences, second-order one-sided at the ends

  std::size_t space_nodes() const { return psi.nodes(); }
  double x_at(std::size_t i) const { return x0 + dx * static_cast<double>(i); }
  double x_max() const { return x_at(space_nodes() - 1); }
  bool contains(double x) const { return x >= x0 && x <= x_max(); }
  double value(std::size_t k, double x) const;
  double gradient(std::size_t k, double x) const;
};

// Backward theta-scheme; the generator term is resolved by Picard iteration
// at each step. The boundary closure extrapolates quadratically (zero third
// derivative at both ends).
SolutionField solve_psi(const Generator& gen, const TerminalCondition& terminal, const CoefficientSet& coeffs,
                        double epsilon, const PdeConfig& pde = {});

struct TriplePath {
  PathMatrix y;
  PathMatrix z1;
  PathMatrix z2;
  std::size_t clamped = 0;  // path-nodes that fell outside the space domain
};

// Fraction of clamped path-nodes above which extract_triple throws.
inline constexpr double kMaxClampFraction = 0.01;

TriplePath extract_triple(const SolutionField& field, const PathMatrix& eta, const CoefficientSet& coeffs);

struct RepresentationCheck {
  bool applicable = false;
  double max_deviation = 0.0;
  std::string status;
};

// Compares the rho-derivative hat-sigma2(t) psi_x(t, eta_t) with
// (hat-sigma2 / sigma2) Z2 on nodes with t >= t0.
RepresentationCheck malliavin_representation_check(const TriplePath& triple, const SolutionField& field,
                                                   const PathMatrix& eta, const CoefficientSet& coeffs,
                                                   double t0);

struct ResidualReport {
  double t_probe = 0.0;
  double residual = 0.0;
  double stderr_mean = 0.0;
  double allowance = 0.0;  // 3 stderr + (dt + dx^2)
  bool passes = false;
};

// | mean(Y_t) - mean(g(eta_T)) - eps^{2H} mean(int_t^T f ds) | after snapping
// t_probe to the nearest grid node.
ResidualReport residual_mean_check(const TriplePath& triple, const SolutionField& field, const Generator& gen,
                                   const TerminalCondition& terminal, const CoefficientSet& coeffs,
                                   const PathMatrix& eta, double t_probe);

// Columns t, x, psi, psi_x; strided so that at most max_rows rows are written.
void write_field_csv(const std::filesystem::path& path, const SolutionField& field, std::size_t max_rows);

// Columns t, mean_Y, var_Y, mean_Z1, mean_Z2.
void write_triple_summary_csv(const std::filesystem::path& path, const TriplePath& triple, const TimeGrid& grid);

}  // namespace sfrbsde
