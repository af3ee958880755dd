#pragma once

// Reference computations used by the tests. Nothing here calls into the
// library; each quantity is rebuilt from its defining formula.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

using Fn = std::function<double(double)>;

// 5-point Gauss-Legendre on [-1, 1].
inline constexpr std::array<double, 5> kX = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                             0.9061798459386640};
inline constexpr std::array<double, 5> kW = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                             0.4786286704993665, 0.2369268850561891};

inline double rho(double t, double s, double h) { return h * (2.0 * h - 1.0) * std::pow(std::abs(t - s), 2.0 * h - 2.0); }

inline double fbm_cov(double t, double s, double h) {
  return 0.5 * (std::pow(t, 2.0 * h) + std::pow(s, 2.0 * h) - std::pow(std::abs(t - s), 2.0 * h));
}

// Geometric breaks d_0 = 0 < d_1 = a r^{n-1} < ... < d_n = a with d_1 = a * floor.
inline std::vector<double> geometric_breaks(double a, int n, double floor) {
  std::vector<double> b(n + 1, 0.0);
  const double r = std::pow(floor, 1.0 / (n - 1));
  for (int j = 1; j <= n; ++j) b[j] = a * std::pow(r, n - j);
  b[n] = a;
  return b;
}

// int_0^u rho(u, v) f(v) dv in the distance variable d = u - v; the innermost
// panel freezes f at v = u and uses the exact moment of d^{2H-2}.
inline double transform(const Fn& f, double u, double h, int panels) {
  if (u <= 0.0) return 0.0;
  const auto b = geometric_breaks(u, panels, 1e-15);
  double sum = h * std::pow(b[1], 2.0 * h - 1.0) * f(u);
  const double scale = h * (2.0 * h - 1.0);
  for (int j = 1; j < panels; ++j) {
    const double mid = 0.5 * (b[j] + b[j + 1]);
    const double half = 0.5 * (b[j + 1] - b[j]);
    for (std::size_t q = 0; q < kX.size(); ++q) {
      const double d = mid + half * kX[q];
      sum += half * kW[q] * scale * std::pow(d, 2.0 * h - 2.0) * f(u - d);
    }
  }
  return sum;
}

// <xi, eta>_t = int_0^t [xi(u) hat-eta(u) + eta(u) hat-xi(u)] du, outer axis
// graded geometrically toward 0 where hat-f(u) ~ u^{2H-1}.
inline double inner_product(const Fn& xi, const Fn& eta, double t, double h, int panels = 2560) {
  const auto b = geometric_breaks(t, panels, 1e-15);
  double sum = 0.0;
  for (int j = 0; j < panels; ++j) {
    const double mid = 0.5 * (b[j] + b[j + 1]);
    const double half = 0.5 * (b[j + 1] - b[j]);
    for (std::size_t q = 0; q < kX.size(); ++q) {
      const double u = mid + half * kX[q];
      const double xe = transform(eta, u, h, panels);
      const double xx = transform(xi, u, h, panels);
      sum += half * kW[q] * (xi(u) * xe + eta(u) * xx);
    }
  }
  return sum;
}

inline double norm_sq(const Fn& xi, double t, double h, int panels = 2560) {
  const auto b = geometric_breaks(t, panels, 1e-15);
  double sum = 0.0;
  for (int j = 0; j < panels; ++j) {
    const double mid = 0.5 * (b[j] + b[j + 1]);
    const double half = 0.5 * (b[j + 1] - b[j]);
    for (std::size_t q = 0; q < kX.size(); ++q) {
      const double u = mid + half * kX[q];
      sum += half * kW[q] * 2.0 * xi(u) * transform(xi, u, h, panels);
    }
  }
  return sum;
}

// Closed forms for constant coefficients.
inline double norm_sq_const(double c, double t, double h) { return c * c * std::pow(t, 2.0 * h); }
inline double sigma2_hat_const(double c, double t, double h) { return c * h * std::pow(t, 2.0 * h - 1.0); }
// ||s -> s||_1^2 = 1 / (2H + 2).
inline double norm_sq_identity_unit(double h) { return 1.0 / (2.0 * h + 2.0); }

inline double alpha0(double lipschitz, double c1, double eps, double h) {
  const double e = std::pow(eps, h);
  return lipschitz * e / (std::min(1.0, c1) - e);
}

struct Constants {
  double c2, c3, l1, c4;
};

inline Constants constants(double lipschitz, double c1, double phi, double moments_sum, double t_minus_u,
                           double horizon, double eps, double beta, double h) {
  Constants k{};
  const double a0 = alpha0(lipschitz, c1, eps, h);
  const double e2h = std::pow(eps, 2.0 * h);
  const double e4h = e2h * e2h;
  const double c0 = h * std::pow(horizon, 2.0 * h - 1.0);
  k.c2 = std::sqrt(t_minus_u * phi * (1.0 + moments_sum));
  k.c3 = 4.0 * phi * (1.0 + moments_sum);
  k.l1 = a0 + lipschitz / a0 + k.c2;
  const double p = (4.0 * t_minus_u * lipschitz * e2h + 2.0 * c0) * k.c2 * t_minus_u +
                   k.c3 * t_minus_u * t_minus_u * e2h + 4.0 * c0 * horizon * horizon;
  const double expo = t_minus_u * (4.0 * t_minus_u * lipschitz * e4h * (k.l1 + 1.0) + 2.0 * k.l1 * e2h * c0);
  k.c4 = p * std::pow(eps, 2.0 * h * (1.0 + beta) - 1.0) * std::exp(expo);
  return k;
}

}  // namespace oracle
