#include "sfrbsde/numerics.hpp"

#include <algorithm>

#include "sfrbsde/error.hpp"

namespace sfrbsde::numerics {

QuadratureRule composite_gauss(std::span<const double> breaks) {
  QuadratureRule rule;
  if (breaks.size() < 2) return rule;
  const std::size_t panels = breaks.size() - 1;
  rule.nodes.reserve(panels * kGaussNodes.size());
  rule.weights.reserve(panels * kGaussNodes.size());
  for (std::size_t p = 0; p < panels; ++p) {
    const double a = breaks[p];
    const double b = breaks[p + 1];
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    for (std::size_t g = 0; g < kGaussNodes.size(); ++g) {
      rule.nodes.push_back(mid + half * kGaussNodes[g]);
      rule.weights.push_back(half * kGaussWeights[g]);
    }
  }
  return rule;
}

std::vector<double> uniform_breaks(double a, double b, int panels) {
  std::vector<double> out(static_cast<std::size_t>(panels) + 1);
  for (int i = 0; i <= panels; ++i) out[i] = a + (b - a) * static_cast<double>(i) / panels;
  out.back() = b;
  return out;
}

std::vector<double> graded_breaks(int panels, double grading) {
  std::vector<double> out(static_cast<std::size_t>(panels) + 1);
  for (int i = 0; i <= panels; ++i)
    out[i] = std::pow(static_cast<double>(i) / panels, grading);
  out.back() = 1.0;
  return out;
}

SampleStats summarize(std::span<const double> xs) {
  SampleStats s;
  s.count = xs.size();
  if (xs.empty()) return s;
  CompensatedSum sum;
  for (double x : xs) sum.add(x);
  s.mean = sum.value() / static_cast<double>(xs.size());
  if (xs.size() < 2) return s;
  CompensatedSum sq;
  for (double x : xs) {
    const double d = x - s.mean;
    sq.add(d * d);
  }
  s.variance = sq.value() / static_cast<double>(xs.size() - 1);
  s.stderr_mean = std::sqrt(s.variance / static_cast<double>(xs.size()));
  return s;
}

double interp_uniform(std::span<const double> ys, double x0, double dx, double x) {
  const std::size_t n = ys.size();
  const double pos = (x - x0) / dx;
  if (pos <= 0.0) return ys.front();
  if (pos >= static_cast<double>(n - 1)) return ys.back();
  const auto i = static_cast<std::size_t>(pos);
  const double w = pos - static_cast<double>(i);
  return (1.0 - w) * ys[i] + w * ys[i + 1];
}

double least_squares_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw DomainError("least_squares_slope: need at least two matching points");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw DomainError("least_squares_slope: degenerate abscissae");
  return sxy / sxx;
}

}  // namespace sfrbsde::numerics
