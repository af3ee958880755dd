#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace sfrbsde::numerics {

// 4-point Gauss-Legendre rule on [-1, 1].
inline constexpr std::array<double, 4> kGaussNodes = {
    -0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526};
inline constexpr std::array<double, 4> kGaussWeights = {
    0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538};

// A flattened composite rule: abscissae and weights over a fixed interval.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  template <class F>
  double integrate(F&& f) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) sum += weights[i] * f(nodes[i]);
    return sum;
  }
};

// Composite Gauss-Legendre over the panels delimited by `breaks` (ascending).
QuadratureRule composite_gauss(std::span<const double> breaks);

// Uniform panel breaks on [a, b].
std::vector<double> uniform_breaks(double a, double b, int panels);

// Panel breaks on [0, 1] clustered algebraically at 0: x_i = (i/n)^grading.
std::vector<double> graded_breaks(int panels, double grading);

// Running sum with Neumaier compensation; order of `add` calls fixes the result.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

struct SampleStats {
  std::size_t count = 0;
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double stderr_mean = 0.0;
};

// Mean / variance / standard error of the mean, summed in index order.
SampleStats summarize(std::span<const double> xs);

// Piecewise-linear interpolation on a uniform grid x0 + i*dx. Values outside
// the grid are clamped to the end points.
double interp_uniform(std::span<const double> ys, double x0, double dx, double x);

// Least-squares slope of y against x.
double least_squares_slope(std::span<const double> x, std::span<const double> y);

}  // namespace sfrbsde::numerics
