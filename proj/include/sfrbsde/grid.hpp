#pragma once

#include <cstddef>

#include "sfrbsde/error.hpp"

namespace sfrbsde {

// Uniform time grid t_k = k T / n on [0, T].
class TimeGrid {
 public:
  TimeGrid(double horizon, int n_steps) : horizon_(horizon), n_steps_(n_steps) {
    if (!(horizon > 0.0)) throw DomainError("TimeGrid: horizon must be > 0");
    if (n_steps < 1) throw DomainError("TimeGrid: n_steps must be >= 1");
  }

  double horizon() const { return horizon_; }
  int steps() const { return n_steps_; }
  std::size_t nodes() const { return static_cast<std::size_t>(n_steps_) + 1; }
  double dt() const { return horizon_ / n_steps_; }
  double at(std::size_t k) const {
    return k == static_cast<std::size_t>(n_steps_) ? horizon_ : horizon_ * static_cast<double>(k) / n_steps_;
  }

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

 private:
  double horizon_;
  int n_steps_;
};

}  // namespace sfrbsde
