#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace sfrbsde {

// Root of every error raised by the library. The CLI maps these onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition on an input value was violated (H outside (1/2,1), t = s in rho, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// A numerical procedure failed to deliver its contract.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Successive quadrature refinements disagree by more than the tolerance.
class QuadratureError : public NumericError {
 public:
  QuadratureError(const std::string& what, double coarse, double fine)
      : NumericError(what), coarse_(coarse), fine_(fine) {}
  double coarse() const { return coarse_; }
  double fine() const { return fine_; }

 private:
  double coarse_;
  double fine_;
};

// Two routes to the same quantity disagree beyond tolerance.
class ConsistencyError : public NumericError {
 public:
  using NumericError::NumericError;
};

// The alpha0 equation has no admissible root for the given epsilon.
class InfeasibleError : public DomainError {
 public:
  InfeasibleError(const std::string& what, double max_feasible_epsilon)
      : DomainError(what), max_feasible_epsilon_(max_feasible_epsilon) {}
  double max_feasible_epsilon() const { return max_feasible_epsilon_; }

 private:
  double max_feasible_epsilon_;
};

// A declared property (e.g. a Lipschitz constant) was contradicted by a sample.
class ContractError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Configuration parsing/validation failure; carries every violation found.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> violations)
      : Error(join(violations)), violations_(std::move(violations)) {}
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) {
      if (!out.empty()) out += "; ";
      out += s;
    }
    return out;
  }
  std::vector<std::string> violations_;
};

}  // namespace sfrbsde
