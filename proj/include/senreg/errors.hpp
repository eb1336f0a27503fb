#pragma once

#include <stdexcept>
#include <string>

namespace senreg {

/// Input outside the domain of a coordinate transform (zero vector, nonpositive range, bad factor).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A circle pair with zero norm has no well-defined projection.
class DegenerateProjectionError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Caller broke a documented precondition (dimension mismatch, point off the circles).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed scenario configuration. `path()` names the offending field, e.g. "sensors[2].noise".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& what)
      : std::runtime_error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// Solver-level failure tagged with the BCD block and sweep where it happened.
class SolverError : public std::runtime_error {
 public:
  SolverError(std::string block, int sweep, const std::string& what)
      : std::runtime_error(format(block, sweep, what)), block_(std::move(block)), sweep_(sweep) {}
  const std::string& block() const noexcept { return block_; }
  int sweep() const noexcept { return sweep_; }

 private:
  static std::string format(const std::string& block, int sweep, const std::string& what) {
    std::string s = "block '" + block + "'";
    if (sweep >= 0) s += " sweep " + std::to_string(sweep);
    return s + ": " + what;
  }
  std::string block_;
  int sweep_;
};

/// Normal matrix of a linear LS block is singular to working precision.
class RankDeficiencyError : public SolverError {
 public:
  using SolverError::SolverError;
};

/// ADMM or BCD exhausted its iteration budget.
class ConvergenceError : public SolverError {
 public:
  using SolverError::SolverError;
};

}  // namespace senreg
