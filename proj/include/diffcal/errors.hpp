#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace diffcal {

/// Base class for runtime numerical failures (as opposed to invalid
/// arguments, which throw std::invalid_argument). The CLI maps these
/// to exit code 2 and a machine-readable error object.
class numerical_error : public std::runtime_error {
public:
  explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
  virtual std::string_view kind() const noexcept { return "numerical"; }
};

/// Explicit-scheme stability bound violated (d*dt/dx^2 > 1/2).
class stability_error final : public numerical_error {
public:
  stability_error(double dt, double max_dt, const std::string& what)
      : numerical_error(what), dt_(dt), max_dt_(max_dt) {}
  double dt() const noexcept { return dt_; }
  double max_stable_dt() const noexcept { return max_dt_; }
  std::string_view kind() const noexcept override { return "cfl"; }

private:
  double dt_;
  double max_dt_;
};

/// Non-finite state encountered while time stepping.
class divergence_error final : public numerical_error {
public:
  divergence_error(long step, const std::string& what)
      : numerical_error(what), step_(step) {}
  long step() const noexcept { return step_; }
  std::string_view kind() const noexcept override { return "divergence"; }

private:
  long step_;
};

/// Selected submatrix is numerically singular (maxvol on a
/// rank-deficient input).
class degenerate_matrix_error final : public numerical_error {
public:
  using numerical_error::numerical_error;
  std::string_view kind() const noexcept override { return "degenerate-matrix"; }
};

/// Objective evaluation failed inside the tensor-train optimizer;
/// carries the offending grid multi-index in the message.
class evaluator_error final : public numerical_error {
public:
  using numerical_error::numerical_error;
  std::string_view kind() const noexcept override { return "evaluator"; }
};

}  // namespace diffcal
