#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace dugma {

struct Bounds {
  double lower = 0.0;
  double upper = 0.0;
};

struct SolverOptions {
  int max_inner_iters = 100;
  // Converged when ||g||_2 <= grad_tol * max(1, |f|).
  double grad_tol = 1e-10;
  // Converged when ||x_k+1 - x_k||_2 <= step_tol * (1 + ||x_k||_2).
  double step_tol = 1e-12;
  // Per-parameter box; empty means unconstrained.
  std::optional<std::vector<Bounds>> bounds;

  // Throws std::invalid_argument when tolerances or bounds are malformed.
  void Validate() const;
};

enum class SolverStatus { kConvergedGrad, kConvergedStep, kMaxIters };

std::string ToString(SolverStatus status);

struct SolverResult {
  Eigen::VectorXd x;
  double value = 0.0;
  SolverStatus status = SolverStatus::kMaxIters;
  int iterations = 0;
  // Objective at every accepted iterate, starting with f(x0).
  std::vector<double> accepted_values;
};

// Thrown when the objective or gradient stops being finite; carries the last
// iterate where both were finite.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, Eigen::VectorXd last_good,
              double last_value)
      : std::runtime_error(what),
        last_good_(std::move(last_good)),
        last_value_(last_value) {}

  const Eigen::VectorXd& last_good() const { return last_good_; }
  double last_value() const { return last_value_; }

 private:
  Eigen::VectorXd last_good_;
  double last_value_;
};

using ObjectiveFn = std::function<double(const Eigen::VectorXd&)>;
using GradientFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// BFGS with Armijo backtracking (initial step 1) and projection onto the
// optional box. Accepted values never increase. Deterministic.
SolverResult Minimize(const ObjectiveFn& f, const GradientFn& g,
                      const Eigen::VectorXd& x0, const SolverOptions& options);

// Bounds of [-pi, pi] on the first `rotation_dof` parameters and none on the
// remaining ones.
std::vector<Bounds> RotationBounds(int rotation_dof, int total_dof);

}  // namespace dugma
