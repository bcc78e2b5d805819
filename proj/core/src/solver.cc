#include "dugma/solver.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dugma {
namespace {

constexpr double kArmijo = 1e-4;
constexpr int kMaxBacktracks = 60;

Eigen::VectorXd Project(const Eigen::VectorXd& x,
                        const std::optional<std::vector<Bounds>>& bounds) {
  if (!bounds) return x;
  Eigen::VectorXd out = x;
  for (Eigen::Index k = 0; k < out.size(); ++k) {
    out(k) = std::clamp(out(k), (*bounds)[k].lower, (*bounds)[k].upper);
  }
  return out;
}

// Variables pinned at a bound with the gradient pushing outward.
std::vector<bool> ActiveSet(const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                            const std::optional<std::vector<Bounds>>& bounds) {
  std::vector<bool> active(x.size(), false);
  if (!bounds) return active;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const Bounds& b = (*bounds)[k];
    active[k] = (x(k) <= b.lower && g(k) > 0.0) ||
                (x(k) >= b.upper && g(k) < 0.0);
  }
  return active;
}

Eigen::VectorXd FreeGradient(const Eigen::VectorXd& g,
                             const std::vector<bool>& active) {
  Eigen::VectorXd out = g;
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    if (active[k]) out(k) = 0.0;
  }
  return out;
}

}  // namespace

void SolverOptions::Validate() const {
  if (max_inner_iters < 1) {
    throw std::invalid_argument("max_inner_iters must be >= 1");
  }
  if (!(grad_tol > 0.0) || !(step_tol > 0.0)) {
    throw std::invalid_argument("solver tolerances must be positive");
  }
  if (bounds) {
    for (const Bounds& b : *bounds) {
      if (!(b.lower < b.upper)) {
        throw std::invalid_argument("solver bounds need lower < upper");
      }
    }
  }
}

std::string ToString(SolverStatus status) {
  switch (status) {
    case SolverStatus::kConvergedGrad:
      return "converged_grad";
    case SolverStatus::kConvergedStep:
      return "converged_step";
    case SolverStatus::kMaxIters:
      return "max_iters";
  }
  return "unknown";
}

std::vector<Bounds> RotationBounds(int rotation_dof, int total_dof) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<Bounds> bounds(total_dof, Bounds{-inf, inf});
  for (int k = 0; k < rotation_dof; ++k) bounds[k] = Bounds{-M_PI, M_PI};
  return bounds;
}

SolverResult Minimize(const ObjectiveFn& f, const GradientFn& g,
                      const Eigen::VectorXd& x0, const SolverOptions& options) {
  options.Validate();
  const Eigen::Index n = x0.size();
  if (options.bounds && static_cast<Eigen::Index>(options.bounds->size()) != n) {
    throw std::invalid_argument("solver bounds do not match parameter count");
  }

  SolverResult result;
  result.x = Project(x0, options.bounds);
  result.value = f(result.x);
  Eigen::VectorXd grad = g(result.x);
  if (!std::isfinite(result.value) || !grad.allFinite()) {
    throw SolverError("objective or gradient not finite at the start point",
                      result.x, result.value);
  }
  result.accepted_values.push_back(result.value);

  Eigen::MatrixXd inv_hessian = Eigen::MatrixXd::Identity(n, n);
  bool scaled = false;

  for (int iter = 0; iter < options.max_inner_iters; ++iter) {
    const auto active = ActiveSet(result.x, grad, options.bounds);
    const Eigen::VectorXd free_grad = FreeGradient(grad, active);
    if (free_grad.norm() <=
        options.grad_tol * std::max(1.0, std::abs(result.value))) {
      result.status = SolverStatus::kConvergedGrad;
      return result;
    }

    Eigen::VectorXd direction = -(inv_hessian * free_grad);
    for (Eigen::Index k = 0; k < n; ++k) {
      if (active[k]) direction(k) = 0.0;
    }
    if (direction.dot(free_grad) >= 0.0) {
      // Curvature information went stale; fall back to steepest descent.
      inv_hessian.setIdentity();
      scaled = false;
      direction = -free_grad;
    }
    if (!scaled) {
      // No curvature yet: cap the first trial step at unit length.
      const double norm = direction.norm();
      if (norm > 1.0) direction /= norm;
    }

    double step = 1.0;
    Eigen::VectorXd candidate;
    double candidate_value = 0.0;
    bool accepted = false;
    for (int bt = 0; bt < kMaxBacktracks; ++bt) {
      candidate = Project(result.x + step * direction, options.bounds);
      candidate_value = f(candidate);
      if (!std::isfinite(candidate_value)) {
        throw SolverError("objective not finite during line search", result.x,
                          result.value);
      }
      const double decrease = grad.dot(candidate - result.x);
      if (candidate_value <= result.value + kArmijo * decrease) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No decrease along the direction within machine precision.
      result.status = SolverStatus::kConvergedStep;
      return result;
    }

    const Eigen::VectorXd new_grad = g(candidate);
    if (!new_grad.allFinite()) {
      throw SolverError("gradient not finite during line search", result.x,
                        result.value);
    }
    const Eigen::VectorXd s = candidate - result.x;
    const Eigen::VectorXd y = new_grad - grad;
    const double step_norm = s.norm();
    const double x_norm = result.x.norm();

    result.x = candidate;
    result.value = candidate_value;
    grad = new_grad;
    result.iterations = iter + 1;
    result.accepted_values.push_back(candidate_value);

    if (step_norm <= options.step_tol * (1.0 + x_norm)) {
      result.status = SolverStatus::kConvergedStep;
      return result;
    }

    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        inv_hessian *= sy / y.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
      inv_hessian = (eye - rho * s * y.transpose()) * inv_hessian *
                        (eye - rho * y * s.transpose()) +
                    rho * s * s.transpose();
    }
  }
  result.status = SolverStatus::kMaxIters;
  return result;
}

}  // namespace dugma
