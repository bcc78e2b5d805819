#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "dugma/energy.h"
#include "dugma/geometry.h"
#include "dugma/solver.h"

namespace dugma {

struct RegistrationConfig {
  int max_em_iters = 100;
  // Relative decrease of the objective within one M-step.
  double em_objective_tol = 1e-6;
  // Rotation angle (rad) plus translation change / fixed radius.
  double em_step_tol = 1e-5;
  SolverOptions solver;
  // Multiply the moving covariances by the mean minimum distance sigma.
  bool scale_covariances = true;
  // Divide sigma by the moving cloud's RMS noise std (sqrt of the mean
  // covariance trace / D) so the factor is unit-free: about 1 once aligned,
  // large while the clouds are far apart. False multiplies by sigma in
  // world units.
  bool relative_scaling = true;
  // Literal multiplicative variant: the scale accumulates over iterations
  // instead of being recomputed from the base covariances.
  bool compound_scaling = false;
  // Lower bound on the mean minimum distance, as a fraction of the fixed
  // cloud radius.
  double sigma_floor = 1e-3;

  void Validate() const;
};

struct IterationRecord {
  int iteration = 0;
  double sigma = 0.0;
  // Normalized objective (divided by the coefficient sum) before and after
  // the M-step, under that step's frozen coefficients.
  double objective_start = 0.0;
  double objective_end = 0.0;
  double rotation_step = 0.0;     // radians
  double translation_step = 0.0;  // world units
  SolverStatus solver_status = SolverStatus::kMaxIters;
  int solver_iterations = 0;
};

template <int Dim>
struct RegistrationResult {
  // Maps the moving cloud into the frame of the fixed cloud.
  RigidTransform<Dim> transform;
  int iterations = 0;
  std::vector<IterationRecord> trace;
  bool converged = false;
};

class RegistrationError : public std::runtime_error {
 public:
  RegistrationError(const std::string& what, std::vector<IterationRecord> trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}

  const std::vector<IterationRecord>& trace() const { return trace_; }

 private:
  std::vector<IterationRecord> trace_;
};

// Mean over moving points of the Euclidean distance to the nearest fixed
// point. Throws std::invalid_argument on empty input.
template <int Dim>
double MeanMinDistance(const PointCloud<Dim>& moving,
                       const PointCloud<Dim>& fixed);

// sqrt(mean trace(Sigma) / D): the RMS per-axis std of the covariances.
template <int Dim>
double NoiseLength(const PointCloud<Dim>& cloud);

// Mutable EM state carried between iterations.
template <int Dim>
struct EmState {
  // Cumulative pose applied to the original moving cloud.
  PoseParams<Dim> pose;
  double sigma = 0.0;
  // Factor applied to the base moving covariances at the last E-step.
  double covariance_scale = 1.0;
  // Length sigma is divided by when relative_scaling is set.
  double reference_length = 1.0;
  int iteration = 0;
};

// Moves the moving cloud by the cumulative pose, recomputes sigma (floored),
// rescales and rotates the moving covariances and freezes the pair
// coefficients. Updates state.sigma, state.covariance_scale and
// state.iteration.
template <int Dim>
EnergyContext<Dim> EStep(const PointCloud<Dim>& fixed,
                         const PointCloud<Dim>& moving, EmState<Dim>& state,
                         const RegistrationConfig& config);

// Aligns `moving` onto `fixed` starting from the identity. Throws
// GeometryError on dimension/degenerate input and RegistrationError (with
// the trace so far) when an M-step fails.
template <int Dim>
RegistrationResult<Dim> Register(const PointCloud<Dim>& fixed,
                                 const PointCloud<Dim>& moving,
                                 const RegistrationConfig& config = {});

}  // namespace dugma
