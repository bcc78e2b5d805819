#include "dugma/registration.h"

#include <cmath>
#include <limits>

#include "dugma/nearest_neighbor.h"

namespace dugma {
namespace {

template <int Dim>
PointCloud<Dim> Translated(const PointCloud<Dim>& cloud,
                           const Vec<Dim>& offset) {
  typename PointCloud<Dim>::PointList points = cloud.points();
  for (auto& p : points) p += offset;
  return PointCloud<Dim>::FromTrusted(std::move(points), cloud.covariances());
}

}  // namespace

template <int Dim>
double NoiseLength(const PointCloud<Dim>& cloud) {
  if (cloud.empty()) throw std::invalid_argument("noise length of an empty cloud");
  double trace = 0.0;
  for (const auto& c : cloud.covariances()) trace += c.trace();
  return std::sqrt(trace / (static_cast<double>(cloud.size()) * Dim));
}

void RegistrationConfig::Validate() const {
  if (max_em_iters < 1) {
    throw std::invalid_argument("max_em_iters must be >= 1");
  }
  if (!(em_objective_tol > 0.0) || !(em_step_tol > 0.0)) {
    throw std::invalid_argument("EM tolerances must be positive");
  }
  if (!(sigma_floor > 0.0)) {
    throw std::invalid_argument("sigma_floor must be positive");
  }
  solver.Validate();
}

template <int Dim>
double MeanMinDistance(const PointCloud<Dim>& moving,
                       const PointCloud<Dim>& fixed) {
  if (moving.empty() || fixed.empty()) {
    throw std::invalid_argument("mean minimum distance of an empty cloud");
  }
  double sum = 0.0;
  if (fixed.size() < 64) {
    for (const auto& y : moving.points()) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& x : fixed.points()) {
        best = std::min(best, (y - x).squaredNorm());
      }
      sum += std::sqrt(best);
    }
  } else {
    const KdTree<Dim> tree(fixed.points());
    for (const auto& y : moving.points()) {
      sum += std::sqrt(tree.Nearest(y).second);
    }
  }
  return sum / static_cast<double>(moving.size());
}

template <int Dim>
EnergyContext<Dim> EStep(const PointCloud<Dim>& fixed,
                         const PointCloud<Dim>& moving, EmState<Dim>& state,
                         const RegistrationConfig& config) {
  const RigidTransform<Dim> transform = state.pose.ToTransform();
  const PointCloud<Dim> current = ApplyTransform(transform, moving);
  const double floor = config.sigma_floor * fixed.Radius();
  state.sigma = std::max(MeanMinDistance(current, fixed), floor);

  const double factor = config.relative_scaling
                            ? state.sigma / state.reference_length
                            : state.sigma;
  if (!config.scale_covariances) {
    state.covariance_scale = 1.0;
  } else if (config.compound_scaling) {
    state.covariance_scale *= factor;
  } else {
    state.covariance_scale = factor;
  }
  ++state.iteration;
  return EnergyContext<Dim>(fixed,
                            moving.ScaledCovariances(state.covariance_scale),
                            state.pose, state.iteration);
}

template <int Dim>
RegistrationResult<Dim> Register(const PointCloud<Dim>& fixed,
                                 const PointCloud<Dim>& moving,
                                 const RegistrationConfig& config) {
  config.Validate();
  if (fixed.empty() || moving.empty()) {
    throw GeometryError("registration needs non-empty clouds");
  }
  const double radius = fixed.Radius();
  if (!(radius > 0.0) || !(moving.Radius() > 0.0)) {
    throw GeometryError("registration input is degenerate (coincident points)");
  }

  // Work in centroid-centred coordinates to keep the expanded objective
  // well conditioned; the pose is mapped back at the end.
  const Vec<Dim> fixed_center = fixed.Centroid();
  const Vec<Dim> moving_center = moving.Centroid();
  const PointCloud<Dim> fixed_c = Translated<Dim>(fixed, -fixed_center);
  const PointCloud<Dim> moving_c = Translated<Dim>(moving, -moving_center);

  EmState<Dim> state;
  state.pose.translation = moving_center - fixed_center;  // identity start
  state.reference_length = NoiseLength(moving);

  SolverOptions solver_options = config.solver;
  RegistrationResult<Dim> result;

  for (int iter = 0; iter < config.max_em_iters; ++iter) {
    const EnergyContext<Dim> ctx = EStep(fixed_c, moving_c, state, config);
    const ReducedObjective<Dim> objective(ctx);
    const double weight = objective.total_weight();
    if (!(weight > 0.0) || !std::isfinite(weight)) {
      throw RegistrationError(
          "all pair coefficients vanished; clouds do not interact",
          result.trace);
    }

    auto f = [&](const Eigen::VectorXd& v) {
      return objective.Value(PoseParams<Dim>::FromVector(v)) / weight;
    };
    auto g = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
      return objective.Gradient(PoseParams<Dim>::FromVector(v)) / weight;
    };

    SolverResult solved;
    try {
      solved = Minimize(f, g, state.pose.ToVector(), solver_options);
    } catch (const SolverError& e) {
      throw RegistrationError(std::string("M-step failed: ") + e.what(),
                              result.trace);
    }

    const PoseParams<Dim> next = PoseParams<Dim>::FromVector(solved.x);
    const Mat<Dim> r_old = RotationFromParams<Dim>(state.pose.rotation);
    const Mat<Dim> r_new = RotationFromParams<Dim>(next.rotation);

    IterationRecord record;
    record.iteration = state.iteration;
    record.sigma = state.sigma;
    record.objective_start = solved.accepted_values.front();
    record.objective_end = solved.value;
    record.rotation_step =
        RotationAngle<Dim>(Mat<Dim>(r_new * r_old.transpose()));
    record.translation_step = (next.translation - state.pose.translation).norm();
    record.solver_status = solved.status;
    record.solver_iterations = solved.iterations;
    result.trace.push_back(record);
    state.pose = next;

    const double rel_change =
        std::abs(record.objective_start - record.objective_end) /
        std::max(std::abs(record.objective_start),
                 std::numeric_limits<double>::min());
    const double increment =
        record.rotation_step + record.translation_step / radius;
    if (rel_change < config.em_objective_tol &&
        increment < config.em_step_tol) {
      result.converged = true;
      break;
    }
  }
  result.iterations = static_cast<int>(result.trace.size());

  // x - cx = R (y - cy) + t'  =>  x = R y + (t' - R cy + cx).
  const Mat<Dim> r = RotationFromParams<Dim>(state.pose.rotation);
  result.transform = RigidTransform<Dim>(
      r, state.pose.translation - r * moving_center + fixed_center);
  return result;
}

#define DUGMA_INSTANTIATE_REGISTRATION(D)                                    \
  template double NoiseLength<D>(const PointCloud<D>&);                     \
  template double MeanMinDistance<D>(const PointCloud<D>&,                  \
                                     const PointCloud<D>&);                 \
  template EnergyContext<D> EStep<D>(const PointCloud<D>&,                  \
                                     const PointCloud<D>&, EmState<D>&,     \
                                     const RegistrationConfig&);            \
  template RegistrationResult<D> Register<D>(                               \
      const PointCloud<D>&, const PointCloud<D>&, const RegistrationConfig&);

DUGMA_INSTANTIATE_REGISTRATION(2)
DUGMA_INSTANTIATE_REGISTRATION(3)

#undef DUGMA_INSTANTIATE_REGISTRATION

}  // namespace dugma
