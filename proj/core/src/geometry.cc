#include "dugma/geometry.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace dugma {
namespace {

constexpr double kOrthogonalityTolerance = 1e-10;

// Symmetrize to remove the round-off asymmetry of R * S * R^T.
template <int Dim>
Mat<Dim> Symmetrized(const Mat<Dim>& m) {
  return 0.5 * (m + m.transpose());
}

}  // namespace

Eigen::Matrix3d Skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d s;
  s << 0.0, -v.z(), v.y(),  //
      v.z(), 0.0, -v.x(),   //
      -v.y(), v.x(), 0.0;
  return s;
}

template <int Dim>
std::string CheckCovariance(const Mat<Dim>& covariance) {
  if (!covariance.allFinite()) {
    return "covariance has non-finite entries";
  }
  const double scale = std::max(covariance.cwiseAbs().maxCoeff(),
                                std::numeric_limits<double>::min());
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() >
      1e-12 * scale) {
    return "covariance is not symmetric";
  }
  const double trace = covariance.trace();
  Eigen::SelfAdjointEigenSolver<Mat<Dim>> eig;
  eig.computeDirect(covariance, Eigen::EigenvaluesOnly);
  const double floor = 1e-12 * trace / Dim;
  if (!(trace > 0.0) || !(eig.eigenvalues().minCoeff() > floor)) {
    std::ostringstream msg;
    msg << "covariance is not positive definite (min eigenvalue "
        << eig.eigenvalues().minCoeff() << ", floor " << floor << ")";
    return msg.str();
  }
  return {};
}

template <int Dim>
PointCloud<Dim>::PointCloud(PointList points, CovarianceList covariances)
    : points_(std::move(points)), covariances_(std::move(covariances)) {
  if (points_.size() != covariances_.size()) {
    throw GeometryError("point cloud has " + std::to_string(points_.size()) +
                        " points but " + std::to_string(covariances_.size()) +
                        " covariances");
  }
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!points_[i].allFinite()) {
      throw GeometryError("point " + std::to_string(i) + " is not finite");
    }
    const std::string problem = CheckCovariance<Dim>(covariances_[i]);
    if (!problem.empty()) {
      throw GeometryError("point " + std::to_string(i) + ": " + problem);
    }
  }
}

template <int Dim>
PointCloud<Dim> PointCloud<Dim>::Isotropic(PointList points, double variance) {
  CovarianceList covariances(points.size(),
                             variance * Mat<Dim>::Identity());
  return PointCloud(std::move(points), std::move(covariances));
}

template <int Dim>
PointCloud<Dim> PointCloud<Dim>::FromTrusted(PointList points,
                                             CovarianceList covariances) {
  PointCloud cloud;
  cloud.points_ = std::move(points);
  cloud.covariances_ = std::move(covariances);
  return cloud;
}

template <int Dim>
PointCloud<Dim> PointCloud<Dim>::ScaledCovariances(double factor) const {
  if (!(factor > 0.0) || !std::isfinite(factor)) {
    throw GeometryError("covariance scale factor must be positive and finite");
  }
  CovarianceList scaled = covariances_;
  for (auto& c : scaled) c *= factor;
  return FromTrusted(points_, std::move(scaled));
}

template <int Dim>
PointCloud<Dim> PointCloud<Dim>::WithIsotropicCovariances(
    double variance) const {
  return Isotropic(points_, variance);
}

template <int Dim>
PointCloud<Dim> PointCloud<Dim>::Select(
    const std::vector<std::size_t>& indices) const {
  PointList points;
  CovarianceList covariances;
  points.reserve(indices.size());
  covariances.reserve(indices.size());
  for (const std::size_t i : indices) {
    points.push_back(points_.at(i));
    covariances.push_back(covariances_.at(i));
  }
  return FromTrusted(std::move(points), std::move(covariances));
}

template <int Dim>
Vec<Dim> PointCloud<Dim>::Centroid() const {
  Vec<Dim> sum = Vec<Dim>::Zero();
  for (const auto& p : points_) sum += p;
  return points_.empty() ? sum : Vec<Dim>(sum / points_.size());
}

template <int Dim>
std::pair<Vec<Dim>, Vec<Dim>> PointCloud<Dim>::BoundingBox() const {
  if (points_.empty()) {
    return {Vec<Dim>::Zero(), Vec<Dim>::Zero()};
  }
  Vec<Dim> lo = points_.front();
  Vec<Dim> hi = points_.front();
  for (const auto& p : points_) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return {lo, hi};
}

template <int Dim>
double PointCloud<Dim>::Radius() const {
  const auto [lo, hi] = BoundingBox();
  return 0.5 * (hi - lo).norm();
}

template <int Dim>
RigidTransform<Dim>::RigidTransform()
    : rotation_(Mat<Dim>::Identity()), translation_(Vec<Dim>::Zero()) {}

template <int Dim>
RigidTransform<Dim>::RigidTransform(const Mat<Dim>& rotation,
                                    const Vec<Dim>& translation)
    : rotation_(rotation), translation_(translation) {
  if (!rotation.allFinite() || !translation.allFinite()) {
    throw GeometryError("rigid transform has non-finite entries");
  }
  const double ortho =
      (rotation.transpose() * rotation - Mat<Dim>::Identity())
          .cwiseAbs()
          .maxCoeff();
  if (ortho > kOrthogonalityTolerance) {
    throw GeometryError("rotation is not orthogonal");
  }
  if (std::abs(rotation.determinant() - 1.0) > kOrthogonalityTolerance) {
    throw GeometryError("rotation has determinant != +1");
  }
}

template <int Dim>
RigidTransform<Dim> RigidTransform<Dim>::operator*(
    const RigidTransform& other) const {
  RigidTransform result;
  result.rotation_ = rotation_ * other.rotation_;
  result.translation_ = rotation_ * other.translation_ + translation_;
  return result;
}

template <int Dim>
RigidTransform<Dim> RigidTransform<Dim>::Inverse() const {
  RigidTransform result;
  result.rotation_ = rotation_.transpose();
  result.translation_ = -(rotation_.transpose() * translation_);
  return result;
}

template <>
Mat<3> RotationFromParams<3>(const RotationVec<3>& params) {
  const double theta2 = params.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Eigen::Matrix3d k = Skew(params);
  double a;  // sin(theta) / theta
  double b;  // (1 - cos(theta)) / theta^2
  if (theta < 1e-4) {
    a = 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0;
    b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  return Eigen::Matrix3d::Identity() + a * k + b * k * k;
}

template <>
Mat<2> RotationFromParams<2>(const RotationVec<2>& params) {
  const double c = std::cos(params(0));
  const double s = std::sin(params(0));
  Mat<2> r;
  r << c, -s, s, c;
  return r;
}

template <>
double RotationAngle<3>(const Mat<3>& rotation) {
  // atan2 form stays accurate near 0 and pi, unlike acos of the trace.
  const Eigen::Vector3d axis(rotation(2, 1) - rotation(1, 2),
                             rotation(0, 2) - rotation(2, 0),
                             rotation(1, 0) - rotation(0, 1));
  return std::atan2(0.5 * axis.norm(), 0.5 * (rotation.trace() - 1.0));
}

template <>
double RotationAngle<2>(const Mat<2>& rotation) {
  return std::abs(std::atan2(rotation(1, 0), rotation(0, 0)));
}

template <>
RotationVec<3> ParamsFromRotation<3>(const Mat<3>& rotation) {
  const double theta = RotationAngle<3>(rotation);
  const Eigen::Vector3d w(rotation(2, 1) - rotation(1, 2),
                          rotation(0, 2) - rotation(2, 0),
                          rotation(1, 0) - rotation(0, 1));
  if (theta < 1e-4) {
    // w = 2 sin(theta) * axis; sin(theta)/theta ~ 1 - theta^2/6.
    return 0.5 * w / (1.0 - theta * theta / 6.0);
  }
  if (theta < M_PI - 1e-3) {
    return theta / (2.0 * std::sin(theta)) * w;
  }
  // Near pi the antisymmetric part vanishes; read the axis off the symmetric
  // part R + R^T = 2 cos(theta) I + 2 (1 - cos(theta)) a a^T.
  const Eigen::Matrix3d s =
      (0.5 * (rotation + rotation.transpose()) -
       std::cos(theta) * Eigen::Matrix3d::Identity()) /
      (1.0 - std::cos(theta));
  int k = 0;
  s.diagonal().maxCoeff(&k);
  Eigen::Vector3d axis = s.col(k) / std::sqrt(std::max(s(k, k), 1e-300));
  if (axis.dot(w) < 0.0) axis = -axis;
  return theta * axis.normalized();
}

template <>
RotationVec<2> ParamsFromRotation<2>(const Mat<2>& rotation) {
  return RotationVec<2>(std::atan2(rotation(1, 0), rotation(0, 0)));
}

template <>
std::vector<Mat<3>, Eigen::aligned_allocator<Mat<3>>> RotationJacobian<3>(
    const RotationVec<3>& params) {
  // dR/dp_k = R * [J_r e_k]_x with the right Jacobian of SO(3)
  // J_r = I - b [p]_x + c [p]_x^2.
  const double theta2 = params.squaredNorm();
  const double theta = std::sqrt(theta2);
  double b;  // (1 - cos(theta)) / theta^2
  double c;  // (theta - sin(theta)) / theta^3
  if (theta < 1e-4) {
    b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0;
    c = 1.0 / 6.0 - theta2 / 120.0 + theta2 * theta2 / 5040.0;
  } else {
    b = (1.0 - std::cos(theta)) / theta2;
    c = (theta - std::sin(theta)) / (theta2 * theta);
  }
  const Eigen::Matrix3d k = Skew(params);
  const Eigen::Matrix3d right_jacobian =
      Eigen::Matrix3d::Identity() - b * k + c * k * k;
  const Eigen::Matrix3d r = RotationFromParams<3>(params);
  std::vector<Mat<3>, Eigen::aligned_allocator<Mat<3>>> out(3);
  for (int i = 0; i < 3; ++i) {
    out[i] = r * Skew(right_jacobian.col(i));
  }
  return out;
}

template <>
std::vector<Mat<2>, Eigen::aligned_allocator<Mat<2>>> RotationJacobian<2>(
    const RotationVec<2>& params) {
  const double c = std::cos(params(0));
  const double s = std::sin(params(0));
  Mat<2> d;
  d << -s, -c, c, -s;
  return {d};
}

template <int Dim>
PoseParams<Dim> PoseParams<Dim>::FromVector(const Eigen::VectorXd& values) {
  if (values.size() != kPoseDof<Dim>) {
    throw GeometryError("pose vector has " + std::to_string(values.size()) +
                        " entries, expected " +
                        std::to_string(kPoseDof<Dim>));
  }
  PoseParams pose;
  pose.rotation = values.template head<kRotationDof<Dim>>();
  pose.translation = values.template tail<Dim>();
  return pose;
}

template <int Dim>
PoseParams<Dim> PoseParams<Dim>::FromTransform(
    const RigidTransform<Dim>& transform) {
  PoseParams pose;
  pose.rotation = ParamsFromRotation<Dim>(transform.rotation());
  pose.translation = transform.translation();
  return pose;
}

template <int Dim>
Eigen::VectorXd PoseParams<Dim>::ToVector() const {
  Eigen::VectorXd values(kPoseDof<Dim>);
  values << rotation, translation;
  return values;
}

template <int Dim>
RigidTransform<Dim> PoseParams<Dim>::ToTransform() const {
  return RigidTransform<Dim>(RotationFromParams<Dim>(rotation), translation);
}

template <int Dim>
PointCloud<Dim> ApplyTransform(const RigidTransform<Dim>& transform,
                               const PointCloud<Dim>& cloud) {
  const Mat<Dim>& r = transform.rotation();
  typename PointCloud<Dim>::PointList points;
  typename PointCloud<Dim>::CovarianceList covariances;
  points.reserve(cloud.size());
  covariances.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    points.push_back(transform * cloud.point(i));
    covariances.push_back(
        Symmetrized<Dim>(r * cloud.covariance(i) * r.transpose()));
  }
  return PointCloud<Dim>::FromTrusted(std::move(points),
                                      std::move(covariances));
}

template <int Dim>
double RotationError(const Mat<Dim>& rotation_gt,
                     const Mat<Dim>& rotation_est) {
  return (Mat<Dim>::Identity() - rotation_gt * rotation_est.transpose()).norm();
}

template <int Dim>
double TranslationError(const Vec<Dim>& translation_gt,
                        const Vec<Dim>& translation_est) {
  return (translation_gt - translation_est).norm();
}

#define DUGMA_INSTANTIATE_GEOMETRY(D)                                        \
  template std::string CheckCovariance<D>(const Mat<D>&);                    \
  template class PointCloud<D>;                                              \
  template class RigidTransform<D>;                                          \
  template struct PoseParams<D>;                                             \
  template PointCloud<D> ApplyTransform<D>(const RigidTransform<D>&,         \
                                           const PointCloud<D>&);            \
  template double RotationError<D>(const Mat<D>&, const Mat<D>&);            \
  template double TranslationError<D>(const Vec<D>&, const Vec<D>&);

DUGMA_INSTANTIATE_GEOMETRY(2)
DUGMA_INSTANTIATE_GEOMETRY(3)

#undef DUGMA_INSTANTIATE_GEOMETRY

}  // namespace dugma
