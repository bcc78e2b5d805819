#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/StdVector>

namespace dugma {

template <int Dim>
using Vec = Eigen::Matrix<double, Dim, 1>;
template <int Dim>
using Mat = Eigen::Matrix<double, Dim, Dim>;

// Number of rotation parameters: an axis-angle vector in 3D, a single angle
// in 2D.
template <int Dim>
inline constexpr int kRotationDof = Dim == 3 ? 3 : 1;

// Number of pose parameters (rotation followed by translation).
template <int Dim>
inline constexpr int kPoseDof = kRotationDof<Dim> + Dim;

template <int Dim>
using RotationVec = Eigen::Matrix<double, kRotationDof<Dim>, 1>;

// Raised on any violated precondition of the geometric types (bad
// dimensions, non-SPD covariances, non-orthogonal rotations).
class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Checks symmetry (1e-12, relative to the largest entry) and positive
// definiteness with an eigenvalue floor of 1e-12 * trace / Dim. Returns an
// empty string when valid, otherwise a description of the violation.
template <int Dim>
std::string CheckCovariance(const Mat<Dim>& covariance);

// Ordered set of points, each with its own covariance. Immutable once built.
template <int Dim>
class PointCloud {
 public:
  static_assert(Dim == 2 || Dim == 3, "only 2D and 3D clouds are supported");

  using Point = Vec<Dim>;
  using Covariance = Mat<Dim>;
  using PointList = std::vector<Point, Eigen::aligned_allocator<Point>>;
  using CovarianceList =
      std::vector<Covariance, Eigen::aligned_allocator<Covariance>>;

  PointCloud() = default;

  // Validates every covariance; throws GeometryError on the first violation.
  PointCloud(PointList points, CovarianceList covariances);

  // Every point gets variance * I.
  static PointCloud Isotropic(PointList points, double variance);

  // Skips covariance validation. For internal producers whose outputs are
  // SPD by construction (rotations and positive rescaling of valid clouds).
  static PointCloud FromTrusted(PointList points, CovarianceList covariances);

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  static constexpr int dim() { return Dim; }

  const PointList& points() const { return points_; }
  const CovarianceList& covariances() const { return covariances_; }
  const Point& point(std::size_t i) const { return points_[i]; }
  const Covariance& covariance(std::size_t i) const { return covariances_[i]; }

  // Returns a copy with every covariance multiplied by factor > 0.
  PointCloud ScaledCovariances(double factor) const;

  // Returns a copy with every covariance replaced by variance * I.
  PointCloud WithIsotropicCovariances(double variance) const;

  // Returns the sub-cloud at the given indices, in the given order.
  PointCloud Select(const std::vector<std::size_t>& indices) const;

  Point Centroid() const;

  // Half the diagonal of the axis-aligned bounding box.
  double Radius() const;

  // Axis-aligned bounding box as (min corner, max corner).
  std::pair<Point, Point> BoundingBox() const;

 private:
  PointList points_;
  CovarianceList covariances_;
};

template <int Dim>
class RigidTransform {
 public:
  // Identity.
  RigidTransform();

  // Throws GeometryError unless rotation is proper orthogonal within 1e-10.
  RigidTransform(const Mat<Dim>& rotation, const Vec<Dim>& translation);

  static RigidTransform Identity() { return RigidTransform(); }

  const Mat<Dim>& rotation() const { return rotation_; }
  const Vec<Dim>& translation() const { return translation_; }

  Vec<Dim> operator*(const Vec<Dim>& point) const {
    return rotation_ * point + translation_;
  }
  // (a * b)(p) = a(b(p)).
  RigidTransform operator*(const RigidTransform& other) const;

  RigidTransform Inverse() const;

 private:
  Mat<Dim> rotation_;
  Vec<Dim> translation_;
};

// Unconstrained pose parameterization used by the minimizer: axis-angle
// rotation (a planar angle in 2D) followed by the translation.
template <int Dim>
struct PoseParams {
  using Vector = Eigen::Matrix<double, kPoseDof<Dim>, 1>;

  RotationVec<Dim> rotation = RotationVec<Dim>::Zero();
  Vec<Dim> translation = Vec<Dim>::Zero();

  static PoseParams Identity() { return PoseParams(); }
  static PoseParams FromVector(const Eigen::VectorXd& values);
  static PoseParams FromTransform(const RigidTransform<Dim>& transform);

  Eigen::VectorXd ToVector() const;
  RigidTransform<Dim> ToTransform() const;
};

// Exponential map of the skew matrix of the parameters (2D: planar rotation).
template <int Dim>
Mat<Dim> RotationFromParams(const RotationVec<Dim>& params);

// Inverse of RotationFromParams, returning the angle in [0, pi].
template <int Dim>
RotationVec<Dim> ParamsFromRotation(const Mat<Dim>& rotation);

// Partial derivatives dR/dp_k of RotationFromParams, one matrix per
// rotation parameter.
template <int Dim>
std::vector<Mat<Dim>, Eigen::aligned_allocator<Mat<Dim>>> RotationJacobian(
    const RotationVec<Dim>& params);

// Rotation angle of a rotation matrix, in [0, pi].
template <int Dim>
double RotationAngle(const Mat<Dim>& rotation);

Eigen::Matrix3d Skew(const Eigen::Vector3d& v);

// Points are mapped by T, covariances become R * Sigma * R^T.
template <int Dim>
PointCloud<Dim> ApplyTransform(const RigidTransform<Dim>& transform,
                               const PointCloud<Dim>& cloud);

// Frobenius norm of I - R_gt * R_est^-1.
template <int Dim>
double RotationError(const Mat<Dim>& rotation_gt, const Mat<Dim>& rotation_est);

template <int Dim>
double TranslationError(const Vec<Dim>& translation_gt,
                        const Vec<Dim>& translation_est);

// Registration success per the benchmark protocol: rotation error < 0.2 and
// translation error < 0.1.
inline constexpr double kSuccessRotationThreshold = 0.2;
inline constexpr double kSuccessTranslationThreshold = 0.1;

template <>
Mat<3> RotationFromParams<3>(const RotationVec<3>& params);
template <>
Mat<2> RotationFromParams<2>(const RotationVec<2>& params);
template <>
RotationVec<3> ParamsFromRotation<3>(const Mat<3>& rotation);
template <>
RotationVec<2> ParamsFromRotation<2>(const Mat<2>& rotation);
template <>
std::vector<Mat<3>, Eigen::aligned_allocator<Mat<3>>> RotationJacobian<3>(
    const RotationVec<3>& params);
template <>
std::vector<Mat<2>, Eigen::aligned_allocator<Mat<2>>> RotationJacobian<2>(
    const RotationVec<2>& params);
template <>
double RotationAngle<3>(const Mat<3>& rotation);
template <>
double RotationAngle<2>(const Mat<2>& rotation);

inline bool IsSuccessful(double rotation_error, double translation_error) {
  return rotation_error < kSuccessRotationThreshold &&
         translation_error < kSuccessTranslationThreshold;
}

}  // namespace dugma
