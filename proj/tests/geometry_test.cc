#include "dugma/geometry.h"

#include <cmath>
#include <random>

#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include "test_util.h"

namespace dugma {
namespace {

using testing::RandomRotation;
using testing::RandomSpd;
using testing::RandomVec;

Eigen::Matrix3d RotZ(double angle) {
  return Eigen::AngleAxisd(angle, Eigen::Vector3d::UnitZ()).toRotationMatrix();
}

TEST(PointCloudTest, RejectsMismatchedLengths) {
  PointCloud<3>::PointList points(2, Eigen::Vector3d::Zero());
  PointCloud<3>::CovarianceList covs(1, Eigen::Matrix3d::Identity());
  EXPECT_THROW(PointCloud<3>(points, covs), GeometryError);
}

TEST(PointCloudTest, RejectsAsymmetricCovariance) {
  Eigen::Matrix3d c = Eigen::Matrix3d::Identity();
  c(0, 1) = 1e-6;
  EXPECT_THROW(PointCloud<3>({Eigen::Vector3d::Zero()}, {c}), GeometryError);
}

TEST(PointCloudTest, RejectsIndefiniteAndNearSingularCovariance) {
  EXPECT_THROW(
      PointCloud<2>({Eigen::Vector2d::Zero()}, {Eigen::Vector2d(1, -1).asDiagonal()}),
      GeometryError);
  // Below the 1e-12 * trace / D eigenvalue floor.
  EXPECT_THROW(
      PointCloud<2>({Eigen::Vector2d::Zero()}, {Eigen::Vector2d(1, 1e-14).asDiagonal()}),
      GeometryError);
  EXPECT_NO_THROW(
      PointCloud<2>({Eigen::Vector2d::Zero()}, {Eigen::Vector2d(1, 1e-9).asDiagonal()}));
}

TEST(PointCloudTest, RejectsNonFinitePoint) {
  EXPECT_THROW(PointCloud<3>::Isotropic(
                   {Eigen::Vector3d(std::nan(""), 0, 0)}, 1.0),
               GeometryError);
}

TEST(PointCloudTest, RadiusCentroidAndSelect) {
  const auto cloud = PointCloud<2>::Isotropic(
      {Eigen::Vector2d(0, 0), Eigen::Vector2d(6, 0), Eigen::Vector2d(0, 8)}, 1.0);
  EXPECT_DOUBLE_EQ(cloud.Radius(), 5.0);
  EXPECT_TRUE(cloud.Centroid().isApprox(Eigen::Vector2d(2, 8.0 / 3.0)));
  const auto sub = cloud.Select({2, 0});
  ASSERT_EQ(sub.size(), 2u);
  EXPECT_EQ(sub.point(0), Eigen::Vector2d(0, 8));
  EXPECT_THROW(cloud.Select({3}), std::out_of_range);
}

TEST(RigidTransformTest, RejectsImproperRotation) {
  Eigen::Matrix3d reflection = Eigen::Matrix3d::Identity();
  reflection(2, 2) = -1.0;
  EXPECT_THROW(RigidTransform<3>(reflection, Eigen::Vector3d::Zero()),
               GeometryError);
  Eigen::Matrix3d sheared = Eigen::Matrix3d::Identity();
  sheared(0, 1) = 1e-8;
  EXPECT_THROW(RigidTransform<3>(sheared, Eigen::Vector3d::Zero()),
               GeometryError);
}

TEST(ApplyTransformTest, IdentityLeavesCloudUnchanged) {
  std::mt19937_64 rng(1);
  const auto cloud = testing::RandomCloud<3>(rng, 10);
  const auto out = ApplyTransform(RigidTransform<3>(), cloud);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    EXPECT_EQ(out.point(i), cloud.point(i));
    EXPECT_EQ(out.covariance(i), cloud.covariance(i));
  }
}

TEST(ApplyTransformTest, QuarterTurnAboutZ) {
  const RigidTransform<3> t(RotZ(M_PI / 2), Eigen::Vector3d::Zero());
  const PointCloud<3> cloud({Eigen::Vector3d(1, 0, 0)},
                            {Eigen::Vector3d(4, 1, 1).asDiagonal()});
  const auto out = ApplyTransform(t, cloud);
  EXPECT_LT((out.point(0) - Eigen::Vector3d(0, 1, 0)).norm(), 1e-15);
  const Eigen::Matrix3d expected = Eigen::Vector3d(1, 4, 1).asDiagonal();
  EXPECT_LT((out.covariance(0) - expected).norm(), 1e-14);
}

TEST(ApplyTransformTest, InverseRoundTrip) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto cloud = testing::RandomCloud<3>(rng, 15, 10.0);
    const RigidTransform<3> t(RandomRotation<3>(rng), RandomVec<3>(rng, 5.0));
    const auto back = ApplyTransform(t.Inverse(), ApplyTransform(t, cloud));
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      EXPECT_LT((back.point(i) - cloud.point(i)).norm(), 1e-10);
      EXPECT_LT((back.covariance(i) - cloud.covariance(i)).norm(), 1e-10);
    }
  }
}

TEST(RotationParamsTest, ZeroIsIdentity) {
  EXPECT_EQ(RotationFromParams<3>(Eigen::Vector3d::Zero()),
            Eigen::Matrix3d::Identity());
  EXPECT_EQ(RotationFromParams<2>(Eigen::Matrix<double, 1, 1>::Zero()),
            Eigen::Matrix2d::Identity());
}

TEST(RotationParamsTest, CanonicalAxis) {
  const Eigen::Matrix3d r = RotationFromParams<3>(Eigen::Vector3d(0, 0, M_PI / 2));
  EXPECT_LT((r - RotZ(M_PI / 2)).norm(), 1e-15);
}

TEST(RotationParamsTest, MatchesQuaternionConstruction) {
  // Independent route: unit quaternion (cos(θ/2), sin(θ/2) * axis).
  const Eigen::Quaterniond q(std::cos(0.15), std::sin(0.15), 0.0, 0.0);
  const Eigen::Matrix3d r = RotationFromParams<3>(Eigen::Vector3d(0.3, 0, 0));
  EXPECT_LT((r - q.toRotationMatrix()).norm(), 1e-15);

  std::mt19937_64 rng(3);
  for (int k = 0; k < 100; ++k) {
    const Eigen::Vector3d p = testing::RandomRotationParams<3>(rng);
    const double angle = p.norm();
    const Eigen::Vector3d axis = p / angle;
    const Eigen::Quaterniond qq(std::cos(angle / 2),
                                std::sin(angle / 2) * axis.x(),
                                std::sin(angle / 2) * axis.y(),
                                std::sin(angle / 2) * axis.z());
    EXPECT_LT((RotationFromParams<3>(p) - qq.toRotationMatrix()).norm(), 1e-13);
  }
}

TEST(RotationParamsTest, SmallAngleBranchIsContinuous) {
  for (const double angle : {1e-3, 1e-4, 9.9e-5, 1e-6, 1e-9}) {
    const Eigen::Vector3d p = Eigen::Vector3d(1, 2, 3).normalized() * angle;
    const Eigen::Matrix3d expected =
        Eigen::AngleAxisd(angle, p.normalized()).toRotationMatrix();
    EXPECT_LT((RotationFromParams<3>(p) - expected).norm(), 1e-15) << angle;
  }
}

TEST(RotationParamsTest, RoundTripPreservesMatrix) {
  std::mt19937_64 rng(4);
  for (int k = 0; k < 500; ++k) {
    const Eigen::Matrix3d r = RandomRotation<3>(rng);
    EXPECT_LT((RotationFromParams<3>(ParamsFromRotation<3>(r)) - r).norm(), 1e-10);
    const Eigen::Matrix2d r2 = RandomRotation<2>(rng);
    EXPECT_LT((RotationFromParams<2>(ParamsFromRotation<2>(r2)) - r2).norm(), 1e-10);
  }
  // Near and at pi, where the log map is ill-conditioned.
  for (const double angle : {M_PI, M_PI - 1e-7, M_PI - 1e-4, 3.0}) {
    const Eigen::Matrix3d r =
        Eigen::AngleAxisd(angle, Eigen::Vector3d(1, -2, 0.5).normalized())
            .toRotationMatrix();
    EXPECT_LT((RotationFromParams<3>(ParamsFromRotation<3>(r)) - r).norm(), 1e-10)
        << angle;
  }
}

TEST(RotationJacobianTest, MatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 50; ++k) {
    const Eigen::Vector3d p = testing::RandomRotationParams<3>(rng, 3.0);
    const auto jac = RotationJacobian<3>(p);
    for (int axis = 0; axis < 3; ++axis) {
      const double h = 1e-6;
      Eigen::Vector3d hi = p;
      Eigen::Vector3d lo = p;
      hi(axis) += h;
      lo(axis) -= h;
      const Eigen::Matrix3d fd =
          (RotationFromParams<3>(hi) - RotationFromParams<3>(lo)) / (2 * h);
      EXPECT_LT((jac[axis] - fd).norm(), 1e-8);
    }
  }
  const auto j2 = RotationJacobian<2>(Eigen::Matrix<double, 1, 1>(0.7));
  Eigen::Matrix2d expected;
  expected << -std::sin(0.7), -std::cos(0.7), std::cos(0.7), -std::sin(0.7);
  EXPECT_LT((j2[0] - expected).norm(), 1e-15);
}

TEST(CovarianceAlgebraTest, DeterminantAndInverseAreRotationInvariant) {
  std::mt19937_64 rng(6);
  for (int k = 0; k < 1000; ++k) {
    const Eigen::Matrix3d r = RandomRotation<3>(rng);
    const Eigen::Matrix3d s = RandomSpd<3>(rng, 0.01, 10.0);
    const Eigen::Matrix3d rs = r * s * r.transpose();
    EXPECT_LT(testing::RelativeError(rs.determinant(), s.determinant()), 1e-9);
    const Eigen::Matrix3d lhs = rs.inverse();
    const Eigen::Matrix3d rhs = r * s.inverse() * r.transpose();
    EXPECT_LT((lhs - rhs).norm() / rhs.norm(), 1e-9);
  }
}

TEST(RotationErrorTest, Examples) {
  const Eigen::Matrix3d r = RotZ(10.0 * M_PI / 180.0);
  EXPECT_NEAR(RotationError<3>(r, r), 0.0, 1e-15);
  EXPECT_NEAR(RotationError<3>(Eigen::Matrix3d::Identity(), r),
              2.0 * std::sqrt(2.0) * std::sin(5.0 * M_PI / 180.0), 1e-12);
  EXPECT_NEAR(RotationError<3>(Eigen::Matrix3d::Identity(), RotZ(M_PI)),
              2.0 * std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(RotationError<3>(Eigen::Matrix3d::Identity(), r), 0.2465, 1e-4);
}

TEST(RotationErrorTest, SymmetricUnderSwap) {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 100; ++k) {
    const Eigen::Matrix3d a = RandomRotation<3>(rng);
    const Eigen::Matrix3d b = RandomRotation<3>(rng);
    EXPECT_NEAR(RotationError<3>(a, b), RotationError<3>(b, a), 1e-12);
    const Eigen::Vector3d ta = RandomVec<3>(rng);
    const Eigen::Vector3d tb = RandomVec<3>(rng);
    EXPECT_EQ(TranslationError<3>(ta, tb), TranslationError<3>(tb, ta));
  }
}

TEST(TranslationErrorTest, Examples) {
  EXPECT_EQ(TranslationError<3>(Eigen::Vector3d(1, 2, 3), Eigen::Vector3d(1, 2, 3)), 0.0);
  EXPECT_EQ(TranslationError<3>(Eigen::Vector3d(1, 0, 0), Eigen::Vector3d::Zero()), 1.0);
  EXPECT_EQ(TranslationError<3>(Eigen::Vector3d(1, 2, 2), Eigen::Vector3d::Zero()), 3.0);
}

TEST(SuccessTest, Thresholds) {
  EXPECT_TRUE(IsSuccessful(0.0, 0.0));
  EXPECT_TRUE(IsSuccessful(0.199, 0.099));
  EXPECT_FALSE(IsSuccessful(0.2, 0.0));
  EXPECT_FALSE(IsSuccessful(0.0, 0.1));
  EXPECT_FALSE(IsSuccessful(std::nan(""), 0.0));
}

TEST(PoseParamsTest, VectorAndTransformRoundTrip) {
  std::mt19937_64 rng(8);
  const RigidTransform<3> t(RandomRotation<3>(rng), RandomVec<3>(rng));
  const auto params = PoseParams<3>::FromTransform(t);
  const auto back = PoseParams<3>::FromVector(params.ToVector()).ToTransform();
  EXPECT_LT((back.rotation() - t.rotation()).norm(), 1e-12);
  EXPECT_LT((back.translation() - t.translation()).norm(), 1e-15);
  EXPECT_THROW(PoseParams<3>::FromVector(Eigen::VectorXd::Zero(5)),
               std::invalid_argument);
}

TEST(RigidTransformTest, CompositionAndInverse) {
  std::mt19937_64 rng(9);
  const RigidTransform<3> a(RandomRotation<3>(rng), RandomVec<3>(rng));
  const RigidTransform<3> b(RandomRotation<3>(rng), RandomVec<3>(rng));
  const Eigen::Vector3d p = RandomVec<3>(rng);
  EXPECT_LT(((a * b) * p - a * (b * p)).norm(), 1e-14);
  EXPECT_LT(((a * a.Inverse()) * p - p).norm(), 1e-14);
}

}  // namespace
}  // namespace dugma
