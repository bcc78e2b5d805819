#include "dugma/energy.h"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "test_util.h"

namespace dugma {
namespace {

using testing::RandomCloud;
using testing::RandomRotation;
using testing::RandomVec;
using testing::RelativeError;

PointCloud<3> Single(const Eigen::Vector3d& p,
                     const Eigen::Matrix3d& c = Eigen::Matrix3d::Identity()) {
  return PointCloud<3>({p}, {c});
}

template <int Dim>
PoseParams<Dim> RandomPose(std::mt19937_64& rng, double angle = 0.5,
                           double shift = 0.5) {
  PoseParams<Dim> p;
  p.rotation = testing::RandomRotationParams<Dim>(rng, angle);
  p.translation = RandomVec<Dim>(rng, shift);
  return p;
}

template <int Dim>
EnergyContext<Dim> RandomContext(std::mt19937_64& rng, int n, int m) {
  auto fixed = RandomCloud<Dim>(rng, n, 1.0, 0.3, 1.5);
  auto moving = RandomCloud<Dim>(rng, m, 1.0, 0.3, 1.5);
  return EnergyContext<Dim>(std::move(fixed), std::move(moving),
                            RandomPose<Dim>(rng, 0.3, 0.3));
}

TEST(GaussianKernelTest, Examples) {
  EXPECT_NEAR(GaussianKernel<3>(Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(),
                                Eigen::Matrix3d::Identity()),
              0.0634936359342410, 1e-15);
  EXPECT_NEAR(GaussianKernel<2>(Eigen::Vector2d(1, 1), Eigen::Vector2d(1, 1),
                                4.0 * Eigen::Matrix2d::Identity()),
              1.0 / (2.0 * M_PI * 4.0), 1e-16);
  const double at_mode = GaussianKernel<3>(Eigen::Vector3d::Zero(),
                                           Eigen::Vector3d::Zero(),
                                           Eigen::Matrix3d::Identity());
  const double at_d = GaussianKernel<3>(Eigen::Vector3d(0, 1.7, 0),
                                        Eigen::Vector3d::Zero(),
                                        Eigen::Matrix3d::Identity());
  EXPECT_NEAR(at_d / at_mode, std::exp(-0.5 * 1.7 * 1.7), 1e-15);
}

TEST(GaussianKernelTest, RejectsSingularCovariance) {
  Eigen::Matrix2d singular = Eigen::Matrix2d::Zero();
  singular(0, 0) = 1.0;
  EXPECT_THROW(GaussianKernel<2>(Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero(),
                                 singular),
               std::invalid_argument);
  EXPECT_THROW(ProximityWeight<2>(Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero(),
                                  singular),
               std::invalid_argument);
}

TEST(GaussianKernelTest, IntegratesToOneIn2d) {
  Eigen::Matrix2d cov;
  cov << 0.8, 0.3, 0.3, 0.5;
  const Eigen::Vector2d mean(0.2, -0.1);
  // +-6 sigma of the widest axis.
  const double half = 6.0 * std::sqrt(0.8 + 0.3);
  const int cells = 400;
  const double h = 2.0 * half / cells;
  double sum = 0.0;
  for (int a = 0; a < cells; ++a) {
    for (int b = 0; b < cells; ++b) {
      const Eigen::Vector2d tau(mean.x() - half + (a + 0.5) * h,
                                mean.y() - half + (b + 0.5) * h);
      sum += GaussianKernel<2>(tau, mean, cov) * h * h;
    }
  }
  EXPECT_NEAR(sum, 1.0, 1e-3);
}

TEST(ProximityWeightTest, Examples) {
  EXPECT_EQ(ProximityWeight<3>(Eigen::Vector3d(1, 2, 3), Eigen::Vector3d(1, 2, 3),
                               Eigen::Matrix3d::Identity()),
            1.0);
  EXPECT_NEAR(ProximityWeight<2>(Eigen::Vector2d(1, 1), Eigen::Vector2d::Zero(),
                                 Eigen::Matrix2d::Identity()),
              std::exp(-1.0), 1e-15);
  EXPECT_NEAR(ProximityWeight<2>(Eigen::Vector2d::Zero(), Eigen::Vector2d(0, 2),
                                 Eigen::Vector2d(1, 4).asDiagonal()),
              std::exp(-0.5), 1e-15);
}

TEST(PairCoefficientsTest, CoincidentUnitPair) {
  const auto c = ComputePairCoefficients<3>(Single(Eigen::Vector3d::Zero()),
                                            Single(Eigen::Vector3d::Zero()), 4);
  EXPECT_NEAR(c.values(0, 0), 2.0 * std::pow(2.0 * M_PI, -3.0), 1e-17);
  EXPECT_NEAR(c.values(0, 0), 0.008063, 1e-6);
  EXPECT_EQ(c.computed_at, 4);
}

TEST(PairCoefficientsTest, FarPairUnderflowsToZero) {
  const auto c = ComputePairCoefficients<3>(
      Single(Eigen::Vector3d::Zero()), Single(Eigen::Vector3d(1e3, 0, 0)));
  EXPECT_EQ(c.values(0, 0), 0.0);
  EXPECT_FALSE(std::isnan(c.values(0, 0)));
}

TEST(PairCoefficientsTest, SymmetricUnderExchange) {
  std::mt19937_64 rng(11);
  for (int k = 0; k < 50; ++k) {
    const auto a = RandomCloud<3>(rng, 1);
    const auto b = RandomCloud<3>(rng, 1);
    const double ab = ComputePairCoefficients<3>(a, b).values(0, 0);
    const double ba = ComputePairCoefficients<3>(b, a).values(0, 0);
    EXPECT_LE(RelativeError(ab, ba), 1e-14);
  }
}

TEST(PairCoefficientsTest, MatchesDirectFormula) {
  std::mt19937_64 rng(12);
  const auto x = RandomCloud<3>(rng, 6);
  const auto y = RandomCloud<3>(rng, 5);
  const auto c = ComputePairCoefficients<3>(x, y);
  ASSERT_EQ(c.rows(), 6);
  ASSERT_EQ(c.cols(), 5);
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 5; ++j) {
      const Eigen::Vector3d d = y.point(j) - x.point(i);
      const Eigen::Matrix3d sx = x.covariance(i);
      const Eigen::Matrix3d sy = y.covariance(j);
      const double expected =
          std::pow(2.0 * M_PI, -3.0) / std::sqrt(sx.determinant() * sy.determinant()) *
          (std::exp(-0.5 * d.dot(sx.inverse() * d)) +
           std::exp(-0.5 * d.dot(sy.inverse() * d)));
      EXPECT_LE(RelativeError(c.values(i, j), expected), 1e-12);
    }
  }
}

TEST(PairCoefficientsTest, InvariantUnderCommonRigidMotion) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const auto x = RandomCloud<3>(rng, 8);
    const auto y = RandomCloud<3>(rng, 7);
    const RigidTransform<3> t(RandomRotation<3>(rng), RandomVec<3>(rng, 3.0));
    const auto c0 = ComputePairCoefficients<3>(x, y);
    const auto c1 =
        ComputePairCoefficients<3>(ApplyTransform(t, x), ApplyTransform(t, y));
    for (int i = 0; i < 8; ++i) {
      for (int j = 0; j < 7; ++j) {
        EXPECT_LE(RelativeError(c0.values(i, j), c1.values(i, j)), 1e-9);
      }
    }
  }
}

TEST(EnergyContextTest, ValidatesCoefficients) {
  std::mt19937_64 rng(14);
  const auto x = RandomCloud<2>(rng, 3);
  const auto y = RandomCloud<2>(rng, 4);
  PairCoefficients wrong_shape{Eigen::MatrixXd::Ones(4, 3), 0};
  EXPECT_THROW(EnergyContext<2>(x, y, PoseParams<2>(), wrong_shape),
               std::invalid_argument);
  PairCoefficients negative{Eigen::MatrixXd::Ones(3, 4), 0};
  negative.values(1, 1) = -1e-3;
  EXPECT_THROW(EnergyContext<2>(x, y, PoseParams<2>(), negative),
               std::invalid_argument);
}

TEST(ObjectiveTest, SinglePairExamples) {
  const EnergyContext<3> coincident(Single(Eigen::Vector3d::Zero()),
                                    Single(Eigen::Vector3d::Zero()),
                                    PoseParams<3>());
  EXPECT_EQ(Objective<3>(PoseParams<3>(), coincident), 0.0);

  const EnergyContext<3> ctx(Single(Eigen::Vector3d::Zero()),
                             Single(Eigen::Vector3d(1, 0, 0)), PoseParams<3>());
  const double c_old = std::pow(2.0 * M_PI, -3.0) * 2.0 * std::exp(-0.5);
  EXPECT_NEAR(ctx.coefficients().values(0, 0), c_old, 1e-17);
  EXPECT_NEAR(Objective<3>(PoseParams<3>(), ctx), c_old * 2.0, 1e-16);

  PoseParams<3> onto;
  onto.translation = Eigen::Vector3d(-1, 0, 0);
  EXPECT_EQ(Objective<3>(onto, ctx), 0.0);
}

TEST(ObjectiveTest, NonNegativeAndReducedFormAgrees) {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 30; ++trial) {
    const auto ctx = RandomContext<3>(rng, 12, 9);
    const ReducedObjective<3> reduced(ctx);
    EXPECT_NEAR(reduced.total_weight(), ctx.coefficients().values.sum(),
                1e-12 * reduced.total_weight());
    for (int k = 0; k < 5; ++k) {
      const auto params = RandomPose<3>(rng, 3.0, 2.0);
      const double direct = Objective<3>(params, ctx);
      EXPECT_GE(direct, 0.0);
      EXPECT_LE(RelativeError(reduced.Value(params), direct), 1e-9);
      const Eigen::VectorXd g = ObjectiveGradient<3>(params, ctx);
      const Eigen::VectorXd gr = reduced.Gradient(params);
      EXPECT_LE((g - gr).norm(), 1e-8 * std::max(1.0, g.norm()));
    }
  }
}

TEST(ObjectiveTest, ReducedFormAgreesIn2d) {
  std::mt19937_64 rng(16);
  for (int trial = 0; trial < 30; ++trial) {
    const auto ctx = RandomContext<2>(rng, 10, 11);
    const ReducedObjective<2> reduced(ctx);
    const auto params = RandomPose<2>(rng, 3.0, 2.0);
    EXPECT_LE(RelativeError(reduced.Value(params), Objective<2>(params, ctx)), 1e-9);
    EXPECT_LE((reduced.Gradient(params) - ObjectiveGradient<2>(params, ctx)).norm(),
              1e-8 * std::max(1.0, ObjectiveGradient<2>(params, ctx).norm()));
  }
}

template <int Dim>
void CheckGradient(std::mt19937_64& rng, int n, int m) {
  const auto ctx = RandomContext<Dim>(rng, n, m);
  const auto params = RandomPose<Dim>(rng, 1.0, 1.0);
  const Eigen::VectorXd x = params.ToVector();
  const Eigen::VectorXd g = ObjectiveGradient<Dim>(params, ctx);
  for (int k = 0; k < x.size(); ++k) {
    const double h = 1e-6 * std::max(1.0, std::abs(x(k)));
    Eigen::VectorXd hi = x;
    Eigen::VectorXd lo = x;
    hi(k) += h;
    lo(k) -= h;
    const double fd = (Objective<Dim>(PoseParams<Dim>::FromVector(hi), ctx) -
                       Objective<Dim>(PoseParams<Dim>::FromVector(lo), ctx)) /
                      (2.0 * h);
    EXPECT_LE(std::abs(g(k) - fd), 1e-5 * std::max(std::abs(fd), 1e-3 * g.norm()))
        << "component " << k;
  }
}

TEST(ObjectiveGradientTest, MatchesFiniteDifferences) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    CheckGradient<3>(rng, 5, 5);
    CheckGradient<2>(rng, 5, 5);
  }
}

TEST(ObjectiveGradientTest, ZeroAtCoincidentSinglePair) {
  const EnergyContext<3> ctx(Single(Eigen::Vector3d(0.3, 0.1, 0)),
                             Single(Eigen::Vector3d(0.3, 0.1, 0)), PoseParams<3>());
  EXPECT_LT(ObjectiveGradient<3>(PoseParams<3>(), ctx).norm(), 1e-8);
}

TEST(ObjectiveGradientTest, TranslationPartMatchesHandDerivation) {
  std::mt19937_64 rng(18);
  const auto ctx = RandomContext<3>(rng, 4, 6);
  const auto params = RandomPose<3>(rng);
  const Eigen::Matrix3d r = RotationFromParams<3>(params.rotation);
  Eigen::Vector3d expected = Eigen::Vector3d::Zero();
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 6; ++j) {
      const Eigen::Vector3d y = r * ctx.moving_base().point(j) + params.translation;
      const Eigen::Matrix3d w = ctx.fixed().covariance(i).inverse() +
                                r * ctx.moving_base().covariance(j).inverse() *
                                    r.transpose();
      expected += ctx.coefficients().values(i, j) * 2.0 * w *
                  (y - ctx.fixed().point(i));
    }
  }
  const Eigen::VectorXd g = ObjectiveGradient<3>(params, ctx);
  EXPECT_LT((g.tail<3>() - expected).norm(), 1e-10 * expected.norm());
}

TEST(ExpectedLossOracleTest, EqualsObjectiveOnRandomInstances) {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 8);
    const int m = 1 + static_cast<int>(rng() % 8);
    if (trial % 2 == 0) {
      const auto ctx = RandomContext<3>(rng, n, m);
      const auto params = RandomPose<3>(rng, 1.0, 1.0);
      EXPECT_LE(RelativeError(ExpectedLossOracle<3>(params, ctx),
                              Objective<3>(params, ctx)),
                1e-10);
    } else {
      const auto ctx = RandomContext<2>(rng, n, m);
      const auto params = RandomPose<2>(rng, 1.0, 1.0);
      EXPECT_LE(RelativeError(ExpectedLossOracle<2>(params, ctx),
                              Objective<2>(params, ctx)),
                1e-10);
    }
  }
}

TEST(ExpectedLossOracleTest, CoincidentPairAndTinyTranslation) {
  const EnergyContext<3> coincident(Single(Eigen::Vector3d::Zero()),
                                    Single(Eigen::Vector3d::Zero()),
                                    PoseParams<3>());
  EXPECT_EQ(ExpectedLossOracle<3>(PoseParams<3>(), coincident), 0.0);

  std::mt19937_64 rng(20);
  const auto ctx = RandomContext<3>(rng, 6, 6);
  PoseParams<3> moved = ctx.anchor();
  moved.translation += Eigen::Vector3d(1e-7, -2e-7, 0.5e-7);
  const double d_oracle = ExpectedLossOracle<3>(moved, ctx) -
                          ExpectedLossOracle<3>(ctx.anchor(), ctx);
  const double d_fast = Objective<3>(moved, ctx) - Objective<3>(ctx.anchor(), ctx);
  EXPECT_LT(std::abs(d_oracle - d_fast), 1e-10);
}

TEST(ObjectiveTest, CovarianceScalingKeepsSinglePairArgmin) {
  // Scaling both covariances by s scales the quadratic form by 1/s; the
  // minimizing pose still superimposes the points.
  for (const double s : {0.25, 1.0, 4.0}) {
    const EnergyContext<3> ctx(
        Single(Eigen::Vector3d::Zero(), s * Eigen::Matrix3d::Identity()),
        Single(Eigen::Vector3d(0.5, 0, 0), s * Eigen::Matrix3d::Identity()),
        PoseParams<3>());
    const double c = ctx.coefficients().values(0, 0);
    EXPECT_NEAR(Objective<3>(PoseParams<3>(), ctx), c * 0.25 * 2.0 / s, 1e-15);
    PoseParams<3> onto;
    onto.translation = Eigen::Vector3d(-0.5, 0, 0);
    EXPECT_EQ(Objective<3>(onto, ctx), 0.0);
  }
}

TEST(EnergyGridOracleTest, AlignedBeatsDisplaced) {
  // log G is negative for wide kernels; with Sigma = v I in 2D the aligned
  // pair only has the larger energy while 2 pi v < ~0.89, so keep v small.
  const Eigen::Matrix2d cov = 0.05 * Eigen::Matrix2d::Identity();
  const PointCloud<2> fixed({Eigen::Vector2d::Zero()}, {cov});
  const PointCloud<2> aligned({Eigen::Vector2d::Zero()}, {cov});
  // One Mahalanobis unit away.
  const PointCloud<2> displaced({Eigen::Vector2d(std::sqrt(0.05), 0)}, {cov});
  GridSpec<2> grid;
  grid.lower = Eigen::Vector2d(-1.5, -1.5);
  grid.upper = Eigen::Vector2d(1.5, 1.5);
  grid.cells = {200, 200};
  EXPECT_GT(EnergyGridOracle<2>(fixed, aligned, grid),
            EnergyGridOracle<2>(fixed, displaced, grid));
}

TEST(EnergyGridOracleTest, RefinementConverges) {
  const PointCloud<2> fixed({Eigen::Vector2d(0, 0), Eigen::Vector2d(0.5, 0.2)},
                            {0.1 * Eigen::Matrix2d::Identity(),
                             Eigen::Vector2d(0.08, 0.12).asDiagonal()});
  const PointCloud<2> moving({Eigen::Vector2d(0.1, 0), Eigen::Vector2d(0.45, 0.3)},
                             {0.09 * Eigen::Matrix2d::Identity(),
                              0.11 * Eigen::Matrix2d::Identity()});
  GridSpec<2> coarse;
  coarse.lower = Eigen::Vector2d(-2, -2);
  coarse.upper = Eigen::Vector2d(2.5, 2.5);
  coarse.cells = {60, 60};
  GridSpec<2> fine = coarse;
  fine.cells = {120, 120};
  const double e_coarse = EnergyGridOracle<2>(fixed, moving, coarse);
  const double e_fine = EnergyGridOracle<2>(fixed, moving, fine);
  EXPECT_LT(std::abs(e_fine - e_coarse), 0.05 * std::abs(e_fine));
}

TEST(EnergyGridOracleTest, RejectsEmptyGrid) {
  const PointCloud<2> c({Eigen::Vector2d::Zero()}, {Eigen::Matrix2d::Identity()});
  GridSpec<2> grid;
  grid.upper = Eigen::Vector2d(1, 1);
  grid.cells = {0, 10};
  EXPECT_THROW(EnergyGridOracle<2>(c, c, grid), std::invalid_argument);
}

}  // namespace
}  // namespace dugma
