#include "dugma/solver.h"

#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "dugma/energy.h"

namespace dugma {
namespace {

double Rosenbrock(const Eigen::VectorXd& x) {
  return 100.0 * std::pow(x(1) - x(0) * x(0), 2) + std::pow(1.0 - x(0), 2);
}

Eigen::VectorXd RosenbrockGrad(const Eigen::VectorXd& x) {
  Eigen::VectorXd g(2);
  g(0) = -400.0 * x(0) * (x(1) - x(0) * x(0)) - 2.0 * (1.0 - x(0));
  g(1) = 200.0 * (x(1) - x(0) * x(0));
  return g;
}

bool NonIncreasing(const std::vector<double>& values) {
  for (std::size_t k = 1; k < values.size(); ++k) {
    if (values[k] > values[k - 1]) return false;
  }
  return true;
}

TEST(MinimizeTest, ConvexQuadratic) {
  auto f = [](const Eigen::VectorXd& x) { return x.squaredNorm(); };
  auto g = [](const Eigen::VectorXd& x) -> Eigen::VectorXd { return 2.0 * x; };
  const SolverResult r = Minimize(f, g, Eigen::VectorXd::Ones(6), {});
  EXPECT_LT(r.value, 1e-12);
  EXPECT_LT(r.x.norm(), 1e-6);
  EXPECT_NE(r.status, SolverStatus::kMaxIters);
  EXPECT_TRUE(NonIncreasing(r.accepted_values));
}

TEST(MinimizeTest, Rosenbrock) {
  SolverOptions options;
  options.max_inner_iters = 500;
  Eigen::VectorXd x0(2);
  x0 << -1.2, 1.0;
  const SolverResult r = Minimize(Rosenbrock, RosenbrockGrad, x0, options);
  EXPECT_NEAR(r.x(0), 1.0, 1e-6);
  EXPECT_NEAR(r.x(1), 1.0, 1e-6);
  EXPECT_TRUE(NonIncreasing(r.accepted_values));
  EXPECT_EQ(r.accepted_values.front(), Rosenbrock(x0));
}

TEST(MinimizeTest, SinglePairObjectiveSuperimposesPoints) {
  const EnergyContext<3> ctx(
      PointCloud<3>({Eigen::Vector3d::Zero()}, {Eigen::Matrix3d::Identity()}),
      PointCloud<3>({Eigen::Vector3d(1, 0, 0)}, {Eigen::Matrix3d::Identity()}),
      PoseParams<3>());
  auto f = [&](const Eigen::VectorXd& x) {
    return Objective<3>(PoseParams<3>::FromVector(x), ctx);
  };
  auto g = [&](const Eigen::VectorXd& x) {
    return ObjectiveGradient<3>(PoseParams<3>::FromVector(x), ctx);
  };
  const SolverResult r = Minimize(f, g, Eigen::VectorXd::Zero(6), {});
  const PoseParams<3> p = PoseParams<3>::FromVector(r.x);
  // The pose superimposes y on x; for a single point only R y0 + t matters.
  const Eigen::Vector3d y =
      RotationFromParams<3>(p.rotation) * Eigen::Vector3d(1, 0, 0) + p.translation;
  EXPECT_LT(y.norm(), 1e-6);
  // Starting at zero rotation with zero rotational gradient, no rotation is
  // introduced.
  EXPECT_LT(p.rotation.norm(), 1e-6);
  EXPECT_LT((p.translation - Eigen::Vector3d(-1, 0, 0)).norm(), 1e-6);
}

TEST(MinimizeTest, BoundsAreRespectedExactly) {
  // Unconstrained minimum at (3, -3); box [-1, 1]^2.
  auto f = [](const Eigen::VectorXd& x) {
    return std::pow(x(0) - 3.0, 2) + std::pow(x(1) + 3.0, 2) + x(0) * x(1);
  };
  auto g = [](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    Eigen::VectorXd d(2);
    d << 2.0 * (x(0) - 3.0) + x(1), 2.0 * (x(1) + 3.0) + x(0);
    return d;
  };
  SolverOptions options;
  options.bounds = std::vector<Bounds>{{-1.0, 1.0}, {-1.0, 1.0}};
  const SolverResult r = Minimize(f, g, Eigen::VectorXd::Zero(2), options);
  EXPECT_EQ(r.x(0), 1.0);
  EXPECT_EQ(r.x(1), -1.0);
  EXPECT_TRUE(NonIncreasing(r.accepted_values));
}

TEST(MinimizeTest, ProjectsInfeasibleStart) {
  auto f = [](const Eigen::VectorXd& x) { return x.squaredNorm(); };
  auto g = [](const Eigen::VectorXd& x) -> Eigen::VectorXd { return 2.0 * x; };
  SolverOptions options;
  options.bounds = std::vector<Bounds>{{0.5, 2.0}};
  const SolverResult r = Minimize(f, g, Eigen::VectorXd::Constant(1, 5.0), options);
  EXPECT_EQ(r.x(0), 0.5);
}

TEST(MinimizeTest, RestartAtOptimumIsIdempotent) {
  SolverOptions options;
  options.max_inner_iters = 500;
  Eigen::VectorXd x0(2);
  x0 << -1.2, 1.0;
  const SolverResult first = Minimize(Rosenbrock, RosenbrockGrad, x0, options);
  const SolverResult again =
      Minimize(Rosenbrock, RosenbrockGrad, first.x, options);
  EXPECT_LE((again.x - first.x).norm(), 1e-9);
  EXPECT_LE(again.value, first.value);
}

TEST(MinimizeTest, Deterministic) {
  Eigen::VectorXd x0(2);
  x0 << -1.2, 1.0;
  const SolverResult a = Minimize(Rosenbrock, RosenbrockGrad, x0, {});
  const SolverResult b = Minimize(Rosenbrock, RosenbrockGrad, x0, {});
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.accepted_values, b.accepted_values);
}

TEST(MinimizeTest, NonFiniteValueRaisesWithLastGoodIterate) {
  // Finite only on x < 1; the descent direction points right.
  auto f = [](const Eigen::VectorXd& x) {
    return x(0) < 0.5 ? -x(0) : std::numeric_limits<double>::quiet_NaN();
  };
  auto g = [](const Eigen::VectorXd&) -> Eigen::VectorXd {
    return Eigen::VectorXd::Constant(1, -1.0);
  };
  Eigen::VectorXd x0 = Eigen::VectorXd::Constant(1, 0.2);
  try {
    Minimize(f, g, x0, {});
    FAIL() << "expected SolverError";
  } catch (const SolverError& e) {
    EXPECT_EQ(e.last_good()(0), 0.2);
    EXPECT_EQ(e.last_value(), -0.2);
  }
}

TEST(MinimizeTest, NonFiniteStartRaises) {
  auto f = [](const Eigen::VectorXd&) { return std::numeric_limits<double>::infinity(); };
  auto g = [](const Eigen::VectorXd& x) -> Eigen::VectorXd { return x; };
  EXPECT_THROW(Minimize(f, g, Eigen::VectorXd::Zero(2), {}), SolverError);
}

TEST(SolverOptionsTest, Validation) {
  SolverOptions bad;
  bad.grad_tol = 0.0;
  EXPECT_THROW(bad.Validate(), std::invalid_argument);
  SolverOptions inverted;
  inverted.bounds = std::vector<Bounds>{{1.0, 1.0}};
  EXPECT_THROW(inverted.Validate(), std::invalid_argument);
  SolverOptions wrong_size;
  wrong_size.bounds = std::vector<Bounds>{{0.0, 1.0}};
  auto f = [](const Eigen::VectorXd& x) { return x.squaredNorm(); };
  auto g = [](const Eigen::VectorXd& x) -> Eigen::VectorXd { return 2.0 * x; };
  EXPECT_THROW(Minimize(f, g, Eigen::VectorXd::Zero(2), wrong_size),
               std::invalid_argument);
}

TEST(RotationBoundsTest, BoundsRotationOnly) {
  const auto b = RotationBounds(3, 6);
  ASSERT_EQ(b.size(), 6u);
  EXPECT_EQ(b[0].lower, -M_PI);
  EXPECT_EQ(b[2].upper, M_PI);
  EXPECT_TRUE(std::isinf(b[3].upper));
  EXPECT_EQ(ToString(SolverStatus::kConvergedGrad), "converged_grad");
}

}  // namespace
}  // namespace dugma
