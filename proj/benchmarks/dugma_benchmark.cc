// Microbenchmarks of the registration hot spots: pair coefficients, the
// direct O(NM) objective against the O(N + M) reduced form, nearest-neighbour
// queries and one full registration.

#include <random>

#include <Eigen/Geometry>
#include <benchmark/benchmark.h>

#include "dugma/energy.h"
#include "dugma/nearest_neighbor.h"
#include "dugma/registration.h"
#include "dugma/shapes.h"

namespace dugma {
namespace {

PointCloud<3> Cloud(int n, std::uint64_t seed) {
  return GenerateShape(static_cast<int>(seed % kShapeFamilies), n, seed, 0.02);
}

PoseParams<3> SmallPose() {
  PoseParams<3> p;
  p.rotation = Eigen::Vector3d(0.05, -0.02, 0.03);
  p.translation = Eigen::Vector3d(0.01, 0.02, -0.01);
  return p;
}

void BM_PairCoefficients(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const PointCloud<3> fixed = Cloud(n, 1);
  const PointCloud<3> moving = Cloud(n, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ComputePairCoefficients<3>(fixed, moving).values.data());
  }
  state.SetComplexityN(static_cast<std::int64_t>(n) * n);
}
BENCHMARK(BM_PairCoefficients)->RangeMultiplier(2)->Range(128, 2048)->Complexity();

void BM_DirectObjective(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const EnergyContext<3> ctx(Cloud(n, 2), Cloud(n, 2), PoseParams<3>());
  const PoseParams<3> pose = SmallPose();
  for (auto _ : state) {
    benchmark::DoNotOptimize(Objective<3>(pose, ctx));
    benchmark::DoNotOptimize(ObjectiveGradient<3>(pose, ctx).data());
  }
}
BENCHMARK(BM_DirectObjective)->RangeMultiplier(2)->Range(128, 1024);

void BM_ReducedObjective(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const EnergyContext<3> ctx(Cloud(n, 2), Cloud(n, 2), PoseParams<3>());
  const ReducedObjective<3> reduced(ctx);
  const PoseParams<3> pose = SmallPose();
  for (auto _ : state) {
    benchmark::DoNotOptimize(reduced.Value(pose));
    benchmark::DoNotOptimize(reduced.Gradient(pose).data());
  }
}
BENCHMARK(BM_ReducedObjective)->RangeMultiplier(2)->Range(128, 1024);

void BM_KdTreeNearest(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const PointCloud<3> cloud = Cloud(n, 3);
  const KdTree<3> tree(cloud.points());
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Eigen::Vector3d> queries;
  for (int k = 0; k < 1024; ++k) queries.emplace_back(u(rng), u(rng), u(rng));
  std::size_t k = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(tree.Nearest(queries[k++ & 1023]));
  }
}
BENCHMARK(BM_KdTreeNearest)->RangeMultiplier(4)->Range(256, 16384);

void BM_MeanMinDistance(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const PointCloud<3> a = Cloud(n, 5);
  const PointCloud<3> b = Cloud(n, 6);
  for (auto _ : state) benchmark::DoNotOptimize(MeanMinDistance(a, b));
}
BENCHMARK(BM_MeanMinDistance)->Arg(1000)->Arg(4000);

void BM_Register(benchmark::State& state) {
  const PointCloud<3> fixed = Cloud(static_cast<int>(state.range(0)), 7);
  const Eigen::Matrix3d r =
      Eigen::AngleAxisd(0.3, Eigen::Vector3d(1, 1, 0).normalized()).toRotationMatrix();
  const PointCloud<3> moving =
      ApplyTransform(RigidTransform<3>(r, Eigen::Vector3d(0.05, 0, 0)), fixed);
  for (auto _ : state) {
    benchmark::DoNotOptimize(Register(fixed, moving).iterations);
  }
}
BENCHMARK(BM_Register)->Arg(500)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace dugma

BENCHMARK_MAIN();
