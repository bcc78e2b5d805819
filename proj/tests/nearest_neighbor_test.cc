#include "dugma/nearest_neighbor.h"

#include <random>

#include <gtest/gtest.h>

#include "test_util.h"

namespace dugma {
namespace {

template <int Dim>
void CompareWithBruteForce(std::uint64_t seed, int n) {
  std::mt19937_64 rng(seed);
  typename PointCloud<Dim>::PointList points;
  for (int i = 0; i < n; ++i) points.push_back(testing::RandomVec<Dim>(rng, 5.0));
  // Duplicates and a tight cluster exercise degenerate splits.
  for (int i = 0; i < 20; ++i) points.push_back(points[i % 3]);
  const KdTree<Dim> tree(points);
  ASSERT_EQ(tree.size(), points.size());
  for (int q = 0; q < 300; ++q) {
    const Vec<Dim> query = testing::RandomVec<Dim>(rng, 6.0);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : points) best = std::min(best, (p - query).squaredNorm());
    const auto [index, dist2] = tree.Nearest(query);
    EXPECT_EQ(dist2, best);
    EXPECT_EQ((points[index] - query).squaredNorm(), best);
  }
}

TEST(KdTreeTest, MatchesBruteForce3d) { CompareWithBruteForce<3>(1, 2000); }
TEST(KdTreeTest, MatchesBruteForce2d) { CompareWithBruteForce<2>(2, 500); }
TEST(KdTreeTest, TinyTrees) {
  CompareWithBruteForce<3>(3, 1);
  CompareWithBruteForce<3>(4, 9);
}

TEST(KdTreeTest, AllCoincident) {
  PointCloud<3>::PointList points(100, Eigen::Vector3d(1, 1, 1));
  const KdTree<3> tree(points);
  EXPECT_EQ(tree.Nearest(Eigen::Vector3d(1, 1, 2)).second, 1.0);
}

TEST(KdTreeTest, EmptyTreeThrows) {
  const KdTree<2> tree({});
  EXPECT_THROW(tree.Nearest(Eigen::Vector2d::Zero()), std::logic_error);
}

}  // namespace
}  // namespace dugma
