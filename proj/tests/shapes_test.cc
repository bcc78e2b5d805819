#include "dugma/shapes.h"

#include <set>

#include <gtest/gtest.h>

namespace dugma {
namespace {

TEST(GenerateShapeTest, UnitRadiusCentredWithCovariances) {
  for (int id = 0; id < kShapeFamilies; ++id) {
    const PointCloud<3> shape = GenerateShape(id, 800, 3, 0.02);
    SCOPED_TRACE(ShapeFamilyName(id));
    EXPECT_EQ(shape.size(), 800u);
    EXPECT_NEAR(shape.Radius(), 1.0, 1e-12);
    const auto [lo, hi] = shape.BoundingBox();
    EXPECT_LT((lo + hi).norm(), 1e-12);
    EXPECT_TRUE(shape.covariance(0).isApprox(
        0.0004 * Eigen::Matrix3d::Identity(), 1e-12));
  }
}

TEST(GenerateShapeTest, FamiliesCycleAndDiffer) {
  std::set<std::string> names;
  for (int id = 0; id < kShapeFamilies; ++id) names.insert(ShapeFamilyName(id));
  EXPECT_EQ(names.size(), static_cast<std::size_t>(kShapeFamilies));
  EXPECT_EQ(ShapeFamilyName(kShapeFamilies), ShapeFamilyName(0));
  const PointCloud<3> a = GenerateShape(0, 300, 1);
  const PointCloud<3> b = GenerateShape(kShapeFamilies, 300, 1);
  EXPECT_NE(a.points(), b.points());
}

TEST(GenerateShapeTest, Deterministic) {
  EXPECT_EQ(GenerateShape(2, 500, 9).points(), GenerateShape(2, 500, 9).points());
  EXPECT_NE(GenerateShape(2, 500, 9).points(), GenerateShape(2, 500, 10).points());
  EXPECT_THROW(GenerateShape(0, 5, 1), std::invalid_argument);
  EXPECT_THROW(GenerateShape(0, 100, 1, 0.0), std::invalid_argument);
}

TEST(VoxelDownsampleTest, HitsTargetWithinTolerance) {
  const PointCloud<3> dense = GenerateShape(1, 20000, 4);
  for (const std::size_t target : {300u, 1000u, 3000u}) {
    const PointCloud<3> down = VoxelDownsample(dense, target);
    EXPECT_GE(down.size(), static_cast<std::size_t>(0.9 * target));
    EXPECT_LE(down.size(), static_cast<std::size_t>(1.1 * target));
    // Voxel means stay inside the source bounding box.
    const auto [lo, hi] = dense.BoundingBox();
    for (const auto& p : down.points()) {
      EXPECT_TRUE((p.array() >= lo.array() - 1e-12).all());
      EXPECT_TRUE((p.array() <= hi.array() + 1e-12).all());
    }
  }
  EXPECT_THROW(VoxelDownsample(dense, 0), std::invalid_argument);
}

TEST(GenerateModelSetTest, CountAndSize) {
  const auto models = GenerateModelSet(3, 1000, 5);
  ASSERT_EQ(models.size(), 3u);
  for (const auto& m : models) {
    EXPECT_GE(m.size(), 900u);
    EXPECT_LE(m.size(), 1100u);
  }
}

}  // namespace
}  // namespace dugma
