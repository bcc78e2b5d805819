#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dugma/geometry.h"

namespace dugma {

inline constexpr int kShapeFamilies = 6;

// Name of the procedural family used for shape_id (cycles through
// kShapeFamilies families).
std::string ShapeFamilyName(int shape_id);

// Dense procedural surface sample: animal-like ellipsoid union, drill-like
// tool, terrain patch, torus knot tube, lumpy blob or chair. Parameters are
// randomized from (shape_id, seed). The result is centred on its bounding
// box, scaled to unit radius, and every point carries covariance
// (base_std * radius)^2 * I.
PointCloud<3> GenerateShape(int shape_id, std::size_t points,
                            std::uint64_t seed, double base_std = 0.01);

// Grid-average downsampling: the voxel size is searched so the output has
// target_points within +-10%. Each output point is the mean of its voxel
// and carries the mean covariance of its members.
PointCloud<3> VoxelDownsample(const PointCloud<3>& cloud,
                              std::size_t target_points);

// `count` models of about `target_points` each, from a denser sample with
// non-uniform density, downsampled by VoxelDownsample.
std::vector<PointCloud<3>> GenerateModelSet(int count,
                                            std::size_t target_points,
                                            std::uint64_t seed,
                                            double base_std = 0.01);

}  // namespace dugma
