#include "dugma/shapes.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <stdexcept>
#include <tuple>

#include <Eigen/Geometry>

namespace dugma {
namespace {

using Rng = std::mt19937_64;
using Points = PointCloud<3>::PointList;

double Uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Eigen::Vector3d UnitVector(Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::Vector3d v;
  do {
    v = Eigen::Vector3d(normal(rng), normal(rng), normal(rng));
  } while (v.squaredNorm() < 1e-12);
  return v.normalized();
}

struct Ellipsoid {
  Eigen::Vector3d center;
  Eigen::Vector3d axes;

  bool Contains(const Eigen::Vector3d& p) const {
    return ((p - center).array() / axes.array()).matrix().squaredNorm() < 1.0;
  }
  double Area() const {
    // Knud Thomsen's approximation.
    const double p = 1.6075;
    const double a = std::pow(axes.x(), p);
    const double b = std::pow(axes.y(), p);
    const double c = std::pow(axes.z(), p);
    return 4.0 * M_PI * std::pow((a * b + a * c + b * c) / 3.0, 1.0 / p);
  }
  Eigen::Vector3d Sample(Rng& rng) const {
    return center + (UnitVector(rng).array() * axes.array()).matrix();
  }
};

struct Box {
  Eigen::Vector3d center;
  Eigen::Vector3d half;

  bool Contains(const Eigen::Vector3d& p) const {
    return ((p - center).cwiseAbs() - half).maxCoeff() < 0.0;
  }
  double Area() const {
    return 8.0 * (half.x() * half.y() + half.x() * half.z() +
                  half.y() * half.z());
  }
  Eigen::Vector3d Sample(Rng& rng) const {
    const double axy = half.x() * half.y();
    const double axz = half.x() * half.z();
    const double ayz = half.y() * half.z();
    const double pick = Uniform(rng, 0.0, axy + axz + ayz);
    const double sign = Uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
    Eigen::Vector3d u(Uniform(rng, -1.0, 1.0), Uniform(rng, -1.0, 1.0),
                      Uniform(rng, -1.0, 1.0));
    if (pick < axy) {
      u.z() = sign;
    } else if (pick < axy + axz) {
      u.y() = sign;
    } else {
      u.x() = sign;
    }
    return center + (u.array() * half.array()).matrix();
  }
};

// Sample the union boundary of solid primitives: points of one primitive
// lying inside another are rejected.
template <typename Primitive>
Points SampleUnion(const std::vector<Primitive>& parts, std::size_t count,
                   Rng& rng) {
  std::vector<double> areas;
  for (const auto& p : parts) areas.push_back(p.Area());
  std::discrete_distribution<std::size_t> pick(areas.begin(), areas.end());
  Points out;
  std::size_t attempts = 0;
  while (out.size() < count && attempts < 50 * count) {
    ++attempts;
    const std::size_t k = pick(rng);
    const Eigen::Vector3d p = parts[k].Sample(rng);
    bool inside = false;
    for (std::size_t o = 0; o < parts.size() && !inside; ++o) {
      inside = o != k && parts[o].Contains(p);
    }
    if (!inside) out.push_back(p);
  }
  return out;
}

Points Animal(std::size_t count, Rng& rng) {
  auto j = [&](double v) { return v * Uniform(rng, 0.85, 1.15); };
  std::vector<Ellipsoid> parts = {
      {{0.0, 0.0, 0.0}, {j(1.0), j(0.6), j(0.55)}},
      {{j(0.9), 0.0, j(0.45)}, {j(0.35), j(0.3), j(0.3)}},
      {{j(0.95), 0.14, j(0.85)}, {0.09, 0.05, j(0.3)}},
      {{j(0.9), -0.12, j(0.8)}, {0.09, 0.05, j(0.25)}},
      {{j(-1.0), 0.0, j(0.2)}, {j(0.18), 0.14, 0.14}},
      {{0.5, 0.3, -0.5}, {0.12, 0.12, j(0.25)}},
      {{-0.5, -0.3, -0.5}, {0.12, 0.12, j(0.25)}},
  };
  return SampleUnion(parts, count, rng);
}

Points Drill(std::size_t count, Rng& rng) {
  auto j = [&](double v) { return v * Uniform(rng, 0.85, 1.15); };
  const double body_radius = j(0.25);
  const double body_length = j(1.6);
  const double handle_height = j(0.9);
  std::vector<Box> boxes = {
      {{-0.3, 0.0, -0.5 * handle_height - 0.15}, {0.16, 0.11, 0.5 * handle_height}},
      {{-0.3, 0.0, -handle_height - 0.25}, {j(0.3), 0.22, 0.12}},
  };
  Points out;
  const double cylinder_area = 2.0 * M_PI * body_radius * body_length;
  const double cone_length = j(0.45);
  const double cone_area = M_PI * 0.08 * cone_length;
  double box_area = 0.0;
  for (const auto& b : boxes) box_area += b.Area();
  const double total = cylinder_area + cone_area + box_area;
  while (out.size() < count) {
    const double pick = Uniform(rng, 0.0, total);
    if (pick < cylinder_area) {
      const double x = Uniform(rng, -0.5 * body_length, 0.5 * body_length);
      const double a = Uniform(rng, 0.0, 2.0 * M_PI);
      const Eigen::Vector3d p(x, body_radius * std::cos(a),
                              body_radius * std::sin(a));
      if (!boxes[0].Contains(p)) out.push_back(p);
    } else if (pick < cylinder_area + cone_area) {
      const double s = Uniform(rng, 0.0, 1.0);
      const double a = Uniform(rng, 0.0, 2.0 * M_PI);
      const double r = 0.08 * (1.0 - s) + 0.01;
      out.emplace_back(0.5 * body_length + s * cone_length, r * std::cos(a),
                       r * std::sin(a));
    } else {
      const auto part = SampleUnion(boxes, 1, rng);
      if (!part.empty() && (part[0].tail<2>().norm() > body_radius ||
                            std::abs(part[0].x()) > 0.5 * body_length)) {
        out.push_back(part[0]);
      }
    }
  }
  return out;
}

Points Terrain(std::size_t count, Rng& rng) {
  struct Bump {
    Eigen::Vector2d c;
    double height;
    double width;
  };
  std::vector<Bump> bumps;
  for (int k = 0; k < 6; ++k) {
    bumps.push_back({{Uniform(rng, -1.0, 1.0), Uniform(rng, -0.7, 0.7)},
                     Uniform(rng, -0.3, 0.5), Uniform(rng, 0.15, 0.45)});
  }
  const double tilt = Uniform(rng, -0.2, 0.2);
  const double wave = Uniform(rng, 1.0, 3.0);
  Points out;
  // A "tree": vertical ellipsoid standing on the terrain.
  const Eigen::Vector2d tree(Uniform(rng, -0.6, 0.6), Uniform(rng, -0.4, 0.4));
  auto height = [&](double x, double y) {
    double z = tilt * x + 0.08 * std::sin(wave * x + 2.0 * y);
    for (const auto& b : bumps) {
      z += b.height *
           std::exp(-(Eigen::Vector2d(x, y) - b.c).squaredNorm() /
                    (b.width * b.width));
    }
    return z;
  };
  const Ellipsoid crown{{tree.x(), tree.y(), height(tree.x(), tree.y()) + 0.45},
                        {0.18, 0.22, 0.35}};
  while (out.size() < count) {
    if (Uniform(rng, 0.0, 1.0) < 0.2) {
      out.push_back(crown.Sample(rng));
      continue;
    }
    const double x = Uniform(rng, -1.0, 1.0);
    const double y = Uniform(rng, -0.7, 0.7);
    out.emplace_back(x, y, height(x, y));
  }
  return out;
}

Points Knot(std::size_t count, Rng& rng) {
  const int p = 2;
  const int q = std::uniform_int_distribution<int>(0, 1)(rng) == 0 ? 3 : 5;
  const double tube = Uniform(rng, 0.12, 0.2);
  const double squash = Uniform(rng, 0.6, 1.0);
  auto curve = [&](double s) {
    const double r = 0.8 + 0.35 * std::cos(q * s);
    return Eigen::Vector3d(r * std::cos(p * s), r * std::sin(p * s),
                           squash * 0.45 * std::sin(q * s));
  };
  Points out;
  while (out.size() < count) {
    const double s = Uniform(rng, 0.0, 2.0 * M_PI);
    const Eigen::Vector3d c = curve(s);
    const Eigen::Vector3d tangent = (curve(s + 1e-4) - curve(s - 1e-4)).normalized();
    Eigen::Vector3d normal = tangent.cross(Eigen::Vector3d::UnitZ());
    if (normal.norm() < 1e-6) normal = tangent.cross(Eigen::Vector3d::UnitX());
    normal.normalize();
    const Eigen::Vector3d binormal = tangent.cross(normal);
    const double a = Uniform(rng, 0.0, 2.0 * M_PI);
    out.push_back(c + tube * (std::cos(a) * normal + std::sin(a) * binormal));
  }
  return out;
}

Points Blob(std::size_t count, Rng& rng) {
  std::vector<std::pair<Eigen::Vector3d, double>> lumps;
  for (int k = 0; k < 7; ++k) {
    lumps.emplace_back(UnitVector(rng), Uniform(rng, -0.25, 0.6));
  }
  const Eigen::Vector3d stretch(Uniform(rng, 1.0, 1.5), Uniform(rng, 0.7, 1.0),
                                Uniform(rng, 0.5, 0.8));
  Points out;
  while (out.size() < count) {
    const Eigen::Vector3d u = UnitVector(rng);
    double r = 1.0;
    for (const auto& [d, a] : lumps) {
      r += a * std::exp(-(u - d).squaredNorm() / 0.15);
    }
    out.push_back((r * u).cwiseProduct(stretch));
  }
  return out;
}

Points Chair(std::size_t count, Rng& rng) {
  auto j = [&](double v) { return v * Uniform(rng, 0.85, 1.15); };
  const double leg = j(0.45);
  std::vector<Box> parts = {
      {{0.0, 0.0, 0.0}, {j(0.5), j(0.5), 0.05}},
      {{0.0, 0.45, j(0.55)}, {0.5, 0.05, j(0.5)}},
      {{0.42, 0.42, -leg}, {0.04, 0.04, leg}},
      {{-0.42, 0.42, -leg}, {0.04, 0.04, leg}},
      {{0.42, -0.42, -leg}, {0.04, 0.04, leg}},
      {{-0.42, -0.42, -leg}, {0.04, 0.04, leg}},
      {{0.47, 0.0, 0.3}, {0.04, j(0.4), 0.04}},  // one armrest
      {{0.47, -0.35, 0.15}, {0.03, 0.03, 0.15}},
  };
  return SampleUnion(parts, count, rng);
}

PointCloud<3> Normalized(Points points, double base_std) {
  Eigen::Vector3d lo = points.front();
  Eigen::Vector3d hi = points.front();
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Eigen::Vector3d center = 0.5 * (lo + hi);
  const double radius = 0.5 * (hi - lo).norm();
  for (auto& p : points) p = (p - center) / radius;
  return PointCloud<3>::Isotropic(std::move(points), base_std * base_std);
}

}  // namespace

std::string ShapeFamilyName(int shape_id) {
  static const char* kNames[kShapeFamilies] = {"animal", "drill", "terrain",
                                               "knot",   "blob",  "chair"};
  const int family = ((shape_id % kShapeFamilies) + kShapeFamilies) %
                     kShapeFamilies;
  return kNames[family];
}

PointCloud<3> GenerateShape(int shape_id, std::size_t points,
                            std::uint64_t seed, double base_std) {
  if (points < 10) {
    throw std::invalid_argument("shape needs at least 10 points");
  }
  if (!(base_std > 0.0)) {
    throw std::invalid_argument("shape base_std must be positive");
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(shape_id), 0x5eedu};
  Rng rng(seq);
  const int family = ((shape_id % kShapeFamilies) + kShapeFamilies) %
                     kShapeFamilies;
  static const std::function<Points(std::size_t, Rng&)> kGenerators[] = {
      Animal, Drill, Terrain, Knot, Blob, Chair};
  return Normalized(kGenerators[family](points, rng), base_std);
}

PointCloud<3> VoxelDownsample(const PointCloud<3>& cloud,
                              std::size_t target_points) {
  if (target_points == 0) {
    throw std::invalid_argument("downsample target must be positive");
  }
  if (cloud.size() <= target_points) return cloud;

  const auto [lo, hi] = cloud.BoundingBox();
  using Key = std::tuple<long, long, long>;
  auto bucket = [&](double voxel) {
    std::map<Key, std::vector<std::size_t>> cells;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const Eigen::Vector3d q = (cloud.point(i) - lo) / voxel;
      cells[{static_cast<long>(std::floor(q.x())),
             static_cast<long>(std::floor(q.y())),
             static_cast<long>(std::floor(q.z()))}]
          .push_back(i);
    }
    return cells;
  };

  // Occupied voxel count decreases (roughly) monotonically with voxel size.
  double small = 1e-6 * (hi - lo).norm();
  double large = (hi - lo).norm();
  auto cells = bucket(large);
  for (int iter = 0; iter < 60; ++iter) {
    const double mid = std::sqrt(small * large);
    cells = bucket(mid);
    const double n = static_cast<double>(cells.size());
    if (std::abs(n - target_points) <= 0.1 * target_points) break;
    if (n > target_points) {
      small = mid;
    } else {
      large = mid;
    }
  }

  PointCloud<3>::PointList points;
  PointCloud<3>::CovarianceList covariances;
  for (const auto& [key, members] : cells) {
    Eigen::Vector3d p = Eigen::Vector3d::Zero();
    Eigen::Matrix3d c = Eigen::Matrix3d::Zero();
    for (const std::size_t i : members) {
      p += cloud.point(i);
      c += cloud.covariance(i);
    }
    points.push_back(p / members.size());
    covariances.push_back(c / members.size());
  }
  return PointCloud<3>::FromTrusted(std::move(points), std::move(covariances));
}

std::vector<PointCloud<3>> GenerateModelSet(int count,
                                            std::size_t target_points,
                                            std::uint64_t seed,
                                            double base_std) {
  std::vector<PointCloud<3>> models;
  for (int shape = 0; shape < count; ++shape) {
    const PointCloud<3> dense =
        GenerateShape(shape, 6 * target_points, seed, base_std);
    // Thin one side so the downsampled models have uneven density.
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(shape), 0xde45u};
    Rng rng(seq);
    const Eigen::Vector3d dir = UnitVector(rng);
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < dense.size(); ++i) {
      const double s = dense.point(i).dot(dir);
      const double p = 0.35 + 0.65 / (1.0 + std::exp(-3.0 * s));
      if (Uniform(rng, 0.0, 1.0) < p) keep.push_back(i);
    }
    models.push_back(VoxelDownsample(dense.Select(keep), target_points));
  }
  return models;
}

}  // namespace dugma
