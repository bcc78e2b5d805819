#pragma once

#include <random>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/LU>

#include "dugma/geometry.h"

namespace dugma::testing {

inline double Uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

template <int Dim>
Vec<Dim> RandomVec(std::mt19937_64& rng, double scale = 1.0) {
  Vec<Dim> v;
  for (int k = 0; k < Dim; ++k) v(k) = Uniform(rng, -scale, scale);
  return v;
}

// Random SPD matrix with eigenvalues in [lo, hi].
template <int Dim>
Mat<Dim> RandomSpd(std::mt19937_64& rng, double lo = 0.2, double hi = 2.0) {
  Mat<Dim> a;
  for (int r = 0; r < Dim; ++r) {
    for (int c = 0; c < Dim; ++c) a(r, c) = Uniform(rng, -1.0, 1.0);
  }
  // Orthonormal basis from a QR-like Gram-Schmidt of a random matrix.
  Mat<Dim> q = a;
  for (int c = 0; c < Dim; ++c) {
    for (int k = 0; k < c; ++k) q.col(c) -= q.col(k).dot(q.col(c)) * q.col(k);
    q.col(c).normalize();
  }
  Vec<Dim> eig;
  for (int k = 0; k < Dim; ++k) eig(k) = Uniform(rng, lo, hi);
  Mat<Dim> s = q * eig.asDiagonal() * q.transpose();
  return 0.5 * (s + s.transpose());
}

template <int Dim>
RotationVec<Dim> RandomRotationParams(std::mt19937_64& rng,
                                      double max_angle = 3.0) {
  RotationVec<Dim> p;
  if constexpr (Dim == 2) {
    p(0) = Uniform(rng, -max_angle, max_angle);
  } else {
    Vec<3> axis = RandomVec<3>(rng);
    while (axis.norm() < 1e-3) axis = RandomVec<3>(rng);
    p = axis.normalized() * Uniform(rng, 0.0, max_angle);
  }
  return p;
}

template <int Dim>
Mat<Dim> RandomRotation(std::mt19937_64& rng) {
  return RotationFromParams<Dim>(RandomRotationParams<Dim>(rng));
}

template <int Dim>
PointCloud<Dim> RandomCloud(std::mt19937_64& rng, int n, double extent = 1.0,
                            double cov_lo = 0.2, double cov_hi = 2.0) {
  typename PointCloud<Dim>::PointList points;
  typename PointCloud<Dim>::CovarianceList covs;
  for (int i = 0; i < n; ++i) {
    points.push_back(RandomVec<Dim>(rng, extent));
    covs.push_back(RandomSpd<Dim>(rng, cov_lo, cov_hi));
  }
  return PointCloud<Dim>(std::move(points), std::move(covs));
}

inline double RelativeError(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

}  // namespace dugma::testing
