#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>

#include "dugma/geometry.h"

namespace dugma {

// Inverse and log-determinant of a covariance, from one Cholesky
// factorization. Throws GeometryError if the matrix is not SPD.
template <int Dim>
struct InverseCovariance {
  Mat<Dim> inverse;
  double log_det = 0.0;

  static InverseCovariance Compute(const Mat<Dim>& covariance);
};

// Normalized Gaussian density N(tau; point, covariance).
template <int Dim>
double GaussianKernel(const Vec<Dim>& tau, const Vec<Dim>& point,
                      const Mat<Dim>& covariance);

// Unnormalized proximity weight exp(-1/2 (c - tau)^T S^-1 (c - tau)); equals
// 1 when the candidate sits on tau.
template <int Dim>
double ProximityWeight(const Vec<Dim>& tau, const Vec<Dim>& candidate,
                       const Mat<Dim>& covariance);

// N x M matrix of pair weights
//   C_ij = (2 pi)^-D |Sx_i|^-1/2 |Sy_j|^-1/2
//          (exp(-1/2 d^T Sx_i^-1 d) + exp(-1/2 d^T Sy_j^-1 d)),  d = y_j - x_i
// frozen during one minimization step.
struct PairCoefficients {
  Eigen::MatrixXd values;
  int computed_at = 0;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

// Evaluated in log space; entries below the smallest normal double are
// flushed to exactly 0. Parallel over rows.
template <int Dim>
PairCoefficients ComputePairCoefficients(const PointCloud<Dim>& fixed,
                                         const PointCloud<Dim>& moving_current,
                                         int iteration = 0);

// Frozen per-iteration state of the objective. The moving cloud is held in
// its base frame (covariances already scaled for this iteration); `anchor` is
// the pose at which the coefficients were computed, so
//   moving_current = anchor(moving_base).
template <int Dim>
class EnergyContext {
 public:
  EnergyContext(PointCloud<Dim> fixed, PointCloud<Dim> moving_base,
                const PoseParams<Dim>& anchor, int iteration = 0);

  // Uses caller-supplied coefficients; their shape must be
  // (fixed.size(), moving_base.size()).
  EnergyContext(PointCloud<Dim> fixed, PointCloud<Dim> moving_base,
                const PoseParams<Dim>& anchor, PairCoefficients coefficients);

  const PointCloud<Dim>& fixed() const { return fixed_; }
  const PointCloud<Dim>& moving_base() const { return moving_base_; }
  const PointCloud<Dim>& moving_current() const { return moving_current_; }
  const PoseParams<Dim>& anchor() const { return anchor_; }
  const PairCoefficients& coefficients() const { return coefficients_; }

  const Mat<Dim>& fixed_inverse(std::size_t i) const {
    return fixed_inverse_[i];
  }
  const Mat<Dim>& base_inverse(std::size_t j) const { return base_inverse_[j]; }

 private:
  void PrecomputeInverses();

  PointCloud<Dim> fixed_;
  PointCloud<Dim> moving_base_;
  PoseParams<Dim> anchor_;
  PointCloud<Dim> moving_current_;
  PairCoefficients coefficients_;
  std::vector<Mat<Dim>, Eigen::aligned_allocator<Mat<Dim>>> fixed_inverse_;
  std::vector<Mat<Dim>, Eigen::aligned_allocator<Mat<Dim>>> base_inverse_;
};

// sum_ij C_ij (y_j - x_i)^T (Sx_i^-1 + Sy_j^-1) (y_j - x_i) with
// y_j = R y0_j + t and Sy_j^-1 = R Sy0_j^-1 R^T taken from `params`.
// Direct O(NM) evaluation.
template <int Dim>
double Objective(const PoseParams<Dim>& params, const EnergyContext<Dim>& ctx);

// Analytic gradient of Objective w.r.t. (rotation params, translation).
// Direct O(NM) evaluation.
template <int Dim>
Eigen::VectorXd ObjectiveGradient(const PoseParams<Dim>& params,
                                  const EnergyContext<Dim>& ctx);

// The same objective after collapsing the frozen coefficients into per-point
// weighted moments. Construction is O(NM); every evaluation afterwards is
// O(N + M), which is what makes the inner minimization cheap.
template <int Dim>
class ReducedObjective {
 public:
  explicit ReducedObjective(const EnergyContext<Dim>& ctx);

  double Value(const PoseParams<Dim>& params) const;
  Eigen::VectorXd Gradient(const PoseParams<Dim>& params) const;

  // Sum of all pair coefficients.
  double total_weight() const { return total_weight_; }

 private:
  template <typename T>
  using Aligned = std::vector<T, Eigen::aligned_allocator<T>>;

  // Fixed-side moments: sum_j C_ij {1, y0_j, y0_j y0_j^T}.
  std::vector<double> row_weight_;
  Aligned<Vec<Dim>> row_first_;
  Aligned<Mat<Dim>> row_second_;
  // Moving-side moments: sum_i C_ij {1, x_i, x_i x_i^T}.
  std::vector<double> col_weight_;
  Aligned<Vec<Dim>> col_first_;
  Aligned<Mat<Dim>> col_second_;

  Aligned<Vec<Dim>> fixed_points_;
  Aligned<Mat<Dim>> fixed_inverse_;
  Aligned<Vec<Dim>> base_points_;
  Aligned<Mat<Dim>> base_inverse_;
  double total_weight_ = 0.0;
};

// Test oracle. Sums, for every pair and for tau in {x_i, y_j}, the old joint
// density g_x(tau) g_y(tau) (evaluated at the anchor pose) times the
// Mahalanobis-like term
//   1/2 (tau - x)^T S (tau - x) + 1/2 (tau - y)^T S (tau - y),
//   S = Sx^-1 + Sy^-1,
// evaluated at `params`. The 1/2 is common to both evaluation points, and the
// expanded objective carries it as an overall factor of 2 instead; the result
// is multiplied by 2 so the two routes are directly comparable. O(NM), small
// inputs only.
template <int Dim>
double ExpectedLossOracle(const PoseParams<Dim>& params,
                          const EnergyContext<Dim>& ctx);

// Regular grid of cells for the energy integral. Nodes sit at cell centres.
template <int Dim>
struct GridSpec {
  Vec<Dim> lower = Vec<Dim>::Zero();
  Vec<Dim> upper = Vec<Dim>::Zero();
  std::array<int, Dim> cells{};
};

// Test oracle: midpoint-rule approximation of
//   E = integral P(tau) log[G_X(tau) G_Y(tau)] dtau
// with P(tau) = sum_ij g_xi(tau) g_yj(tau) and the proximity-weighted
// mixtures G_X, G_Y. The candidate corresponding point of each x_n is its
// nearest neighbour in the moving cloud (and vice versa). Throws
// std::invalid_argument on an empty grid.
template <int Dim>
double EnergyGridOracle(const PointCloud<Dim>& fixed,
                        const PointCloud<Dim>& moving_current,
                        const GridSpec<Dim>& grid);

}  // namespace dugma
