#include "dugma/energy.h"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/LU>

namespace dugma {
namespace {

const double kLogTwoPi = std::log(2.0 * M_PI);
const double kLogMinNormal = std::log(std::numeric_limits<double>::min());

// Below this the exponential is evaluated in log space only.
constexpr double kExpCutoff = -700.0;

template <int Dim>
double Quadratic(const Mat<Dim>& m, const Vec<Dim>& v) {
  return v.dot(m * v);
}

// log(exp(a) + exp(b)) without overflow or underflow.
double LogAddExp(double a, double b) {
  const double hi = std::max(a, b);
  const double lo = std::min(a, b);
  if (hi == -std::numeric_limits<double>::infinity()) return hi;
  return hi + std::log1p(std::exp(lo - hi));
}

double SafeExp(double x) {
  if (x < kLogMinNormal) return 0.0;
  return std::exp(x);
}

// Frobenius inner product.
template <int Dim>
double Inner(const Mat<Dim>& a, const Mat<Dim>& b) {
  return a.cwiseProduct(b).sum();
}

template <int Dim>
Eigen::VectorXd ChainRule(const PoseParams<Dim>& params,
                          const Mat<Dim>& grad_rotation,
                          const Vec<Dim>& grad_translation) {
  const auto jac = RotationJacobian<Dim>(params.rotation);
  Eigen::VectorXd grad(kPoseDof<Dim>);
  for (int k = 0; k < kRotationDof<Dim>; ++k) {
    grad(k) = Inner<Dim>(grad_rotation, jac[k]);
  }
  grad.template tail<Dim>() = grad_translation;
  return grad;
}

}  // namespace

template <int Dim>
InverseCovariance<Dim> InverseCovariance<Dim>::Compute(
    const Mat<Dim>& covariance) {
  Eigen::LLT<Mat<Dim>> llt(covariance);
  if (llt.info() != Eigen::Success) {
    throw GeometryError("covariance is singular or not positive definite");
  }
  InverseCovariance out;
  out.inverse = llt.solve(Mat<Dim>::Identity());
  out.inverse = 0.5 * (out.inverse + out.inverse.transpose());
  const Vec<Dim> diag = llt.matrixL().toDenseMatrix().diagonal();
  out.log_det = 2.0 * diag.array().log().sum();
  if (!std::isfinite(out.log_det) || !out.inverse.allFinite()) {
    throw GeometryError("covariance is singular");
  }
  return out;
}

template <int Dim>
double GaussianKernel(const Vec<Dim>& tau, const Vec<Dim>& point,
                      const Mat<Dim>& covariance) {
  const auto inv = InverseCovariance<Dim>::Compute(covariance);
  const Vec<Dim> d = tau - point;
  const double log_density =
      -0.5 * (Dim * kLogTwoPi + inv.log_det) - 0.5 * Quadratic<Dim>(inv.inverse, d);
  return std::exp(log_density);
}

template <int Dim>
double ProximityWeight(const Vec<Dim>& tau, const Vec<Dim>& candidate,
                       const Mat<Dim>& covariance) {
  const auto inv = InverseCovariance<Dim>::Compute(covariance);
  const Vec<Dim> d = candidate - tau;
  return std::exp(-0.5 * Quadratic<Dim>(inv.inverse, d));
}

template <int Dim>
PairCoefficients ComputePairCoefficients(const PointCloud<Dim>& fixed,
                                         const PointCloud<Dim>& moving_current,
                                         int iteration) {
  const Eigen::Index n = static_cast<Eigen::Index>(fixed.size());
  const Eigen::Index m = static_cast<Eigen::Index>(moving_current.size());

  std::vector<InverseCovariance<Dim>> fixed_inv(n);
  std::vector<InverseCovariance<Dim>> moving_inv(m);
  for (Eigen::Index i = 0; i < n; ++i) {
    fixed_inv[i] = InverseCovariance<Dim>::Compute(fixed.covariance(i));
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    moving_inv[j] = InverseCovariance<Dim>::Compute(moving_current.covariance(j));
  }

  PairCoefficients out;
  out.computed_at = iteration;
  out.values.resize(n, m);

#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec<Dim>& x = fixed.point(i);
    const Mat<Dim>& a = fixed_inv[i].inverse;
    const double log_norm_x = -0.5 * (Dim * kLogTwoPi + fixed_inv[i].log_det);
    for (Eigen::Index j = 0; j < m; ++j) {
      const Vec<Dim> d = moving_current.point(j) - x;
      const double log_norm =
          log_norm_x - 0.5 * (Dim * kLogTwoPi + moving_inv[j].log_det);
      const double ea = -0.5 * Quadratic<Dim>(a, d);
      const double eb = -0.5 * Quadratic<Dim>(moving_inv[j].inverse, d);
      const double hi = std::max(ea, eb);
      double value;
      if (log_norm + hi + std::log(2.0) < kLogMinNormal) {
        value = 0.0;
      } else if (hi < kExpCutoff || log_norm > 700.0 || log_norm < -700.0) {
        value = SafeExp(log_norm + LogAddExp(ea, eb));
      } else {
        value = std::exp(log_norm) * (std::exp(ea) + std::exp(eb));
        if (value < std::numeric_limits<double>::min()) value = 0.0;
      }
      out.values(i, j) = value;
    }
  }
  return out;
}

template <int Dim>
EnergyContext<Dim>::EnergyContext(PointCloud<Dim> fixed,
                                  PointCloud<Dim> moving_base,
                                  const PoseParams<Dim>& anchor, int iteration)
    : fixed_(std::move(fixed)),
      moving_base_(std::move(moving_base)),
      anchor_(anchor),
      moving_current_(ApplyTransform(anchor.ToTransform(), moving_base_)) {
  coefficients_ =
      ComputePairCoefficients<Dim>(fixed_, moving_current_, iteration);
  PrecomputeInverses();
}

template <int Dim>
EnergyContext<Dim>::EnergyContext(PointCloud<Dim> fixed,
                                  PointCloud<Dim> moving_base,
                                  const PoseParams<Dim>& anchor,
                                  PairCoefficients coefficients)
    : fixed_(std::move(fixed)),
      moving_base_(std::move(moving_base)),
      anchor_(anchor),
      moving_current_(ApplyTransform(anchor.ToTransform(), moving_base_)),
      coefficients_(std::move(coefficients)) {
  if (coefficients_.rows() != static_cast<Eigen::Index>(fixed_.size()) ||
      coefficients_.cols() != static_cast<Eigen::Index>(moving_base_.size())) {
    throw std::invalid_argument("pair coefficients do not match cloud sizes");
  }
  if (!coefficients_.values.allFinite() ||
      (coefficients_.values.array() < 0.0).any()) {
    throw std::invalid_argument(
        "pair coefficients must be finite and nonnegative");
  }
  PrecomputeInverses();
}

template <int Dim>
void EnergyContext<Dim>::PrecomputeInverses() {
  fixed_inverse_.resize(fixed_.size());
  base_inverse_.resize(moving_base_.size());
  for (std::size_t i = 0; i < fixed_.size(); ++i) {
    fixed_inverse_[i] = InverseCovariance<Dim>::Compute(fixed_.covariance(i)).inverse;
  }
  for (std::size_t j = 0; j < moving_base_.size(); ++j) {
    base_inverse_[j] =
        InverseCovariance<Dim>::Compute(moving_base_.covariance(j)).inverse;
  }
}

template <int Dim>
double Objective(const PoseParams<Dim>& params, const EnergyContext<Dim>& ctx) {
  const Mat<Dim> r = RotationFromParams<Dim>(params.rotation);
  const Vec<Dim>& t = params.translation;
  const auto& coeff = ctx.coefficients().values;
  const Eigen::Index n = coeff.rows();
  const Eigen::Index m = coeff.cols();

  std::vector<Vec<Dim>, Eigen::aligned_allocator<Vec<Dim>>> y(m);
  std::vector<Mat<Dim>, Eigen::aligned_allocator<Mat<Dim>>> y_inv(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    y[j] = r * ctx.moving_base().point(j) + t;
    y_inv[j] = r * ctx.base_inverse(j) * r.transpose();
  }

  std::vector<double> row_sum(n, 0.0);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec<Dim>& x = ctx.fixed().point(i);
    const Mat<Dim>& a = ctx.fixed_inverse(i);
    double sum = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      const double c = coeff(i, j);
      if (c == 0.0) continue;
      const Vec<Dim> d = y[j] - x;
      sum += c * Quadratic<Dim>(Mat<Dim>(a + y_inv[j]), d);
    }
    row_sum[i] = sum;
  }
  double total = 0.0;
  for (const double s : row_sum) total += s;
  return total;
}

template <int Dim>
Eigen::VectorXd ObjectiveGradient(const PoseParams<Dim>& params,
                                  const EnergyContext<Dim>& ctx) {
  const Mat<Dim> r = RotationFromParams<Dim>(params.rotation);
  const Vec<Dim>& t = params.translation;
  const auto& coeff = ctx.coefficients().values;
  const Eigen::Index n = coeff.rows();
  const Eigen::Index m = coeff.cols();

  std::vector<Vec<Dim>, Eigen::aligned_allocator<Vec<Dim>>> y(m);
  std::vector<Mat<Dim>, Eigen::aligned_allocator<Mat<Dim>>> y_inv(m);
  std::vector<Mat<Dim>, Eigen::aligned_allocator<Mat<Dim>>> r_b(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    y[j] = r * ctx.moving_base().point(j) + t;
    r_b[j] = r * ctx.base_inverse(j);
    y_inv[j] = r_b[j] * r.transpose();
  }

  // d/dR of d^T (A + R B R^T) d with d = R y0 + t - x:
  //   2 S d y0^T + 2 d d^T R B.
  std::vector<Mat<Dim>, Eigen::aligned_allocator<Mat<Dim>>> row_grad_r(n);
  std::vector<Vec<Dim>, Eigen::aligned_allocator<Vec<Dim>>> row_grad_t(n);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec<Dim>& x = ctx.fixed().point(i);
    const Mat<Dim>& a = ctx.fixed_inverse(i);
    Mat<Dim> gr = Mat<Dim>::Zero();
    Vec<Dim> gt = Vec<Dim>::Zero();
    for (Eigen::Index j = 0; j < m; ++j) {
      const double c = coeff(i, j);
      if (c == 0.0) continue;
      const Vec<Dim> d = y[j] - x;
      const Vec<Dim> sd = (a + y_inv[j]) * d;
      gt += 2.0 * c * sd;
      gr += 2.0 * c *
            (sd * ctx.moving_base().point(j).transpose() +
             d * (d.transpose() * r_b[j]));
    }
    row_grad_r[i] = gr;
    row_grad_t[i] = gt;
  }
  Mat<Dim> grad_r = Mat<Dim>::Zero();
  Vec<Dim> grad_t = Vec<Dim>::Zero();
  for (Eigen::Index i = 0; i < n; ++i) {
    grad_r += row_grad_r[i];
    grad_t += row_grad_t[i];
  }
  return ChainRule<Dim>(params, grad_r, grad_t);
}

template <int Dim>
ReducedObjective<Dim>::ReducedObjective(const EnergyContext<Dim>& ctx) {
  const auto& coeff = ctx.coefficients().values;
  const Eigen::Index n = coeff.rows();
  const Eigen::Index m = coeff.cols();

  fixed_points_.assign(ctx.fixed().points().begin(), ctx.fixed().points().end());
  base_points_.assign(ctx.moving_base().points().begin(),
                      ctx.moving_base().points().end());
  fixed_inverse_.resize(n);
  base_inverse_.resize(m);
  for (Eigen::Index i = 0; i < n; ++i) fixed_inverse_[i] = ctx.fixed_inverse(i);
  for (Eigen::Index j = 0; j < m; ++j) base_inverse_[j] = ctx.base_inverse(j);

  row_weight_.assign(n, 0.0);
  row_first_.assign(n, Vec<Dim>::Zero());
  row_second_.assign(n, Mat<Dim>::Zero());
  col_weight_.assign(m, 0.0);
  col_first_.assign(m, Vec<Dim>::Zero());
  col_second_.assign(m, Mat<Dim>::Zero());

#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    double w = 0.0;
    Vec<Dim> first = Vec<Dim>::Zero();
    Mat<Dim> second = Mat<Dim>::Zero();
    for (Eigen::Index j = 0; j < m; ++j) {
      const double c = coeff(i, j);
      if (c == 0.0) continue;
      const Vec<Dim>& y0 = base_points_[j];
      w += c;
      first += c * y0;
      second.noalias() += c * y0 * y0.transpose();
    }
    row_weight_[i] = w;
    row_first_[i] = first;
    row_second_[i] = second;
  }

#pragma omp parallel for schedule(static)
  for (Eigen::Index j = 0; j < m; ++j) {
    double w = 0.0;
    Vec<Dim> first = Vec<Dim>::Zero();
    Mat<Dim> second = Mat<Dim>::Zero();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double c = coeff(i, j);
      if (c == 0.0) continue;
      const Vec<Dim>& x = fixed_points_[i];
      w += c;
      first += c * x;
      second.noalias() += c * x * x.transpose();
    }
    col_weight_[j] = w;
    col_first_[j] = first;
    col_second_[j] = second;
  }

  for (const double w : row_weight_) total_weight_ += w;
}

template <int Dim>
double ReducedObjective<Dim>::Value(const PoseParams<Dim>& params) const {
  const Mat<Dim> r = RotationFromParams<Dim>(params.rotation);
  const Vec<Dim>& t = params.translation;
  double total = 0.0;

  // sum_j C_ij (R y0_j + v)^T A (R y0_j + v), v = t - x_i.
  for (std::size_t i = 0; i < row_weight_.size(); ++i) {
    if (row_weight_[i] == 0.0) continue;
    const Mat<Dim>& a = fixed_inverse_[i];
    const Vec<Dim> v = t - fixed_points_[i];
    const Mat<Dim> rs = r * row_second_[i] * r.transpose();
    total += Inner<Dim>(a, rs) + 2.0 * v.dot(a * (r * row_first_[i])) +
             row_weight_[i] * Quadratic<Dim>(a, v);
  }
  // sum_i C_ij (u - R^T x_i)^T B (u - R^T x_i), u = y0_j + R^T t.
  const Vec<Dim> rt_t = r.transpose() * t;
  for (std::size_t j = 0; j < col_weight_.size(); ++j) {
    if (col_weight_[j] == 0.0) continue;
    const Mat<Dim>& b = base_inverse_[j];
    const Vec<Dim> u = base_points_[j] + rt_t;
    const Mat<Dim> rs = r.transpose() * col_second_[j] * r;
    total += col_weight_[j] * Quadratic<Dim>(b, u) -
             2.0 * u.dot(b * (r.transpose() * col_first_[j])) +
             Inner<Dim>(b, rs);
  }
  return total;
}

template <int Dim>
Eigen::VectorXd ReducedObjective<Dim>::Gradient(
    const PoseParams<Dim>& params) const {
  const Mat<Dim> r = RotationFromParams<Dim>(params.rotation);
  const Vec<Dim>& t = params.translation;
  Mat<Dim> grad_r = Mat<Dim>::Zero();
  Vec<Dim> grad_t = Vec<Dim>::Zero();

  for (std::size_t i = 0; i < row_weight_.size(); ++i) {
    if (row_weight_[i] == 0.0) continue;
    const Mat<Dim>& a = fixed_inverse_[i];
    const Vec<Dim> v = t - fixed_points_[i];
    const Vec<Dim> av = a * v;
    grad_r += 2.0 * (a * r * row_second_[i] + av * row_first_[i].transpose());
    grad_t += 2.0 * (a * (r * row_first_[i]) + row_weight_[i] * av);
  }
  const Vec<Dim> rt_t = r.transpose() * t;
  for (std::size_t j = 0; j < col_weight_.size(); ++j) {
    if (col_weight_[j] == 0.0) continue;
    const Mat<Dim>& b = base_inverse_[j];
    const Vec<Dim> u = base_points_[j] + rt_t;
    const Vec<Dim> bu = b * u;
    const Vec<Dim> b_rt_first = b * (r.transpose() * col_first_[j]);
    grad_t += 2.0 * r * (col_weight_[j] * bu - b_rt_first);
    grad_r += 2.0 * (col_weight_[j] * t * bu.transpose() -
                     t * b_rt_first.transpose() -
                     col_first_[j] * bu.transpose() + col_second_[j] * r * b);
  }
  return ChainRule<Dim>(params, grad_r, grad_t);
}

template <int Dim>
double ExpectedLossOracle(const PoseParams<Dim>& params,
                          const EnergyContext<Dim>& ctx) {
  const Mat<Dim> r = RotationFromParams<Dim>(params.rotation);
  const PointCloud<Dim>& fixed = ctx.fixed();
  const PointCloud<Dim>& old_moving = ctx.moving_current();
  double total = 0.0;
  for (std::size_t i = 0; i < fixed.size(); ++i) {
    const Vec<Dim>& x = fixed.point(i);
    const Mat<Dim>& sx = fixed.covariance(i);
    for (std::size_t j = 0; j < old_moving.size(); ++j) {
      // Old state: positions and covariances the coefficients were frozen at.
      const Vec<Dim>& y_old = old_moving.point(j);
      const Mat<Dim>& sy_old = old_moving.covariance(j);
      const double p_at_x =
          GaussianKernel<Dim>(x, x, sx) * GaussianKernel<Dim>(x, y_old, sy_old);
      const double p_at_y = GaussianKernel<Dim>(y_old, x, sx) *
                            GaussianKernel<Dim>(y_old, y_old, sy_old);

      // New state.
      const Vec<Dim> y_new = r * ctx.moving_base().point(j) + params.translation;
      const Mat<Dim> sy_new =
          r * ctx.moving_base().covariance(j) * r.transpose();
      const Mat<Dim> s = Mat<Dim>(sx.inverse()) + Mat<Dim>(sy_new.inverse());
      auto mahalanobis_like = [&](const Vec<Dim>& tau) {
        return 0.5 * Quadratic<Dim>(s, Vec<Dim>(tau - x)) +
               0.5 * Quadratic<Dim>(s, Vec<Dim>(tau - y_new));
      };
      total += p_at_x * mahalanobis_like(x) + p_at_y * mahalanobis_like(y_new);
    }
  }
  return 2.0 * total;
}

template <int Dim>
double EnergyGridOracle(const PointCloud<Dim>& fixed,
                        const PointCloud<Dim>& moving_current,
                        const GridSpec<Dim>& grid) {
  long long nodes = 1;
  for (int k = 0; k < Dim; ++k) {
    if (grid.cells[k] <= 0 || !(grid.upper(k) > grid.lower(k))) {
      throw std::invalid_argument("energy grid is empty");
    }
    nodes *= grid.cells[k];
  }
  if (fixed.empty() || moving_current.empty()) {
    throw std::invalid_argument("energy grid oracle needs non-empty clouds");
  }
  const Vec<Dim> spacing =
      (grid.upper - grid.lower).array() /
      Eigen::Array<double, Dim, 1>::NullaryExpr(
          [&](Eigen::Index k) { return static_cast<double>(grid.cells[k]); });
  const double cell_volume = spacing.prod();

  auto nearest = [](const PointCloud<Dim>& cloud, const Vec<Dim>& p) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < cloud.size(); ++k) {
      const double d = (cloud.point(k) - p).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    return cloud.point(best);
  };
  using PointList = typename PointCloud<Dim>::PointList;
  PointList fixed_candidates;
  PointList moving_candidates;
  for (const auto& x : fixed.points()) {
    fixed_candidates.push_back(nearest(moving_current, x));
  }
  for (const auto& y : moving_current.points()) {
    moving_candidates.push_back(nearest(fixed, y));
  }

  // log of a proximity-weighted mixture sum_n w_n(tau) g_n(tau).
  auto log_mixture = [](const PointCloud<Dim>& cloud, const PointList& cand,
                        const Vec<Dim>& tau) {
    double acc = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < cloud.size(); ++k) {
      const auto inv = InverseCovariance<Dim>::Compute(cloud.covariance(k));
      const double log_g = -0.5 * (Dim * kLogTwoPi + inv.log_det) -
                           0.5 * Quadratic<Dim>(inv.inverse,
                                                Vec<Dim>(tau - cloud.point(k)));
      const double log_w =
          -0.5 * Quadratic<Dim>(inv.inverse, Vec<Dim>(cand[k] - tau));
      acc = LogAddExp(acc, log_g + log_w);
    }
    return acc;
  };
  auto density_sum = [](const PointCloud<Dim>& cloud, const Vec<Dim>& tau) {
    double s = 0.0;
    for (std::size_t k = 0; k < cloud.size(); ++k) {
      s += GaussianKernel<Dim>(tau, cloud.point(k), cloud.covariance(k));
    }
    return s;
  };

  double energy = 0.0;
  for (long long flat = 0; flat < nodes; ++flat) {
    Vec<Dim> tau;
    long long rem = flat;
    for (int k = 0; k < Dim; ++k) {
      const long long idx = rem % grid.cells[k];
      rem /= grid.cells[k];
      tau(k) = grid.lower(k) + (static_cast<double>(idx) + 0.5) * spacing(k);
    }
    // sum_ij g_xi g_yj factorizes into the product of the two sums.
    const double p = density_sum(fixed, tau) * density_sum(moving_current, tau);
    if (p == 0.0) continue;
    const double log_gg = log_mixture(fixed, fixed_candidates, tau) +
                          log_mixture(moving_current, moving_candidates, tau);
    energy += p * log_gg * cell_volume;
  }
  return energy;
}

#define DUGMA_INSTANTIATE_ENERGY(D)                                           \
  template struct InverseCovariance<D>;                                       \
  template double GaussianKernel<D>(const Vec<D>&, const Vec<D>&,             \
                                    const Mat<D>&);                           \
  template double ProximityWeight<D>(const Vec<D>&, const Vec<D>&,            \
                                     const Mat<D>&);                          \
  template PairCoefficients ComputePairCoefficients<D>(                       \
      const PointCloud<D>&, const PointCloud<D>&, int);                       \
  template class EnergyContext<D>;                                            \
  template double Objective<D>(const PoseParams<D>&, const EnergyContext<D>&); \
  template Eigen::VectorXd ObjectiveGradient<D>(const PoseParams<D>&,         \
                                                const EnergyContext<D>&);     \
  template class ReducedObjective<D>;                                         \
  template double ExpectedLossOracle<D>(const PoseParams<D>&,                 \
                                        const EnergyContext<D>&);             \
  template double EnergyGridOracle<D>(const PointCloud<D>&,                   \
                                      const PointCloud<D>&,                   \
                                      const GridSpec<D>&);

DUGMA_INSTANTIATE_ENERGY(2)
DUGMA_INSTANTIATE_ENERGY(3)

#undef DUGMA_INSTANTIATE_ENERGY

}  // namespace dugma
