#include "dugma/uncertainty.h"

#include <cmath>
#include <stdexcept>

namespace dugma {

SensorModelParams SensorModelParams::FromCalibration(double calibration) {
  if (!(calibration >= 1.0) || !std::isfinite(calibration)) {
    throw std::invalid_argument("sensor calibration value must be >= 1");
  }
  const double log_c = std::log(calibration);
  SensorModelParams params;
  params.w1 = log_c / (1.0 - std::cos(M_PI / 3.0));
  params.w2 = log_c / 3.0;
  return params;
}

void SensorModelParams::Validate() const {
  if (!(w1 >= 0.0) || !(w2 >= 0.0) || !std::isfinite(w1) ||
      !std::isfinite(w2)) {
    throw std::invalid_argument("sensor weights must be finite and >= 0");
  }
}

double SensorUncertainty(double alpha, double depth,
                         const SensorModelParams& params) {
  params.Validate();
  if (!(alpha >= 0.0) || !(alpha < M_PI / 2.0)) {
    throw std::invalid_argument(
        "surface angle must lie in [0, pi/2); grazing surfaces are undefined");
  }
  if (!(depth >= 0.0) || !std::isfinite(depth)) {
    throw std::invalid_argument("depth must be finite and >= 0");
  }
  return std::exp(params.w1 * (1.0 - std::cos(alpha)) + params.w2 * depth);
}

template <int Dim>
Mat<Dim> CovarianceFromUncertainty(double uncertainty) {
  if (!(uncertainty > 0.0) || !std::isfinite(uncertainty)) {
    throw std::invalid_argument("uncertainty must be positive");
  }
  return uncertainty * Mat<Dim>::Identity();
}

template <int Dim>
Mat<Dim> CovarianceFromNoiseStd(const Vec<Dim>& stds) {
  if (!stds.allFinite() || (stds.array() <= 0.0).any()) {
    throw std::invalid_argument("noise standard deviations must be positive");
  }
  return stds.array().square().matrix().asDiagonal();
}

Eigen::MatrixXd CovarianceFromNoiseStd(const Eigen::VectorXd& stds) {
  if (stds.size() == 2) {
    return CovarianceFromNoiseStd<2>(Vec<2>(stds));
  }
  if (stds.size() == 3) {
    return CovarianceFromNoiseStd<3>(Vec<3>(stds));
  }
  throw std::invalid_argument("noise std vector must have 2 or 3 entries");
}

template Mat<2> CovarianceFromUncertainty<2>(double);
template Mat<3> CovarianceFromUncertainty<3>(double);
template Mat<2> CovarianceFromNoiseStd<2>(const Vec<2>&);
template Mat<3> CovarianceFromNoiseStd<3>(const Vec<3>&);

}  // namespace dugma
