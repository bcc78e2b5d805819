#pragma once

#include "dugma/geometry.h"

namespace dugma {

// Depth-sensor uncertainty model U(alpha, d) = exp(w1 (1 - cos alpha) + w2 d).
struct SensorModelParams {
  double w1 = 1.6658;
  double w2 = 0.2776;  // per metre

  // Weights for which U(pi/3, 0) == U(0, 3) == calibration. The default
  // weights correspond to a calibration value of about 2.3.
  static SensorModelParams FromCalibration(double calibration);

  void Validate() const;
};

// alpha: angle between viewing ray and surface normal in [0, pi/2);
// depth >= 0 in metres. Throws std::invalid_argument outside the domain.
double SensorUncertainty(double alpha, double depth,
                         const SensorModelParams& params = {});

// U * I.
template <int Dim>
Mat<Dim> CovarianceFromUncertainty(double uncertainty);

// diag(std_1^2, ..., std_D^2). Throws std::invalid_argument unless every
// std is positive and finite.
template <int Dim>
Mat<Dim> CovarianceFromNoiseStd(const Vec<Dim>& stds);

// Runtime-dimension variant; rejects sizes other than 2 and 3.
Eigen::MatrixXd CovarianceFromNoiseStd(const Eigen::VectorXd& stds);

}  // namespace dugma
