#include "pstraj/rotation.hpp"

#include <cmath>

namespace pstraj::so3 {

namespace {

// Below this angle the closed forms lose digits to cancellation.
constexpr double kSeriesAngle = 1e-2;

// Coefficient of skew(theta)^2 in Jr^-1: 1/phi^2 - cot(phi/2) / (2 phi).
double inv_coeff(double phi) {
  if (phi < kSeriesAngle) {
    const double p2 = phi * phi;
    return 1.0 / 12.0 + p2 / 720.0 + p2 * p2 / 30240.0;
  }
  return 1.0 / (phi * phi) - 1.0 / (2.0 * phi * std::tan(0.5 * phi));
}

// d(inv_coeff)/dphi divided by phi.
double inv_coeff_slope(double phi) {
  if (phi < kSeriesAngle) {
    const double p2 = phi * phi;
    return 1.0 / 360.0 + p2 / 7560.0 + p2 * p2 / 201600.0;
  }
  const double s = std::sin(0.5 * phi);
  const double cot = 1.0 / std::tan(0.5 * phi);
  const double dc = -2.0 / (phi * phi * phi) + 1.0 / (4.0 * phi * s * s) +
                    cot / (2.0 * phi * phi);
  return dc / phi;
}

}  // namespace

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Eigen::Matrix3d exp(const Eigen::Vector3d& theta) {
  const double phi = theta.norm();
  if (phi < 1e-12) return Eigen::Matrix3d::Identity() + skew(theta);
  return Eigen::AngleAxisd(phi, theta / phi).toRotationMatrix();
}

Eigen::Vector3d log(const Eigen::Matrix3d& R) {
  const Eigen::AngleAxisd aa(R);
  return aa.angle() * aa.axis();
}

Eigen::Matrix3d right_jacobian(const Eigen::Vector3d& theta) {
  const double phi = theta.norm();
  const Eigen::Matrix3d k = skew(theta);
  double a, b;
  if (phi < kSeriesAngle) {
    const double p2 = phi * phi;
    a = 0.5 - p2 / 24.0 + p2 * p2 / 720.0;
    b = 1.0 / 6.0 - p2 / 120.0 + p2 * p2 / 5040.0;
  } else {
    a = (1.0 - std::cos(phi)) / (phi * phi);
    b = (phi - std::sin(phi)) / (phi * phi * phi);
  }
  return Eigen::Matrix3d::Identity() - a * k + b * k * k;
}

Eigen::Matrix3d right_jacobian_inverse(const Eigen::Vector3d& theta) {
  const Eigen::Matrix3d k = skew(theta);
  return Eigen::Matrix3d::Identity() + 0.5 * k + inv_coeff(theta.norm()) * k * k;
}

Eigen::Matrix3d right_jacobian_inverse_times_vector_derivative(
    const Eigen::Vector3d& theta, const Eigen::Vector3d& omega) {
  const double phi = theta.norm();
  const Eigen::Vector3d double_cross = theta.cross(theta.cross(omega));
  Eigen::Matrix3d d_double_cross =
      theta.dot(omega) * Eigen::Matrix3d::Identity() +
      theta * omega.transpose() - 2.0 * omega * theta.transpose();
  return -0.5 * skew(omega) + inv_coeff(phi) * d_double_cross +
         inv_coeff_slope(phi) * double_cross * theta.transpose();
}

}  // namespace pstraj::so3
