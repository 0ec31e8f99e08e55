#pragma once

#include <Eigen/Dense>

// Rotation-vector (exponential coordinates) helpers for SO(3).
namespace pstraj::so3 {

Eigen::Matrix3d skew(const Eigen::Vector3d& v);

Eigen::Matrix3d exp(const Eigen::Vector3d& theta);

/// Rotation vector of R, with norm in [0, pi].
Eigen::Vector3d log(const Eigen::Matrix3d& R);

/// Right Jacobian: exp(theta + d) ~= exp(theta) exp(Jr(theta) d).
Eigen::Matrix3d right_jacobian(const Eigen::Vector3d& theta);

Eigen::Matrix3d right_jacobian_inverse(const Eigen::Vector3d& theta);

/// d/dtheta of right_jacobian_inverse(theta) * omega, omega held fixed.
Eigen::Matrix3d right_jacobian_inverse_times_vector_derivative(
    const Eigen::Vector3d& theta, const Eigen::Vector3d& omega);

}  // namespace pstraj::so3
