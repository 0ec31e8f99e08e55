#include "pstraj/dynamics.hpp"

#include "pstraj/rotation.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace pstraj {

namespace {

constexpr double kChartMargin = 1e-6;

void check_chart(const Eigen::Vector3d& theta) {
  if (!theta.allFinite() || theta.norm() >= std::numbers::pi - kChartMargin) {
    throw ChartError("rotation vector norm " + std::to_string(theta.norm()) +
                     " outside the chart");
  }
}

Eigen::Vector4d motor_vector(const Eigen::VectorXd& u) {
  if (u.size() != quad::kMotors) {
    throw std::invalid_argument("quadrotor control must have 4 motor speeds");
  }
  return u;
}

}  // namespace

LinearModel::LinearModel(Eigen::MatrixXd A, Eigen::MatrixXd B)
    : A_(std::move(A)), B_(std::move(B)) {
  if (A_.rows() != A_.cols()) {
    throw std::invalid_argument("linear model: A must be square");
  }
  if (B_.rows() != A_.rows()) {
    throw std::invalid_argument("linear model: B must have as many rows as A");
  }
  if (!A_.allFinite() || !B_.allFinite()) {
    throw std::invalid_argument("linear model: A and B must be finite");
  }
}

Eigen::VectorXd LinearModel::derivative(const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& u,
                                        double) const {
  if (x.size() != A_.rows() || u.size() != B_.cols()) {
    throw std::invalid_argument("linear model: dimension mismatch");
  }
  return A_ * x + B_ * u;
}

void LinearModel::jacobians(const Eigen::VectorXd&, const Eigen::VectorXd&,
                            double, Eigen::MatrixXd& F,
                            Eigen::MatrixXd& G) const {
  F = A_;
  G = B_;
}

LinearModel linear_test_model(Eigen::MatrixXd A, Eigen::MatrixXd B) {
  return LinearModel(std::move(A), std::move(B));
}

void QuadrotorParameters::validate() const {
  auto require = [](bool ok, const char* name) {
    if (!ok) throw std::invalid_argument(std::string("invalid quadrotor parameter: ") + name);
  };
  require(mass > 0.0, "mass");
  require(inertia_diag.minCoeff() > 0.0, "inertia");
  require(arm_length > 0.0, "arm_length");
  require(thrust_coeff > 0.0, "thrust_coeff");
  require(drag_coeff >= 0.0, "drag_coeff");
  require(torque_ratio > 0.0, "torque_ratio");
  require(gravity > 0.0, "gravity");
}

double QuadrotorParameters::hover_speed() const {
  return std::sqrt(mass * gravity / (4.0 * thrust_coeff));
}

Eigen::Matrix<double, 3, 4> QuadrotorParameters::mixing_matrix() const {
  const double l = arm_length;
  const double c = torque_ratio;
  Eigen::Matrix<double, 3, 4> m;
  m << l, l, -l, -l,
       -l, l, l, -l,
       -c, c, -c, c;
  return m;
}

QuadrotorState QuadrotorState::unpack(const Eigen::VectorXd& x) {
  if (x.size() != kDim) {
    throw std::invalid_argument("quadrotor state must have 12 components");
  }
  QuadrotorState s;
  s.position = x.segment<3>(quad::kPos);
  s.rotation = x.segment<3>(quad::kRot);
  s.velocity = x.segment<3>(quad::kVel);
  s.angular_rate = x.segment<3>(quad::kRate);
  return s;
}

Eigen::VectorXd QuadrotorState::pack() const {
  Eigen::VectorXd x(kDim);
  x << position, rotation, velocity, angular_rate;
  return x;
}

Eigen::Vector3d quad_force_world(const QuadrotorState& state,
                                 const Eigen::Vector4d& motor_speeds,
                                 const QuadrotorParameters& params) {
  const Eigen::Vector3d body_z = so3::exp(state.rotation).col(2);
  const double thrust = params.thrust_coeff * motor_speeds.squaredNorm();
  const Eigen::Vector3d gravity(0.0, 0.0, -params.mass * params.gravity);
  const Eigen::Vector3d drag =
      -params.drag_coeff * state.velocity.norm() * state.velocity;
  return gravity + thrust * body_z + drag;
}

Eigen::Vector3d quad_torque_body(const Eigen::Vector4d& motor_speeds,
                                 const Eigen::Vector3d& /*angular_rate*/,
                                 const QuadrotorParameters& params) {
  const Eigen::Vector4d thrusts =
      params.thrust_coeff * motor_speeds.array().square().matrix();
  return params.mixing_matrix() * thrusts;
}

Eigen::VectorXd quad_derivatives(const QuadrotorState& state,
                                 const Eigen::Vector4d& motor_speeds,
                                 const QuadrotorParameters& params) {
  check_chart(state.rotation);
  const Eigen::Vector3d inertia = params.inertia_diag;
  const Eigen::Vector3d& w = state.angular_rate;
  const Eigen::Vector3d torque = quad_torque_body(motor_speeds, w, params);
  const Eigen::Vector3d gyro = w.cross(inertia.cwiseProduct(w));

  Eigen::VectorXd xdot(QuadrotorState::kDim);
  xdot.segment<3>(quad::kPos) = state.velocity;
  xdot.segment<3>(quad::kRot) = so3::right_jacobian_inverse(state.rotation) * w;
  xdot.segment<3>(quad::kVel) =
      quad_force_world(state, motor_speeds, params) / params.mass;
  xdot.segment<3>(quad::kRate) = (torque - gyro).cwiseQuotient(inertia);
  return xdot;
}

void quad_jacobians(const QuadrotorState& state,
                    const Eigen::Vector4d& motor_speeds,
                    const QuadrotorParameters& params, Eigen::MatrixXd& F,
                    Eigen::MatrixXd& G) {
  check_chart(state.rotation);
  using namespace quad;
  F = Eigen::MatrixXd::Zero(QuadrotorState::kDim, QuadrotorState::kDim);
  G = Eigen::MatrixXd::Zero(QuadrotorState::kDim, kMotors);

  const Eigen::Vector3d& theta = state.rotation;
  const Eigen::Vector3d& v = state.velocity;
  const Eigen::Vector3d& w = state.angular_rate;
  const Eigen::Vector3d inertia = params.inertia_diag;
  const Eigen::Matrix3d inv_inertia = inertia.cwiseInverse().asDiagonal();
  const Eigen::Matrix3d R = so3::exp(theta);
  const double m = params.mass;

  // Position.
  F.block<3, 3>(kPos, kVel).setIdentity();

  // Rotation vector kinematics.
  F.block<3, 3>(kRot, kRot) =
      so3::right_jacobian_inverse_times_vector_derivative(theta, w);
  F.block<3, 3>(kRot, kRate) = so3::right_jacobian_inverse(theta);

  // Velocity: thrust direction R e3 perturbs as R (-[e3]x) Jr dtheta.
  const double thrust = params.thrust_coeff * motor_speeds.squaredNorm();
  F.block<3, 3>(kVel, kRot) = thrust / m * R *
                              (-so3::skew(Eigen::Vector3d::UnitZ())) *
                              so3::right_jacobian(theta);
  const double speed = v.norm();
  if (speed > 0.0) {
    F.block<3, 3>(kVel, kVel) =
        -params.drag_coeff / m *
        (speed * Eigen::Matrix3d::Identity() + v * v.transpose() / speed);
  }
  for (int i = 0; i < kMotors; ++i) {
    G.block<3, 1>(kVel, i) =
        R.col(2) * (2.0 * params.thrust_coeff * motor_speeds[i] / m);
  }

  // Angular rate: I^-1 (tau - w x I w).
  const Eigen::Matrix3d d_gyro =
      so3::skew(w) * inertia.asDiagonal() - so3::skew(inertia.cwiseProduct(w));
  F.block<3, 3>(kRate, kRate) = -inv_inertia * d_gyro;
  const Eigen::Matrix<double, 3, 4> mix = params.mixing_matrix();
  for (int i = 0; i < kMotors; ++i) {
    G.block<3, 1>(kRate, i) =
        inv_inertia * mix.col(i) * (2.0 * params.thrust_coeff * motor_speeds[i]);
  }
}

QuadrotorModel::QuadrotorModel(QuadrotorParameters params)
    : params_(std::move(params)) {
  params_.validate();
}

Eigen::VectorXd QuadrotorModel::derivative(const Eigen::VectorXd& x,
                                           const Eigen::VectorXd& u,
                                           double) const {
  return quad_derivatives(QuadrotorState::unpack(x), motor_vector(u), params_);
}

void QuadrotorModel::jacobians(const Eigen::VectorXd& x,
                               const Eigen::VectorXd& u, double,
                               Eigen::MatrixXd& F, Eigen::MatrixXd& G) const {
  quad_jacobians(QuadrotorState::unpack(x), motor_vector(u), params_, F, G);
}

}  // namespace pstraj
