#pragma once

#include <Eigen/Dense>

#include <array>
#include <stdexcept>

namespace pstraj {

/// Continuous dynamics x_dot = f(x, u, t) with analytic Jacobians.
class DynamicsModel {
 public:
  virtual ~DynamicsModel() = default;

  virtual int state_dim() const = 0;
  virtual int control_dim() const = 0;

  virtual Eigen::VectorXd derivative(const Eigen::VectorXd& x,
                                     const Eigen::VectorXd& u,
                                     double t) const = 0;

  /// F = df/dx (n x n), G = df/du (n x p).
  virtual void jacobians(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                         double t, Eigen::MatrixXd& F,
                         Eigen::MatrixXd& G) const = 0;
};

/// Thrown when a state leaves the rotation-vector chart.
class ChartError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// x_dot = A x + B u.
class LinearModel final : public DynamicsModel {
 public:
  LinearModel(Eigen::MatrixXd A, Eigen::MatrixXd B);

  int state_dim() const override { return static_cast<int>(A_.rows()); }
  int control_dim() const override { return static_cast<int>(B_.cols()); }
  Eigen::VectorXd derivative(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                             double t) const override;
  void jacobians(const Eigen::VectorXd& x, const Eigen::VectorXd& u, double t,
                 Eigen::MatrixXd& F, Eigen::MatrixXd& G) const override;

  const Eigen::MatrixXd& A() const { return A_; }
  const Eigen::MatrixXd& B() const { return B_; }

 private:
  Eigen::MatrixXd A_;
  Eigen::MatrixXd B_;
};

LinearModel linear_test_model(Eigen::MatrixXd A, Eigen::MatrixXd B);

struct QuadrotorParameters {
  double mass = 1.0;                                       // kg
  Eigen::Vector3d inertia_diag{0.0049, 0.0049, 0.0069};    // kg m^2
  double arm_length = 0.17;                                // m
  double thrust_coeff = 1.91e-6;                           // N / (rad/s)^2
  double drag_coeff = 0.1;                                 // N / (m/s)^2
  double torque_ratio = 0.013;                             // m
  double gravity = 9.81;                                   // m/s^2

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  /// Motor speed at which total thrust balances gravity at level attitude.
  double hover_speed() const;

  /// Maps per-motor thrusts (N) to body torques (N m).
  Eigen::Matrix<double, 3, 4> mixing_matrix() const;
};

/// Packed quadrotor state [p, theta, v, omega]: world-frame position,
/// world<-body rotation vector, world-frame velocity, body angular rate.
struct QuadrotorState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d rotation = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  Eigen::Vector3d angular_rate = Eigen::Vector3d::Zero();

  static constexpr int kDim = 12;
  static QuadrotorState unpack(const Eigen::VectorXd& x);
  Eigen::VectorXd pack() const;
};

namespace quad {
inline constexpr int kPos = 0;
inline constexpr int kRot = 3;
inline constexpr int kVel = 6;
inline constexpr int kRate = 9;
inline constexpr int kMotors = 4;
}  // namespace quad

/// World-frame force: gravity, thrust along body z, quadratic drag opposing v.
Eigen::Vector3d quad_force_world(const QuadrotorState& state,
                                 const Eigen::Vector4d& motor_speeds,
                                 const QuadrotorParameters& params);

/// Body torque from the mixing matrix. Gyroscopic and rotational drag terms
/// are not modelled; `angular_rate` is accepted for interface symmetry.
Eigen::Vector3d quad_torque_body(const Eigen::Vector4d& motor_speeds,
                                 const Eigen::Vector3d& angular_rate,
                                 const QuadrotorParameters& params);

Eigen::VectorXd quad_derivatives(const QuadrotorState& state,
                                 const Eigen::Vector4d& motor_speeds,
                                 const QuadrotorParameters& params);

void quad_jacobians(const QuadrotorState& state,
                    const Eigen::Vector4d& motor_speeds,
                    const QuadrotorParameters& params, Eigen::MatrixXd& F,
                    Eigen::MatrixXd& G);

class QuadrotorModel final : public DynamicsModel {
 public:
  explicit QuadrotorModel(QuadrotorParameters params);

  int state_dim() const override { return QuadrotorState::kDim; }
  int control_dim() const override { return quad::kMotors; }
  Eigen::VectorXd derivative(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                             double t) const override;
  void jacobians(const Eigen::VectorXd& x, const Eigen::VectorXd& u, double t,
                 Eigen::MatrixXd& F, Eigen::MatrixXd& G) const override;

  const QuadrotorParameters& params() const { return params_; }

 private:
  QuadrotorParameters params_;
};

}  // namespace pstraj
