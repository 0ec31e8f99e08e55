#pragma once

#include "pstraj/dynamics.hpp"
#include "pstraj/residual_block.hpp"
#include "pstraj/traj_param.hpp"

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace pstraj {

/// Landmark at or behind the image plane.
class CheiralityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Pinhole camera rigidly mounted on the body. The extrinsics give the
/// camera pose in the body frame: p_body = body_R_camera * p_cam + body_t_camera.
struct CameraRig {
  double fx = 320.0;
  double fy = 320.0;
  double cx = 320.0;
  double cy = 240.0;
  int width = 640;
  int height = 480;
  Eigen::Matrix3d body_R_camera = Eigen::Matrix3d::Identity();
  Eigen::Vector3d body_t_camera = Eigen::Vector3d::Zero();

  void validate() const;
  bool in_image(const Eigen::Vector2d& pixel) const;
};

/// Forward-looking rig: optical axis along body x, image y along body -z.
CameraRig forward_looking_rig(double lever_arm);

enum class MeasurementModel { LandmarkProjection, PoseDirect, StateDerivative };

std::string to_string(MeasurementModel model);
MeasurementModel measurement_model_from_string(const std::string& name);

struct MeasurementRecord {
  double time = 0.0;
  MeasurementModel model = MeasurementModel::PoseDirect;
  Eigen::VectorXd z;
  Eigen::MatrixXd covariance;
  /// Landmark world position (LandmarkProjection only).
  Eigen::Vector3d landmark = Eigen::Vector3d::Zero();
  int landmark_id = -1;
  /// Observed state components (PoseDirect and StateDerivative).
  std::vector<int> components;

  int dim() const;
};

/// Pixel of a world landmark seen from `state` through `rig`.
Eigen::Vector2d project_landmark(const QuadrotorState& state,
                                 const Eigen::Vector3d& landmark,
                                 const CameraRig& rig);

/// Projection with its 2x12 Jacobian w.r.t. the packed state.
Eigen::Vector2d project_landmark(const QuadrotorState& state,
                                 const Eigen::Vector3d& landmark,
                                 const CameraRig& rig,
                                 Eigen::Matrix<double, 2, 12>& jacobian);

/// Pointwise prediction h and its Jacobians w.r.t. x(t), x_dot(t), u(t).
/// Jacobians that are identically zero are left empty.
struct PointPrediction {
  Eigen::VectorXd h;
  Eigen::MatrixXd d_state;
  Eigen::MatrixXd d_state_rate;
  Eigen::MatrixXd d_control;
};

PointPrediction predict(const MeasurementRecord& record,
                        const Eigen::VectorXd& x, const Eigen::VectorXd& x_dot,
                        const Eigen::VectorXd& u, const CameraRig& rig,
                        bool with_jacobians);

/// Lower Cholesky factor of an SPD covariance; throws if not SPD.
Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& covariance);

/// L^-1 (z - h(X w, U w)).
Eigen::VectorXd residual(const MeasurementRecord& record,
                         const StateTrajectory& X, const ControlTrajectory& U,
                         const CameraRig& rig);

/// Whitened residual plus Kronecker-form Jacobian over vec(X), vec(U).
ResidualBlock residual_jacobian(const MeasurementRecord& record,
                                const StateTrajectory& X,
                                const ControlTrajectory& U,
                                const CameraRig& rig);

/// Throws std::invalid_argument if the record is malformed.
void validate_record(const MeasurementRecord& record, int state_dim);

}  // namespace pstraj
