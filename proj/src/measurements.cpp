#include "pstraj/measurements.hpp"

#include "pstraj/rotation.hpp"

#include <cmath>

namespace pstraj {

namespace {

constexpr double kMinDepth = 0.01;

Eigen::MatrixXd selector(const std::vector<int>& components, int state_dim) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(components.size(), state_dim);
  for (std::size_t i = 0; i < components.size(); ++i) s(i, components[i]) = 1.0;
  return s;
}

}  // namespace

void CameraRig::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw std::invalid_argument("camera focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("camera image size must be positive");
  }
  const double err =
      (body_R_camera.transpose() * body_R_camera - Eigen::Matrix3d::Identity())
          .cwiseAbs()
          .maxCoeff();
  if (!(err < 1e-9) || body_R_camera.determinant() < 0.0) {
    throw std::invalid_argument("camera extrinsic rotation is not orthonormal");
  }
}

bool CameraRig::in_image(const Eigen::Vector2d& pixel) const {
  return pixel.x() >= 0.0 && pixel.x() <= width && pixel.y() >= 0.0 &&
         pixel.y() <= height;
}

CameraRig forward_looking_rig(double lever_arm) {
  CameraRig rig;
  // Columns are the camera axes expressed in the body frame.
  rig.body_R_camera << 0.0, 0.0, 1.0,
                       -1.0, 0.0, 0.0,
                       0.0, -1.0, 0.0;
  rig.body_t_camera = Eigen::Vector3d(lever_arm, 0.0, 0.0);
  return rig;
}

std::string to_string(MeasurementModel model) {
  switch (model) {
    case MeasurementModel::LandmarkProjection: return "landmark_projection";
    case MeasurementModel::PoseDirect: return "pose_direct";
    case MeasurementModel::StateDerivative: return "state_derivative";
  }
  return "unknown";
}

MeasurementModel measurement_model_from_string(const std::string& name) {
  if (name == "landmark_projection") return MeasurementModel::LandmarkProjection;
  if (name == "pose_direct") return MeasurementModel::PoseDirect;
  if (name == "state_derivative") return MeasurementModel::StateDerivative;
  throw std::invalid_argument("unknown measurement model '" + name + "'");
}

int MeasurementRecord::dim() const {
  return model == MeasurementModel::LandmarkProjection
             ? 2
             : static_cast<int>(components.size());
}

Eigen::Vector2d project_landmark(const QuadrotorState& state,
                                 const Eigen::Vector3d& landmark,
                                 const CameraRig& rig,
                                 Eigen::Matrix<double, 2, 12>& jacobian) {
  const Eigen::Matrix3d R = so3::exp(state.rotation);
  const Eigen::Vector3d in_body = R.transpose() * (landmark - state.position);
  const Eigen::Vector3d in_cam =
      rig.body_R_camera.transpose() * (in_body - rig.body_t_camera);
  const double depth = in_cam.z();
  if (!(depth > kMinDepth)) {
    throw CheiralityError("landmark depth " + std::to_string(depth) +
                          " m is not in front of the camera");
  }
  const double inv_z = 1.0 / depth;
  Eigen::Vector2d pixel(rig.fx * in_cam.x() * inv_z + rig.cx,
                        rig.fy * in_cam.y() * inv_z + rig.cy);

  Eigen::Matrix<double, 2, 3> d_pixel;
  d_pixel << rig.fx * inv_z, 0.0, -rig.fx * in_cam.x() * inv_z * inv_z,
             0.0, rig.fy * inv_z, -rig.fy * in_cam.y() * inv_z * inv_z;
  const Eigen::Matrix<double, 2, 3> d_body = d_pixel * rig.body_R_camera.transpose();
  jacobian.setZero();
  jacobian.block<2, 3>(0, quad::kPos) = -d_body * R.transpose();
  jacobian.block<2, 3>(0, quad::kRot) =
      d_body * so3::skew(in_body) * so3::right_jacobian(state.rotation);
  return pixel;
}

Eigen::Vector2d project_landmark(const QuadrotorState& state,
                                 const Eigen::Vector3d& landmark,
                                 const CameraRig& rig) {
  Eigen::Matrix<double, 2, 12> unused;
  return project_landmark(state, landmark, rig, unused);
}

PointPrediction predict(const MeasurementRecord& record,
                        const Eigen::VectorXd& x, const Eigen::VectorXd& x_dot,
                        const Eigen::VectorXd& u, const CameraRig& rig,
                        bool with_jacobians) {
  (void)u;
  PointPrediction out;
  const int n = static_cast<int>(x.size());
  switch (record.model) {
    case MeasurementModel::LandmarkProjection: {
      Eigen::Matrix<double, 2, 12> H;
      out.h = project_landmark(QuadrotorState::unpack(x), record.landmark, rig, H);
      if (with_jacobians) out.d_state = H;
      break;
    }
    case MeasurementModel::PoseDirect: {
      const Eigen::MatrixXd S = selector(record.components, n);
      out.h = S * x;
      if (with_jacobians) out.d_state = S;
      break;
    }
    case MeasurementModel::StateDerivative: {
      const Eigen::MatrixXd S = selector(record.components, n);
      out.h = S * x_dot;
      if (with_jacobians) out.d_state_rate = S;
      break;
    }
  }
  return out;
}

Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& covariance) {
  if (covariance.rows() != covariance.cols() ||
      !covariance.isApprox(covariance.transpose(), 1e-12)) {
    throw std::invalid_argument("covariance must be symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(covariance);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("covariance is not positive definite");
  }
  return llt.matrixL();
}

void validate_record(const MeasurementRecord& record, int state_dim) {
  if (!std::isfinite(record.time)) {
    throw std::invalid_argument("measurement time must be finite");
  }
  if (record.model != MeasurementModel::LandmarkProjection) {
    if (record.components.empty()) {
      throw std::invalid_argument("direct measurement selects no components");
    }
    for (int c : record.components) {
      if (c < 0 || c >= state_dim) {
        throw std::invalid_argument("measurement component index out of range");
      }
    }
  } else if (state_dim != QuadrotorState::kDim) {
    throw std::invalid_argument("landmark projection needs a quadrotor state");
  }
  if (record.z.size() != record.dim()) {
    throw std::invalid_argument("measurement dimension does not match its model");
  }
  if (record.covariance.rows() != record.dim()) {
    throw std::invalid_argument("measurement covariance has the wrong size");
  }
  covariance_factor(record.covariance);
}

Eigen::VectorXd residual(const MeasurementRecord& record,
                         const StateTrajectory& X, const ControlTrajectory& U,
                         const CameraRig& rig) {
  const Eigen::VectorXd w = barycentric_weights(X.grid(), record.time);
  const PointPrediction p =
      predict(record, X.values() * w, X.derivative_values() * w,
              U.values() * w, rig, false);
  const Eigen::MatrixXd L = covariance_factor(record.covariance);
  return L.triangularView<Eigen::Lower>().solve(record.z - p.h);
}

ResidualBlock residual_jacobian(const MeasurementRecord& record,
                                const StateTrajectory& X,
                                const ControlTrajectory& U,
                                const CameraRig& rig) {
  const Eigen::VectorXd w = barycentric_weights(X.grid(), record.time);
  const PointPrediction p =
      predict(record, X.values() * w, X.derivative_values() * w,
              U.values() * w, rig, true);
  const Eigen::MatrixXd L = covariance_factor(record.covariance);
  const auto Lt = L.triangularView<Eigen::Lower>();

  ResidualBlock block;
  block.residual = Lt.solve(record.z - p.h);
  if (p.d_state.size() > 0) {
    block.terms.push_back({Target::State, w, Lt.solve(-p.d_state)});
  }
  if (p.d_state_rate.size() > 0) {
    // x_dot(t) = X D^T w, so the node coefficients are D^T w.
    const Eigen::VectorXd c = differentiation_matrix(X.grid()).transpose() * w;
    block.terms.push_back({Target::State, c, Lt.solve(-p.d_state_rate)});
  }
  if (p.d_control.size() > 0) {
    block.terms.push_back({Target::Control, w, Lt.solve(-p.d_control)});
  }
  return block;
}

Eigen::MatrixXd dense_jacobian(const ResidualBlock& block,
                               const UnknownLayout& layout) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(block.rows(), layout.size());
  for (const KronTerm& term : block.terms) {
    const int width = layout.width(term.target);
    for (int k = 0; k < layout.nodes; ++k) {
      if (term.coeffs[k] == 0.0) continue;
      J.block(0, layout.offset(term.target, k), block.rows(), width) +=
          term.coeffs[k] * term.matrix;
    }
  }
  return J;
}

Eigen::VectorXd stack_unknowns(const Eigen::MatrixXd& X, const Eigen::MatrixXd& U) {
  Eigen::VectorXd z(X.size() + U.size());
  z.head(X.size()) = X.reshaped();
  z.tail(U.size()) = U.reshaped();
  return z;
}

void unstack_unknowns(const Eigen::VectorXd& z, const UnknownLayout& layout,
                      Eigen::MatrixXd& X, Eigen::MatrixXd& U) {
  X = z.head(layout.state_size()).reshaped(layout.state_dim, layout.nodes);
  U = z.tail(layout.size() - layout.state_size())
          .reshaped(layout.control_dim, layout.nodes);
}

}  // namespace pstraj
