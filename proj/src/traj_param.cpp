#include "pstraj/traj_param.hpp"

#include <cmath>
#include <stdexcept>

namespace pstraj {

template <class Tag>
NodalTrajectory<Tag>::NodalTrajectory(ChebyshevGrid grid, Eigen::MatrixXd values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.cols() != grid_.size()) {
    throw std::invalid_argument("trajectory needs one column per grid node");
  }
  if (!values_.allFinite()) {
    throw std::invalid_argument("trajectory values must be finite");
  }
  derivative_values_ = values_ * differentiation_matrix(grid_).transpose();
}

template <class Tag>
Eigen::VectorXd NodalTrajectory<Tag>::eval(double t) const {
  return values_ * barycentric_weights(grid_, t);
}

template <class Tag>
Eigen::VectorXd NodalTrajectory<Tag>::eval_derivative(double t) const {
  return derivative_values_ * barycentric_weights(grid_, t);
}

template class NodalTrajectory<StateTag>;
template class NodalTrajectory<ControlTag>;

Eigen::VectorXd eval_state(const StateTrajectory& traj, double t) {
  return traj.eval(t);
}

Eigen::VectorXd eval_state_derivative(const StateTrajectory& traj, double t) {
  return traj.eval_derivative(t);
}

Eigen::VectorXd eval_control(const ControlTrajectory& traj, double t) {
  return traj.eval(t);
}

Eigen::MatrixXd sample_function(
    const ChebyshevGrid& grid,
    const std::function<Eigen::VectorXd(double)>& fn) {
  Eigen::MatrixXd out;
  for (int j = 0; j < grid.size(); ++j) {
    Eigen::VectorXd v = fn(grid.node(j));
    if (j == 0) {
      out.resize(v.size(), grid.size());
    } else if (v.size() != out.rows()) {
      throw std::invalid_argument("sample_function: inconsistent output size");
    }
    out.col(j) = v;
  }
  return out;
}

}  // namespace pstraj
