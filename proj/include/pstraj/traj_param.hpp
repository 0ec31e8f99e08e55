#pragma once

#include "pstraj/cheb_basis.hpp"

#include <Eigen/Dense>

#include <functional>

namespace pstraj {

/// Values of a vector-valued function at the nodes of a Chebyshev grid.
///
/// Column j holds the full vector at node j. Evaluation anywhere in the grid
/// interval is barycentric interpolation of the columns; derivatives apply
/// the differentiation matrix to each row first. `Tag` only separates state
/// trajectories from control trajectories at the type level.
template <class Tag>
class NodalTrajectory {
 public:
  NodalTrajectory(ChebyshevGrid grid, Eigen::MatrixXd values);

  const ChebyshevGrid& grid() const { return grid_; }
  const Eigen::MatrixXd& values() const { return values_; }
  int dim() const { return static_cast<int>(values_.rows()); }

  Eigen::VectorXd eval(double t) const;
  Eigen::VectorXd eval_derivative(double t) const;

  /// Node samples of the time derivative, X * D^T.
  const Eigen::MatrixXd& derivative_values() const { return derivative_values_; }

 private:
  ChebyshevGrid grid_;
  Eigen::MatrixXd values_;
  Eigen::MatrixXd derivative_values_;
};

struct StateTag {};
struct ControlTag {};

using StateTrajectory = NodalTrajectory<StateTag>;
using ControlTrajectory = NodalTrajectory<ControlTag>;

Eigen::VectorXd eval_state(const StateTrajectory& traj, double t);
Eigen::VectorXd eval_state_derivative(const StateTrajectory& traj, double t);
Eigen::VectorXd eval_control(const ControlTrajectory& traj, double t);

/// Matrix whose column j is fn(nodes[j]). Exceptions from fn propagate.
Eigen::MatrixXd sample_function(
    const ChebyshevGrid& grid,
    const std::function<Eigen::VectorXd(double)>& fn);

extern template class NodalTrajectory<StateTag>;
extern template class NodalTrajectory<ControlTag>;

}  // namespace pstraj
