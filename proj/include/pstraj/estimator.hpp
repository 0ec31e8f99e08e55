#pragma once

#include "pstraj/cheb_basis.hpp"
#include "pstraj/dynamics.hpp"
#include "pstraj/measurements.hpp"
#include "pstraj/residual_block.hpp"
#include "pstraj/traj_param.hpp"

#include <Eigen/Dense>

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace pstraj {

struct SolverSettings {
  int max_iterations = 100;
  double initial_damping = 1e-4;
  double damping_factor = 10.0;
  double cost_tolerance = 1e-9;   // relative decrease
  double step_tolerance = 1e-10;  // absolute, on the stacked step norm
  /// Use the OpenMP linearization and assembly kernels.
  bool parallel = true;
  bool verbose = false;

  void validate() const;
};

/// Gaussian prior on one column of X or U.
struct NodePrior {
  Target target = Target::Control;
  int node = 0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

struct EstimationProblem {
  EstimationProblem(ChebyshevGrid grid, std::shared_ptr<const DynamicsModel> dynamics);

  ChebyshevGrid grid;
  std::shared_ptr<const DynamicsModel> dynamics;
  /// Defect covariance Q (units of x_dot squared).
  Eigen::MatrixXd defect_covariance;
  std::vector<MeasurementRecord> measurements;
  CameraRig rig;
  std::vector<NodePrior> priors;
  /// Standard deviation of a zero-mean prior on du/dt at every node, per
  /// control component. Unset disables the smoothness prior.
  std::optional<double> control_rate_sigma;
  SolverSettings solver;

  UnknownLayout layout() const;
  /// Throws std::invalid_argument on any inconsistency.
  void validate() const;
};

/// Adds N(mean, sigma^2 I) priors on every control column.
void add_control_priors(EstimationProblem& problem, const Eigen::VectorXd& mean,
                        double sigma);

struct EstimateReport {
  EstimateReport(StateTrajectory X, ControlTrajectory U)
      : X_hat(std::move(X)), U_hat(std::move(U)) {}

  StateTrajectory X_hat;
  ControlTrajectory U_hat;
  /// Total cost after initialization and after every accepted step.
  std::vector<double> costs;
  double measurement_cost = 0.0;  // E1
  double defect_cost = 0.0;       // E2
  double prior_cost = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string termination;
  double wall_time_s = 0.0;
  /// Records dropped at initialization (cheirality).
  int skipped_measurements = 0;

  double total_cost() const { return measurement_cost + defect_cost + prior_cost; }
};

/// L_Q^-1 ((X D^T) e_j - f(X e_j, U e_j, t_j)).
Eigen::VectorXd defect_residual(const StateTrajectory& X,
                                const ControlTrajectory& U, int node,
                                const DynamicsModel& dynamics,
                                const Eigen::MatrixXd& Q);

ResidualBlock defect_jacobian(const StateTrajectory& X,
                              const ControlTrajectory& U, int node,
                              const DynamicsModel& dynamics,
                              const Eigen::MatrixXd& Q);

/// Initial (X0, U0) for the quadrotor from direct pose observations: pose rows
/// interpolate the observations linearly, rate rows differentiate them
/// spectrally, and every control column is `nominal_control`.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> initialize(
    const EstimationProblem& problem,
    const std::vector<MeasurementRecord>& pose_observations,
    const Eigen::VectorXd& nominal_control);

/// All residual blocks of the objective at (X, U): measurement groups first,
/// then one defect block per node, then priors and control-rate priors.
struct LinearizedObjective {
  std::vector<ResidualBlock> blocks;
  int measurement_blocks = 0;
  int defect_blocks = 0;
};

class ObjectiveEvaluator {
 public:
  /// Drops records that fail cheirality at (X, U) when `drop_invalid` is set;
  /// the count is available from skipped().
  ObjectiveEvaluator(const EstimationProblem& problem, const Eigen::MatrixXd& X,
                     const Eigen::MatrixXd& U, bool drop_invalid);

  LinearizedObjective linearize(const Eigen::MatrixXd& X,
                                const Eigen::MatrixXd& U, bool parallel) const;

  /// Component costs (E1, E2, prior); nullopt if (X, U) leaves the model domain.
  std::optional<std::array<double, 3>> costs(const Eigen::MatrixXd& X,
                                             const Eigen::MatrixXd& U,
                                             bool parallel) const;

  int skipped() const { return skipped_; }

 private:
  struct MeasurementGroup {
    double time;
    Eigen::VectorXd weights;
    Eigen::VectorXd rate_weights;
    std::vector<const MeasurementRecord*> records;
    std::vector<Eigen::MatrixXd> factors;
  };

  ResidualBlock group_block(const MeasurementGroup& group,
                            const Eigen::MatrixXd& X, const Eigen::MatrixXd& XDt,
                            const Eigen::MatrixXd& U, bool jacobians) const;
  ResidualBlock defect_block(int node, const Eigen::MatrixXd& X,
                             const Eigen::MatrixXd& XDt,
                             const Eigen::MatrixXd& U, bool jacobians) const;
  ResidualBlock prior_block(const NodePrior& prior, const Eigen::MatrixXd& X,
                            const Eigen::MatrixXd& U) const;
  ResidualBlock control_rate_block(int node, const Eigen::MatrixXd& U) const;
  LinearizedObjective evaluate(const Eigen::MatrixXd& X, const Eigen::MatrixXd& U,
                               bool jacobians, bool parallel) const;

  const EstimationProblem& problem_;
  Eigen::MatrixXd D_;
  Eigen::MatrixXd defect_factor_;
  std::vector<MeasurementRecord> records_;
  std::vector<MeasurementGroup> groups_;
  std::vector<Eigen::MatrixXd> prior_factors_;
  int skipped_ = 0;
};

/// Levenberg-Marquardt over [vec(X); vec(U)].
EstimateReport solve(const EstimationProblem& problem, const Eigen::MatrixXd& X0,
                     const Eigen::MatrixXd& U0);

/// Full dense Jacobian and residual of the objective (tests and diagnostics).
void dense_objective(const EstimationProblem& problem, const Eigen::MatrixXd& X,
                     const Eigen::MatrixXd& U, Eigen::MatrixXd& J,
                     Eigen::VectorXd& r);

}  // namespace pstraj
