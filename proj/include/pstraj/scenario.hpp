#pragma once

#include "pstraj/dynamics.hpp"
#include "pstraj/measurements.hpp"
#include "pstraj/traj_param.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace pstraj {

using ControlFunction = std::function<Eigen::VectorXd(double)>;

/// Named motor-speed profile. For smooth_sine each motor follows
/// w_i(t) = w_hover (1 + a_i sin(2 pi f_i t + phi_i)); figure_eightish adds a
/// half-amplitude second harmonic to the same form.
struct ControlProfileSpec {
  std::string name = "hover";
  Eigen::Vector4d amplitudes = Eigen::Vector4d::Zero();
  Eigen::Vector4d frequencies_hz = Eigen::Vector4d::Zero();
  Eigen::Vector4d phases = Eigen::Vector4d::Zero();

  static constexpr double kMaxAmplitude = 0.05;
  void validate() const;
};

ControlFunction control_profile(const ControlProfileSpec& spec,
                                const QuadrotorParameters& params);

struct Scenario {
  QuadrotorParameters params;
  QuadrotorState x0;
  ControlProfileSpec profile;
  double duration_s = 5.0;
  double step_s = 1e-3;
  std::vector<Eigen::Vector3d> landmarks;
  CameraRig rig;
  double camera_rate_hz = 20.0;
  double pixel_sigma = 1.0;
  /// Noise of the direct pose observations used for initialization.
  double pose_sigma_position = 0.05;
  double pose_sigma_rotation = 0.02;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Built-in scenarios: a hovering vehicle and the 5 s desk-scale flight.
Scenario hover_scenario();
Scenario desk_scenario();

/// Fixed-step RK4 samples plus enough context to evaluate the true state at
/// any time inside the run.
class GroundTruth {
 public:
  GroundTruth(std::shared_ptr<const DynamicsModel> model, ControlFunction control,
              double step);

  const std::vector<double>& times() const { return times_; }
  const std::vector<Eigen::VectorXd>& states() const { return states_; }
  const std::vector<Eigen::VectorXd>& controls() const { return controls_; }
  double t0() const { return times_.front(); }
  double tf() const { return times_.back(); }

  /// True state at t: RK4 from the preceding sample with a partial step.
  Eigen::VectorXd state_at(double t) const;
  Eigen::VectorXd control_at(double t) const { return control_(t); }

  void append(double t, Eigen::VectorXd x, Eigen::VectorXd u);

 private:
  std::shared_ptr<const DynamicsModel> model_;
  ControlFunction control_;
  double step_;
  std::vector<double> times_;
  std::vector<Eigen::VectorXd> states_;
  std::vector<Eigen::VectorXd> controls_;
};

/// One classical RK4 step.
Eigen::VectorXd rk4_step(const DynamicsModel& model, const ControlFunction& control,
                         const Eigen::VectorXd& x, double t, double h);

/// Integrates from t = 0 to `duration`; the final step is shortened if the
/// step does not divide the duration. Throws ChartError / std::runtime_error
/// if the state leaves the chart or becomes non-finite.
GroundTruth integrate_rk4(std::shared_ptr<const DynamicsModel> model,
                          const Eigen::VectorXd& x0, ControlFunction control,
                          double step, double duration);

GroundTruth simulate_truth(const Scenario& scenario);

/// Camera ticks k / rate for k = 0, 1, ... up to the end of the run.
std::vector<double> camera_times(const Scenario& scenario);

/// Noisy landmark projections at every camera tick followed by a noisy full
/// pose observation per tick. Deterministic for a fixed seed.
std::vector<MeasurementRecord> synth_measurements(const GroundTruth& truth,
                                                  const Scenario& scenario);

/// Uniform landmarks in an axis-aligned box.
std::vector<Eigen::Vector3d> random_landmarks(int count, const Eigen::Vector3d& lo,
                                              const Eigen::Vector3d& hi,
                                              std::uint64_t seed);

struct MotorSpeedError {
  Eigen::VectorXd mean_rpm;      // per motor
  Eigen::VectorXd mean_percent;  // per motor
};

/// Columns of `truth` and `estimate` are motor-speed vectors (rad/s) at the
/// same evaluation times.
MotorSpeedError motor_speed_error(const Eigen::MatrixXd& truth,
                                  const Eigen::MatrixXd& estimate);

MotorSpeedError motor_speed_error(const GroundTruth& truth,
                                  const ControlTrajectory& estimate,
                                  const std::vector<double>& times);

struct StateError {
  double position_rmse = 0.0;  // m
  double attitude_rmse = 0.0;  // rad, geodesic
};

/// Columns are packed 12-states at matching times.
StateError state_error(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& estimate);

/// Uniform times from t0 to tf at `rate_hz`, inclusive of t0.
std::vector<double> uniform_times(double t0, double tf, double rate_hz);

}  // namespace pstraj
