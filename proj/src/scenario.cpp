#include "pstraj/scenario.hpp"

#include "pstraj/rotation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace pstraj {

void ControlProfileSpec::validate() const {
  if (name != "hover" && name != "smooth_sine" && name != "figure_eightish") {
    throw std::invalid_argument("unknown control profile '" + name + "'");
  }
  if (!amplitudes.allFinite() || !frequencies_hz.allFinite() || !phases.allFinite()) {
    throw std::invalid_argument("control profile parameters must be finite");
  }
  if (amplitudes.cwiseAbs().maxCoeff() > kMaxAmplitude) {
    throw std::invalid_argument("control profile amplitude exceeds 0.05");
  }
  if (frequencies_hz.minCoeff() < 0.0) {
    throw std::invalid_argument("control profile frequencies must be >= 0");
  }
}

ControlFunction control_profile(const ControlProfileSpec& spec,
                                const QuadrotorParameters& params) {
  spec.validate();
  const double hover = params.hover_speed();
  if (spec.name == "hover") {
    return [hover](double) -> Eigen::VectorXd {
      return Eigen::Vector4d::Constant(hover);
    };
  }
  const double second = spec.name == "figure_eightish" ? 0.5 : 0.0;
  return [hover, spec, second](double t) -> Eigen::VectorXd {
    Eigen::Vector4d w;
    for (int i = 0; i < 4; ++i) {
      const double arg = 2.0 * std::numbers::pi * spec.frequencies_hz[i] * t + spec.phases[i];
      w[i] = hover * (1.0 + spec.amplitudes[i] *
                                (std::sin(arg) + second * std::sin(2.0 * arg)));
    }
    return w;
  };
}

void Scenario::validate() const {
  params.validate();
  profile.validate();
  rig.validate();
  if (!(duration_s > 0.0) || !std::isfinite(duration_s)) {
    throw std::invalid_argument("duration_s must be positive");
  }
  if (!(step_s > 0.0) || step_s > duration_s) {
    throw std::invalid_argument("step_s must be positive and not exceed duration_s");
  }
  if (!(camera_rate_hz > 0.0)) throw std::invalid_argument("camera rate must be positive");
  if (!(pixel_sigma >= 0.0)) throw std::invalid_argument("pixel_sigma must be >= 0");
  if (!(pose_sigma_position >= 0.0) || !(pose_sigma_rotation >= 0.0)) {
    throw std::invalid_argument("pose sigmas must be >= 0");
  }
  if (x0.rotation.norm() >= std::numbers::pi - 0.2) {
    throw std::invalid_argument("initial rotation outside the chart");
  }
}

GroundTruth::GroundTruth(std::shared_ptr<const DynamicsModel> model,
                         ControlFunction control, double step)
    : model_(std::move(model)), control_(std::move(control)), step_(step) {}

void GroundTruth::append(double t, Eigen::VectorXd x, Eigen::VectorXd u) {
  if (!times_.empty() && !(t > times_.back())) {
    throw std::invalid_argument("ground truth times must increase");
  }
  times_.push_back(t);
  states_.push_back(std::move(x));
  controls_.push_back(std::move(u));
}

Eigen::VectorXd GroundTruth::state_at(double t) const {
  if (times_.empty() || t < times_.front() || t > times_.back()) {
    throw std::out_of_range("ground truth queried outside its support");
  }
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t k = static_cast<std::size_t>(std::distance(times_.begin(), it)) - 1;
  const double h = t - times_[k];
  if (h == 0.0) return states_[k];
  return rk4_step(*model_, control_, states_[k], times_[k], h);
}

Eigen::VectorXd rk4_step(const DynamicsModel& model, const ControlFunction& control,
                         const Eigen::VectorXd& x, double t, double h) {
  const double half = 0.5 * h;
  const Eigen::VectorXd k1 = model.derivative(x, control(t), t);
  const Eigen::VectorXd k2 = model.derivative(x + half * k1, control(t + half), t + half);
  const Eigen::VectorXd k3 = model.derivative(x + half * k2, control(t + half), t + half);
  const Eigen::VectorXd k4 = model.derivative(x + h * k3, control(t + h), t + h);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

GroundTruth integrate_rk4(std::shared_ptr<const DynamicsModel> model,
                          const Eigen::VectorXd& x0, ControlFunction control,
                          double step, double duration) {
  if (!(step > 0.0) || !(duration > 0.0) || step > duration) {
    throw std::invalid_argument("integrate_rk4: need 0 < step <= duration");
  }
  if (x0.size() != model->state_dim()) {
    throw std::invalid_argument("integrate_rk4: initial state has the wrong size");
  }
  GroundTruth truth(model, control, step);
  const long steps = static_cast<long>(std::ceil(duration / step - 1e-9));
  Eigen::VectorXd x = x0;
  double t = 0.0;
  truth.append(t, x, control(t));
  for (long k = 1; k <= steps; ++k) {
    const double t_next = (k == steps) ? duration : static_cast<double>(k) * step;
    x = rk4_step(*model, control, x, t, t_next - t);
    if (!x.allFinite()) {
      throw std::runtime_error("integrate_rk4: state became non-finite at t = " +
                               std::to_string(t_next));
    }
    t = t_next;
    truth.append(t, x, control(t));
  }
  return truth;
}

GroundTruth simulate_truth(const Scenario& scenario) {
  scenario.validate();
  auto model = std::make_shared<QuadrotorModel>(scenario.params);
  GroundTruth truth =
      integrate_rk4(model, scenario.x0.pack(),
                    control_profile(scenario.profile, scenario.params),
                    scenario.step_s, scenario.duration_s);
  for (const Eigen::VectorXd& x : truth.states()) {
    if (x.segment<3>(quad::kRot).norm() >= std::numbers::pi - 0.2) {
      throw ChartError("ground truth leaves the rotation chart");
    }
  }
  return truth;
}

std::vector<double> uniform_times(double t0, double tf, double rate_hz) {
  if (!(rate_hz > 0.0) || !(tf >= t0)) {
    throw std::invalid_argument("uniform_times: invalid range or rate");
  }
  std::vector<double> out;
  const long count = static_cast<long>(std::floor((tf - t0) * rate_hz + 1e-9));
  for (long k = 0; k <= count; ++k) {
    out.push_back(std::min(tf, t0 + static_cast<double>(k) / rate_hz));
  }
  return out;
}

std::vector<double> camera_times(const Scenario& scenario) {
  return uniform_times(0.0, scenario.duration_s, scenario.camera_rate_hz);
}

std::vector<MeasurementRecord> synth_measurements(const GroundTruth& truth,
                                                  const Scenario& scenario) {
  if (scenario.landmarks.empty()) {
    throw std::invalid_argument("scenario has no landmarks");
  }
  std::mt19937_64 rng(scenario.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  // Noiseless channels get unit covariance so the records stay well formed.
  const auto effective = [](double sigma) { return sigma > 0.0 ? sigma : 1.0; };
  const double pixel_var = std::pow(effective(scenario.pixel_sigma), 2);
  const double pos_var = std::pow(effective(scenario.pose_sigma_position), 2);
  const double rot_var = std::pow(effective(scenario.pose_sigma_rotation), 2);

  std::vector<MeasurementRecord> records;
  int projections = 0;
  for (double t : camera_times(scenario)) {
    const Eigen::VectorXd x = truth.state_at(t);
    const QuadrotorState state = QuadrotorState::unpack(x);
    for (std::size_t i = 0; i < scenario.landmarks.size(); ++i) {
      Eigen::Vector2d pixel;
      try {
        pixel = project_landmark(state, scenario.landmarks[i], scenario.rig);
      } catch (const CheiralityError&) {
        continue;
      }
      if (!scenario.rig.in_image(pixel)) continue;
      MeasurementRecord r;
      r.time = t;
      r.model = MeasurementModel::LandmarkProjection;
      r.landmark = scenario.landmarks[i];
      r.landmark_id = static_cast<int>(i);
      const double nx = normal(rng);
      const double ny = normal(rng);
      r.z = pixel + scenario.pixel_sigma * Eigen::Vector2d(nx, ny);
      r.covariance = pixel_var * Eigen::Matrix2d::Identity();
      records.push_back(std::move(r));
      ++projections;
    }
    MeasurementRecord pose;
    pose.time = t;
    pose.model = MeasurementModel::PoseDirect;
    pose.components = {0, 1, 2, 3, 4, 5};
    pose.z = x.head(6);
    pose.covariance = Eigen::MatrixXd::Zero(6, 6);
    for (int k = 0; k < 6; ++k) {
      const double sigma = k < 3 ? scenario.pose_sigma_position : scenario.pose_sigma_rotation;
      pose.z[k] += sigma * normal(rng);
      pose.covariance(k, k) = k < 3 ? pos_var : rot_var;
    }
    records.push_back(std::move(pose));
  }
  if (projections == 0) {
    throw std::invalid_argument("no landmark is visible during the whole run");
  }
  return records;
}

std::vector<Eigen::Vector3d> random_landmarks(int count, const Eigen::Vector3d& lo,
                                              const Eigen::Vector3d& hi,
                                              std::uint64_t seed) {
  if (count <= 0 || (hi - lo).minCoeff() < 0.0) {
    throw std::invalid_argument("random_landmarks: invalid count or box");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Eigen::Vector3d> out(count);
  for (auto& p : out) {
    for (int k = 0; k < 3; ++k) p[k] = lo[k] + (hi[k] - lo[k]) * unit(rng);
  }
  return out;
}

MotorSpeedError motor_speed_error(const Eigen::MatrixXd& truth,
                                  const Eigen::MatrixXd& estimate) {
  if (truth.cols() == 0) throw std::invalid_argument("motor_speed_error: empty evaluation set");
  if (truth.rows() != estimate.rows() || truth.cols() != estimate.cols()) {
    throw std::invalid_argument("motor_speed_error: shape mismatch");
  }
  const Eigen::ArrayXXd diff = (truth - estimate).array().abs();
  MotorSpeedError e;
  e.mean_rpm = diff.rowwise().mean().matrix() * (60.0 / (2.0 * std::numbers::pi));
  e.mean_percent = (diff / truth.array()).rowwise().mean().matrix() * 100.0;
  return e;
}

MotorSpeedError motor_speed_error(const GroundTruth& truth,
                                  const ControlTrajectory& estimate,
                                  const std::vector<double>& times) {
  if (times.empty()) throw std::invalid_argument("motor_speed_error: empty evaluation set");
  Eigen::MatrixXd t(estimate.dim(), times.size()), e(estimate.dim(), times.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    t.col(k) = truth.control_at(times[k]);
    e.col(k) = estimate.eval(times[k]);
  }
  return motor_speed_error(t, e);
}

StateError state_error(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& estimate) {
  if (truth.cols() == 0 || truth.rows() != 12 || estimate.rows() != 12 ||
      truth.cols() != estimate.cols()) {
    throw std::invalid_argument("state_error: need matching 12-row matrices");
  }
  double pos = 0.0, att = 0.0;
  for (Eigen::Index k = 0; k < truth.cols(); ++k) {
    pos += (truth.col(k).segment<3>(quad::kPos) - estimate.col(k).segment<3>(quad::kPos))
               .squaredNorm();
    const Eigen::Matrix3d Rt = so3::exp(truth.col(k).segment<3>(quad::kRot));
    const Eigen::Matrix3d Re = so3::exp(estimate.col(k).segment<3>(quad::kRot));
    att += so3::log(Rt.transpose() * Re).squaredNorm();
  }
  const double n = static_cast<double>(truth.cols());
  return {std::sqrt(pos / n), std::sqrt(att / n)};
}

Scenario hover_scenario() {
  Scenario s;
  s.profile.name = "hover";
  s.duration_s = 2.0;
  s.step_s = 1e-3;
  s.rig = forward_looking_rig(0.1);
  s.landmarks = random_landmarks(12, Eigen::Vector3d(3.0, -2.0, -1.5),
                                 Eigen::Vector3d(6.0, 2.0, 1.5), 11);
  s.seed = 3;
  return s;
}

Scenario desk_scenario() {
  Scenario s;
  s.profile.name = "smooth_sine";
  s.profile.amplitudes = Eigen::Vector4d(0.02, 0.01, 0.02, 0.01);
  s.profile.frequencies_hz = Eigen::Vector4d::Constant(0.5);
  s.profile.phases = Eigen::Vector4d::Constant(0.5 * std::numbers::pi);
  s.duration_s = 5.0;
  s.step_s = 1e-3;
  s.x0.position = Eigen::Vector3d(-4.0, 0.0, 0.0);
  s.rig = forward_looking_rig(0.1);
  s.landmarks = random_landmarks(40, Eigen::Vector3d(-5.0, -5.0, -2.0),
                                 Eigen::Vector3d(5.0, 5.0, 2.0), 2024);
  s.camera_rate_hz = 20.0;
  s.pixel_sigma = 1.0;
  s.seed = 17;
  return s;
}

}  // namespace pstraj
