#include "pstraj/estimator.hpp"
#include "pstraj/scenario.hpp"

#include <gtest/gtest.h>

#include <map>
#include <numbers>

using namespace pstraj;

namespace {

std::shared_ptr<LinearModel> oscillator() {
  Eigen::MatrixXd A(2, 2);
  A << 0, 1, -4, 0;
  return std::make_shared<LinearModel>(A, Eigen::MatrixXd::Zero(2, 1));
}

ControlFunction zero_control(int p) {
  return [p](double) -> Eigen::VectorXd { return Eigen::VectorXd::Zero(p); };
}

double oscillator_error(double step) {
  const GroundTruth truth =
      integrate_rk4(oscillator(), Eigen::Vector2d(1, 0), zero_control(1), step, 1.0);
  return (truth.states().back() - Eigen::Vector2d(std::cos(2.0), -2.0 * std::sin(2.0))).norm();
}

}  // namespace

TEST(IntegrateRk4, DoubleIntegratorIsExact) {
  Eigen::MatrixXd A(2, 2), B(2, 1);
  A << 0, 1, 0, 0;
  B << 0, 1;
  const GroundTruth truth = integrate_rk4(std::make_shared<LinearModel>(A, B),
                                          Eigen::Vector2d(0, 1), zero_control(1), 0.01, 2.0);
  for (std::size_t k = 0; k < truth.times().size(); ++k) {
    const double t = truth.times()[k];
    EXPECT_NEAR(truth.states()[k][0], t, 1e-13);
    EXPECT_NEAR(truth.states()[k][1], 1.0, 1e-15);
  }
  EXPECT_DOUBLE_EQ(truth.tf(), 2.0);
}

TEST(IntegrateRk4, HarmonicOscillator) {
  const GroundTruth truth =
      integrate_rk4(oscillator(), Eigen::Vector2d(1, 0), zero_control(1), 1e-3, 1.0);
  for (std::size_t k = 0; k < truth.times().size(); k += 50) {
    const double t = truth.times()[k];
    EXPECT_LT((truth.states()[k] - Eigen::Vector2d(std::cos(2 * t), -2 * std::sin(2 * t))).norm(),
              1e-9);
  }
}

TEST(IntegrateRk4, FourthOrderConvergence) {
  const double e1 = oscillator_error(0.02);
  const double e2 = oscillator_error(0.01);
  EXPECT_NEAR(e1 / e2, 16.0, 1.0);
}

TEST(IntegrateRk4, ShortensTheLastStep) {
  const GroundTruth truth =
      integrate_rk4(oscillator(), Eigen::Vector2d(1, 0), zero_control(1), 0.3, 1.0);
  ASSERT_EQ(truth.times().size(), 5u);
  EXPECT_DOUBLE_EQ(truth.times().back(), 1.0);
}

TEST(IntegrateRk4, RejectsBadArguments) {
  EXPECT_THROW(integrate_rk4(oscillator(), Eigen::Vector2d(1, 0), zero_control(1), 2.0, 1.0),
               std::invalid_argument);
  EXPECT_THROW(integrate_rk4(oscillator(), Eigen::Vector3d(1, 0, 0), zero_control(1), 0.1, 1.0),
               std::invalid_argument);
}

TEST(IntegrateRk4, ChartExitAborts) {
  auto model = std::make_shared<QuadrotorModel>(QuadrotorParameters{});
  QuadrotorState s;
  s.angular_rate = Eigen::Vector3d(3.0, 0.0, 0.0);
  EXPECT_THROW(integrate_rk4(model, s.pack(), zero_control(4), 1e-3, 3.0), ChartError);
}

TEST(GroundTruth, DenseOutputMatchesSamples) {
  const GroundTruth truth =
      integrate_rk4(oscillator(), Eigen::Vector2d(1, 0), zero_control(1), 5e-3, 1.0);
  EXPECT_EQ(truth.state_at(truth.times()[7]), truth.states()[7]);
  const double t = 0.4567;
  EXPECT_LT((truth.state_at(t) - Eigen::Vector2d(std::cos(2 * t), -2 * std::sin(2 * t))).norm(),
            1e-9);
  EXPECT_THROW(truth.state_at(1.5), std::out_of_range);
}

TEST(ControlProfile, HoverAndZeroAmplitude) {
  const QuadrotorParameters params;
  ControlProfileSpec hover;
  const auto h = control_profile(hover, params);
  ControlProfileSpec flat;
  flat.name = "smooth_sine";
  flat.frequencies_hz = Eigen::Vector4d::Constant(0.5);
  const auto f = control_profile(flat, params);
  for (double t : {0.0, 0.3, 4.1}) {
    EXPECT_EQ(h(t), Eigen::VectorXd(Eigen::Vector4d::Constant(params.hover_speed())));
    EXPECT_EQ(f(t), h(t));
  }
}

TEST(ControlProfile, SmoothSineFormula) {
  const QuadrotorParameters params;
  ControlProfileSpec spec;
  spec.name = "smooth_sine";
  spec.amplitudes = Eigen::Vector4d(0.02, -0.01, 0.0, 0.05);
  spec.frequencies_hz = Eigen::Vector4d(0.5, 1.0, 2.0, 0.25);
  spec.phases = Eigen::Vector4d(0.0, 0.3, 0.0, 1.0);
  const auto fn = control_profile(spec, params);
  const double t = 0.8;
  for (int i = 0; i < 4; ++i) {
    const double expected =
        params.hover_speed() *
        (1.0 + spec.amplitudes[i] *
                   std::sin(2 * std::numbers::pi * spec.frequencies_hz[i] * t + spec.phases[i]));
    EXPECT_NEAR(fn(t)[i], expected, 1e-9);
  }
}

TEST(ControlProfile, RejectsUnknownNameAndLargeAmplitude) {
  ControlProfileSpec spec;
  spec.name = "loop_the_loop";
  EXPECT_THROW(control_profile(spec, QuadrotorParameters{}), std::invalid_argument);
  spec.name = "smooth_sine";
  spec.amplitudes[2] = 0.06;
  EXPECT_THROW(control_profile(spec, QuadrotorParameters{}), std::invalid_argument);
}

TEST(SimulateTruth, HoverStaysConstant) {
  Scenario s = hover_scenario();
  s.duration_s = 5.0;
  const GroundTruth truth = simulate_truth(s);
  for (const Eigen::VectorXd& x : truth.states()) {
    EXPECT_LT((x - s.x0.pack()).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(SimulateTruth, SmoothSineStaysInChart) {
  Scenario s = desk_scenario();
  s.profile.amplitudes = Eigen::Vector4d::Constant(0.02);
  s.profile.frequencies_hz = Eigen::Vector4d::Constant(0.5);
  s.profile.phases.setZero();
  const GroundTruth truth = simulate_truth(s);
  for (const Eigen::VectorXd& x : truth.states()) {
    EXPECT_LT(x.segment<3>(quad::kRot).norm(), std::numbers::pi - 0.2);
  }
  const GroundTruth desk = simulate_truth(desk_scenario());
  for (const Eigen::VectorXd& x : desk.states()) {
    EXPECT_LT(x.segment<3>(quad::kRot).norm(), std::numbers::pi - 0.2);
  }
}

TEST(SynthMeasurements, NoiselessRecordsHaveZeroResidual) {
  Scenario s = desk_scenario();
  s.duration_s = 1.0;
  s.pixel_sigma = 0.0;
  s.pose_sigma_position = 0.0;
  s.pose_sigma_rotation = 0.0;
  const GroundTruth truth = simulate_truth(s);
  for (const MeasurementRecord& r : synth_measurements(truth, s)) {
    const Eigen::VectorXd x = truth.state_at(r.time);
    const PointPrediction p = predict(r, x, x, Eigen::Vector4d::Zero(), s.rig, false);
    EXPECT_EQ((r.z - p.h).norm(), 0.0);
  }
}

TEST(SynthMeasurements, DeterministicForFixedSeed) {
  Scenario s = desk_scenario();
  s.duration_s = 1.0;
  const GroundTruth truth = simulate_truth(s);
  const auto a = synth_measurements(truth, s);
  const auto b = synth_measurements(truth, s);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].time, b[i].time);
    EXPECT_EQ(a[i].z, b[i].z);
  }
  s.seed += 1;
  const auto c = synth_measurements(truth, s);
  EXPECT_NE(a[0].z, c[0].z);
}

TEST(SynthMeasurements, PixelNoiseStatistics) {
  Scenario s = desk_scenario();
  s.pixel_sigma = 2.0;
  s.landmarks = random_landmarks(150, Eigen::Vector3d(0.0, -3.0, -2.0),
                                 Eigen::Vector3d(5.0, 3.0, 2.0), 5);
  const GroundTruth truth = simulate_truth(s);
  double sum = 0.0, sum_sq = 0.0;
  long count = 0;
  for (const MeasurementRecord& r : synth_measurements(truth, s)) {
    if (r.model != MeasurementModel::LandmarkProjection) continue;
    const Eigen::Vector2d clean =
        project_landmark(QuadrotorState::unpack(truth.state_at(r.time)), r.landmark, s.rig);
    for (int k = 0; k < 2; ++k) {
      const double e = r.z[k] - clean[k];
      sum += e;
      sum_sq += e * e;
      ++count;
    }
  }
  ASSERT_GE(count, 10000);
  const double mean = sum / count;
  const double sd = std::sqrt(sum_sq / count - mean * mean);
  EXPECT_NEAR(sd, 2.0, 0.03 * 2.0);
}

TEST(SynthMeasurements, DeskScenarioSeesLandmarksEveryTick) {
  const Scenario s = desk_scenario();
  const GroundTruth truth = simulate_truth(s);
  const auto records = synth_measurements(truth, s);
  std::map<double, int> per_tick;
  for (const auto& r : records) {
    if (r.model == MeasurementModel::LandmarkProjection) ++per_tick[r.time];
  }
  EXPECT_EQ(per_tick.size(), camera_times(s).size());
  for (const auto& [t, n] : per_tick) EXPECT_GE(n, 8) << t;
}

TEST(SynthMeasurements, NoVisibleLandmarkIsAnError) {
  Scenario s = hover_scenario();
  s.landmarks = {Eigen::Vector3d(-5.0, 0.0, 0.0)};
  const GroundTruth truth = simulate_truth(s);
  EXPECT_THROW(synth_measurements(truth, s), std::invalid_argument);
  s.landmarks.clear();
  EXPECT_THROW(synth_measurements(truth, s), std::invalid_argument);
}

TEST(MotorSpeedError, ZeroForPerfectEstimate) {
  const Eigen::MatrixXd w = Eigen::MatrixXd::Constant(4, 10, 1000.0);
  const MotorSpeedError e = motor_speed_error(w, w);
  EXPECT_EQ(e.mean_rpm, Eigen::VectorXd::Zero(4));
  EXPECT_EQ(e.mean_percent, Eigen::VectorXd::Zero(4));
}

TEST(MotorSpeedError, UnitOffsetInRpm) {
  const Eigen::MatrixXd w = Eigen::MatrixXd::Constant(4, 10, 1000.0);
  Eigen::MatrixXd est = w;
  est.row(0).array() += 1.0;
  const MotorSpeedError e = motor_speed_error(w, est);
  EXPECT_NEAR(e.mean_rpm[0], 60.0 / (2.0 * std::numbers::pi), 1e-12);
  EXPECT_NEAR(e.mean_rpm[0], 9.5493, 1e-4);
  EXPECT_NEAR(e.mean_percent[0], 0.1, 1e-12);
  EXPECT_EQ(e.mean_rpm[1], 0.0);
  EXPECT_THROW(motor_speed_error(Eigen::MatrixXd(4, 0), Eigen::MatrixXd(4, 0)),
               std::invalid_argument);
}

TEST(StateError, PositionAndAttitude) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(12, 3), b = a;
  b.row(0).setConstant(0.03);
  b(5, 1) = 0.1;
  const StateError e = state_error(a, b);
  EXPECT_NEAR(e.position_rmse, 0.03, 1e-15);
  EXPECT_NEAR(e.attitude_rmse, std::sqrt(0.01 / 3.0), 1e-12);
}

TEST(CollocationConsistency, DefectShrinksWithDegree) {
  const Scenario s = desk_scenario();
  const GroundTruth truth = simulate_truth(s);
  const QuadrotorModel model(s.params);
  double previous = 1e300;
  for (int n : {32, 64, 128}) {
    const ChebyshevGrid g(n, 0.0, s.duration_s);
    const StateTrajectory X(g, sample_function(g, [&](double t) { return truth.state_at(t); }));
    const ControlTrajectory U(g, sample_function(g, [&](double t) { return truth.control_at(t); }));
    double sum = 0.0;
    for (int j = 0; j < g.size(); ++j) {
      sum += defect_residual(X, U, j, model, Eigen::MatrixXd::Identity(12, 12)).squaredNorm();
    }
    const double rms = std::sqrt(sum / (12.0 * g.size()));
    EXPECT_LT(rms, previous);
    previous = rms;
  }
  EXPECT_LT(previous, 1e-3);
}
