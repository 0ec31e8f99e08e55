#include "pstraj/estimator.hpp"
#include "pstraj/kernels.hpp"
#include "pstraj/scenario.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace pstraj;
using pstraj::testing::numeric_jacobian;
using pstraj::testing::rel_error;

namespace {

std::shared_ptr<LinearModel> double_integrator() {
  Eigen::MatrixXd A(2, 2), B(2, 1);
  A << 0, 1, 0, 0;
  B << 0, 1;
  return std::make_shared<LinearModel>(A, B);
}

// p(t) = 0.3 + t - 0.5 t^2 + 0.2 t^3 - 0.05 t^4 + 0.01 t^5 on [0, 2].
double poly_p(double t) { return 0.3 + t - 0.5 * t * t + 0.2 * std::pow(t, 3) - 0.05 * std::pow(t, 4) + 0.01 * std::pow(t, 5); }
double poly_v(double t) { return 1.0 - t + 0.6 * t * t - 0.2 * std::pow(t, 3) + 0.05 * std::pow(t, 4); }
double poly_a(double t) { return -1.0 + 1.2 * t - 0.6 * t * t + 0.2 * std::pow(t, 3); }

MeasurementRecord position_obs(double t, double z, double var) {
  MeasurementRecord r;
  r.time = t;
  r.model = MeasurementModel::PoseDirect;
  r.components = {0};
  r.z = Eigen::VectorXd::Constant(1, z);
  r.covariance = Eigen::MatrixXd::Constant(1, 1, var);
  return r;
}

EstimationProblem double_integrator_problem(int degree, double noise, std::uint64_t seed) {
  EstimationProblem problem(make_grid(degree, 0.0, 2.0), double_integrator());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  for (int i = 0; i < 50; ++i) {
    const double t = 2.0 * i / 49.0;
    problem.measurements.push_back(
        position_obs(t, poly_p(t) + noise * n01(rng), noise > 0 ? noise * noise : 1e-4));
  }
  return problem;
}

struct QuadSetup {
  Scenario scenario;
  std::unique_ptr<GroundTruth> truth;
  std::unique_ptr<EstimationProblem> problem;
};

QuadSetup quad_setup(int degree, double duration) {
  QuadSetup q;
  q.scenario = desk_scenario();
  q.scenario.duration_s = duration;
  q.truth = std::make_unique<GroundTruth>(simulate_truth(q.scenario));
  auto model = std::make_shared<QuadrotorModel>(q.scenario.params);
  q.problem = std::make_unique<EstimationProblem>(make_grid(degree, 0.0, duration), model);
  q.problem->measurements = synth_measurements(*q.truth, q.scenario);
  q.problem->rig = q.scenario.rig;
  add_control_priors(*q.problem, Eigen::Vector4d::Constant(q.scenario.params.hover_speed()), 1e3);
  q.problem->control_rate_sigma = 100.0;
  return q;
}

double total(const EstimationProblem& p, const Eigen::MatrixXd& X, const Eigen::MatrixXd& U) {
  const ObjectiveEvaluator ev(p, X, U, false);
  const auto c = ev.costs(X, U, false);
  return (*c)[0] + (*c)[1] + (*c)[2];
}

}  // namespace

TEST(DefectResidual, LinearModelPolynomialPairIsExact) {
  const ChebyshevGrid g(4, 0.0, 2.0);
  const LinearModel model(Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Identity(1, 1));
  const StateTrajectory X(g, sample_function(g, [](double t) { return Eigen::VectorXd::Constant(1, t * t); }));
  const ControlTrajectory U(g, sample_function(g, [](double t) { return Eigen::VectorXd::Constant(1, 2 * t); }));
  for (int j = 0; j < g.size(); ++j) {
    EXPECT_LT(defect_residual(X, U, j, model, Eigen::MatrixXd::Identity(1, 1)).norm(), 1e-10);
  }
}

TEST(DefectResidual, HoverQuadrotorIsExact) {
  const ChebyshevGrid g(8, 0.0, 5.0);
  const QuadrotorParameters params;
  const QuadrotorModel model(params);
  QuadrotorState s;
  s.position = Eigen::Vector3d(1, -2, 3);
  const StateTrajectory X(g, s.pack().replicate(1, g.size()));
  const ControlTrajectory U(g, Eigen::MatrixXd::Constant(4, g.size(), params.hover_speed()));
  for (int j = 0; j < g.size(); ++j) {
    EXPECT_LT(defect_residual(X, U, j, model, 1e-4 * Eigen::MatrixXd::Identity(12, 12)).norm(),
              1e-9);
  }
}

TEST(DefectResidual, CovarianceScaling) {
  const ChebyshevGrid g(5, 0.0, 1.0);
  const LinearModel model(Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Zero(2, 1));
  const StateTrajectory X(g, Eigen::MatrixXd::Random(2, 6));
  const ControlTrajectory U(g, Eigen::MatrixXd::Zero(1, 6));
  const Eigen::VectorXd raw = defect_residual(X, U, 3, model, Eigen::Matrix2d::Identity());
  const Eigen::VectorXd scaled = defect_residual(X, U, 3, model, 4.0 * Eigen::Matrix2d::Identity());
  EXPECT_LT((scaled - 0.5 * raw).norm(), 1e-15);
  EXPECT_THROW(defect_residual(X, U, 6, model, Eigen::Matrix2d::Identity()), std::out_of_range);
}

TEST(DefectJacobian, LinearModelJacobianIsConstant) {
  const ChebyshevGrid g(6, 0.0, 1.0);
  Eigen::MatrixXd A = Eigen::MatrixXd::Random(3, 3), B = Eigen::MatrixXd::Random(3, 2);
  const LinearModel model(A, B);
  const UnknownLayout layout{3, 2, g.size()};
  const Eigen::Matrix3d Q = Eigen::Matrix3d::Identity() * 0.3;
  const auto J_at = [&](int seed) {
    std::srand(seed);
    const StateTrajectory X(g, Eigen::MatrixXd::Random(3, g.size()));
    const ControlTrajectory U(g, Eigen::MatrixXd::Random(2, g.size()));
    return dense_jacobian(defect_jacobian(X, U, 2, model, Q), layout);
  };
  EXPECT_EQ(J_at(1), J_at(2));
}

TEST(DefectJacobian, ControlBlockOnlyTouchesItsNode) {
  const ChebyshevGrid g(6, 0.0, 2.0);
  const QuadrotorParameters params;
  const QuadrotorModel model(params);
  std::mt19937_64 rng(3);
  const Eigen::VectorXd x = pstraj::testing::random_state(rng).pack();
  const Eigen::Vector4d u = pstraj::testing::random_motors(rng, params.hover_speed());
  const StateTrajectory X(g, x.replicate(1, g.size()));
  const ControlTrajectory U(g, Eigen::VectorXd(u).replicate(1, g.size()));
  const Eigen::MatrixXd Q = 1e-4 * Eigen::MatrixXd::Identity(12, 12);
  const UnknownLayout layout{12, 4, g.size()};
  const int j = 4;
  const Eigen::MatrixXd J = dense_jacobian(defect_jacobian(X, U, j, model, Q), layout);
  Eigen::MatrixXd F, G;
  model.jacobians(x, u, g.node(j), F, G);
  for (int k = 0; k < g.size(); ++k) {
    const Eigen::MatrixXd block = J.block(0, layout.offset(Target::Control, k), 12, 4);
    if (k == j) {
      EXPECT_LT((block - (-100.0 * G)).norm(), 1e-12 * G.norm() * 100.0);
    } else {
      EXPECT_EQ(block, Eigen::MatrixXd::Zero(12, 4));
    }
  }
}

TEST(DefectJacobian, QuadrotorMatchesFiniteDifferences) {
  const ChebyshevGrid g(7, 0.0, 1.0);
  const QuadrotorParameters params;
  const QuadrotorModel model(params);
  std::mt19937_64 rng(5);
  const UnknownLayout layout{12, 4, g.size()};
  const Eigen::MatrixXd Q = 1e-2 * Eigen::MatrixXd::Identity(12, 12);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::MatrixXd X(12, g.size()), U(4, g.size());
    for (int j = 0; j < g.size(); ++j) {
      X.col(j) = pstraj::testing::random_state(rng).pack();
      U.col(j) = pstraj::testing::random_motors(rng, params.hover_speed());
    }
    for (int j : {0, 3, 7}) {
      const Eigen::MatrixXd J = dense_jacobian(
          defect_jacobian(StateTrajectory(g, X), ControlTrajectory(g, U), j, model, Q), layout);
      const Eigen::MatrixXd Jn = numeric_jacobian(
          [&](const Eigen::VectorXd& z) -> Eigen::VectorXd {
            Eigen::MatrixXd Xs, Us;
            unstack_unknowns(z, layout, Xs, Us);
            return defect_residual(StateTrajectory(g, Xs), ControlTrajectory(g, Us), j, model, Q);
          },
          stack_unknowns(X, U));
      EXPECT_LT(rel_error(J, Jn), 1e-5);
    }
  }
}

TEST(Initialize, StationaryPose) {
  const QuadrotorParameters params;
  EstimationProblem problem(make_grid(8, 0.0, 2.0), std::make_shared<QuadrotorModel>(params));
  std::vector<MeasurementRecord> obs;
  Eigen::VectorXd pose(6);
  pose << 1, 2, 3, 0.1, -0.2, 0.05;
  for (double t : {0.0, 0.5, 1.2, 2.0}) {
    MeasurementRecord r;
    r.time = t;
    r.model = MeasurementModel::PoseDirect;
    r.components = {0, 1, 2, 3, 4, 5};
    r.z = pose;
    r.covariance = Eigen::MatrixXd::Identity(6, 6);
    obs.push_back(r);
  }
  const Eigen::Vector4d hover = Eigen::Vector4d::Constant(params.hover_speed());
  const auto [X, U] = initialize(problem, obs, hover);
  for (int j = 0; j < problem.grid.size(); ++j) {
    EXPECT_LT((X.col(j).head(6) - pose).norm(), 1e-14);
    EXPECT_LT(X.col(j).tail(6).norm(), 1e-10);
    EXPECT_EQ(U.col(j), Eigen::VectorXd(hover));
  }
}

TEST(Initialize, LinearMotionGivesConstantVelocity) {
  const QuadrotorParameters params;
  EstimationProblem problem(make_grid(16, 0.0, 4.0), std::make_shared<QuadrotorModel>(params));
  std::vector<MeasurementRecord> obs;
  for (double t : {0.0, 4.0}) {
    MeasurementRecord r;
    r.time = t;
    r.model = MeasurementModel::PoseDirect;
    r.components = {0, 1, 2, 3, 4, 5};
    r.z = Eigen::VectorXd::Zero(6);
    r.z.head(3) = Eigen::Vector3d(0.5, -1.0, 2.0) * t;
    r.covariance = Eigen::MatrixXd::Identity(6, 6);
    obs.push_back(r);
  }
  const auto [X, U] = initialize(problem, obs, Eigen::Vector4d::Constant(1000.0));
  for (int j = 0; j < problem.grid.size(); ++j) {
    EXPECT_LT((X.col(j).segment<3>(quad::kVel) - Eigen::Vector3d(0.5, -1.0, 2.0)).norm(), 1e-8);
  }
}

TEST(Initialize, NoisyObservationsStayInEnvelope) {
  Scenario s = desk_scenario();
  s.duration_s = 2.0;
  const GroundTruth truth = simulate_truth(s);
  const auto records = synth_measurements(truth, s);
  EstimationProblem problem(make_grid(20, 0.0, 2.0), std::make_shared<QuadrotorModel>(s.params));
  const auto [X, U] = initialize(problem, records, Eigen::Vector4d::Constant(1000.0));
  EXPECT_TRUE(X.allFinite());
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(6, 1e300), hi = -lo;
  for (const auto& r : records) {
    if (r.model != MeasurementModel::PoseDirect) continue;
    lo = lo.cwiseMin(r.z);
    hi = hi.cwiseMax(r.z);
  }
  for (int j = 0; j < problem.grid.size(); ++j) {
    EXPECT_TRUE((X.col(j).head(6).array() >= lo.array() - 1e-12).all());
    EXPECT_TRUE((X.col(j).head(6).array() <= hi.array() + 1e-12).all());
  }
}

TEST(Initialize, NeedsTwoDistinctTimes) {
  EstimationProblem problem(make_grid(8, 0.0, 2.0),
                            std::make_shared<QuadrotorModel>(QuadrotorParameters{}));
  MeasurementRecord r;
  r.time = 1.0;
  r.model = MeasurementModel::PoseDirect;
  r.components = {0, 1, 2, 3, 4, 5};
  r.z = Eigen::VectorXd::Zero(6);
  r.covariance = Eigen::MatrixXd::Identity(6, 6);
  EXPECT_THROW(initialize(problem, {r, r}, Eigen::Vector4d::Zero()), std::invalid_argument);
}

TEST(Solve, ExactInitializationConvergesImmediately) {
  EstimationProblem problem = double_integrator_problem(8, 0.0, 1);
  const Eigen::MatrixXd X = sample_function(
      problem.grid, [](double t) { return Eigen::Vector2d(poly_p(t), poly_v(t)); });
  const Eigen::MatrixXd U = sample_function(
      problem.grid, [](double t) { return Eigen::VectorXd::Constant(1, poly_a(t)); });
  const EstimateReport report = solve(problem, X, U);
  EXPECT_TRUE(report.converged);
  EXPECT_EQ(report.iterations, 1);
  EXPECT_LT(report.total_cost(), 1e-16);
}

TEST(Solve, DoubleIntegratorExactRecovery) {
  EstimationProblem problem = double_integrator_problem(8, 0.0, 1);
  const int nodes = problem.grid.size();
  const EstimateReport report =
      solve(problem, Eigen::MatrixXd::Zero(2, nodes), Eigen::MatrixXd::Zero(1, nodes));
  EXPECT_TRUE(report.converged) << report.termination;
  for (int j = 0; j < nodes; ++j) {
    const double t = problem.grid.node(j);
    EXPECT_NEAR(report.X_hat.values()(0, j), poly_p(t), 1e-6);
    EXPECT_NEAR(report.X_hat.values()(1, j), poly_v(t), 1e-6);
    EXPECT_NEAR(report.U_hat.values()(0, j), poly_a(t), 1e-6);
  }
  for (std::size_t k = 1; k < report.costs.size(); ++k) {
    EXPECT_LE(report.costs[k], report.costs[k - 1]);
  }
}

TEST(Solve, StationaryAtConvergence) {
  EstimationProblem problem = double_integrator_problem(8, 0.05, 4);
  const int nodes = problem.grid.size();
  const EstimateReport report =
      solve(problem, Eigen::MatrixXd::Zero(2, nodes), Eigen::MatrixXd::Zero(1, nodes));
  ASSERT_TRUE(report.converged);
  Eigen::MatrixXd J;
  Eigen::VectorXd r;
  dense_objective(problem, report.X_hat.values(), report.U_hat.values(), J, r);
  const double grad = (2.0 * J.transpose() * r).lpNorm<Eigen::Infinity>();
  EXPECT_LT(grad, 1e-6 * (1.0 + report.total_cost()));
  EXPECT_GT(report.total_cost(), 0.0);
}

TEST(Solve, GradientMatchesFiniteDifferencesOfCost) {
  QuadSetup q = quad_setup(8, 1.0);
  const EstimationProblem& p = *q.problem;
  Eigen::MatrixXd X = sample_function(p.grid, [&](double t) { return q.truth->state_at(t); });
  Eigen::MatrixXd U = sample_function(p.grid, [&](double t) { return q.truth->control_at(t); });
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n01;
  for (auto& v : X.reshaped()) v += 1e-3 * n01(rng);
  for (auto& v : U.reshaped()) v += 1.0 * n01(rng);

  Eigen::MatrixXd J;
  Eigen::VectorXd r;
  dense_objective(p, X, U, J, r);
  const Eigen::VectorXd grad = 2.0 * J.transpose() * r;
  const UnknownLayout layout = p.layout();
  const Eigen::VectorXd z = stack_unknowns(X, U);
  Eigen::VectorXd fd(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(z[i]));
    Eigen::VectorXd zp = z, zm = z;
    zp[i] += h;
    zm[i] -= h;
    Eigen::MatrixXd Xp, Up, Xm, Um;
    unstack_unknowns(zp, layout, Xp, Up);
    unstack_unknowns(zm, layout, Xm, Um);
    fd[i] = (total(p, Xp, Up) - total(p, Xm, Um)) / (2.0 * h);
  }
  EXPECT_LT((grad - fd).norm() / grad.norm(), 1e-4);
}

TEST(Solve, QuadrotorCostIsMonotoneAndConverges) {
  QuadSetup q = quad_setup(16, 2.0);
  const Eigen::VectorXd hover = Eigen::Vector4d::Constant(q.scenario.params.hover_speed());
  const auto [X0, U0] = initialize(*q.problem, q.problem->measurements, hover);
  const EstimateReport report = solve(*q.problem, X0, U0);
  EXPECT_TRUE(report.converged) << report.termination;
  ASSERT_GE(report.costs.size(), 2u);
  for (std::size_t k = 1; k < report.costs.size(); ++k) {
    EXPECT_LE(report.costs[k], report.costs[k - 1]);
  }
  EXPECT_NEAR(report.costs.back(), report.total_cost(), 1e-9 * report.total_cost());
}

TEST(Solve, MeasurementOrderDoesNotMatter) {
  QuadSetup q = quad_setup(10, 1.0);
  const Eigen::VectorXd hover = Eigen::Vector4d::Constant(q.scenario.params.hover_speed());
  const auto [X0, U0] = initialize(*q.problem, q.problem->measurements, hover);
  q.problem->solver.max_iterations = 15;
  const EstimateReport a = solve(*q.problem, X0, U0);
  std::mt19937_64 rng(99);
  std::shuffle(q.problem->measurements.begin(), q.problem->measurements.end(), rng);
  const EstimateReport b = solve(*q.problem, X0, U0);
  EXPECT_LT((a.X_hat.values() - b.X_hat.values()).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((a.U_hat.values() - b.U_hat.values()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Solve, SerialAndParallelRunsAgreeExactly) {
  QuadSetup q = quad_setup(10, 1.0);
  const Eigen::VectorXd hover = Eigen::Vector4d::Constant(q.scenario.params.hover_speed());
  const auto [X0, U0] = initialize(*q.problem, q.problem->measurements, hover);
  q.problem->solver.max_iterations = 10;
  q.problem->solver.parallel = false;
  const EstimateReport a = solve(*q.problem, X0, U0);
  q.problem->solver.parallel = true;
  const EstimateReport b = solve(*q.problem, X0, U0);
  EXPECT_EQ(a.X_hat.values(), b.X_hat.values());
  EXPECT_EQ(a.U_hat.values(), b.U_hat.values());
  EXPECT_EQ(a.costs, b.costs);
}

TEST(ControlRatePrior, ZeroForConstantControls) {
  EstimationProblem problem = double_integrator_problem(6, 0.0, 1);
  problem.control_rate_sigma = 2.0;
  const int nodes = problem.grid.size();
  const Eigen::MatrixXd X = Eigen::MatrixXd::Zero(2, nodes);
  const ObjectiveEvaluator ev(problem, X, Eigen::MatrixXd::Constant(1, nodes, 3.0), false);
  EXPECT_LT((*ev.costs(X, Eigen::MatrixXd::Constant(1, nodes, 3.0), false))[2], 1e-20);
  // u(t) = t has du/dt = 1 at every node: prior cost (N+1) / sigma^2.
  const Eigen::MatrixXd U =
      sample_function(problem.grid, [](double t) { return Eigen::VectorXd::Constant(1, t); });
  EXPECT_NEAR((*ev.costs(X, U, false))[2], nodes / 4.0, 1e-12);
}

TEST(EstimationProblem, ValidateRejectsInconsistencies) {
  EstimationProblem problem = double_integrator_problem(6, 0.0, 1);
  problem.defect_covariance = -Eigen::Matrix2d::Identity();
  EXPECT_THROW(problem.validate(), std::invalid_argument);
  problem = double_integrator_problem(6, 0.0, 1);
  problem.measurements.push_back(position_obs(2.5, 0.0, 1.0));
  EXPECT_THROW(problem.validate(), std::invalid_argument);
  problem = double_integrator_problem(6, 0.0, 1);
  problem.solver.damping_factor = 1.0;
  EXPECT_THROW(problem.validate(), std::invalid_argument);
  problem = double_integrator_problem(6, 0.0, 1);
  problem.control_rate_sigma = 0.0;
  EXPECT_THROW(problem.validate(), std::invalid_argument);
}
