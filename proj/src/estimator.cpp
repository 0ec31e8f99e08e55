#include "pstraj/estimator.hpp"

#include "pstraj/kernels.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <iostream>
#include <limits>

namespace pstraj {

namespace {

constexpr double kMaxDamping = 1e16;

Eigen::MatrixXd inverse_factor_solve(const Eigen::MatrixXd& L,
                                     const Eigen::MatrixXd& rhs) {
  return L.triangularView<Eigen::Lower>().solve(rhs);
}

// Canonical record order so that the assembled system does not depend on
// the order measurements were supplied in.
bool record_less(const MeasurementRecord& a, const MeasurementRecord& b) {
  if (a.time != b.time) return a.time < b.time;
  if (a.model != b.model) return a.model < b.model;
  if (a.landmark_id != b.landmark_id) return a.landmark_id < b.landmark_id;
  if (a.components != b.components) return a.components < b.components;
  const auto lex = [](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    return std::lexicographical_compare(x.data(), x.data() + x.size(), y.data(),
                                        y.data() + y.size());
  };
  if (lex(a.z, b.z)) return true;
  if (lex(b.z, a.z)) return false;
  return lex(a.landmark, b.landmark);
}

// Runs body(i) for i in [0, count), optionally in parallel. The first
// exception by index is rethrown after the loop.
template <class Body>
void for_each_index(int count, bool parallel, Body&& body) {
  std::vector<std::exception_ptr> errors(count);
#pragma omp parallel for schedule(dynamic, 2) if (parallel)
  for (int i = 0; i < count; ++i) {
    try {
      body(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

void SolverSettings::validate() const {
  if (max_iterations <= 0) throw std::invalid_argument("max_iterations must be positive");
  if (!(initial_damping > 0.0)) throw std::invalid_argument("initial_damping must be positive");
  if (!(damping_factor > 1.0)) throw std::invalid_argument("damping_factor must exceed 1");
  if (!(cost_tolerance > 0.0)) throw std::invalid_argument("cost_tolerance must be positive");
  if (!(step_tolerance > 0.0)) throw std::invalid_argument("step_tolerance must be positive");
}

EstimationProblem::EstimationProblem(ChebyshevGrid g,
                                     std::shared_ptr<const DynamicsModel> model)
    : grid(std::move(g)), dynamics(std::move(model)) {
  if (!dynamics) throw std::invalid_argument("estimation problem needs a dynamics model");
  defect_covariance =
      1e-4 * Eigen::MatrixXd::Identity(dynamics->state_dim(), dynamics->state_dim());
}

UnknownLayout EstimationProblem::layout() const {
  return {dynamics->state_dim(), dynamics->control_dim(), grid.size()};
}

void EstimationProblem::validate() const {
  const int n = dynamics->state_dim();
  if (defect_covariance.rows() != n || defect_covariance.cols() != n) {
    throw std::invalid_argument("defect covariance must be n x n");
  }
  covariance_factor(defect_covariance);
  rig.validate();
  solver.validate();
  for (const MeasurementRecord& r : measurements) {
    validate_record(r, n);
    if (!grid.contains(r.time)) {
      throw std::invalid_argument("measurement time " + std::to_string(r.time) +
                                  " outside the estimation interval");
    }
  }
  for (const NodePrior& p : priors) {
    const int dim = p.target == Target::State ? n : dynamics->control_dim();
    if (p.node < 0 || p.node >= grid.size()) {
      throw std::invalid_argument("prior node index out of range");
    }
    if (p.mean.size() != dim || p.covariance.rows() != dim) {
      throw std::invalid_argument("prior dimension mismatch");
    }
    covariance_factor(p.covariance);
  }
  if (control_rate_sigma && !(*control_rate_sigma > 0.0)) {
    throw std::invalid_argument("control_rate_sigma must be positive");
  }
}

void add_control_priors(EstimationProblem& problem, const Eigen::VectorXd& mean,
                        double sigma) {
  const int p = problem.dynamics->control_dim();
  for (int j = 0; j < problem.grid.size(); ++j) {
    problem.priors.push_back(
        {Target::Control, j, mean, sigma * sigma * Eigen::MatrixXd::Identity(p, p)});
  }
}

ObjectiveEvaluator::ObjectiveEvaluator(const EstimationProblem& problem,
                                       const Eigen::MatrixXd& X,
                                       const Eigen::MatrixXd& U,
                                       bool drop_invalid)
    : problem_(problem) {
  problem.validate();
  D_ = differentiation_matrix(problem.grid);
  defect_factor_ = covariance_factor(problem.defect_covariance);
  for (const NodePrior& p : problem.priors) {
    prior_factors_.push_back(covariance_factor(p.covariance));
  }

  records_ = problem.measurements;
  std::stable_sort(records_.begin(), records_.end(), record_less);

  const Eigen::MatrixXd XDt = X * D_.transpose();
  if (drop_invalid) {
    std::vector<MeasurementRecord> kept;
    kept.reserve(records_.size());
    for (MeasurementRecord& r : records_) {
      const Eigen::VectorXd w = barycentric_weights(problem.grid, r.time);
      try {
        predict(r, X * w, XDt * w, U * w, problem.rig, false);
        kept.push_back(std::move(r));
      } catch (const CheiralityError&) {
        ++skipped_;
      }
    }
    records_ = std::move(kept);
  }

  for (const MeasurementRecord& r : records_) {
    if (groups_.empty() || groups_.back().time != r.time) {
      MeasurementGroup g;
      g.time = r.time;
      g.weights = barycentric_weights(problem.grid, r.time);
      g.rate_weights = D_.transpose() * g.weights;
      groups_.push_back(std::move(g));
    }
    groups_.back().records.push_back(&r);
    groups_.back().factors.push_back(covariance_factor(r.covariance));
  }
}

ResidualBlock ObjectiveEvaluator::group_block(const MeasurementGroup& group,
                                              const Eigen::MatrixXd& X,
                                              const Eigen::MatrixXd& XDt,
                                              const Eigen::MatrixXd& U,
                                              bool jacobians) const {
  const int n = static_cast<int>(X.rows());
  const int p = static_cast<int>(U.rows());
  int rows = 0;
  for (const MeasurementRecord* r : group.records) rows += r->dim();

  const Eigen::VectorXd x = X * group.weights;
  const Eigen::VectorXd x_dot = XDt * group.weights;
  const Eigen::VectorXd u = U * group.weights;

  ResidualBlock block;
  block.residual.resize(rows);
  Eigen::MatrixXd d_state, d_rate, d_control;
  bool any_state = false, any_rate = false, any_control = false;
  if (jacobians) {
    d_state = Eigen::MatrixXd::Zero(rows, n);
    d_rate = Eigen::MatrixXd::Zero(rows, n);
    d_control = Eigen::MatrixXd::Zero(rows, p);
  }
  int row = 0;
  for (std::size_t i = 0; i < group.records.size(); ++i) {
    const MeasurementRecord& r = *group.records[i];
    const Eigen::MatrixXd& L = group.factors[i];
    const PointPrediction pred = predict(r, x, x_dot, u, problem_.rig, jacobians);
    const int m = r.dim();
    block.residual.segment(row, m) = inverse_factor_solve(L, r.z - pred.h);
    if (jacobians) {
      if (pred.d_state.size() > 0) {
        d_state.middleRows(row, m) = inverse_factor_solve(L, -pred.d_state);
        any_state = true;
      }
      if (pred.d_state_rate.size() > 0) {
        d_rate.middleRows(row, m) = inverse_factor_solve(L, -pred.d_state_rate);
        any_rate = true;
      }
      if (pred.d_control.size() > 0) {
        d_control.middleRows(row, m) = inverse_factor_solve(L, -pred.d_control);
        any_control = true;
      }
    }
    row += m;
  }
  if (any_state) block.terms.push_back({Target::State, group.weights, std::move(d_state)});
  if (any_rate) block.terms.push_back({Target::State, group.rate_weights, std::move(d_rate)});
  if (any_control) block.terms.push_back({Target::Control, group.weights, std::move(d_control)});
  return block;
}

ResidualBlock ObjectiveEvaluator::defect_block(int node, const Eigen::MatrixXd& X,
                                               const Eigen::MatrixXd& XDt,
                                               const Eigen::MatrixXd& U,
                                               bool jacobians) const {
  const double t = problem_.grid.node(node);
  const Eigen::VectorXd x = X.col(node);
  const Eigen::VectorXd u = U.col(node);
  ResidualBlock block;
  block.residual = inverse_factor_solve(
      defect_factor_, XDt.col(node) - problem_.dynamics->derivative(x, u, t));
  if (jacobians) {
    const int nodes = problem_.grid.size();
    const int n = static_cast<int>(X.rows());
    Eigen::MatrixXd F, G;
    problem_.dynamics->jacobians(x, u, t, F, G);
    const Eigen::VectorXd unit = Eigen::VectorXd::Unit(nodes, node);
    block.terms.push_back({Target::State, D_.row(node).transpose(),
                           inverse_factor_solve(defect_factor_,
                                                Eigen::MatrixXd::Identity(n, n))});
    block.terms.push_back({Target::State, unit, inverse_factor_solve(defect_factor_, -F)});
    block.terms.push_back({Target::Control, unit, inverse_factor_solve(defect_factor_, -G)});
  }
  return block;
}

ResidualBlock ObjectiveEvaluator::prior_block(const NodePrior& prior,
                                              const Eigen::MatrixXd& X,
                                              const Eigen::MatrixXd& U) const {
  const std::size_t index = &prior - problem_.priors.data();
  const Eigen::MatrixXd& L = prior_factors_[index];
  const Eigen::VectorXd value =
      prior.target == Target::State ? X.col(prior.node) : U.col(prior.node);
  ResidualBlock block;
  // Residual is (value - mean) so the Jacobian is +L^-1.
  block.residual = inverse_factor_solve(L, value - prior.mean);
  block.terms.push_back(
      {prior.target, Eigen::VectorXd::Unit(problem_.grid.size(), prior.node),
       inverse_factor_solve(L, Eigen::MatrixXd::Identity(L.rows(), L.cols()))});
  return block;
}

ResidualBlock ObjectiveEvaluator::control_rate_block(int node,
                                                     const Eigen::MatrixXd& U) const {
  const double inv_sigma = 1.0 / *problem_.control_rate_sigma;
  const Eigen::VectorXd coeffs = D_.row(node).transpose();
  ResidualBlock block;
  block.residual = inv_sigma * (U * coeffs);
  block.terms.push_back(
      {Target::Control, coeffs,
       inv_sigma * Eigen::MatrixXd::Identity(U.rows(), U.rows())});
  return block;
}

LinearizedObjective ObjectiveEvaluator::evaluate(const Eigen::MatrixXd& X,
                                                 const Eigen::MatrixXd& U,
                                                 bool jacobians,
                                                 bool parallel) const {
  const Eigen::MatrixXd XDt = X * D_.transpose();
  const int groups = static_cast<int>(groups_.size());
  const int nodes = problem_.grid.size();
  const int priors = static_cast<int>(problem_.priors.size());
  const int rate_priors = problem_.control_rate_sigma ? nodes : 0;

  LinearizedObjective out;
  out.measurement_blocks = groups;
  out.defect_blocks = nodes;
  out.blocks.resize(groups + nodes + priors + rate_priors);
  for_each_index(groups + nodes + priors + rate_priors, parallel, [&](int i) {
    if (i < groups) {
      out.blocks[i] = group_block(groups_[i], X, XDt, U, jacobians);
    } else if (i < groups + nodes) {
      out.blocks[i] = defect_block(i - groups, X, XDt, U, jacobians);
    } else if (i < groups + nodes + priors) {
      out.blocks[i] = prior_block(problem_.priors[i - groups - nodes], X, U);
    } else {
      out.blocks[i] = control_rate_block(i - groups - nodes - priors, U);
    }
  });
  return out;
}

LinearizedObjective ObjectiveEvaluator::linearize(const Eigen::MatrixXd& X,
                                                  const Eigen::MatrixXd& U,
                                                  bool parallel) const {
  return evaluate(X, U, true, parallel);
}

std::optional<std::array<double, 3>> ObjectiveEvaluator::costs(
    const Eigen::MatrixXd& X, const Eigen::MatrixXd& U, bool parallel) const {
  LinearizedObjective lin;
  try {
    lin = evaluate(X, U, false, parallel);
  } catch (const ChartError&) {
    return std::nullopt;
  } catch (const CheiralityError&) {
    return std::nullopt;
  }
  std::array<double, 3> c{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < lin.blocks.size(); ++i) {
    const int kind = static_cast<int>(i) < lin.measurement_blocks ? 0
                     : static_cast<int>(i) < lin.measurement_blocks + lin.defect_blocks
                         ? 1
                         : 2;
    c[kind] += lin.blocks[i].residual.squaredNorm();
  }
  if (!std::isfinite(c[0] + c[1] + c[2])) return std::nullopt;
  return c;
}

Eigen::VectorXd defect_residual(const StateTrajectory& X,
                                const ControlTrajectory& U, int node,
                                const DynamicsModel& dynamics,
                                const Eigen::MatrixXd& Q) {
  if (node < 0 || node >= X.grid().size()) {
    throw std::out_of_range("defect node index out of range");
  }
  const Eigen::MatrixXd L = covariance_factor(Q);
  const Eigen::VectorXd f = dynamics.derivative(
      X.values().col(node), U.values().col(node), X.grid().node(node));
  return inverse_factor_solve(L, X.derivative_values().col(node) - f);
}

ResidualBlock defect_jacobian(const StateTrajectory& X,
                              const ControlTrajectory& U, int node,
                              const DynamicsModel& dynamics,
                              const Eigen::MatrixXd& Q) {
  if (node < 0 || node >= X.grid().size()) {
    throw std::out_of_range("defect node index out of range");
  }
  const Eigen::MatrixXd L = covariance_factor(Q);
  const int n = X.dim();
  const double t = X.grid().node(node);
  const Eigen::MatrixXd D = differentiation_matrix(X.grid());
  Eigen::MatrixXd F, G;
  dynamics.jacobians(X.values().col(node), U.values().col(node), t, F, G);
  const Eigen::VectorXd unit = Eigen::VectorXd::Unit(X.grid().size(), node);

  ResidualBlock block;
  block.residual = defect_residual(X, U, node, dynamics, Q);
  block.terms.push_back({Target::State, D.row(node).transpose(),
                         inverse_factor_solve(L, Eigen::MatrixXd::Identity(n, n))});
  block.terms.push_back({Target::State, unit, inverse_factor_solve(L, -F)});
  block.terms.push_back({Target::Control, unit, inverse_factor_solve(L, -G)});
  return block;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> initialize(
    const EstimationProblem& problem,
    const std::vector<MeasurementRecord>& pose_observations,
    const Eigen::VectorXd& nominal_control) {
  const int n = problem.dynamics->state_dim();
  if (n != QuadrotorState::kDim) {
    throw std::invalid_argument("initialize expects the 12-state quadrotor layout");
  }
  if (nominal_control.size() != problem.dynamics->control_dim()) {
    throw std::invalid_argument("nominal control has the wrong dimension");
  }

  // Collect full-pose observations, averaging duplicates at the same time.
  std::vector<std::pair<double, Eigen::VectorXd>> poses;
  for (const MeasurementRecord& r : pose_observations) {
    if (r.model != MeasurementModel::PoseDirect) continue;
    Eigen::VectorXd pose = Eigen::VectorXd::Constant(6, std::nan(""));
    for (std::size_t i = 0; i < r.components.size(); ++i) {
      if (r.components[i] < 6) pose[r.components[i]] = r.z[i];
    }
    if (pose.hasNaN()) continue;
    poses.emplace_back(r.time, pose);
  }
  std::stable_sort(poses.begin(), poses.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::pair<double, Eigen::VectorXd>> merged;
  std::vector<int> counts;
  for (auto& [t, pose] : poses) {
    if (!merged.empty() && merged.back().first == t) {
      merged.back().second += pose;
      ++counts.back();
    } else {
      merged.emplace_back(t, pose);
      counts.push_back(1);
    }
  }
  for (std::size_t i = 0; i < merged.size(); ++i) merged[i].second /= counts[i];
  if (merged.size() < 2) {
    throw std::invalid_argument(
        "initialize needs pose observations at two or more distinct times");
  }

  const int nodes = problem.grid.size();
  Eigen::MatrixXd pose_rows(6, nodes);
  for (int j = 0; j < nodes; ++j) {
    const double t = problem.grid.node(j);
    auto hi = std::lower_bound(merged.begin(), merged.end(), t,
                               [](const auto& e, double v) { return e.first < v; });
    if (hi == merged.begin()) {
      pose_rows.col(j) = merged.front().second;
    } else if (hi == merged.end()) {
      pose_rows.col(j) = merged.back().second;
    } else {
      auto lo = std::prev(hi);
      const double a = (t - lo->first) / (hi->first - lo->first);
      pose_rows.col(j) = (1.0 - a) * lo->second + a * hi->second;
    }
  }
  const Eigen::MatrixXd D = differentiation_matrix(problem.grid);
  const Eigen::MatrixXd rates = pose_rows * D.transpose();

  Eigen::MatrixXd X(n, nodes);
  X.middleRows(quad::kPos, 3) = pose_rows.topRows(3);
  X.middleRows(quad::kRot, 3) = pose_rows.bottomRows(3);
  X.middleRows(quad::kVel, 3) = rates.topRows(3);
  X.middleRows(quad::kRate, 3) = rates.bottomRows(3);
  Eigen::MatrixXd U = nominal_control.replicate(1, nodes);
  return {X, U};
}

EstimateReport solve(const EstimationProblem& problem, const Eigen::MatrixXd& X0,
                     const Eigen::MatrixXd& U0) {
  const auto start = std::chrono::steady_clock::now();
  const UnknownLayout layout = problem.layout();
  if (X0.rows() != layout.state_dim || X0.cols() != layout.nodes ||
      U0.rows() != layout.control_dim || U0.cols() != layout.nodes) {
    throw std::invalid_argument("initial estimate has the wrong shape");
  }
  const SolverSettings& settings = problem.solver;
  const ObjectiveEvaluator evaluator(problem, X0, U0, true);
  const auto assemble = [&](const LinearizedObjective& lin) {
    return settings.parallel
               ? kernels::assemble_normal_equations_omp(lin.blocks, layout)
               : kernels::assemble_normal_equations_serial(lin.blocks, layout);
  };

  Eigen::MatrixXd X = X0;
  Eigen::MatrixXd U = U0;
  auto costs = evaluator.costs(X, U, settings.parallel);
  if (!costs) {
    throw std::domain_error("initial estimate lies outside the dynamics chart");
  }
  double cost = (*costs)[0] + (*costs)[1] + (*costs)[2];

  int iterations = 0;
  bool converged = false;
  std::string termination = "max_iterations";
  std::vector<double> cost_log{cost};
  double damping = settings.initial_damping;

  while (iterations < settings.max_iterations && !converged) {
    ++iterations;
    const kernels::NormalEquations ne = assemble(evaluator.linearize(X, U, settings.parallel));
    Eigen::VectorXd scale = ne.lhs.diagonal();
    const double floor = 1e-12 * std::max(1.0, scale.maxCoeff());
    scale = scale.cwiseMax(floor);

    bool accepted = false;
    while (!accepted) {
      Eigen::MatrixXd A = ne.lhs;
      A.diagonal() += damping * scale;
      Eigen::LLT<Eigen::MatrixXd> llt(A);
      Eigen::VectorXd step;
      if (llt.info() == Eigen::Success) step = llt.solve(-ne.rhs);
      if (llt.info() != Eigen::Success || !step.allFinite()) {
        damping *= settings.damping_factor;
        if (damping > kMaxDamping) break;
        continue;
      }
      if (step.norm() < settings.step_tolerance) {
        converged = true;
        termination = "step_tolerance";
        break;
      }
      Eigen::MatrixXd dX, dU;
      unstack_unknowns(step, layout, dX, dU);
      const auto trial = evaluator.costs(X + dX, U + dU, settings.parallel);
      const double trial_cost =
          trial ? (*trial)[0] + (*trial)[1] + (*trial)[2]
                : std::numeric_limits<double>::infinity();
      if (trial_cost < cost) {
        accepted = true;
        X += dX;
        U += dU;
        const double decrease = (cost - trial_cost) / std::max(cost, 1e-300);
        cost = trial_cost;
        cost_log.push_back(cost);
        damping = std::max(damping / settings.damping_factor, 1e-12);
        if (decrease < settings.cost_tolerance) {
          converged = true;
          termination = "cost_tolerance";
        }
        if (settings.verbose) {
          std::cerr << "iter " << iterations << " cost " << cost << " damping "
                    << damping << "\n";
        }
      } else {
        damping *= settings.damping_factor;
        if (damping > kMaxDamping) break;
      }
    }
    if (!accepted && !converged) {
      // No descent direction left: converged iff the gradient vanishes.
      const double grad = 2.0 * ne.rhs.lpNorm<Eigen::Infinity>();
      if (grad < 1e-6 * (1.0 + cost)) {
        converged = true;
        termination = "stationary";
      } else {
        termination = "damping_overflow";
      }
      break;
    }
  }

  const auto final_costs = evaluator.costs(X, U, settings.parallel);
  EstimateReport report(StateTrajectory(problem.grid, X),
                        ControlTrajectory(problem.grid, U));
  report.measurement_cost = (*final_costs)[0];
  report.defect_cost = (*final_costs)[1];
  report.prior_cost = (*final_costs)[2];
  report.costs = std::move(cost_log);
  report.iterations = iterations;
  report.converged = converged;
  report.termination = termination;
  report.skipped_measurements = evaluator.skipped();
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

void dense_objective(const EstimationProblem& problem, const Eigen::MatrixXd& X,
                     const Eigen::MatrixXd& U, Eigen::MatrixXd& J,
                     Eigen::VectorXd& r) {
  const UnknownLayout layout = problem.layout();
  const ObjectiveEvaluator evaluator(problem, X, U, false);
  const LinearizedObjective lin = evaluator.linearize(X, U, false);
  int rows = 0;
  for (const ResidualBlock& b : lin.blocks) rows += b.rows();
  J.resize(rows, layout.size());
  r.resize(rows);
  int row = 0;
  for (const ResidualBlock& b : lin.blocks) {
    J.middleRows(row, b.rows()) = dense_jacobian(b, layout);
    r.segment(row, b.rows()) = b.residual;
    row += b.rows();
  }
}

}  // namespace pstraj
