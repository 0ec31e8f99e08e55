// pstraj: pseudo-spectral trajectory and motor-speed estimation pipeline.
//
//   pstraj fit-demo  [--samples xy.csv] [--degree 6] [--seed 7] --out DIR
//   pstraj simulate  --scenario scenario.json --out DIR [--seed S]
//   pstraj estimate  --scenario SIM_DIR --out DIR [--degree 128] [--max-iters 100]
//                    [--control-rate-sigma 100]
//   pstraj evaluate  --truth ground_truth.csv --estimate trajectory.csv --out DIR

#include "pstraj/estimator.hpp"
#include "pstraj/fit_demo.hpp"
#include "pstraj/scenario.hpp"
#include "pstraj/scenario_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace pstraj;

namespace {

struct RunConfig {
  std::string scenario;
  std::string out;
  std::string samples;
  std::string truth;
  std::string estimate;
  std::optional<int> degree;
  std::optional<int> max_iters;
  std::optional<std::uint64_t> seed;
  double control_rate_sigma = 100.0;
  bool verbose = false;
};

void ensure_dir(const std::string& dir) {
  if (dir.empty()) throw std::invalid_argument("--out is required");
  fs::create_directories(dir);
}

void require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw std::runtime_error("missing input file " + p.string());
}

Samples read_samples(const fs::path& path) {
  require_file(path);
  std::istringstream in(io::read_file(path));
  Samples s;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#' || std::isalpha(static_cast<unsigned char>(line[0]))) continue;
    std::istringstream row(line);
    double x, y;
    char comma;
    if (!(row >> x >> comma >> y) || comma != ',') {
      throw io::FormatError(path.string() + ":" + std::to_string(line_no) + ": expected x,y");
    }
    s.xs.push_back(x);
    s.ys.push_back(y);
  }
  return s;
}

int cmd_fit_demo(const RunConfig& cfg) {
  const int degree = cfg.degree.value_or(6);
  const bool builtin = cfg.samples.empty();
  const Samples samples =
      builtin ? demo_samples(21, 0.1, cfg.seed.value_or(7)) : read_samples(cfg.samples);
  double lo = -1.0, hi = 1.0;
  if (!builtin) {
    if (samples.xs.empty()) throw std::invalid_argument("no samples in " + cfg.samples);
    lo = *std::min_element(samples.xs.begin(), samples.xs.end());
    hi = *std::max_element(samples.xs.begin(), samples.xs.end());
  }
  const ChebyshevFit fit = fit_chebyshev_lsq(samples.xs, samples.ys, degree, lo, hi);
  ensure_dir(cfg.out);

  std::string nodes = "node,t,value\n";
  for (int j = 0; j < fit.grid.size(); ++j) {
    nodes += std::to_string(j) + ',' + io::format_number(fit.grid.node(j)) + ',' +
             io::format_number(fit.node_values[j]) + '\n';
  }
  io::write_file(fs::path(cfg.out) / "fit_nodes.csv", nodes);

  std::string dense = builtin ? "t,fitted,true\n" : "t,fitted\n";
  double max_dev = 0.0;
  const int points = 201;
  for (int i = 0; i < points; ++i) {
    const double t = std::min(hi, lo + (hi - lo) * i / (points - 1));
    const double v = fit.eval(t);
    dense += io::format_number(t) + ',' + io::format_number(v);
    if (builtin) {
      dense += ',' + io::format_number(demo_function(t));
      max_dev = std::max(max_dev, std::abs(v - demo_function(t)));
    }
    dense += '\n';
  }
  io::write_file(fs::path(cfg.out) / "fit_dense.csv", dense);

  nlohmann::json report = {{"degree", degree},
                           {"samples", samples.xs.size()},
                           {"rms_residual", fit.rms_residual}};
  if (builtin) report["max_deviation_from_truth"] = max_dev;
  io::write_file(fs::path(cfg.out) / "fit_report.json", report.dump(2) + "\n");
  std::cout << "rms residual " << fit.rms_residual << "\n";
  return 0;
}

int cmd_simulate(const RunConfig& cfg) {
  if (cfg.scenario.empty()) throw std::invalid_argument("--scenario is required");
  require_file(cfg.scenario);
  Scenario scenario = io::load_scenario(cfg.scenario);
  if (cfg.seed) scenario.seed = *cfg.seed;
  const GroundTruth truth = simulate_truth(scenario);
  const auto records = synth_measurements(truth, scenario);
  ensure_dir(cfg.out);
  const fs::path out(cfg.out);
  io::write_file(out / "scenario.json", io::scenario_to_json(scenario));
  io::write_trajectory_csv(out / "ground_truth.csv", io::ground_truth_table(truth));
  io::write_measurements_csv(out / "measurements.csv", records);
  if (cfg.verbose) {
    std::cerr << truth.times().size() << " truth samples, " << records.size()
              << " measurement records\n";
  }
  return 0;
}

int cmd_estimate(const RunConfig& cfg) {
  if (cfg.scenario.empty()) throw std::invalid_argument("--scenario is required");
  const fs::path dir(cfg.scenario);
  require_file(dir / "scenario.json");
  require_file(dir / "measurements.csv");
  const int degree = cfg.degree.value_or(128);
  if (degree < 4) throw std::invalid_argument("--degree must be >= 4 for estimate");

  const Scenario scenario = io::load_scenario(dir / "scenario.json");
  const auto records = io::read_measurements_csv(dir / "measurements.csv");

  auto model = std::make_shared<QuadrotorModel>(scenario.params);
  EstimationProblem problem(make_grid(degree, 0.0, scenario.duration_s), model);
  problem.measurements = records;
  problem.rig = scenario.rig;
  if (cfg.max_iters) problem.solver.max_iterations = *cfg.max_iters;
  problem.solver.verbose = cfg.verbose;
  const Eigen::VectorXd hover = Eigen::Vector4d::Constant(scenario.params.hover_speed());
  add_control_priors(problem, hover, 1e3);
  if (cfg.control_rate_sigma > 0.0) problem.control_rate_sigma = cfg.control_rate_sigma;

  const auto [X0, U0] = initialize(problem, records, hover);
  const EstimateReport report = solve(problem, X0, U0);

  ensure_dir(cfg.out);
  const fs::path out(cfg.out);
  io::write_file(out / "estimate.json", io::report_to_json(report, degree));
  io::write_costs_csv(out / "costs.csv", report.costs);
  io::write_trajectory_csv(
      out / "trajectory.csv",
      io::sample_estimate(report.X_hat, report.U_hat,
                          uniform_times(0.0, scenario.duration_s, 100.0)));
  nlohmann::json timing = {{"wall_time_s", report.wall_time_s}};
  io::write_file(out / "timing.json", timing.dump(2) + "\n");

  std::cout << (report.converged ? "converged" : "not converged") << " ("
            << report.termination << ") after " << report.iterations
            << " iterations, cost " << report.total_cost() << ", "
            << report.wall_time_s << " s\n";
  if (!report.converged) {
    std::cerr << "estimate: solver did not converge (" << report.termination << ")\n";
    return 3;
  }
  return 0;
}

int cmd_evaluate(const RunConfig& cfg) {
  if (cfg.truth.empty() || cfg.estimate.empty()) {
    throw std::invalid_argument("--truth and --estimate are required");
  }
  require_file(cfg.truth);
  require_file(cfg.estimate);
  const io::TrajectoryTable truth = io::read_trajectory_csv(cfg.truth);
  const io::TrajectoryTable est = io::read_trajectory_csv(cfg.estimate);

  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < est.times.size(); ++i) {
    const double t = est.times[i];
    if (t >= truth.times.front() - 1e-9 && t <= truth.times.back() + 1e-9) rows.push_back(i);
  }
  if (rows.empty()) throw std::invalid_argument("truth and estimate supports are disjoint");

  const auto k = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd wt(4, k), we(4, k), xt(12, k), xe(12, k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const double t = est.times[rows[c]];
    wt.col(c) = io::interpolate_row(truth, t, true);
    xt.col(c) = io::interpolate_row(truth, t, false);
    we.col(c) = est.controls.col(rows[c]);
    xe.col(c) = est.states.col(rows[c]);
  }
  const MotorSpeedError motors = motor_speed_error(wt, we);
  const StateError states = state_error(xt, xe);

  std::string header, row;
  for (int m = 0; m < 4; ++m) {
    const std::string name = "motor" + std::to_string(m + 1);
    header += name + "_rpm," + name + "_pct_err,";
    row += io::format_number(motors.mean_rpm[m]) + ',' +
           io::format_number(motors.mean_percent[m]) + ',';
  }
  header += "position_rmse_m,attitude_rmse_rad\n";
  row += io::format_number(states.position_rmse) + ',' +
         io::format_number(states.attitude_rmse) + '\n';
  ensure_dir(cfg.out);
  io::write_file(fs::path(cfg.out) / "errors.csv", header + row);
  std::cout << header << row;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudo-spectral trajectory and motor-speed estimation"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto add_common = [&cfg](CLI::App* sub) {
    sub->add_option("--out", cfg.out, "Output directory");
    sub->add_flag("--verbose", cfg.verbose, "Log progress to stderr");
  };

  auto* fit = app.add_subcommand("fit-demo", "Least-squares Chebyshev fit of scattered samples");
  add_common(fit);
  fit->add_option("--samples", cfg.samples, "CSV of x,y samples (default: built-in demo)");
  fit->add_option("--degree", cfg.degree, "Polynomial degree (default 6)");
  fit->add_option("--seed", cfg.seed, "Noise seed for the built-in demo");

  auto* sim = app.add_subcommand("simulate", "Generate ground truth and measurements");
  add_common(sim);
  sim->add_option("--scenario", cfg.scenario, "Scenario JSON file");
  sim->add_option("--seed", cfg.seed, "Override the scenario seed");

  auto* est = app.add_subcommand("estimate", "Estimate state and motor speeds");
  add_common(est);
  est->add_option("--scenario", cfg.scenario, "Directory written by simulate");
  est->add_option("--degree", cfg.degree, "Polynomial degree N (default 128)");
  est->add_option("--max-iters", cfg.max_iters, "Maximum solver iterations");
  est->add_option("--control-rate-sigma", cfg.control_rate_sigma,
                  "Prior std. dev. of motor-speed rates in rad/s^2 (0 disables, default 100)");
  est->add_option("--seed", cfg.seed, "Unused; accepted for symmetry");

  auto* eval = app.add_subcommand("evaluate", "Compare an estimate against ground truth");
  add_common(eval);
  eval->add_option("--truth", cfg.truth, "ground_truth.csv from simulate");
  eval->add_option("--estimate", cfg.estimate, "trajectory.csv from estimate");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit->parsed()) return cmd_fit_demo(cfg);
    if (sim->parsed()) return cmd_simulate(cfg);
    if (est->parsed()) return cmd_estimate(cfg);
    if (eval->parsed()) return cmd_evaluate(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
