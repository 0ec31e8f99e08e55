#pragma once

#include "pstraj/estimator.hpp"
#include "pstraj/measurements.hpp"
#include "pstraj/scenario.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace pstraj::io {

/// Malformed input file; the message names the offending key or line.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::filesystem::path& path);
std::string scenario_to_json(const Scenario& scenario);

/// Time-stamped 12-state and 4-motor rows.
struct TrajectoryTable {
  std::vector<double> times;
  Eigen::MatrixXd states;    // 12 x K
  Eigen::MatrixXd controls;  // 4 x K
};

TrajectoryTable ground_truth_table(const GroundTruth& truth);
TrajectoryTable sample_estimate(const StateTrajectory& X, const ControlTrajectory& U,
                                const std::vector<double>& times);

void write_trajectory_csv(const std::filesystem::path& path, const TrajectoryTable& table);
TrajectoryTable read_trajectory_csv(const std::filesystem::path& path);

/// Linear interpolation of the table rows at t; throws outside its support.
Eigen::VectorXd interpolate_row(const TrajectoryTable& table, double t, bool controls);

void write_measurements_csv(const std::filesystem::path& path,
                            const std::vector<MeasurementRecord>& records);
std::vector<MeasurementRecord> read_measurements_csv(const std::filesystem::path& path);

/// Estimate summary; deterministic (wall time is written separately).
std::string report_to_json(const EstimateReport& report, int degree);
void write_costs_csv(const std::filesystem::path& path, const std::vector<double>& costs);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);

/// Shortest decimal text that round-trips the double.
std::string format_number(double value);
std::string format_time(double seconds);

}  // namespace pstraj::io
