#include "pstraj/scenario_io.hpp"

#include "pstraj/rotation.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace pstraj::io {

using nlohmann::json;

namespace {

// Strict reader over a JSON object: every access names its key path in
// errors and unknown keys are rejected.
class ObjectReader {
 public:
  ObjectReader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) fail(path_, "expected an object");
  }

  bool has(const std::string& key) const { return node_.contains(key); }

  const json& at(const std::string& key) {
    seen_.insert(key);
    if (!node_.contains(key)) fail(child(key), "missing required key");
    return node_.at(key);
  }

  double number(const std::string& key) {
    const json& v = at(key);
    if (!v.is_number()) fail(child(key), "expected a number");
    return v.get<double>();
  }

  double number_or(const std::string& key, double fallback) {
    return has(key) ? number(key) : fallback;
  }

  int integer(const std::string& key) {
    const json& v = at(key);
    if (!v.is_number_integer()) fail(child(key), "expected an integer");
    return v.get<int>();
  }

  std::string string(const std::string& key) {
    const json& v = at(key);
    if (!v.is_string()) fail(child(key), "expected a string");
    return v.get<std::string>();
  }

  template <int N>
  Eigen::Matrix<double, N, 1> vector(const std::string& key) {
    return parse_vector<N>(at(key), child(key));
  }

  template <int N>
  static Eigen::Matrix<double, N, 1> parse_vector(const json& v, const std::string& path) {
    if (!v.is_array() || v.size() != static_cast<std::size_t>(N)) {
      fail(path, "expected an array of " + std::to_string(N) + " numbers");
    }
    Eigen::Matrix<double, N, 1> out;
    for (int i = 0; i < N; ++i) {
      if (!v[i].is_number()) fail(path, "expected an array of numbers");
      out[i] = v[i].get<double>();
    }
    return out;
  }

  std::string child(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      if (!seen_.count(it.key())) fail(child(it.key()), "unknown key");
    }
  }

  [[noreturn]] static void fail(const std::string& path, const std::string& what) {
    throw FormatError("scenario key '" + path + "': " + what);
  }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(item);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) {
    throw FormatError(where + ": cannot parse number '" + s + "'");
  }
  return v;
}

std::string join(const Eigen::VectorXd& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ';';
    out += format_number(v[i]);
  }
  return out;
}

const char* kTrajectoryHeader =
    "time,px,py,pz,rx,ry,rz,vx,vy,vz,wx,wy,wz,motor1,motor2,motor3,motor4";
const char* kMeasurementHeader = "time,model,landmark_id,lx,ly,lz,components,z,covariance";

}  // namespace

std::string format_number(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw std::runtime_error("cannot format number");
  return std::string(buf, ptr);
}

std::string format_time(double seconds) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9f", seconds);
  return buf;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Scenario parse_scenario(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t byte = std::min<std::size_t>(e.byte, text.size());
    const long line = 1 + std::count(text.begin(), text.begin() + byte, '\n');
    throw FormatError("scenario parse error at line " + std::to_string(line) + ": " +
                      e.what());
  }

  Scenario s;
  ObjectReader top(doc, "");

  {
    ObjectReader p(top.at("params"), "params");
    s.params.mass = p.number("mass");
    s.params.inertia_diag = p.vector<3>("inertia");
    s.params.arm_length = p.number("arm_length");
    s.params.thrust_coeff = p.number("thrust_coeff");
    s.params.drag_coeff = p.number("drag_coeff");
    s.params.torque_ratio = p.number("torque_ratio");
    s.params.gravity = p.number_or("gravity", 9.81);
    p.finish();
  }
  {
    ObjectReader x(top.at("x0"), "x0");
    s.x0.position = x.vector<3>("position");
    s.x0.rotation = x.vector<3>("rotation");
    s.x0.velocity = x.vector<3>("velocity");
    s.x0.angular_rate = x.vector<3>("angular_rate");
    x.finish();
  }
  {
    ObjectReader c(top.at("control_profile"), "control_profile");
    s.profile.name = c.string("name");
    if (c.has("amplitudes")) s.profile.amplitudes = c.vector<4>("amplitudes");
    if (c.has("frequencies_hz")) s.profile.frequencies_hz = c.vector<4>("frequencies_hz");
    if (c.has("phases")) s.profile.phases = c.vector<4>("phases");
    c.finish();
  }
  s.duration_s = top.number("duration_s");
  s.step_s = top.number("step_s");
  {
    const json& seed = top.at("seed");
    if (!seed.is_number_unsigned() && !seed.is_number_integer()) {
      ObjectReader::fail("seed", "expected a non-negative integer");
    }
    if (seed.is_number_integer() && seed.get<long long>() < 0) {
      ObjectReader::fail("seed", "expected a non-negative integer");
    }
    s.seed = seed.get<std::uint64_t>();
  }
  {
    const json& lm = top.at("landmarks");
    if (lm.is_array()) {
      for (std::size_t i = 0; i < lm.size(); ++i) {
        s.landmarks.push_back(
            ObjectReader::parse_vector<3>(lm[i], "landmarks[" + std::to_string(i) + "]"));
      }
    } else {
      ObjectReader box(lm, "landmarks");
      const int count = box.integer("count");
      const Eigen::Vector3d lo = box.vector<3>("min");
      const Eigen::Vector3d hi = box.vector<3>("max");
      box.finish();
      if (count <= 0) ObjectReader::fail("landmarks.count", "must be positive");
      if ((hi - lo).minCoeff() < 0.0) ObjectReader::fail("landmarks.max", "must be >= min");
      s.landmarks = random_landmarks(count, lo, hi, s.seed ^ 0x9e3779b97f4a7c15ULL);
    }
    if (s.landmarks.empty()) ObjectReader::fail("landmarks", "must not be empty");
  }
  {
    ObjectReader c(top.at("camera"), "camera");
    s.rig.fx = c.number("fx");
    s.rig.fy = c.number("fy");
    s.rig.cx = c.number("cx");
    s.rig.cy = c.number("cy");
    s.rig.width = c.integer("width");
    s.rig.height = c.integer("height");
    s.rig.body_R_camera = so3::exp(c.vector<3>("rotation"));
    s.rig.body_t_camera = c.vector<3>("translation");
    s.camera_rate_hz = c.number("rate_hz");
    s.pixel_sigma = c.number("pixel_sigma");
    s.pose_sigma_position = c.number_or("pose_sigma_position", 0.05);
    s.pose_sigma_rotation = c.number_or("pose_sigma_rotation", 0.02);
    c.finish();
  }
  top.finish();

  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("invalid scenario: ") + e.what());
  }
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  return parse_scenario(read_file(path));
}

std::string scenario_to_json(const Scenario& s) {
  json doc;
  doc["params"] = {{"mass", s.params.mass},
                   {"inertia", vec_json(s.params.inertia_diag)},
                   {"arm_length", s.params.arm_length},
                   {"thrust_coeff", s.params.thrust_coeff},
                   {"drag_coeff", s.params.drag_coeff},
                   {"torque_ratio", s.params.torque_ratio},
                   {"gravity", s.params.gravity}};
  doc["x0"] = {{"position", vec_json(s.x0.position)},
               {"rotation", vec_json(s.x0.rotation)},
               {"velocity", vec_json(s.x0.velocity)},
               {"angular_rate", vec_json(s.x0.angular_rate)}};
  doc["control_profile"] = {{"name", s.profile.name},
                            {"amplitudes", vec_json(s.profile.amplitudes)},
                            {"frequencies_hz", vec_json(s.profile.frequencies_hz)},
                            {"phases", vec_json(s.profile.phases)}};
  doc["duration_s"] = s.duration_s;
  doc["step_s"] = s.step_s;
  json lm = json::array();
  for (const auto& p : s.landmarks) lm.push_back(vec_json(p));
  doc["landmarks"] = lm;
  doc["camera"] = {{"fx", s.rig.fx},
                   {"fy", s.rig.fy},
                   {"cx", s.rig.cx},
                   {"cy", s.rig.cy},
                   {"width", s.rig.width},
                   {"height", s.rig.height},
                   {"rotation", vec_json(so3::log(s.rig.body_R_camera))},
                   {"translation", vec_json(s.rig.body_t_camera)},
                   {"rate_hz", s.camera_rate_hz},
                   {"pixel_sigma", s.pixel_sigma},
                   {"pose_sigma_position", s.pose_sigma_position},
                   {"pose_sigma_rotation", s.pose_sigma_rotation}};
  doc["seed"] = s.seed;
  return doc.dump(2) + "\n";
}

TrajectoryTable ground_truth_table(const GroundTruth& truth) {
  TrajectoryTable t;
  t.times = truth.times();
  const std::size_t k = t.times.size();
  t.states.resize(QuadrotorState::kDim, k);
  t.controls.resize(quad::kMotors, k);
  for (std::size_t i = 0; i < k; ++i) {
    t.states.col(i) = truth.states()[i];
    t.controls.col(i) = truth.controls()[i];
  }
  return t;
}

TrajectoryTable sample_estimate(const StateTrajectory& X, const ControlTrajectory& U,
                                const std::vector<double>& times) {
  TrajectoryTable t;
  t.times = times;
  t.states.resize(X.dim(), times.size());
  t.controls.resize(U.dim(), times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    t.states.col(i) = X.eval(times[i]);
    t.controls.col(i) = U.eval(times[i]);
  }
  return t;
}

void write_trajectory_csv(const std::filesystem::path& path, const TrajectoryTable& table) {
  std::string out = std::string(kTrajectoryHeader) + "\n";
  for (std::size_t i = 0; i < table.times.size(); ++i) {
    out += format_time(table.times[i]);
    for (Eigen::Index r = 0; r < table.states.rows(); ++r) {
      out += ',' + format_number(table.states(r, i));
    }
    for (Eigen::Index r = 0; r < table.controls.rows(); ++r) {
      out += ',' + format_number(table.controls(r, i));
    }
    out += '\n';
  }
  write_file(path, out);
}

TrajectoryTable read_trajectory_csv(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != kTrajectoryHeader) {
    throw FormatError(path.string() + ": unexpected trajectory header");
  }
  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (fields.size() != 17) throw FormatError(where + ": expected 17 columns");
    std::vector<double> row;
    for (const auto& f : fields) row.push_back(parse_double(f, where));
    if (!rows.empty() && !(row[0] > rows.back()[0])) {
      throw FormatError(where + ": times must increase");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw FormatError(path.string() + ": no data rows");
  TrajectoryTable t;
  t.states.resize(12, rows.size());
  t.controls.resize(4, rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    t.times.push_back(rows[i][0]);
    for (int r = 0; r < 12; ++r) t.states(r, i) = rows[i][1 + r];
    for (int r = 0; r < 4; ++r) t.controls(r, i) = rows[i][13 + r];
  }
  return t;
}

Eigen::VectorXd interpolate_row(const TrajectoryTable& table, double t, bool controls) {
  const Eigen::MatrixXd& m = controls ? table.controls : table.states;
  const double tol = 1e-9;
  if (table.times.empty() || t < table.times.front() - tol || t > table.times.back() + tol) {
    throw std::out_of_range("time outside the table support");
  }
  auto hi = std::lower_bound(table.times.begin(), table.times.end(), t - tol);
  const std::size_t k = std::distance(table.times.begin(), hi);
  if (k < table.times.size() && std::abs(table.times[k] - t) <= tol) return m.col(k);
  if (k == 0 || k >= table.times.size()) return m.col(std::min(k, table.times.size() - 1));
  const double a = (t - table.times[k - 1]) / (table.times[k] - table.times[k - 1]);
  return (1.0 - a) * m.col(k - 1) + a * m.col(k);
}

void write_measurements_csv(const std::filesystem::path& path,
                            const std::vector<MeasurementRecord>& records) {
  std::string out = std::string(kMeasurementHeader) + "\n";
  for (const MeasurementRecord& r : records) {
    out += format_time(r.time) + ',' + to_string(r.model) + ',' +
           std::to_string(r.landmark_id) + ',' + format_number(r.landmark.x()) + ',' +
           format_number(r.landmark.y()) + ',' + format_number(r.landmark.z()) + ',';
    for (std::size_t i = 0; i < r.components.size(); ++i) {
      if (i) out += ';';
      out += std::to_string(r.components[i]);
    }
    out += ',' + join(r.z) + ',' + join(r.covariance.reshaped()) + '\n';
  }
  write_file(path, out);
}

std::vector<MeasurementRecord> read_measurements_csv(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != kMeasurementHeader) {
    throw FormatError(path.string() + ": unexpected measurement header");
  }
  std::vector<MeasurementRecord> records;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const auto f = split(line, ',');
    if (f.size() != 9) throw FormatError(where + ": expected 9 columns");
    MeasurementRecord r;
    r.time = parse_double(f[0], where);
    try {
      r.model = measurement_model_from_string(f[1]);
    } catch (const std::invalid_argument& e) {
      throw FormatError(where + ": " + e.what());
    }
    r.landmark_id = static_cast<int>(parse_double(f[2], where));
    r.landmark = Eigen::Vector3d(parse_double(f[3], where), parse_double(f[4], where),
                                 parse_double(f[5], where));
    if (!f[6].empty()) {
      for (const auto& c : split(f[6], ';')) {
        r.components.push_back(static_cast<int>(parse_double(c, where)));
      }
    }
    const auto z = split(f[7], ';');
    r.z.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) r.z[i] = parse_double(z[i], where);
    const auto cov = split(f[8], ';');
    const auto dim = static_cast<Eigen::Index>(z.size());
    if (static_cast<Eigen::Index>(cov.size()) != dim * dim) {
      throw FormatError(where + ": covariance size does not match z");
    }
    r.covariance.resize(dim, dim);
    for (std::size_t i = 0; i < cov.size(); ++i) {
      r.covariance.data()[i] = parse_double(cov[i], where);
    }
    if (r.z.size() != r.dim()) throw FormatError(where + ": z size does not match model");
    records.push_back(std::move(r));
  }
  return records;
}

std::string report_to_json(const EstimateReport& report, int degree) {
  json doc;
  doc["degree"] = degree;
  doc["converged"] = report.converged;
  doc["termination"] = report.termination;
  doc["iterations"] = report.iterations;
  doc["accepted_steps"] = static_cast<int>(report.costs.size()) - 1;
  doc["initial_cost"] = report.costs.front();
  doc["final_cost"] = report.total_cost();
  doc["measurement_cost"] = report.measurement_cost;
  doc["defect_cost"] = report.defect_cost;
  doc["prior_cost"] = report.prior_cost;
  doc["skipped_measurements"] = report.skipped_measurements;
  doc["grid"] = {{"t0", report.X_hat.grid().t0()},
                 {"tf", report.X_hat.grid().tf()},
                 {"nodes", vec_json(report.X_hat.grid().nodes())}};
  json xs = json::array();
  for (Eigen::Index j = 0; j < report.X_hat.values().cols(); ++j) {
    xs.push_back(vec_json(report.X_hat.values().col(j)));
  }
  json us = json::array();
  for (Eigen::Index j = 0; j < report.U_hat.values().cols(); ++j) {
    us.push_back(vec_json(report.U_hat.values().col(j)));
  }
  doc["state_nodes"] = xs;
  doc["control_nodes"] = us;
  return doc.dump(2) + "\n";
}

void write_costs_csv(const std::filesystem::path& path, const std::vector<double>& costs) {
  std::string out = "step,cost\n";
  for (std::size_t i = 0; i < costs.size(); ++i) {
    out += std::to_string(i) + ',' + format_number(costs[i]) + '\n';
  }
  write_file(path, out);
}

}  // namespace pstraj::io
