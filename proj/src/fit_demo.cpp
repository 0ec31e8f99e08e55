#include "pstraj/fit_demo.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace pstraj {

ChebyshevFit fit_chebyshev_lsq(const std::vector<double>& xs,
                               const std::vector<double>& ys, int degree,
                               double t0, double tf) {
  if (xs.size() != ys.size()) {
    throw std::invalid_argument("fit: xs and ys differ in length");
  }
  ChebyshevGrid grid(degree, t0, tf);
  const auto m = static_cast<Eigen::Index>(xs.size());
  if (m < grid.size()) {
    throw std::invalid_argument("fit is underdetermined: " + std::to_string(m) +
                                " samples for " + std::to_string(grid.size()) +
                                " unknowns");
  }
  Eigen::MatrixXd A(m, grid.size());
  Eigen::VectorXd b(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    A.row(i) = barycentric_weights(grid, xs[i]).transpose();
    b[i] = ys[i];
  }
  Eigen::VectorXd values = A.colPivHouseholderQr().solve(b);
  const double rms = std::sqrt((A * values - b).squaredNorm() / static_cast<double>(m));
  return {std::move(grid), std::move(values), rms};
}

double demo_function(double x) { return std::exp(std::sin(2.0 * x) + std::cos(2.0 * x)); }

Samples demo_samples(int count, double sigma, std::uint64_t seed) {
  if (count < 2) throw std::invalid_argument("demo_samples: need at least 2 samples");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  Samples s;
  for (int i = 0; i < count; ++i) {
    const double x = -1.0 + 2.0 * i / (count - 1);
    s.xs.push_back(x);
    s.ys.push_back(demo_function(x) + sigma * noise(rng));
  }
  return s;
}

}  // namespace pstraj
