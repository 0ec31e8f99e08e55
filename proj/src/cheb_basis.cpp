#include "pstraj/cheb_basis.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace pstraj {

namespace {

constexpr double kNodeSnap = 1e-13;

double canonical_node(int j, int degree) {
  // Exact symmetry around the midpoint keeps nodes[N/2] at 0 for even N.
  if (2 * j == degree) return 0.0;
  return std::cos(std::numbers::pi * j / degree);
}

}  // namespace

ChebyshevGrid::ChebyshevGrid(int degree, double t0, double tf)
    : degree_(degree), t0_(t0), tf_(tf) {
  if (degree < 1) {
    throw std::invalid_argument("Chebyshev grid degree must be >= 1, got " +
                                std::to_string(degree));
  }
  if (!std::isfinite(t0) || !std::isfinite(tf)) {
    throw std::invalid_argument("Chebyshev grid bounds must be finite");
  }
  if (!(tf > t0)) {
    throw std::invalid_argument("Chebyshev grid requires tf > t0");
  }
  nodes_.resize(degree + 1);
  const double mid = 0.5 * (tf + t0);
  const double half = 0.5 * (tf - t0);
  for (int j = 0; j <= degree; ++j) {
    nodes_[j] = mid + half * canonical_node(j, degree);
  }
  nodes_[0] = tf;
  nodes_[degree] = t0;
}

double ChebyshevGrid::to_tau(double t) const {
  return (2.0 * t - (tf_ + t0_)) / (tf_ - t0_);
}

double ChebyshevGrid::to_time(double tau) const {
  return 0.5 * ((tf_ + t0_) + (tf_ - t0_) * tau);
}

ChebyshevGrid make_grid(int degree, double t0, double tf) {
  return ChebyshevGrid(degree, t0, tf);
}

double chebyshev_T(int k, double tau) {
  if (k < 0) throw std::invalid_argument("chebyshev_T: k must be >= 0");
  if (!(std::abs(tau) <= 1.0)) {
    throw std::invalid_argument("chebyshev_T: |tau| must be <= 1");
  }
  return std::cos(k * std::acos(tau));
}

Eigen::VectorXd barycentric_weights(const ChebyshevGrid& grid, double t) {
  if (!grid.contains(t)) {
    throw std::out_of_range("barycentric_weights: t = " + std::to_string(t) +
                            " outside [" + std::to_string(grid.t0()) + ", " +
                            std::to_string(grid.tf()) + "]");
  }
  const int n = grid.size();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  const double snap = kNodeSnap * (grid.tf() - grid.t0());
  for (int j = 0; j < n; ++j) {
    if (std::abs(t - grid.node(j)) < snap) {
      w[j] = 1.0;
      return w;
    }
  }
  const double tau = grid.to_tau(t);
  double total = 0.0;
  for (int j = 0; j < n; ++j) {
    double lambda = (j % 2 == 0) ? 1.0 : -1.0;
    if (j == 0 || j == n - 1) lambda *= 0.5;
    w[j] = lambda / (tau - canonical_node(j, grid.degree()));
    total += w[j];
  }
  return w / total;
}

Eigen::MatrixXd canonical_differentiation_matrix(int degree) {
  if (degree < 1) {
    throw std::invalid_argument("differentiation matrix needs degree >= 1");
  }
  const int n = degree + 1;
  Eigen::VectorXd x(n), c(n);
  for (int j = 0; j < n; ++j) {
    x[j] = canonical_node(j, degree);
    c[j] = ((j == 0 || j == degree) ? 2.0 : 1.0) * ((j % 2 == 0) ? 1.0 : -1.0);
  }
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    double row_sum = 0.0;
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      d(i, j) = (c[i] / c[j]) / (x[i] - x[j]);
      row_sum += d(i, j);
    }
    // Negative-sum diagonal: rows annihilate constants exactly.
    d(i, i) = -row_sum;
  }
  return d;
}

Eigen::MatrixXd differentiation_matrix(const ChebyshevGrid& grid) {
  return canonical_differentiation_matrix(grid.degree()) *
         (2.0 / (grid.tf() - grid.t0()));
}

Eigen::VectorXd series_coefficients(const Eigen::VectorXd& samples) {
  if (samples.size() == 0) {
    throw std::invalid_argument("series_coefficients: empty input");
  }
  const int n = static_cast<int>(samples.size());
  if (n == 1) return samples;
  const int degree = n - 1;
  Eigen::VectorXd a(n);
  for (int k = 0; k < n; ++k) {
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      const double half = (j == 0 || j == degree) ? 0.5 : 1.0;
      // cos(jk pi / N) with the argument reduced mod 2N for accuracy.
      const int arg = (j * k) % (2 * degree);
      sum += half * samples[j] * std::cos(std::numbers::pi * arg / degree);
    }
    a[k] = 2.0 * sum / degree;
  }
  a[0] *= 0.5;
  a[degree] *= 0.5;
  return a;
}

Eigen::VectorXd series_samples(const Eigen::VectorXd& coeffs) {
  if (coeffs.size() == 0) {
    throw std::invalid_argument("series_samples: empty input");
  }
  const int n = static_cast<int>(coeffs.size());
  if (n == 1) return coeffs;
  const int degree = n - 1;
  Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) {
      const int arg = (j * k) % (2 * degree);
      f[j] += coeffs[k] * std::cos(std::numbers::pi * arg / degree);
    }
  }
  return f;
}

}  // namespace pstraj
