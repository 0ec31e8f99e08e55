#pragma once

#include <Eigen/Dense>

#include <vector>

namespace pstraj {

/// Chebyshev-Gauss-Lobatto grid mapped onto [t0, tf].
///
/// Nodes are ordered j = 0..N with node 0 at tf and node N at t0, i.e. the
/// grid runs backwards in time. Callers must not assume ascending order.
class ChebyshevGrid {
 public:
  ChebyshevGrid(int degree, double t0, double tf);

  int degree() const { return degree_; }
  int size() const { return degree_ + 1; }
  double t0() const { return t0_; }
  double tf() const { return tf_; }
  const Eigen::VectorXd& nodes() const { return nodes_; }
  double node(int j) const { return nodes_[j]; }

  /// Affine maps between time and the canonical interval [-1, 1].
  double to_tau(double t) const;
  double to_time(double tau) const;

  bool contains(double t) const { return t >= t0_ && t <= tf_; }

 private:
  int degree_;
  double t0_;
  double tf_;
  Eigen::VectorXd nodes_;
};

/// Equivalent to make_grid(degree, t0, tf); throws std::invalid_argument.
ChebyshevGrid make_grid(int degree, double t0, double tf);

/// T_k(tau) = cos(k arccos tau). Throws for |tau| > 1 or k < 0.
double chebyshev_T(int k, double tau);

/// Barycentric interpolation weights at time t, so that f(t) = w . f_nodes.
/// Node hits (within 1e-13 of the interval length) return a unit vector.
Eigen::VectorXd barycentric_weights(const ChebyshevGrid& grid, double t);

/// Spectral differentiation matrix on the grid, in units of 1/time.
Eigen::MatrixXd differentiation_matrix(const ChebyshevGrid& grid);

/// Differentiation matrix on the canonical [-1, 1] CGL points.
Eigen::MatrixXd canonical_differentiation_matrix(int degree);

/// Chebyshev coefficients a_k of the interpolant through node samples
/// (node order j = 0..N). O(N^2) cosine transform.
Eigen::VectorXd series_coefficients(const Eigen::VectorXd& samples);

/// Inverse of series_coefficients: node samples from coefficients.
Eigen::VectorXd series_samples(const Eigen::VectorXd& coeffs);

}  // namespace pstraj
