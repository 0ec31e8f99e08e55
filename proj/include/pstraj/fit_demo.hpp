#pragma once

#include "pstraj/cheb_basis.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace pstraj {

/// Least-squares fit whose unknowns are the interpolant's values at the CGL
/// nodes. The fitted curve need not pass through any sample.
struct ChebyshevFit {
  ChebyshevGrid grid;
  Eigen::VectorXd node_values;
  double rms_residual = 0.0;

  double eval(double t) const { return node_values.dot(barycentric_weights(grid, t)); }
};

/// Throws std::invalid_argument when there are fewer samples than nodes.
ChebyshevFit fit_chebyshev_lsq(const std::vector<double>& xs,
                               const std::vector<double>& ys, int degree,
                               double t0, double tf);

double demo_function(double x);

struct Samples {
  std::vector<double> xs;
  std::vector<double> ys;
};

/// `count` equispaced samples of demo_function on [-1, 1] plus N(0, sigma^2).
Samples demo_samples(int count, double sigma, std::uint64_t seed);

}  // namespace pstraj
