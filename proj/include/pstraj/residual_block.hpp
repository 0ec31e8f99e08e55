#pragma once

#include <Eigen/Dense>

#include <vector>

namespace pstraj {

/// Which unknown matrix a Jacobian term acts on.
enum class Target { State, Control };

/// Jacobian contribution (coeffs^T kron matrix) acting on vec(X) or vec(U).
///
/// With vec stacking columns, node k's block of the Jacobian is
/// coeffs[k] * matrix. For an interpolated measurement coeffs is the
/// barycentric weight vector w(t) and matrix the pointwise Jacobian H.
struct KronTerm {
  Target target = Target::State;
  Eigen::VectorXd coeffs;
  Eigen::MatrixXd matrix;
};

/// Whitened residual rows together with their Jacobian in Kronecker form.
struct ResidualBlock {
  Eigen::VectorXd residual;
  std::vector<KronTerm> terms;

  int rows() const { return static_cast<int>(residual.size()); }
};

/// Column layout of the stacked unknown [vec(X); vec(U)].
struct UnknownLayout {
  int state_dim = 0;
  int control_dim = 0;
  int nodes = 0;

  int state_size() const { return state_dim * nodes; }
  int size() const { return (state_dim + control_dim) * nodes; }
  int width(Target t) const { return t == Target::State ? state_dim : control_dim; }
  int offset(Target t, int node) const {
    return t == Target::State ? node * state_dim
                              : state_size() + node * control_dim;
  }
};

/// Expands a block's Kronecker terms into dense rows over the full unknown.
Eigen::MatrixXd dense_jacobian(const ResidualBlock& block,
                               const UnknownLayout& layout);

/// Stacked [vec(X); vec(U)].
Eigen::VectorXd stack_unknowns(const Eigen::MatrixXd& X, const Eigen::MatrixXd& U);

void unstack_unknowns(const Eigen::VectorXd& z, const UnknownLayout& layout,
                      Eigen::MatrixXd& X, Eigen::MatrixXd& U);

}  // namespace pstraj
