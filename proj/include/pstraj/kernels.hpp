#pragma once

#include "pstraj/residual_block.hpp"

#include <Eigen/Dense>

#include <span>

// Gauss-Newton normal-equation assembly from Kronecker-form residual blocks.
//
// The serial and OpenMP variants share one per-row-block kernel and visit
// contributions in the same order, so their outputs are bit-identical for any
// thread count. The dense variant multiplies out the explicit Jacobian and is
// kept as an independent reference for tests and benchmarks.
namespace pstraj::kernels {

struct NormalEquations {
  Eigen::MatrixXd lhs;  // J^T J
  Eigen::VectorXd rhs;  // J^T r
  double cost = 0.0;    // r^T r
};

NormalEquations assemble_normal_equations_serial(
    std::span<const ResidualBlock> blocks, const UnknownLayout& layout);

NormalEquations assemble_normal_equations_omp(
    std::span<const ResidualBlock> blocks, const UnknownLayout& layout);

NormalEquations assemble_normal_equations_dense(
    std::span<const ResidualBlock> blocks, const UnknownLayout& layout);

/// Sum of squared residuals in block order.
double total_cost(std::span<const ResidualBlock> blocks);

namespace detail {

/// Per-block products shared by all row blocks: K[s][t] = M_s^T M_t and
/// g[s] = M_s^T r.
struct BlockGram {
  std::vector<std::vector<Eigen::MatrixXd>> K;
  std::vector<Eigen::VectorXd> g;
};

BlockGram block_gram(const ResidualBlock& block);

/// Accumulates every contribution to the rows of unknown block (target, node).
void accumulate_row_block(std::span<const ResidualBlock> blocks,
                          std::span<const BlockGram> grams,
                          const UnknownLayout& layout, Target target, int node,
                          NormalEquations& out);

}  // namespace detail

}  // namespace pstraj::kernels
