#include "pstraj/kernels.hpp"

#include <omp.h>

namespace pstraj::kernels {

NormalEquations assemble_normal_equations_omp(
    std::span<const ResidualBlock> blocks, const UnknownLayout& layout) {
  const long num_blocks = static_cast<long>(blocks.size());
  std::vector<detail::BlockGram> grams(blocks.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (long b = 0; b < num_blocks; ++b) {
    grams[b] = detail::block_gram(blocks[b]);
  }

  NormalEquations out;
  out.lhs = Eigen::MatrixXd::Zero(layout.size(), layout.size());
  out.rhs = Eigen::VectorXd::Zero(layout.size());
  // Each row block is owned by one thread; no reductions cross threads.
  const int row_blocks = 2 * layout.nodes;
#pragma omp parallel for schedule(dynamic, 1)
  for (int row_block = 0; row_block < row_blocks; ++row_block) {
    const Target target = row_block < layout.nodes ? Target::State : Target::Control;
    detail::accumulate_row_block(blocks, grams, layout, target,
                                 row_block % layout.nodes, out);
  }
  out.cost = total_cost(blocks);
  return out;
}

}  // namespace pstraj::kernels
