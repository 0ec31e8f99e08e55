#include "pstraj/kernels.hpp"

namespace pstraj::kernels {

namespace detail {

BlockGram block_gram(const ResidualBlock& block) {
  BlockGram gram;
  const std::size_t terms = block.terms.size();
  gram.K.resize(terms);
  gram.g.resize(terms);
  for (std::size_t s = 0; s < terms; ++s) {
    const Eigen::MatrixXd& Ms = block.terms[s].matrix;
    gram.g[s] = Ms.transpose() * block.residual;
    gram.K[s].resize(terms);
    for (std::size_t t = 0; t < terms; ++t) {
      gram.K[s][t] = Ms.transpose() * block.terms[t].matrix;
    }
  }
  return gram;
}

void accumulate_row_block(std::span<const ResidualBlock> blocks,
                          std::span<const BlockGram> grams,
                          const UnknownLayout& layout, Target target, int node,
                          NormalEquations& out) {
  const int rows = layout.width(target);
  const int row_offset = layout.offset(target, node);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const ResidualBlock& block = blocks[b];
    const BlockGram& gram = grams[b];
    for (std::size_t s = 0; s < block.terms.size(); ++s) {
      const KronTerm& row_term = block.terms[s];
      if (row_term.target != target) continue;
      const double ca = row_term.coeffs[node];
      if (ca == 0.0) continue;
      out.rhs.segment(row_offset, rows) += ca * gram.g[s];
      for (std::size_t t = 0; t < block.terms.size(); ++t) {
        const KronTerm& col_term = block.terms[t];
        const int cols = layout.width(col_term.target);
        const Eigen::MatrixXd& K = gram.K[s][t];
        for (int c = 0; c < layout.nodes; ++c) {
          const double cc = col_term.coeffs[c];
          if (cc == 0.0) continue;
          out.lhs.block(row_offset, layout.offset(col_term.target, c), rows,
                        cols) += (ca * cc) * K;
        }
      }
    }
  }
}

}  // namespace detail

double total_cost(std::span<const ResidualBlock> blocks) {
  double cost = 0.0;
  for (const ResidualBlock& b : blocks) cost += b.residual.squaredNorm();
  return cost;
}

NormalEquations assemble_normal_equations_serial(
    std::span<const ResidualBlock> blocks, const UnknownLayout& layout) {
  std::vector<detail::BlockGram> grams(blocks.size());
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    grams[b] = detail::block_gram(blocks[b]);
  }
  NormalEquations out;
  out.lhs = Eigen::MatrixXd::Zero(layout.size(), layout.size());
  out.rhs = Eigen::VectorXd::Zero(layout.size());
  for (int row_block = 0; row_block < 2 * layout.nodes; ++row_block) {
    const Target target = row_block < layout.nodes ? Target::State : Target::Control;
    detail::accumulate_row_block(blocks, grams, layout, target,
                                 row_block % layout.nodes, out);
  }
  out.cost = total_cost(blocks);
  return out;
}

NormalEquations assemble_normal_equations_dense(
    std::span<const ResidualBlock> blocks, const UnknownLayout& layout) {
  int rows = 0;
  for (const ResidualBlock& b : blocks) rows += b.rows();
  Eigen::MatrixXd J(rows, layout.size());
  Eigen::VectorXd r(rows);
  int row = 0;
  for (const ResidualBlock& b : blocks) {
    J.middleRows(row, b.rows()) = dense_jacobian(b, layout);
    r.segment(row, b.rows()) = b.residual;
    row += b.rows();
  }
  NormalEquations out;
  out.lhs = J.transpose() * J;
  out.rhs = J.transpose() * r;
  out.cost = r.squaredNorm();
  return out;
}

}  // namespace pstraj::kernels
