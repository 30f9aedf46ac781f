#pragma once

// Closed-form low rank embedding: truncated SVD of a dense association matrix.

#include <Eigen/Dense>
#include <cstdint>

#include "lre/association.hpp"
#include "lre/corpus.hpp"
#include "lre/model.hpp"

namespace lre {

struct DenseAssocMatrix {
  Eigen::MatrixXd entries;  // |V_C| x |V_T|, all finite
  AssociationSpec spec;
};

/// Accepts only finite-valued associations (clipped or smoothed PMI).
DenseAssocMatrix build_assoc_matrix(const CoocStats& stats, const AssociationSpec& spec);

struct SvdResult {
  Eigen::MatrixXd u;   // m x K, orthonormal columns
  Eigen::VectorXd s;   // K, non-negative, non-increasing
  Eigen::MatrixXd vt;  // K x n, orthonormal rows
  int iterations = 0;  // subspace iterations (0 for the direct solver)

  int rank() const { return static_cast<int>(s.size()); }
  Eigen::MatrixXd reconstruct() const;
};

struct SvdOptions {
  int oversample = 8;
  int min_power_iterations = 4;
  int max_power_iterations = 200;
  double tolerance = 1e-10;   // relative change of the leading singular values
  int direct_max_dim = 64;    // one-sided Jacobi when min(m, n) <= this
  std::uint64_t seed = 1;
};

/// Thin SVD by one-sided Jacobi rotations; rank = min(m, n).
SvdResult jacobi_svd(const Eigen::MatrixXd& a);

/// Rank-K SVD. Each pair (u_k, v_k) is signed so that the largest-magnitude
/// entry of u_k is positive.
SvdResult truncated_svd(const Eigen::MatrixXd& a, int rank, const SvdOptions& options = {});
inline SvdResult truncated_svd(const DenseAssocMatrix& m, int rank,
                               const SvdOptions& options = {}) {
  return truncated_svd(m.entries, rank, options);
}

enum class SigmaSplit {
  kIntoVectors,  // <i| = u_i, |j> = S v_j
  kSymmetric,    // <i| = sqrt(S) u_i, |j> = sqrt(S) v_j
};

/// Dot-kernel model whose psi_ij are the entries of U diag(S) Vt.
EmbeddingModel svd_to_model(const SvdResult& svd,
                            SigmaSplit split = SigmaSplit::kIntoVectors);

}  // namespace lre
