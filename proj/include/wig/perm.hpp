// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <random>
#include <vector>

#include "wig/types.hpp"

namespace wig {

/// A bijection on {0..n-1}, stored as the target position of each index.
/// The convention matches the row action of a transposed permutation matrix:
/// if y = apply(p, x) then y[p.target(i)] = x[i].
class Permutation {
 public:
  Permutation() = default;
  /// Builds from target positions; throws std::invalid_argument unless the
  /// mapping is a bijection.
  explicit Permutation(std::vector<int> targets);

  static Permutation identity(int n);
  /// Seeded Fisher-Yates shuffle of the identity mapping.
  static Permutation random(int n, std::mt19937_64& rng);
  /// Swaps positions i and j, identity elsewhere.
  static Permutation transposition(int n, int i, int j);

  int size() const { return static_cast<int>(targets_.size()); }
  int target(int i) const { return targets_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& targets() const { return targets_; }

  bool is_identity() const;
  Permutation inverse() const;
  /// Composition "q after p": result.target(i) = q.target(p.target(i)).
  Permutation then(const Permutation& q) const;

 private:
  std::vector<int> targets_;
};

bool operator==(const Permutation& a, const Permutation& b);

/// y = Pi^T x for a vector: y[p.target(i)] = x[i].
template <typename Derived>
Vector apply(const Permutation& p, const Eigen::MatrixBase<Derived>& x) {
  if (x.size() != p.size()) throw std::invalid_argument("apply: size mismatch");
  Vector y(x.size());
  for (int i = 0; i < p.size(); ++i) y[p.target(i)] = x[i];
  return y;
}

/// Pi^T X: row i of X moves to row p.target(i).
template <typename Derived>
Matrix permute_rows(const Permutation& p, const Eigen::MatrixBase<Derived>& x) {
  if (x.rows() != p.size()) throw std::invalid_argument("permute_rows: size mismatch");
  Matrix y(x.rows(), x.cols());
  for (int i = 0; i < p.size(); ++i) y.row(p.target(i)) = x.row(i);
  return y;
}

/// X Pi: column j of X moves to column p.target(j).
template <typename Derived>
Matrix permute_cols(const Permutation& p, const Eigen::MatrixBase<Derived>& x) {
  if (x.cols() != p.size()) throw std::invalid_argument("permute_cols: size mismatch");
  Matrix y(x.rows(), x.cols());
  for (int j = 0; j < p.size(); ++j) y.col(p.target(j)) = x.col(j);
  return y;
}

/// One bijection per cell, each on that cell's local user indices.
struct WithinCellPermutations {
  std::vector<Permutation> per_cell;

  static WithinCellPermutations identity(const std::vector<int>& cell_sizes);
  static WithinCellPermutations random(const std::vector<int>& cell_sizes, std::mt19937_64& rng);
  std::vector<int> cell_sizes() const;
};

/// A cell permutation combined with per-cell user permutations. Permuting
/// cells moves whole row blocks, so block sizes travel with their cells.
struct NestedPermutation {
  Permutation cells;
  WithinCellPermutations within;

  static NestedPermutation identity(const std::vector<int>& cell_sizes);
  static NestedPermutation random(const std::vector<int>& cell_sizes, std::mt19937_64& rng);
};

/// The flat user-index bijection obtained by first permuting users within
/// each cell, then moving cell blocks. Throws on size mismatch between
/// p.within and cell_sizes.
Permutation induced_row_perm(const NestedPermutation& p, const std::vector<int>& cell_sizes);

/// Expands a permutation of m blocks, each of width `block`, to the flat
/// index permutation on m*block entries (block contents keep their order).
Permutation expand_blocks(const Permutation& p, int block);

/// Composition of nested permutations: applying `p` first, then `q`.
/// q's within entries must be sized for the block layout p produces.
NestedPermutation compose(const NestedPermutation& p, const NestedPermutation& q);

using MatrixFn = std::function<Matrix(const Matrix&)>;
/// Policy signature of the power control task: (p_max, H) -> per-BS powers.
using PolicyFn = std::function<Vector(const Vector& p_max, const Matrix& H)>;

/// True iff ||Pi^T f(X) - f(Pi^T X)||_inf <= tol. f must preserve row count.
bool check_1d_pe(const MatrixFn& f, const Matrix& x, const Permutation& p, double tol);

/// True iff f(X) is unchanged (<= tol) under row permutation of X.
bool check_1d_pi(const MatrixFn& f, const Matrix& x, const Permutation& p, double tol);

/// Joint equivariance on a K x M cell-structured matrix: rows move by
/// induced_row_perm, columns by p.cells, and f's output rows move by p.cells
/// when it has M rows or by the induced row permutation when it has K rows.
bool check_joint_pe(const MatrixFn& f, const Matrix& h, const NestedPermutation& p,
                    const std::vector<int>& cell_sizes, double tol);

/// True iff f(H) is unchanged (<= tol) when only user rows within cells move.
bool check_1d_pi_within_cell(const MatrixFn& f, const Matrix& h, const WithinCellPermutations& w,
                             double tol);

/// Executable form of the permuted-policy identity: the output permuted by
/// p.cells must match the policy applied to (Pi^T p_max, Pi^T H Pi).
bool check_policy_joint_pe(const PolicyFn& f, const Vector& p_max, const Matrix& h,
                           const NestedPermutation& p, const std::vector<int>& cell_sizes,
                           double tol);

/// Policy output must be unchanged when only users within cells are relabeled.
bool check_policy_within_pi(const PolicyFn& f, const Vector& p_max, const Matrix& h,
                            const WithinCellPermutations& w, double tol);

/// Two-sided equivariance: H rows move by an arbitrary flat user permutation
/// and H columns (plus p_max and the output) by an independent BS
/// permutation.
bool check_policy_2d_pe(const PolicyFn& f, const Vector& p_max, const Matrix& h,
                        const Permutation& row_perm, const Permutation& col_perm, double tol);

}  // namespace wig
