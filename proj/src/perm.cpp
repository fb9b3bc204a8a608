// SPDX-License-Identifier: Apache-2.0
#include "wig/perm.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <utility>

namespace wig {

Permutation::Permutation(std::vector<int> targets) : targets_(std::move(targets)) {
  std::vector<char> seen(targets_.size(), 0);
  for (int t : targets_) {
    if (t < 0 || t >= static_cast<int>(targets_.size()) || seen[static_cast<std::size_t>(t)])
      throw std::invalid_argument("Permutation: mapping is not a bijection");
    seen[static_cast<std::size_t>(t)] = 1;
  }
}

Permutation Permutation::identity(int n) {
  std::vector<int> t(static_cast<std::size_t>(n));
  std::iota(t.begin(), t.end(), 0);
  return Permutation(std::move(t));
}

Permutation Permutation::random(int n, std::mt19937_64& rng) {
  std::vector<int> t(static_cast<std::size_t>(n));
  std::iota(t.begin(), t.end(), 0);
  // Fisher-Yates
  for (int i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<int> pick(0, i);
    std::swap(t[static_cast<std::size_t>(i)], t[static_cast<std::size_t>(pick(rng))]);
  }
  return Permutation(std::move(t));
}

Permutation Permutation::transposition(int n, int i, int j) {
  std::vector<int> t(static_cast<std::size_t>(n));
  std::iota(t.begin(), t.end(), 0);
  std::swap(t.at(static_cast<std::size_t>(i)), t.at(static_cast<std::size_t>(j)));
  return Permutation(std::move(t));
}

bool Permutation::is_identity() const {
  for (int i = 0; i < size(); ++i)
    if (target(i) != i) return false;
  return true;
}

Permutation Permutation::inverse() const {
  std::vector<int> inv(targets_.size());
  for (int i = 0; i < size(); ++i) inv[static_cast<std::size_t>(target(i))] = i;
  return Permutation(std::move(inv));
}

Permutation Permutation::then(const Permutation& q) const {
  if (q.size() != size()) throw std::invalid_argument("Permutation::then: size mismatch");
  std::vector<int> t(targets_.size());
  for (int i = 0; i < size(); ++i) t[static_cast<std::size_t>(i)] = q.target(target(i));
  return Permutation(std::move(t));
}

bool operator==(const Permutation& a, const Permutation& b) {
  return a.targets() == b.targets();
}

WithinCellPermutations WithinCellPermutations::identity(const std::vector<int>& cell_sizes) {
  WithinCellPermutations w;
  w.per_cell.reserve(cell_sizes.size());
  for (int n : cell_sizes) w.per_cell.push_back(Permutation::identity(n));
  return w;
}

WithinCellPermutations WithinCellPermutations::random(const std::vector<int>& cell_sizes,
                                                      std::mt19937_64& rng) {
  WithinCellPermutations w;
  w.per_cell.reserve(cell_sizes.size());
  for (int n : cell_sizes) w.per_cell.push_back(Permutation::random(n, rng));
  return w;
}

std::vector<int> WithinCellPermutations::cell_sizes() const {
  std::vector<int> sizes;
  sizes.reserve(per_cell.size());
  for (const auto& p : per_cell) sizes.push_back(p.size());
  return sizes;
}

NestedPermutation NestedPermutation::identity(const std::vector<int>& cell_sizes) {
  return {Permutation::identity(static_cast<int>(cell_sizes.size())),
          WithinCellPermutations::identity(cell_sizes)};
}

NestedPermutation NestedPermutation::random(const std::vector<int>& cell_sizes,
                                            std::mt19937_64& rng) {
  // Only cells of equal size may trade places: exchanging differently sized
  // cells would change the row-block layout, which is not a relabeling of the
  // same deployment. Shuffle positions within each size class.
  const int m = static_cast<int>(cell_sizes.size());
  std::map<int, std::vector<int>> by_size;
  for (int i = 0; i < m; ++i) by_size[cell_sizes[static_cast<std::size_t>(i)]].push_back(i);

  std::vector<int> targets(static_cast<std::size_t>(m));
  for (auto& [size, members] : by_size) {
    std::vector<int> shuffled = members;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    for (std::size_t i = 0; i < members.size(); ++i)
      targets[static_cast<std::size_t>(members[i])] = shuffled[i];
  }
  return {Permutation(std::move(targets)), WithinCellPermutations::random(cell_sizes, rng)};
}

Permutation induced_row_perm(const NestedPermutation& p, const std::vector<int>& cell_sizes) {
  const int m = static_cast<int>(cell_sizes.size());
  if (p.cells.size() != m || static_cast<int>(p.within.per_cell.size()) != m)
    throw std::invalid_argument("induced_row_perm: cell count mismatch");
  for (int i = 0; i < m; ++i)
    if (p.within.per_cell[static_cast<std::size_t>(i)].size() != cell_sizes[static_cast<std::size_t>(i)])
      throw std::invalid_argument("induced_row_perm: within-cell size mismatch");

  std::vector<int> old_offset(static_cast<std::size_t>(m), 0);
  for (int i = 1; i < m; ++i)
    old_offset[static_cast<std::size_t>(i)] =
        old_offset[static_cast<std::size_t>(i - 1)] + cell_sizes[static_cast<std::size_t>(i - 1)];
  const int k = old_offset.empty() ? 0 : old_offset.back() + cell_sizes.back();

  // Block sizes travel with their cells.
  std::vector<int> new_sizes(static_cast<std::size_t>(m), 0);
  for (int i = 0; i < m; ++i)
    new_sizes[static_cast<std::size_t>(p.cells.target(i))] = cell_sizes[static_cast<std::size_t>(i)];
  std::vector<int> new_offset(static_cast<std::size_t>(m), 0);
  for (int i = 1; i < m; ++i)
    new_offset[static_cast<std::size_t>(i)] =
        new_offset[static_cast<std::size_t>(i - 1)] + new_sizes[static_cast<std::size_t>(i - 1)];

  std::vector<int> flat(static_cast<std::size_t>(k));
  for (int i = 0; i < m; ++i) {
    const auto& inner = p.within.per_cell[static_cast<std::size_t>(i)];
    for (int u = 0; u < inner.size(); ++u) {
      flat[static_cast<std::size_t>(old_offset[static_cast<std::size_t>(i)] + u)] =
          new_offset[static_cast<std::size_t>(p.cells.target(i))] + inner.target(u);
    }
  }
  return Permutation(std::move(flat));
}

Permutation expand_blocks(const Permutation& p, int block) {
  std::vector<int> sizes(static_cast<std::size_t>(p.size()), block);
  return induced_row_perm({p, WithinCellPermutations::identity(sizes)}, sizes);
}

NestedPermutation compose(const NestedPermutation& p, const NestedPermutation& q) {
  const int m = p.cells.size();
  if (q.cells.size() != m) throw std::invalid_argument("compose: cell count mismatch");
  NestedPermutation r;
  r.cells = p.cells.then(q.cells);
  r.within.per_cell.resize(static_cast<std::size_t>(m));
  // Cell i's block sits at position p.cells.target(i) when q is applied.
  for (int i = 0; i < m; ++i) {
    const auto& first = p.within.per_cell[static_cast<std::size_t>(i)];
    const auto& second = q.within.per_cell[static_cast<std::size_t>(p.cells.target(i))];
    r.within.per_cell[static_cast<std::size_t>(i)] = first.then(second);
  }
  return r;
}

namespace {

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("property check: output shape mismatch");
  if (a.size() == 0) return 0.0;
  return (a - b).cwiseAbs().maxCoeff();
}

Permutation output_row_perm(Index out_rows, const NestedPermutation& p, const Permutation& rows) {
  if (out_rows == p.cells.size()) return p.cells;
  if (out_rows == rows.size()) return rows;
  throw std::invalid_argument("check_joint_pe: output row count matches neither cells nor users");
}

}  // namespace

bool check_1d_pe(const MatrixFn& f, const Matrix& x, const Permutation& p, double tol) {
  const Matrix lhs = permute_rows(p, f(x));
  const Matrix rhs = f(permute_rows(p, x));
  return max_abs_diff(lhs, rhs) <= tol;
}

bool check_1d_pi(const MatrixFn& f, const Matrix& x, const Permutation& p, double tol) {
  return max_abs_diff(f(x), f(permute_rows(p, x))) <= tol;
}

bool check_joint_pe(const MatrixFn& f, const Matrix& h, const NestedPermutation& p,
                    const std::vector<int>& cell_sizes, double tol) {
  const Permutation rows = induced_row_perm(p, cell_sizes);
  const Matrix permuted = permute_cols(p.cells, permute_rows(rows, h));
  const Matrix base = f(h);
  const Matrix lhs = permute_rows(output_row_perm(base.rows(), p, rows), base);
  return max_abs_diff(lhs, f(permuted)) <= tol;
}

bool check_1d_pi_within_cell(const MatrixFn& f, const Matrix& h, const WithinCellPermutations& w,
                             double tol) {
  const auto sizes = w.cell_sizes();
  NestedPermutation only_within{Permutation::identity(static_cast<int>(sizes.size())), w};
  const Permutation rows = induced_row_perm(only_within, sizes);
  return max_abs_diff(f(h), f(permute_rows(rows, h))) <= tol;
}

bool check_policy_joint_pe(const PolicyFn& f, const Vector& p_max, const Matrix& h,
                           const NestedPermutation& p, const std::vector<int>& cell_sizes,
                           double tol) {
  const Permutation rows = induced_row_perm(p, cell_sizes);
  const Vector lhs = apply(p.cells, f(p_max, h));
  const Vector rhs = f(apply(p.cells, p_max), permute_cols(p.cells, permute_rows(rows, h)));
  return max_abs_diff(lhs, rhs) <= tol;
}

bool check_policy_within_pi(const PolicyFn& f, const Vector& p_max, const Matrix& h,
                            const WithinCellPermutations& w, double tol) {
  const auto sizes = w.cell_sizes();
  NestedPermutation only_within{Permutation::identity(static_cast<int>(sizes.size())), w};
  const Permutation rows = induced_row_perm(only_within, sizes);
  return max_abs_diff(f(p_max, h), f(p_max, permute_rows(rows, h))) <= tol;
}

bool check_policy_2d_pe(const PolicyFn& f, const Vector& p_max, const Matrix& h,
                        const Permutation& row_perm, const Permutation& col_perm, double tol) {
  const Vector lhs = apply(col_perm, f(p_max, h));
  const Vector rhs =
      f(apply(col_perm, p_max), permute_cols(col_perm, permute_rows(row_perm, h)));
  return max_abs_diff(lhs, rhs) <= tol;
}

}  // namespace wig
