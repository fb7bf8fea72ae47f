#pragma once

#include <span>
#include <vector>

namespace miqcqp {

/// One stored entry of a symmetric matrix, kept in the upper triangle
/// (row <= col after compression).
struct MatrixEntry {
  int row = 0;
  int col = 0;
  double value = 0.0;

  bool operator==(const MatrixEntry&) const = default;
};

/// Sparse term of a linear row: coef * x[index].
struct SparseTerm {
  int index = 0;
  double coef = 0.0;

  bool operator==(const SparseTerm&) const = default;
};

using SparseRow = std::vector<SparseTerm>;

double row_dot(const SparseRow& row, std::span<const double> x);
void sort_and_merge(SparseRow& row);

/// Symmetric sparse matrix storing the upper triangle only. An off-diagonal
/// entry (r, c, v) represents both coefficients M_rc = M_cr = v, so
///   x^T M x = sum_{r==c} v x_r^2 + 2 sum_{r<c} v x_r x_c.
class SymSparseMatrix {
 public:
  SymSparseMatrix() = default;
  explicit SymSparseMatrix(int dim) : dim_(dim) {}

  int dim() const { return dim_; }
  bool empty() const { return entries_.empty(); }
  int nnz() const { return static_cast<int>(entries_.size()); }
  const std::vector<MatrixEntry>& entries() const { return entries_; }

  /// Accumulates a coefficient; duplicates are summed by compress().
  void add(int row, int col, double value);

  /// Widens the matrix to a larger dimension; entries are preserved.
  void set_dim(int dim);

  /// Sorts entries into the upper triangle, merges duplicates, drops zeros.
  void compress();

  double quad_form(std::span<const double> x) const;
  /// out = M x (out must have size dim()).
  void multiply(std::span<const double> x, std::span<double> out) const;
  /// out += s * M e_j, i.e. adds s times column j.
  void add_scaled_column(int j, double s, std::span<double> out) const;

  double diagonal(int i) const;
  /// Sorted list of variable indices with at least one entry.
  std::vector<int> support() const;
  /// Max absolute row sum of the full symmetric matrix.
  double inf_norm() const;

  SymSparseMatrix scaled(double s) const;
  /// Rows/columns restricted to `indices` (sorted, relabelled 0..k-1).
  SymSparseMatrix principal_submatrix(std::span<const int> indices) const;

  bool operator==(const SymSparseMatrix& other) const = default;

 private:
  int dim_ = 0;
  std::vector<MatrixEntry> entries_;
};

}  // namespace miqcqp
