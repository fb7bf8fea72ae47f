#include "miqcqp/sparse.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace miqcqp {

double row_dot(const SparseRow& row, std::span<const double> x) {
  double v = 0.0;
  for (const auto& t : row) v += t.coef * x[t.index];
  return v;
}

void sort_and_merge(SparseRow& row) {
  std::sort(row.begin(), row.end(),
            [](const SparseTerm& a, const SparseTerm& b) { return a.index < b.index; });
  SparseRow merged;
  merged.reserve(row.size());
  for (const auto& t : row) {
    if (!merged.empty() && merged.back().index == t.index)
      merged.back().coef += t.coef;
    else
      merged.push_back(t);
  }
  std::erase_if(merged, [](const SparseTerm& t) { return t.coef == 0.0; });
  row = std::move(merged);
}

void SymSparseMatrix::add(int row, int col, double value) {
  if (row < 0 || row >= dim_ || col < 0 || col >= dim_)
    throw std::out_of_range("SymSparseMatrix::add: index out of range");
  if (row > col) std::swap(row, col);
  entries_.push_back({row, col, value});
}

void SymSparseMatrix::set_dim(int dim) {
  if (dim < dim_) throw std::out_of_range("SymSparseMatrix::set_dim: cannot shrink");
  dim_ = dim;
}

void SymSparseMatrix::compress() {
  for (auto& e : entries_)
    if (e.row > e.col) std::swap(e.row, e.col);
  std::sort(entries_.begin(), entries_.end(), [](const MatrixEntry& a, const MatrixEntry& b) {
    return std::pair(a.row, a.col) < std::pair(b.row, b.col);
  });
  std::vector<MatrixEntry> merged;
  merged.reserve(entries_.size());
  for (const auto& e : entries_) {
    if (!merged.empty() && merged.back().row == e.row && merged.back().col == e.col)
      merged.back().value += e.value;
    else
      merged.push_back(e);
  }
  std::erase_if(merged, [](const MatrixEntry& e) { return e.value == 0.0; });
  entries_ = std::move(merged);
}

double SymSparseMatrix::quad_form(std::span<const double> x) const {
  assert(static_cast<int>(x.size()) == dim_);
  double v = 0.0;
  for (const auto& e : entries_) {
    if (e.row == e.col)
      v += e.value * x[e.row] * x[e.row];
    else
      v += 2.0 * e.value * x[e.row] * x[e.col];
  }
  return v;
}

void SymSparseMatrix::multiply(std::span<const double> x, std::span<double> out) const {
  assert(static_cast<int>(x.size()) == dim_ && static_cast<int>(out.size()) == dim_);
  std::fill(out.begin(), out.end(), 0.0);
  for (const auto& e : entries_) {
    out[e.row] += e.value * x[e.col];
    if (e.row != e.col) out[e.col] += e.value * x[e.row];
  }
}

void SymSparseMatrix::add_scaled_column(int j, double s, std::span<double> out) const {
  for (const auto& e : entries_) {
    if (e.col == j) out[e.row] += s * e.value;
    if (e.row == j && e.row != e.col) out[e.col] += s * e.value;
  }
}

double SymSparseMatrix::diagonal(int i) const {
  double v = 0.0;
  for (const auto& e : entries_)
    if (e.row == i && e.col == i) v += e.value;
  return v;
}

std::vector<int> SymSparseMatrix::support() const {
  std::vector<char> seen(dim_, 0);
  for (const auto& e : entries_) {
    seen[e.row] = 1;
    seen[e.col] = 1;
  }
  std::vector<int> idx;
  for (int i = 0; i < dim_; ++i)
    if (seen[i]) idx.push_back(i);
  return idx;
}

double SymSparseMatrix::inf_norm() const {
  std::vector<double> row_sum(dim_, 0.0);
  for (const auto& e : entries_) {
    row_sum[e.row] += std::abs(e.value);
    if (e.row != e.col) row_sum[e.col] += std::abs(e.value);
  }
  double norm = 0.0;
  for (double s : row_sum) norm = std::max(norm, s);
  return norm;
}

SymSparseMatrix SymSparseMatrix::scaled(double s) const {
  SymSparseMatrix out(dim_);
  out.entries_ = entries_;
  for (auto& e : out.entries_) e.value *= s;
  return out;
}

SymSparseMatrix SymSparseMatrix::principal_submatrix(std::span<const int> indices) const {
  std::vector<int> pos(dim_, -1);
  for (int k = 0; k < static_cast<int>(indices.size()); ++k) pos[indices[k]] = k;
  SymSparseMatrix sub(static_cast<int>(indices.size()));
  for (const auto& e : entries_) {
    int r = pos[e.row], c = pos[e.col];
    if (r >= 0 && c >= 0) sub.add(r, c, e.value);
  }
  sub.compress();
  return sub;
}

}  // namespace miqcqp
