#pragma once

// Row-compressed sparse matrices and the sparse x dense-block kernels used by
// every walk operator.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "ancka/error.hpp"

namespace ancka {

using NodeId = std::uint32_t;
using Index = std::size_t;

// n x c dense block. Row-major so the sparse kernels stream contiguous rows.
using DenseBlock = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

template <typename T>
struct Triplet {
  NodeId row;
  NodeId col;
  T value;
};

enum class DuplicatePolicy { Sum, Max, Keep, Error };

template <typename T>
struct RowView {
  std::span<const NodeId> cols;
  std::span<const T> values;
  std::size_t size() const { return cols.size(); }
  bool empty() const { return cols.empty(); }
};

// CSR storage. Column indices inside a row are strictly increasing.
template <typename T>
class CsrMatrix {
 public:
  CsrMatrix() : row_ptr_(1, 0) {}

  CsrMatrix(Index rows, Index cols, std::vector<Index> row_ptr, std::vector<NodeId> col_idx,
            std::vector<T> values)
      : rows_(rows), cols_(cols), row_ptr_(std::move(row_ptr)), col_idx_(std::move(col_idx)),
        values_(std::move(values)) {
    check_structure();
  }

  // Builds from unordered triplets. Duplicates are resolved per `policy`;
  // Keep is only meaningful for callers that want repeated coordinates summed
  // later and is treated as Sum here.
  static CsrMatrix from_triplets(Index rows, Index cols, std::vector<Triplet<T>> triplets,
                                 DuplicatePolicy policy = DuplicatePolicy::Sum,
                                 std::size_t* duplicates_found = nullptr) {
    for (const auto& t : triplets) {
      if (t.row >= rows || t.col >= cols) {
        throw ValidationError("sparse entry (" + std::to_string(t.row) + "," + std::to_string(t.col) +
                              ") outside " + std::to_string(rows) + "x" + std::to_string(cols));
      }
    }
    std::sort(triplets.begin(), triplets.end(), [](const Triplet<T>& a, const Triplet<T>& b) {
      return std::tie(a.row, a.col) < std::tie(b.row, b.col);
    });
    std::vector<Index> row_ptr(rows + 1, 0);
    std::vector<NodeId> col_idx;
    std::vector<T> values;
    col_idx.reserve(triplets.size());
    values.reserve(triplets.size());
    std::size_t dups = 0;
    for (std::size_t i = 0; i < triplets.size(); ++i) {
      const auto& t = triplets[i];
      if (i > 0 && triplets[i - 1].row == t.row && triplets[i - 1].col == t.col) {
        ++dups;
        switch (policy) {
          case DuplicatePolicy::Error:
            throw ValidationError("duplicate sparse entry (" + std::to_string(t.row) + "," +
                                  std::to_string(t.col) + ")");
          case DuplicatePolicy::Max:
            values.back() = std::max(values.back(), t.value);
            break;
          case DuplicatePolicy::Sum:
          case DuplicatePolicy::Keep:
            values.back() += t.value;
            break;
        }
        continue;
      }
      col_idx.push_back(t.col);
      values.push_back(t.value);
      ++row_ptr[t.row + 1];
    }
    std::partial_sum(row_ptr.begin(), row_ptr.end(), row_ptr.begin());
    if (duplicates_found) *duplicates_found = dups;
    return CsrMatrix(rows, cols, std::move(row_ptr), std::move(col_idx), std::move(values));
  }

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index nnz() const { return col_idx_.size(); }

  RowView<T> row(Index i) const {
    const Index b = row_ptr_[i];
    const Index e = row_ptr_[i + 1];
    return {std::span<const NodeId>(col_idx_.data() + b, e - b), std::span<const T>(values_.data() + b, e - b)};
  }
  Index row_nnz(Index i) const { return row_ptr_[i + 1] - row_ptr_[i]; }

  // Entry lookup by binary search; zero when absent.
  T at(Index i, Index j) const {
    auto r = row(i);
    auto it = std::lower_bound(r.cols.begin(), r.cols.end(), static_cast<NodeId>(j));
    if (it == r.cols.end() || *it != j) return T{};
    return r.values[static_cast<std::size_t>(it - r.cols.begin())];
  }

  T row_sum(Index i) const {
    auto r = row(i);
    return std::accumulate(r.values.begin(), r.values.end(), T{});
  }

  std::vector<T> row_sums() const {
    std::vector<T> s(rows_);
    for (Index i = 0; i < rows_; ++i) s[i] = row_sum(i);
    return s;
  }

  const std::vector<Index>& row_ptr() const { return row_ptr_; }
  const std::vector<NodeId>& col_idx() const { return col_idx_; }
  const std::vector<T>& values() const { return values_; }

  CsrMatrix transpose() const {
    std::vector<Index> tp(cols_ + 1, 0);
    for (NodeId c : col_idx_) ++tp[c + 1];
    std::partial_sum(tp.begin(), tp.end(), tp.begin());
    std::vector<NodeId> tc(nnz());
    std::vector<T> tv(nnz());
    std::vector<Index> cursor(tp.begin(), tp.end() - 1);
    for (Index i = 0; i < rows_; ++i) {
      for (Index p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
        const Index dst = cursor[col_idx_[p]]++;
        tc[dst] = static_cast<NodeId>(i);
        tv[dst] = values_[p];
      }
    }
    return CsrMatrix(cols_, rows_, std::move(tp), std::move(tc), std::move(tv));
  }

  // D^{-1} A with D = diag(row sums) given explicitly; rows whose divisor is
  // zero stay empty.
  CsrMatrix scale_rows(std::span<const T> factors) const {
    CsrMatrix out = *this;
    for (Index i = 0; i < rows_; ++i) {
      for (Index p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) out.values_[p] *= factors[i];
    }
    return out;
  }

  bool all_nonnegative_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](T v) { return std::isfinite(v) && v >= T{}; });
  }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](T v) { return std::isfinite(v); });
  }

  bool structurally_symmetric_equal() const {
    if (rows_ != cols_) return false;
    for (Index i = 0; i < rows_; ++i) {
      auto r = row(i);
      for (std::size_t p = 0; p < r.size(); ++p) {
        if (at(r.cols[p], i) != r.values[p]) return false;
      }
    }
    return true;
  }

  Eigen::MatrixXd to_dense() const {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_));
    for (Index i = 0; i < rows_; ++i) {
      auto r = row(i);
      for (std::size_t p = 0; p < r.size(); ++p) d(static_cast<Eigen::Index>(i), r.cols[p]) = r.values[p];
    }
    return d;
  }

  friend bool operator==(const CsrMatrix& a, const CsrMatrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.row_ptr_ == b.row_ptr_ && a.col_idx_ == b.col_idx_ &&
           a.values_ == b.values_;
  }

 private:
  void check_structure() const {
    if (row_ptr_.size() != rows_ + 1 || row_ptr_.front() != 0 || row_ptr_.back() != col_idx_.size() ||
        col_idx_.size() != values_.size()) {
      throw ValidationError("corrupt CSR layout");
    }
    for (Index i = 0; i < rows_; ++i) {
      if (row_ptr_[i] > row_ptr_[i + 1]) throw ValidationError("corrupt CSR row pointers");
      for (Index p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
        if (col_idx_[p] >= cols_) {
          throw ValidationError("column index " + std::to_string(col_idx_[p]) + " out of range in row " +
                                std::to_string(i));
        }
        if (p > row_ptr_[i] && col_idx_[p] <= col_idx_[p - 1]) {
          throw ValidationError("column indices not strictly increasing in row " + std::to_string(i));
        }
      }
    }
  }

  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<Index> row_ptr_;
  std::vector<NodeId> col_idx_;
  std::vector<T> values_;
};

// Nonnegative structural matrix: incidence, adjacency, transition factors.
using SparseRowMatrix = CsrMatrix<double>;

// 1 / x for x > 0, else 0.
inline std::vector<double> safe_reciprocal(std::span<const double> x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) r[i] = x[i] > 0.0 ? 1.0 / x[i] : 0.0;
  return r;
}

inline SparseRowMatrix row_normalized(const SparseRowMatrix& a) {
  const auto sums = a.row_sums();
  const auto inv = safe_reciprocal(sums);
  return a.scale_rows(inv);
}

// out = A * M. Each output row is accumulated in fixed column order, so the
// result does not depend on how rows are split across threads.
template <typename Derived>
void spmm(const SparseRowMatrix& a, const Eigen::MatrixBase<Derived>& m, DenseBlock& out) {
  if (static_cast<Index>(m.rows()) != a.cols()) {
    throw ValidationError("spmm dimension mismatch: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                          " times " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
  out.setZero(static_cast<Eigen::Index>(a.rows()), m.cols());
  const auto n = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    auto r = a.row(static_cast<Index>(i));
    for (std::size_t p = 0; p < r.size(); ++p) out.row(i).noalias() += r.values[p] * m.row(r.cols[p]);
  }
}

template <typename Derived>
DenseBlock spmm(const SparseRowMatrix& a, const Eigen::MatrixBase<Derived>& m) {
  DenseBlock out;
  spmm(a, m, out);
  return out;
}

}  // namespace ancka
