#ifndef APLICUR_MATRIX_HPP
#define APLICUR_MATRIX_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "aplicur/error.hpp"

namespace aplicur {

using Index = std::int64_t;
using IndexList = std::vector<Index>;

/// Tag selecting "all rows" / "all columns" in extract().
struct AllTag {};
inline constexpr AllTag all{};

struct Triplet {
  Index row;
  Index col;
  double value;
};

/// Real double-precision matrix, either dense column-major or compressed
/// sparse by column. Immutable after construction; copies are deep for the
/// numeric payload and share the lazily built transposed view used to slice
/// rows out of sparse storage.
class Matrix {
 public:
  Matrix() = default;

  static Matrix dense_zeros(Index m, Index n) {
    check_shape(m, n);
    Matrix a;
    a.rows_ = m;
    a.cols_ = n;
    a.val_.assign(static_cast<std::size_t>(m * n), 0.0);
    return a;
  }

  /// Dense from a column-major buffer of length m*n.
  static Matrix dense(Index m, Index n, std::vector<double> colmajor) {
    check_shape(m, n);
    detail::require(static_cast<Index>(colmajor.size()) == m * n,
                    ErrorKind::dimension_mismatch, "Matrix::dense: buffer size mismatch");
    Matrix a;
    a.rows_ = m;
    a.cols_ = n;
    a.val_ = std::move(colmajor);
    return a;
  }

  static Matrix identity(Index n) {
    Matrix a = dense_zeros(n, n);
    for (Index i = 0; i < n; ++i) a.val_[static_cast<std::size_t>(i * n + i)] = 1.0;
    return a;
  }

  /// Sparse CSC from triplets. Duplicate (i,j) pairs are rejected and exact
  /// zeros are dropped, so stored entries are strictly increasing per column.
  static Matrix sparse(Index m, Index n, std::vector<Triplet> entries) {
    check_shape(m, n);
    for (const auto& t : entries) {
      detail::require(t.row >= 0 && t.row < m && t.col >= 0 && t.col < n,
                      ErrorKind::invalid_argument, "Matrix::sparse: entry out of range");
    }
    std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
      return std::tie(a.col, a.row) < std::tie(b.col, b.row);
    });
    Matrix a;
    a.rows_ = m;
    a.cols_ = n;
    a.sparse_ = true;
    a.cptr_.assign(static_cast<std::size_t>(n) + 1, 0);
    for (std::size_t k = 0; k < entries.size(); ++k) {
      if (k > 0 && entries[k].row == entries[k - 1].row && entries[k].col == entries[k - 1].col)
        detail::fail(ErrorKind::invalid_argument, "Matrix::sparse: duplicate entry");
      if (entries[k].value == 0.0) continue;
      a.ridx_.push_back(entries[k].row);
      a.val_.push_back(entries[k].value);
      ++a.cptr_[static_cast<std::size_t>(entries[k].col) + 1];
    }
    for (Index j = 0; j < n; ++j)
      a.cptr_[static_cast<std::size_t>(j) + 1] += a.cptr_[static_cast<std::size_t>(j)];
    a.tbox_ = std::make_shared<TransposeBox>();
    return a;
  }

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  bool is_sparse() const { return sparse_; }
  Index nnz() const {
    return sparse_ ? static_cast<Index>(val_.size()) : rows_ * cols_;
  }
  double density() const {
    return rows_ * cols_ == 0 ? 0.0
                              : static_cast<double>(nnz()) / static_cast<double>(rows_ * cols_);
  }

  double operator()(Index i, Index j) const {
    detail::require(i >= 0 && i < rows_ && j >= 0 && j < cols_,
                    ErrorKind::invalid_argument, "Matrix: index out of range");
    if (!sparse_) return val_[static_cast<std::size_t>(j * rows_ + i)];
    auto b = ridx_.begin() + cptr_[static_cast<std::size_t>(j)];
    auto e = ridx_.begin() + cptr_[static_cast<std::size_t>(j) + 1];
    auto it = std::lower_bound(b, e, i);
    if (it == e || *it != i) return 0.0;
    return val_[static_cast<std::size_t>(it - ridx_.begin())];
  }

  /// Dense payload (column-major); only valid for dense matrices.
  std::span<const double> dense_data() const {
    detail::require(!sparse_, ErrorKind::invalid_argument, "dense_data on sparse matrix");
    return val_;
  }

  std::span<const Index> col_ptr() const { return cptr_; }
  std::span<const Index> row_idx() const { return ridx_; }
  std::span<const double> values() const { return val_; }

  Matrix to_dense() const {
    if (!sparse_) return *this;
    Matrix a = dense_zeros(rows_, cols_);
    for (Index j = 0; j < cols_; ++j)
      for (Index k = cptr_[static_cast<std::size_t>(j)]; k < cptr_[static_cast<std::size_t>(j) + 1]; ++k)
        a.val_[static_cast<std::size_t>(j * rows_ + ridx_[static_cast<std::size_t>(k)])] =
            val_[static_cast<std::size_t>(k)];
    return a;
  }

  Matrix transpose() const {
    if (!sparse_) {
      Matrix t = dense_zeros(cols_, rows_);
      for (Index j = 0; j < cols_; ++j)
        for (Index i = 0; i < rows_; ++i)
          t.val_[static_cast<std::size_t>(i * cols_ + j)] =
              val_[static_cast<std::size_t>(j * rows_ + i)];
      return t;
    }
    return transpose_sparse();
  }

  /// y = A x
  void matvec(std::span<const double> x, std::span<double> y) const {
    detail::require(static_cast<Index>(x.size()) == cols_ &&
                        static_cast<Index>(y.size()) == rows_,
                    ErrorKind::dimension_mismatch, "matvec: shape mismatch");
    std::fill(y.begin(), y.end(), 0.0);
    if (!sparse_) {
      for (Index j = 0; j < cols_; ++j) {
        double xj = x[static_cast<std::size_t>(j)];
        if (xj == 0.0) continue;
        const double* col = val_.data() + j * rows_;
        for (Index i = 0; i < rows_; ++i) y[static_cast<std::size_t>(i)] += xj * col[i];
      }
    } else {
      for (Index j = 0; j < cols_; ++j) {
        double xj = x[static_cast<std::size_t>(j)];
        if (xj == 0.0) continue;
        for (Index k = cptr_[static_cast<std::size_t>(j)]; k < cptr_[static_cast<std::size_t>(j) + 1]; ++k)
          y[static_cast<std::size_t>(ridx_[static_cast<std::size_t>(k)])] +=
              xj * val_[static_cast<std::size_t>(k)];
      }
    }
  }

  /// y = A^T x
  void matvec_transpose(std::span<const double> x, std::span<double> y) const {
    detail::require(static_cast<Index>(x.size()) == rows_ &&
                        static_cast<Index>(y.size()) == cols_,
                    ErrorKind::dimension_mismatch, "matvec_transpose: shape mismatch");
    if (!sparse_) {
      for (Index j = 0; j < cols_; ++j) {
        const double* col = val_.data() + j * rows_;
        double s = 0.0;
        for (Index i = 0; i < rows_; ++i) s += col[i] * x[static_cast<std::size_t>(i)];
        y[static_cast<std::size_t>(j)] = s;
      }
    } else {
      for (Index j = 0; j < cols_; ++j) {
        double s = 0.0;
        for (Index k = cptr_[static_cast<std::size_t>(j)]; k < cptr_[static_cast<std::size_t>(j) + 1]; ++k)
          s += val_[static_cast<std::size_t>(k)] *
               x[static_cast<std::size_t>(ridx_[static_cast<std::size_t>(k)])];
        y[static_cast<std::size_t>(j)] = s;
      }
    }
  }

  double frob_norm() const {
    double s = 0.0;
    for (double v : val_) s += v * v;
    return std::sqrt(s);
  }

  double col_norm(Index j) const {
    detail::require(j >= 0 && j < cols_, ErrorKind::invalid_argument, "col_norm: out of range");
    double s = 0.0;
    if (!sparse_) {
      const double* col = val_.data() + j * rows_;
      for (Index i = 0; i < rows_; ++i) s += col[i] * col[i];
    } else {
      for (Index k = cptr_[static_cast<std::size_t>(j)]; k < cptr_[static_cast<std::size_t>(j) + 1]; ++k)
        s += val_[static_cast<std::size_t>(k)] * val_[static_cast<std::size_t>(k)];
    }
    return std::sqrt(s);
  }

  /// Cached transposed view (sparse only); built on first use, shared by copies.
  const Matrix& transposed_view() const {
    detail::require(sparse_, ErrorKind::invalid_argument, "transposed_view: dense matrix");
    std::call_once(tbox_->flag, [this] { tbox_->t = std::make_shared<Matrix>(transpose_sparse()); });
    return *tbox_->t;
  }

 private:
  struct TransposeBox {
    std::once_flag flag;
    std::shared_ptr<Matrix> t;
  };

  static void check_shape(Index m, Index n) {
    detail::require(m >= 0 && n >= 0, ErrorKind::invalid_argument, "negative matrix shape");
  }

  Matrix transpose_sparse() const {
    Matrix t;
    t.rows_ = cols_;
    t.cols_ = rows_;
    t.sparse_ = true;
    t.cptr_.assign(static_cast<std::size_t>(rows_) + 1, 0);
    t.ridx_.resize(val_.size());
    t.val_.resize(val_.size());
    for (Index r : ridx_) ++t.cptr_[static_cast<std::size_t>(r) + 1];
    for (Index i = 0; i < rows_; ++i)
      t.cptr_[static_cast<std::size_t>(i) + 1] += t.cptr_[static_cast<std::size_t>(i)];
    std::vector<Index> next(t.cptr_.begin(), t.cptr_.end() - 1);
    for (Index j = 0; j < cols_; ++j) {
      for (Index k = cptr_[static_cast<std::size_t>(j)]; k < cptr_[static_cast<std::size_t>(j) + 1]; ++k) {
        Index i = ridx_[static_cast<std::size_t>(k)];
        Index pos = next[static_cast<std::size_t>(i)]++;
        t.ridx_[static_cast<std::size_t>(pos)] = j;
        t.val_[static_cast<std::size_t>(pos)] = val_[static_cast<std::size_t>(k)];
      }
    }
    t.tbox_ = std::make_shared<TransposeBox>();
    return t;
  }

  friend Matrix extract(const Matrix&, std::span<const Index>, std::span<const Index>);
  friend Matrix extract(const Matrix&, AllTag, std::span<const Index>);
  friend Matrix extract(const Matrix&, std::span<const Index>, AllTag);

  Index rows_ = 0;
  Index cols_ = 0;
  bool sparse_ = false;
  std::vector<double> val_;
  std::vector<Index> ridx_;
  std::vector<Index> cptr_;
  mutable std::shared_ptr<TransposeBox> tbox_;
};

namespace detail {

inline void check_index_list(std::span<const Index> idx, Index bound, const char* what) {
  std::vector<bool> seen(static_cast<std::size_t>(bound), false);
  for (Index i : idx) {
    require(i >= 0 && i < bound, ErrorKind::invalid_argument,
            std::string(what) + ": index out of range", i);
    require(!seen[static_cast<std::size_t>(i)], ErrorKind::invalid_argument,
            std::string(what) + ": duplicate index", i);
    seen[static_cast<std::size_t>(i)] = true;
  }
}

} // namespace detail

/// Column submatrix A(:, cols); sparse input yields sparse output.
inline Matrix extract(const Matrix& a, AllTag, std::span<const Index> cols) {
  detail::check_index_list(cols, a.cols(), "extract cols");
  if (!a.is_sparse()) {
    Matrix r = Matrix::dense_zeros(a.rows(), static_cast<Index>(cols.size()));
    for (std::size_t jj = 0; jj < cols.size(); ++jj) {
      const double* src = a.val_.data() + cols[jj] * a.rows();
      std::copy(src, src + a.rows(), r.val_.data() + static_cast<Index>(jj) * a.rows());
    }
    return r;
  }
  std::vector<Triplet> trips;
  for (std::size_t jj = 0; jj < cols.size(); ++jj) {
    Index j = cols[jj];
    for (Index k = a.cptr_[static_cast<std::size_t>(j)]; k < a.cptr_[static_cast<std::size_t>(j) + 1]; ++k)
      trips.push_back({a.ridx_[static_cast<std::size_t>(k)], static_cast<Index>(jj),
                       a.val_[static_cast<std::size_t>(k)]});
  }
  return Matrix::sparse(a.rows(), static_cast<Index>(cols.size()), std::move(trips));
}

/// Row submatrix A(rows, :). Sparse row slicing goes through the cached
/// transposed view, since CSC favors column slicing.
inline Matrix extract(const Matrix& a, std::span<const Index> rows, AllTag) {
  detail::check_index_list(rows, a.rows(), "extract rows");
  if (!a.is_sparse()) {
    Matrix r = Matrix::dense_zeros(static_cast<Index>(rows.size()), a.cols());
    for (Index j = 0; j < a.cols(); ++j)
      for (std::size_t ii = 0; ii < rows.size(); ++ii)
        r.val_[static_cast<std::size_t>(j * r.rows_ + static_cast<Index>(ii))] =
            a.val_[static_cast<std::size_t>(j * a.rows_ + rows[ii])];
    return r;
  }
  return extract(a.transposed_view(), all, rows).transpose();
}

inline Matrix extract(const Matrix& a, AllTag, AllTag) { return a; }

inline Matrix extract(const Matrix& a, std::span<const Index> rows,
                      std::span<const Index> cols) {
  detail::check_index_list(rows, a.rows(), "extract rows");
  detail::check_index_list(cols, a.cols(), "extract cols");
  if (!a.is_sparse()) {
    Matrix r = Matrix::dense_zeros(static_cast<Index>(rows.size()),
                                   static_cast<Index>(cols.size()));
    for (std::size_t jj = 0; jj < cols.size(); ++jj)
      for (std::size_t ii = 0; ii < rows.size(); ++ii)
        r.val_[static_cast<std::size_t>(static_cast<Index>(jj) * r.rows_ + static_cast<Index>(ii))] =
            a.val_[static_cast<std::size_t>(cols[jj] * a.rows_ + rows[ii])];
    return r;
  }
  // columns first (cheap on CSC), then rows of the narrow temporary
  Matrix c = extract(a, all, cols);
  std::vector<Index> pos(static_cast<std::size_t>(a.rows()), -1);
  for (std::size_t ii = 0; ii < rows.size(); ++ii) pos[static_cast<std::size_t>(rows[ii])] = static_cast<Index>(ii);
  std::vector<Triplet> trips;
  for (Index j = 0; j < c.cols(); ++j)
    for (Index k = c.cptr_[static_cast<std::size_t>(j)]; k < c.cptr_[static_cast<std::size_t>(j) + 1]; ++k) {
      Index p = pos[static_cast<std::size_t>(c.ridx_[static_cast<std::size_t>(k)])];
      if (p >= 0) trips.push_back({p, j, c.val_[static_cast<std::size_t>(k)]});
    }
  return Matrix::sparse(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()),
                        std::move(trips));
}

/// Dense product C = A * B (either operand may be sparse; result is dense).
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  detail::require(a.cols() == b.rows(), ErrorKind::dimension_mismatch, "matmul: shape mismatch");
  std::vector<double> c(static_cast<std::size_t>(a.rows() * b.cols()), 0.0);
  std::vector<double> bcol(static_cast<std::size_t>(b.rows()));
  for (Index j = 0; j < b.cols(); ++j) {
    for (Index i = 0; i < b.rows(); ++i) bcol[static_cast<std::size_t>(i)] = b(i, j);
    std::span<double> ccol(c.data() + j * a.rows(), static_cast<std::size_t>(a.rows()));
    a.matvec(bcol, ccol);
  }
  return Matrix::dense(a.rows(), b.cols(), std::move(c));
}

/// Augmented least-squares operator [A; mu*I]: rows 0..m-1 are A, row m+i is
/// mu * e_i^T. Never materialized unless a submatrix is requested.
class AugmentedOperator {
 public:
  AugmentedOperator(Matrix a, double mu) : a_(std::move(a)), mu_(mu) {
    detail::require(mu >= 0.0, ErrorKind::invalid_argument, "AugmentedOperator: mu < 0");
  }

  Index rows() const { return a_.rows() + a_.cols(); }
  Index cols() const { return a_.cols(); }
  double mu() const { return mu_; }
  const Matrix& base() const { return a_; }

  /// y = [A x; mu x]
  void matvec(std::span<const double> x, std::span<double> y) const {
    detail::require(static_cast<Index>(y.size()) == rows(), ErrorKind::dimension_mismatch,
                    "AugmentedOperator::matvec: shape mismatch");
    a_.matvec(x, y.subspan(0, static_cast<std::size_t>(a_.rows())));
    for (Index i = 0; i < a_.cols(); ++i)
      y[static_cast<std::size_t>(a_.rows() + i)] = mu_ * x[static_cast<std::size_t>(i)];
  }

  /// y = A^T x[0:m] + mu x[m:m+n]
  void matvec_transpose(std::span<const double> x, std::span<double> y) const {
    detail::require(static_cast<Index>(x.size()) == rows(), ErrorKind::dimension_mismatch,
                    "AugmentedOperator::matvec_transpose: shape mismatch");
    a_.matvec_transpose(x.subspan(0, static_cast<std::size_t>(a_.rows())), y);
    for (Index i = 0; i < a_.cols(); ++i)
      y[static_cast<std::size_t>(i)] += mu_ * x[static_cast<std::size_t>(a_.rows() + i)];
  }

  /// Submatrix of the stacked operator at the given rows; indices >= m select
  /// scaled identity rows. Result storage follows the base matrix family.
  Matrix extract_rows(std::span<const Index> rows_idx) const {
    detail::check_index_list(rows_idx, rows(), "AugmentedOperator rows");
    Index m = a_.rows(), n = a_.cols();
    Index mr = static_cast<Index>(rows_idx.size());
    if (!a_.is_sparse()) {
      std::vector<double> buf(static_cast<std::size_t>(mr * n), 0.0);
      for (std::size_t ii = 0; ii < rows_idx.size(); ++ii) {
        Index i = rows_idx[ii];
        if (i < m) {
          for (Index j = 0; j < n; ++j)
            buf[static_cast<std::size_t>(j * mr + static_cast<Index>(ii))] = a_(i, j);
        } else {
          buf[static_cast<std::size_t>((i - m) * mr + static_cast<Index>(ii))] = mu_;
        }
      }
      return Matrix::dense(mr, n, std::move(buf));
    }
    std::vector<Index> base_rows;
    std::vector<std::size_t> base_slot;
    std::vector<Triplet> extra;
    for (std::size_t ii = 0; ii < rows_idx.size(); ++ii) {
      Index i = rows_idx[ii];
      if (i < m) {
        base_rows.push_back(i);
        base_slot.push_back(ii);
      } else if (mu_ != 0.0) {
        extra.push_back({static_cast<Index>(ii), i - m, mu_});
      }
    }
    Matrix sub = extract(a_, base_rows, all);
    std::vector<Triplet> trips = std::move(extra);
    for (Index j = 0; j < sub.cols(); ++j)
      for (Index k = sub.col_ptr()[static_cast<std::size_t>(j)]; k < sub.col_ptr()[static_cast<std::size_t>(j) + 1]; ++k)
        trips.push_back({static_cast<Index>(base_slot[static_cast<std::size_t>(
                             sub.row_idx()[static_cast<std::size_t>(k)])]),
                         j, sub.values()[static_cast<std::size_t>(k)]});
    return Matrix::sparse(static_cast<Index>(rows_idx.size()), n, std::move(trips));
  }

  Matrix extract_cols(std::span<const Index> cols_idx) const {
    detail::check_index_list(cols_idx, cols(), "AugmentedOperator cols");
    Index m = a_.rows(), n = a_.cols();
    Matrix top = extract(a_, all, cols_idx);
    if (!a_.is_sparse()) {
      std::vector<double> buf(static_cast<std::size_t>((m + n) * static_cast<Index>(cols_idx.size())), 0.0);
      for (std::size_t jj = 0; jj < cols_idx.size(); ++jj) {
        for (Index i = 0; i < m; ++i)
          buf[static_cast<std::size_t>(static_cast<Index>(jj) * (m + n) + i)] =
              top(i, static_cast<Index>(jj));
        buf[static_cast<std::size_t>(static_cast<Index>(jj) * (m + n) + m + cols_idx[jj])] = mu_;
      }
      return Matrix::dense(m + n, static_cast<Index>(cols_idx.size()), std::move(buf));
    }
    std::vector<Triplet> trips;
    for (Index j = 0; j < top.cols(); ++j) {
      for (Index k = top.col_ptr()[static_cast<std::size_t>(j)]; k < top.col_ptr()[static_cast<std::size_t>(j) + 1]; ++k)
        trips.push_back({top.row_idx()[static_cast<std::size_t>(k)], j,
                         top.values()[static_cast<std::size_t>(k)]});
      if (mu_ != 0.0) trips.push_back({m + cols_idx[static_cast<std::size_t>(j)], j, mu_});
    }
    return Matrix::sparse(m + n, static_cast<Index>(cols_idx.size()), std::move(trips));
  }

  /// Dense intersection block at (rows_idx, cols_idx).
  Matrix extract_block(std::span<const Index> rows_idx, std::span<const Index> cols_idx) const {
    detail::check_index_list(rows_idx, rows(), "AugmentedOperator rows");
    detail::check_index_list(cols_idx, cols(), "AugmentedOperator cols");
    Index m = a_.rows();
    Index mr = static_cast<Index>(rows_idx.size());
    std::vector<double> buf(static_cast<std::size_t>(mr * static_cast<Index>(cols_idx.size())), 0.0);
    for (std::size_t jj = 0; jj < cols_idx.size(); ++jj)
      for (std::size_t ii = 0; ii < rows_idx.size(); ++ii) {
        Index i = rows_idx[ii];
        double v = (i < m) ? a_(i, cols_idx[jj]) : (i - m == cols_idx[jj] ? mu_ : 0.0);
        buf[static_cast<std::size_t>(static_cast<Index>(jj) * mr + static_cast<Index>(ii))] = v;
      }
    return Matrix::dense(mr, static_cast<Index>(cols_idx.size()), std::move(buf));
  }

 private:
  Matrix a_;
  double mu_;
};

} // namespace aplicur

#endif
