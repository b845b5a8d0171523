#ifndef APLICUR_SKETCH_HPP
#define APLICUR_SKETCH_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "aplicur/error.hpp"
#include "aplicur/matrix.hpp"
#include "aplicur/rng.hpp"

namespace aplicur {

/// Sparse sign embedding S (s x m): each column holds min(xi, s) entries of
/// value +-1/sqrt(xi) at distinct rows, so every column has unit norm.
/// Deterministic under its seed.
class SparseSignEmbedding {
 public:
  SparseSignEmbedding(Index s, Index m, Index xi, std::uint64_t seed) {
    detail::require(s >= 1 && m >= 1 && xi >= 1, ErrorKind::invalid_argument,
                    "SparseSignEmbedding: parameters must be positive");
    s_ = s;
    m_ = m;
    xi_ = std::min(xi, s);
    scale_ = 1.0 / std::sqrt(static_cast<double>(xi_));
    rows_.resize(static_cast<std::size_t>(m_ * xi_));
    signs_.resize(static_cast<std::size_t>(m_ * xi_));
    Rng rng(seed);
    std::vector<Index> pick(static_cast<std::size_t>(xi_));
    for (Index c = 0; c < m_; ++c) {
      // Floyd's sampling of xi distinct rows out of s
      std::size_t cnt = 0;
      for (Index t = s_ - xi_; t < s_; ++t) {
        Index r = static_cast<Index>(rng.below(static_cast<std::uint64_t>(t) + 1));
        bool dup = false;
        for (std::size_t q = 0; q < cnt; ++q)
          if (pick[q] == r) {
            dup = true;
            break;
          }
        pick[cnt++] = dup ? t : r;
      }
      std::sort(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(cnt));
      for (std::size_t q = 0; q < cnt; ++q) {
        rows_[static_cast<std::size_t>(c * xi_) + q] = pick[q];
        signs_[static_cast<std::size_t>(c * xi_) + q] = static_cast<signed char>(rng.sign() > 0 ? 1 : -1);
      }
    }
  }

  Index rows() const { return s_; }
  Index cols() const { return m_; }
  Index sparsity() const { return xi_; }
  double scale() const { return scale_; }

  /// Entries of column c as (row, signed value) pairs.
  void column(Index c, std::vector<std::pair<Index, double>>& out) const {
    out.clear();
    for (Index q = 0; q < xi_; ++q)
      out.push_back({rows_[static_cast<std::size_t>(c * xi_ + q)],
                     scale_ * signs_[static_cast<std::size_t>(c * xi_ + q)]});
  }

  Matrix to_matrix() const {
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(m_ * xi_));
    for (Index c = 0; c < m_; ++c)
      for (Index q = 0; q < xi_; ++q)
        trips.push_back({rows_[static_cast<std::size_t>(c * xi_ + q)], c,
                         scale_ * signs_[static_cast<std::size_t>(c * xi_ + q)]});
    return Matrix::sparse(s_, m_, std::move(trips));
  }

  /// Y = S * A (s x n dense). Cost is proportional to the entries of A
  /// actually touched: xi per stored nonzero.
  Matrix apply(const Matrix& a) const {
    detail::require(a.rows() == m_, ErrorKind::dimension_mismatch, "apply_sketch: shape mismatch");
    Index n = a.cols();
    std::vector<double> y(static_cast<std::size_t>(s_ * n), 0.0);
    if (!a.is_sparse()) {
      auto ad = a.dense_data();
      for (Index j = 0; j < n; ++j) {
        const double* acol = ad.data() + j * m_;
        double* ycol = y.data() + j * s_;
        for (Index k = 0; k < m_; ++k) {
          double v = acol[k];
          if (v == 0.0) continue;
          const Index* rr = rows_.data() + k * xi_;
          const signed char* ss = signs_.data() + k * xi_;
          double sv = scale_ * v;
          for (Index q = 0; q < xi_; ++q) ycol[rr[q]] += sv * ss[q];
        }
      }
    } else {
      auto cp = a.col_ptr();
      auto ri = a.row_idx();
      auto va = a.values();
      for (Index j = 0; j < n; ++j) {
        double* ycol = y.data() + j * s_;
        for (Index p = cp[static_cast<std::size_t>(j)]; p < cp[static_cast<std::size_t>(j) + 1]; ++p) {
          Index k = ri[static_cast<std::size_t>(p)];
          double sv = scale_ * va[static_cast<std::size_t>(p)];
          const Index* rr = rows_.data() + k * xi_;
          const signed char* ss = signs_.data() + k * xi_;
          for (Index q = 0; q < xi_; ++q) ycol[rr[q]] += sv * ss[q];
        }
      }
    }
    return Matrix::dense(s_, n, std::move(y));
  }

  /// Y = S * [A; mu I]; the trailing identity block contributes mu times the
  /// dense columns of S at indices m..m+n-1.
  Matrix apply_to_augmented(const AugmentedOperator& op) const {
    Index m = op.base().rows(), n = op.base().cols();
    detail::require(m_ == m + n, ErrorKind::dimension_mismatch,
                    "apply_sketch: embedding width must match augmented rows");
    // top part: S(:, 0:m) * A, using only the leading m sketch columns
    std::vector<double> y(static_cast<std::size_t>(s_ * n), 0.0);
    const Matrix& a = op.base();
    if (!a.is_sparse()) {
      auto ad = a.dense_data();
      for (Index j = 0; j < n; ++j) {
        const double* acol = ad.data() + j * m;
        double* ycol = y.data() + j * s_;
        for (Index k = 0; k < m; ++k) {
          double v = acol[k];
          if (v == 0.0) continue;
          const Index* rr = rows_.data() + k * xi_;
          const signed char* ss = signs_.data() + k * xi_;
          double sv = scale_ * v;
          for (Index q = 0; q < xi_; ++q) ycol[rr[q]] += sv * ss[q];
        }
      }
    } else {
      auto cp = a.col_ptr();
      auto ri = a.row_idx();
      auto va = a.values();
      for (Index j = 0; j < n; ++j) {
        double* ycol = y.data() + j * s_;
        for (Index p = cp[static_cast<std::size_t>(j)]; p < cp[static_cast<std::size_t>(j) + 1]; ++p) {
          Index k = ri[static_cast<std::size_t>(p)];
          double sv = scale_ * va[static_cast<std::size_t>(p)];
          const Index* rr = rows_.data() + k * xi_;
          const signed char* ss = signs_.data() + k * xi_;
          for (Index q = 0; q < xi_; ++q) ycol[rr[q]] += sv * ss[q];
        }
      }
    }
    double mu = op.mu();
    if (mu != 0.0) {
      for (Index j = 0; j < n; ++j) {
        Index c = m + j;
        double* ycol = y.data() + j * s_;
        const Index* rr = rows_.data() + c * xi_;
        const signed char* ss = signs_.data() + c * xi_;
        for (Index q = 0; q < xi_; ++q) ycol[rr[q]] += mu * scale_ * ss[q];
      }
    }
    return Matrix::dense(s_, n, std::move(y));
  }

 private:
  Index s_ = 0, m_ = 0, xi_ = 0;
  double scale_ = 0.0;
  std::vector<Index> rows_;       // xi per column
  std::vector<signed char> signs_;
};

/// Dense Gaussian embedding (s x m), entries N(0, 1/s). Optional alternative
/// to the sparse sign embedding.
class GaussianEmbedding {
 public:
  GaussianEmbedding(Index s, Index m, std::uint64_t seed) : s_(s), m_(m) {
    detail::require(s >= 1 && m >= 1, ErrorKind::invalid_argument,
                    "GaussianEmbedding: parameters must be positive");
    Rng rng(seed);
    double scale = 1.0 / std::sqrt(static_cast<double>(s));
    val_.resize(static_cast<std::size_t>(s * m));
    for (auto& v : val_) v = scale * rng.gaussian();
  }

  Index rows() const { return s_; }
  Index cols() const { return m_; }

  Matrix to_matrix() const { return Matrix::dense(s_, m_, val_); }

  Matrix apply(const Matrix& a) const {
    detail::require(a.rows() == m_, ErrorKind::dimension_mismatch, "apply_sketch: shape mismatch");
    return matmul(to_matrix(), a);
  }

 private:
  Index s_ = 0, m_ = 0;
  std::vector<double> val_;
};

inline SparseSignEmbedding sparse_sign(Index s, Index m, Index xi, std::uint64_t seed) {
  return SparseSignEmbedding(s, m, xi, seed);
}

inline Matrix apply_sketch(const SparseSignEmbedding& s, const Matrix& a) { return s.apply(a); }
inline Matrix apply_sketch(const GaussianEmbedding& s, const Matrix& a) { return s.apply(a); }

/// Randomized upper estimate of ||E||_2 from r Gaussian probes:
///   rho = 10 sqrt(2/pi) max_i ||E w_i||_2,  w_i ~ N(0, I).
/// Holds with probability at least 1 - 10^(-r). Probes are not normalized.
inline double spectral_norm_estimate(const Matrix& e, Index r, Rng& probe_rng) {
  detail::require(r >= 1, ErrorKind::invalid_argument, "spectral_norm_estimate: r >= 1");
  Index n = e.cols();
  std::vector<double> w(static_cast<std::size_t>(n));
  std::vector<double> ew(static_cast<std::size_t>(e.rows()));
  double best = 0.0;
  for (Index i = 0; i < r; ++i) {
    for (auto& x : w) x = probe_rng.gaussian();
    e.matvec(w, ew);
    double norm2 = 0.0;
    for (double x : ew) norm2 += x * x;
    best = std::max(best, std::sqrt(norm2));
  }
  return 10.0 * std::sqrt(2.0 / 3.14159265358979323846) * best;
}

inline double spectral_norm_estimate(const Matrix& e, Index r, std::uint64_t seed) {
  Rng rng(seed, RngStream::probes);
  return spectral_norm_estimate(e, r, rng);
}

} // namespace aplicur

#endif
