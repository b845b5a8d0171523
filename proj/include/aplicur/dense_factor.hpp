#ifndef APLICUR_DENSE_FACTOR_HPP
#define APLICUR_DENSE_FACTOR_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "aplicur/error.hpp"
#include "aplicur/matrix.hpp"

namespace aplicur {

/// Row indices in pivot-selection order of a partially pivoted elimination,
/// together with the pivot magnitude seen at each step.
struct PivotOrder {
  std::vector<Index> order;
  std::vector<double> magnitudes;
};

namespace detail {

inline std::atomic<std::uint64_t>& svd_call_counter() {
  static std::atomic<std::uint64_t> n{0};
  return n;
}

// Householder QR of a dense column-major buffer. Factors in place: on exit
// the upper triangle of `a` holds R and `hh` holds the unit reflector of each
// step. No rank checks here; callers decide what a small diagonal means.
struct HouseholderQr {
  Index m = 0, k = 0;
  std::vector<double> a;  // R in upper triangle
  std::vector<double> hh; // m*k, reflector j stored in column j rows j..m-1
};

inline HouseholderQr householder_qr(Index m, Index k, std::vector<double> buf) {
  HouseholderQr f;
  f.m = m;
  f.k = k;
  f.a = std::move(buf);
  f.hh.assign(static_cast<std::size_t>(m * k), 0.0);
  for (Index j = 0; j < k; ++j) {
    double* col = f.a.data() + j * m;
    double norm2 = 0.0;
    for (Index i = j; i < m; ++i) norm2 += col[i] * col[i];
    double norm = std::sqrt(norm2);
    double* v = f.hh.data() + j * m;
    if (norm == 0.0) continue; // zero column below diagonal: nothing to reflect
    double alpha = (col[j] >= 0.0) ? -norm : norm;
    for (Index i = j; i < m; ++i) v[i] = col[i];
    v[j] -= alpha;
    double vnorm2 = 0.0;
    for (Index i = j; i < m; ++i) vnorm2 += v[i] * v[i];
    double vnorm = std::sqrt(vnorm2);
    if (vnorm == 0.0) continue;
    for (Index i = j; i < m; ++i) v[i] /= vnorm;
    col[j] = alpha;
    for (Index i = j + 1; i < m; ++i) col[i] = 0.0;
    for (Index jj = j + 1; jj < k; ++jj) {
      double* c = f.a.data() + jj * m;
      double dot = 0.0;
      for (Index i = j; i < m; ++i) dot += v[i] * c[i];
      dot *= 2.0;
      for (Index i = j; i < m; ++i) c[i] -= dot * v[i];
    }
  }
  return f;
}

// y <- Q^T y (apply reflectors forward) or y <- Q y (reverse order).
inline void apply_q_transpose(const HouseholderQr& f, std::vector<double>& y) {
  for (Index j = 0; j < f.k; ++j) {
    const double* v = f.hh.data() + j * f.m;
    double dot = 0.0;
    for (Index i = j; i < f.m; ++i) dot += v[i] * y[static_cast<std::size_t>(i)];
    dot *= 2.0;
    for (Index i = j; i < f.m; ++i) y[static_cast<std::size_t>(i)] -= dot * v[i];
  }
}

inline void apply_q(const HouseholderQr& f, std::vector<double>& y) {
  for (Index j = f.k - 1; j >= 0; --j) {
    const double* v = f.hh.data() + j * f.m;
    double dot = 0.0;
    for (Index i = j; i < f.m; ++i) dot += v[i] * y[static_cast<std::size_t>(i)];
    dot *= 2.0;
    for (Index i = j; i < f.m; ++i) y[static_cast<std::size_t>(i)] -= dot * v[i];
  }
}

// Explicit thin Q (m x k) of a Householder factorization.
inline std::vector<double> form_thin_q(const HouseholderQr& f) {
  std::vector<double> q(static_cast<std::size_t>(f.m * f.k), 0.0);
  std::vector<double> col(static_cast<std::size_t>(f.m));
  for (Index j = 0; j < f.k; ++j) {
    std::fill(col.begin(), col.end(), 0.0);
    col[static_cast<std::size_t>(j)] = 1.0;
    apply_q(f, col);
    std::copy(col.begin(), col.end(), q.begin() + j * f.m);
  }
  return q;
}

inline std::vector<double> dense_buffer(const Matrix& m) {
  Matrix d = m.to_dense();
  auto s = d.dense_data();
  return std::vector<double>(s.begin(), s.end());
}

} // namespace detail

/// Row-pivot order of Gaussian elimination with partial pivoting on a dense
/// matrix. Largest magnitude wins; ties (including all-zero columns) go to the
/// lowest original row index. `max_pivots < 0` runs min(m, n) steps.
inline PivotOrder lu_partial_pivot(const Matrix& mat, Index max_pivots = -1) {
  detail::require(!mat.is_sparse(), ErrorKind::invalid_argument,
                  "lu_partial_pivot: dense input required");
  Index m = mat.rows(), n = mat.cols();
  Index steps = std::min(m, n);
  if (max_pivots >= 0) steps = std::min(steps, max_pivots);
  std::vector<double> w = detail::dense_buffer(mat);
  std::vector<Index> perm(static_cast<std::size_t>(m));
  std::iota(perm.begin(), perm.end(), Index{0});
  PivotOrder piv;
  piv.order.reserve(static_cast<std::size_t>(steps));
  for (Index k = 0; k < steps; ++k) {
    Index best = k;
    double best_mag = -1.0;
    Index best_orig = std::numeric_limits<Index>::max();
    for (Index i = k; i < m; ++i) {
      double mag = std::fabs(w[static_cast<std::size_t>(k * m + perm[static_cast<std::size_t>(i)])]);
      if (mag > best_mag || (mag == best_mag && perm[static_cast<std::size_t>(i)] < best_orig)) {
        best = i;
        best_mag = mag;
        best_orig = perm[static_cast<std::size_t>(i)];
      }
    }
    std::swap(perm[static_cast<std::size_t>(k)], perm[static_cast<std::size_t>(best)]);
    Index prow = perm[static_cast<std::size_t>(k)];
    piv.order.push_back(prow);
    piv.magnitudes.push_back(best_mag);
    double pval = w[static_cast<std::size_t>(k * m + prow)];
    if (pval == 0.0) continue;
    for (Index i = k + 1; i < m; ++i) {
      Index r = perm[static_cast<std::size_t>(i)];
      double factor = w[static_cast<std::size_t>(k * m + r)] / pval;
      if (factor == 0.0) continue;
      for (Index j = k; j < n; ++j)
        w[static_cast<std::size_t>(j * m + r)] -= factor * w[static_cast<std::size_t>(j * m + prow)];
    }
  }
  return piv;
}

struct ThinQr {
  Matrix q; // m x k, orthonormal columns
  Matrix t; // k x k upper-triangular with nonnegative diagonal, q * t = input
};

/// Thin Householder QR of a dense m x k matrix (m >= k, numerically full
/// column rank). A diagonal of T below tolerance reports the deficient column.
inline ThinQr thin_qr(const Matrix& mat) {
  detail::require(!mat.is_sparse(), ErrorKind::invalid_argument, "thin_qr: dense input required");
  Index m = mat.rows(), k = mat.cols();
  detail::require(m >= k && k >= 1, ErrorKind::invalid_argument, "thin_qr: need m >= k >= 1");
  detail::HouseholderQr f = detail::householder_qr(m, k, detail::dense_buffer(mat));
  double max_diag = 0.0;
  for (Index j = 0; j < k; ++j)
    max_diag = std::max(max_diag, std::fabs(f.a[static_cast<std::size_t>(j * m + j)]));
  double tol = 1e-13 * max_diag;
  for (Index j = 0; j < k; ++j)
    if (std::fabs(f.a[static_cast<std::size_t>(j * m + j)]) <= tol)
      detail::fail(ErrorKind::rank_deficient, "thin_qr: numerically rank-deficient column", j);

  std::vector<double> q = detail::form_thin_q(f);
  std::vector<double> t(static_cast<std::size_t>(k * k), 0.0);
  for (Index j = 0; j < k; ++j)
    for (Index i = 0; i <= j; ++i)
      t[static_cast<std::size_t>(j * k + i)] = f.a[static_cast<std::size_t>(j * m + i)];
  for (Index j = 0; j < k; ++j) {
    if (t[static_cast<std::size_t>(j * k + j)] < 0.0) {
      for (Index jj = j; jj < k; ++jj) t[static_cast<std::size_t>(jj * k + j)] = -t[static_cast<std::size_t>(jj * k + j)];
      for (Index i = 0; i < m; ++i) q[static_cast<std::size_t>(j * m + i)] = -q[static_cast<std::size_t>(j * m + i)];
    }
  }
  return {Matrix::dense(m, k, std::move(q)), Matrix::dense(k, k, std::move(t))};
}

/// Upper-triangular T with T^T T = C^T C. C may be sparse; the Gram matrix is
/// formed column by column against a scattered work vector.
inline Matrix chol_gram(const Matrix& c) {
  Index m = c.rows(), k = c.cols();
  detail::require(k >= 1, ErrorKind::invalid_argument, "chol_gram: empty matrix");
  std::vector<double> g(static_cast<std::size_t>(k * k), 0.0);
  if (!c.is_sparse()) {
    auto a = c.dense_data();
    for (Index j = 0; j < k; ++j)
      for (Index i = 0; i <= j; ++i) {
        double s = 0.0;
        const double* ci = a.data() + i * m;
        const double* cj = a.data() + j * m;
        for (Index r = 0; r < m; ++r) s += ci[r] * cj[r];
        g[static_cast<std::size_t>(j * k + i)] = s;
        g[static_cast<std::size_t>(i * k + j)] = s;
      }
  } else {
    std::vector<double> work(static_cast<std::size_t>(m), 0.0);
    auto cp = c.col_ptr();
    auto ri = c.row_idx();
    auto va = c.values();
    for (Index j = 0; j < k; ++j) {
      for (Index p = cp[static_cast<std::size_t>(j)]; p < cp[static_cast<std::size_t>(j) + 1]; ++p)
        work[static_cast<std::size_t>(ri[static_cast<std::size_t>(p)])] = va[static_cast<std::size_t>(p)];
      for (Index i = 0; i <= j; ++i) {
        double s = 0.0;
        for (Index p = cp[static_cast<std::size_t>(i)]; p < cp[static_cast<std::size_t>(i) + 1]; ++p)
          s += va[static_cast<std::size_t>(p)] * work[static_cast<std::size_t>(ri[static_cast<std::size_t>(p)])];
        g[static_cast<std::size_t>(j * k + i)] = s;
        g[static_cast<std::size_t>(i * k + j)] = s;
      }
      for (Index p = cp[static_cast<std::size_t>(j)]; p < cp[static_cast<std::size_t>(j) + 1]; ++p)
        work[static_cast<std::size_t>(ri[static_cast<std::size_t>(p)])] = 0.0;
    }
  }
  // upper Cholesky of g
  std::vector<double> t(static_cast<std::size_t>(k * k), 0.0);
  for (Index j = 0; j < k; ++j) {
    for (Index i = 0; i < j; ++i) {
      double s = g[static_cast<std::size_t>(j * k + i)];
      for (Index r = 0; r < i; ++r)
        s -= t[static_cast<std::size_t>(i * k + r)] * t[static_cast<std::size_t>(j * k + r)];
      t[static_cast<std::size_t>(j * k + i)] = s / t[static_cast<std::size_t>(i * k + i)];
    }
    double s = g[static_cast<std::size_t>(j * k + j)];
    for (Index r = 0; r < j; ++r) s -= t[static_cast<std::size_t>(j * k + r)] * t[static_cast<std::size_t>(j * k + r)];
    if (!(s > 0.0))
      detail::fail(ErrorKind::not_positive, "chol_gram: non-positive pivot", j);
    t[static_cast<std::size_t>(j * k + j)] = std::sqrt(s);
  }
  return Matrix::dense(k, k, std::move(t));
}

namespace detail {

// One-sided Jacobi on the columns of w (p x n, p >= n), accumulating V.
// Returns false if the sweep cap is hit before convergence.
inline bool jacobi_sweeps(Index p, Index n, std::vector<double>& w, std::vector<double>& v) {
  const double tol = 1.0e-15;
  const int max_sweeps = 60;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (Index j1 = 0; j1 < n - 1; ++j1) {
      for (Index j2 = j1 + 1; j2 < n; ++j2) {
        double* c1 = w.data() + j1 * p;
        double* c2 = w.data() + j2 * p;
        double a = 0.0, b = 0.0, c = 0.0;
        for (Index i = 0; i < p; ++i) {
          a += c1[i] * c1[i];
          b += c2[i] * c2[i];
          c += c1[i] * c2[i];
        }
        if (std::fabs(c) <= tol * std::sqrt(a * b) || c == 0.0) continue;
        rotated = true;
        double zeta = (b - a) / (2.0 * c);
        double tt = (zeta >= 0.0 ? 1.0 : -1.0) / (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
        double cs = 1.0 / std::sqrt(1.0 + tt * tt);
        double sn = cs * tt;
        for (Index i = 0; i < p; ++i) {
          double x = c1[i], y = c2[i];
          c1[i] = cs * x - sn * y;
          c2[i] = sn * x + cs * y;
        }
        double* v1 = v.data() + j1 * n;
        double* v2 = v.data() + j2 * n;
        for (Index i = 0; i < n; ++i) {
          double x = v1[i], y = v2[i];
          v1[i] = cs * x - sn * y;
          v2[i] = sn * x + cs * y;
        }
      }
    }
    if (!rotated) return true;
  }
  return false;
}

} // namespace detail

struct Svd {
  Matrix u;                  // m x k economy factor, k = min(m, n)
  std::vector<double> sigma; // k values, nonincreasing, nonnegative
  Matrix v;                  // n x k (square n x n when m >= n)
};

inline constexpr Index kSmallSvdDimCap = 4096;

/// Economy SVD of a dense matrix via one-sided Jacobi. Tall inputs are reduced
/// by a Householder QR first; wide inputs go through the transpose. Null
/// directions of U are completed to an orthonormal basis deterministically.
/// Dimensions are capped at kSmallSvdDimCap.
inline Svd small_svd(const Matrix& mat) {
  detail::require(!mat.is_sparse(), ErrorKind::invalid_argument, "small_svd: dense input required");
  detail::svd_call_counter().fetch_add(1, std::memory_order_relaxed);
  Index m = mat.rows(), n = mat.cols();
  detail::require(m >= 1 && n >= 1, ErrorKind::invalid_argument, "small_svd: empty matrix");
  detail::require(std::max(m, n) <= kSmallSvdDimCap, ErrorKind::invalid_argument,
                  "small_svd: dimension exceeds the small-problem cap");
  if (m < n) {
    Svd s = small_svd(mat.transpose());
    return {std::move(s.v), std::move(s.sigma), std::move(s.u)};
  }

  bool preprocessed = m > n;
  detail::HouseholderQr qr;
  std::vector<double> w;
  Index p = m;
  if (preprocessed) {
    qr = detail::householder_qr(m, n, detail::dense_buffer(mat));
    p = n;
    w.assign(static_cast<std::size_t>(n * n), 0.0);
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i <= j; ++i)
        w[static_cast<std::size_t>(j * n + i)] = qr.a[static_cast<std::size_t>(j * m + i)];
  } else {
    w = detail::dense_buffer(mat);
  }

  std::vector<double> v(static_cast<std::size_t>(n * n), 0.0);
  for (Index j = 0; j < n; ++j) v[static_cast<std::size_t>(j * n + j)] = 1.0;
  if (n > 1 && !detail::jacobi_sweeps(p, n, w, v))
    detail::fail(ErrorKind::no_convergence, "small_svd: Jacobi sweep cap reached");

  std::vector<double> sig(static_cast<std::size_t>(n));
  std::vector<Index> ord(static_cast<std::size_t>(n));
  for (Index j = 0; j < n; ++j) {
    double s = 0.0;
    for (Index i = 0; i < p; ++i) s += w[static_cast<std::size_t>(j * p + i)] * w[static_cast<std::size_t>(j * p + i)];
    sig[static_cast<std::size_t>(j)] = std::sqrt(s);
  }
  std::iota(ord.begin(), ord.end(), Index{0});
  std::stable_sort(ord.begin(), ord.end(), [&](Index a, Index b) {
    return sig[static_cast<std::size_t>(a)] > sig[static_cast<std::size_t>(b)];
  });

  std::vector<double> sigma(static_cast<std::size_t>(n));
  std::vector<double> usmall(static_cast<std::size_t>(p * n), 0.0);
  std::vector<double> vout(static_cast<std::size_t>(n * n));
  std::vector<Index> null_cols;
  for (Index jj = 0; jj < n; ++jj) {
    Index j = ord[static_cast<std::size_t>(jj)];
    sigma[static_cast<std::size_t>(jj)] = sig[static_cast<std::size_t>(j)];
    for (Index i = 0; i < n; ++i)
      vout[static_cast<std::size_t>(jj * n + i)] = v[static_cast<std::size_t>(j * n + i)];
    double s = sig[static_cast<std::size_t>(j)];
    if (s > 0.0) {
      for (Index i = 0; i < p; ++i)
        usmall[static_cast<std::size_t>(jj * p + i)] = w[static_cast<std::size_t>(j * p + i)] / s;
    } else {
      null_cols.push_back(jj);
    }
  }
  // exactly-null directions: extend U to an orthonormal set, deterministically
  for (Index jj : null_cols) {
    for (Index cand = 0; cand < p; ++cand) {
      std::vector<double> e(static_cast<std::size_t>(p), 0.0);
      e[static_cast<std::size_t>(cand)] = 1.0;
      for (int pass = 0; pass < 2; ++pass)
        for (Index j2 = 0; j2 < n; ++j2) {
          const double* uc = usmall.data() + j2 * p;
          double dot = 0.0;
          for (Index i = 0; i < p; ++i) dot += uc[i] * e[static_cast<std::size_t>(i)];
          for (Index i = 0; i < p; ++i) e[static_cast<std::size_t>(i)] -= dot * uc[i];
        }
      double nrm = 0.0;
      for (double x : e) nrm += x * x;
      nrm = std::sqrt(nrm);
      if (nrm > 0.5) {
        for (Index i = 0; i < p; ++i) usmall[static_cast<std::size_t>(jj * p + i)] = e[static_cast<std::size_t>(i)] / nrm;
        break;
      }
    }
  }

  std::vector<double> u;
  if (preprocessed) {
    u.assign(static_cast<std::size_t>(m * n), 0.0);
    std::vector<double> col(static_cast<std::size_t>(m));
    for (Index j = 0; j < n; ++j) {
      std::fill(col.begin(), col.end(), 0.0);
      for (Index i = 0; i < n; ++i) col[static_cast<std::size_t>(i)] = usmall[static_cast<std::size_t>(j * n + i)];
      detail::apply_q(qr, col);
      std::copy(col.begin(), col.end(), u.begin() + j * m);
    }
  } else {
    u = std::move(usmall);
  }
  return {Matrix::dense(m, n, std::move(u)), std::move(sigma), Matrix::dense(n, n, std::move(vout))};
}

namespace detail {

inline void tri_solve_buf(Index k, const double* t, double* x, bool transpose) {
  if (!transpose) {
    for (Index i = k - 1; i >= 0; --i) {
      double s = x[i];
      for (Index j = i + 1; j < k; ++j) s -= t[j * k + i] * x[j];
      double d = t[i * k + i];
      if (d == 0.0) fail(ErrorKind::singular, "tri_solve: zero diagonal", i);
      x[i] = s / d;
    }
  } else {
    for (Index i = 0; i < k; ++i) {
      double s = x[i];
      for (Index j = 0; j < i; ++j) s -= t[i * k + j] * x[j];
      double d = t[i * k + i];
      if (d == 0.0) fail(ErrorKind::singular, "tri_solve: zero diagonal", i);
      x[i] = s / d;
    }
  }
}

} // namespace detail

/// Solve T X = B (or T^T X = B) for upper-triangular T; per-column back or
/// forward substitution.
inline Matrix tri_solve(const Matrix& t, const Matrix& b, bool transpose = false) {
  detail::require(!t.is_sparse(), ErrorKind::invalid_argument, "tri_solve: dense T required");
  Index k = t.rows();
  detail::require(t.cols() == k, ErrorKind::invalid_argument, "tri_solve: T must be square");
  detail::require(b.rows() == k, ErrorKind::dimension_mismatch, "tri_solve: shape mismatch");
  std::vector<double> x = detail::dense_buffer(b);
  auto tdat = t.dense_data();
  for (Index j = 0; j < b.cols(); ++j)
    detail::tri_solve_buf(k, tdat.data(), x.data() + j * k, transpose);
  return Matrix::dense(k, b.cols(), std::move(x));
}

/// In-place vector triangular solve against an upper-triangular dense T.
inline void tri_solve_vec(const Matrix& t, std::span<double> x, bool transpose = false) {
  detail::require(t.rows() == t.cols() && static_cast<Index>(x.size()) == t.rows(),
                  ErrorKind::dimension_mismatch, "tri_solve_vec: shape mismatch");
  detail::tri_solve_buf(t.rows(), t.dense_data().data(), x.data(), transpose);
}

/// Orthonormal basis of range(M) (dense, desk scale): left singular vectors
/// with sigma_i > max(m, n) * eps * sigma_1.
inline Matrix orth(const Matrix& mat) {
  Svd s = small_svd(mat.to_dense());
  Index m = mat.rows(), n = mat.cols();
  double tol = static_cast<double>(std::max(m, n)) * std::numeric_limits<double>::epsilon() *
               (s.sigma.empty() ? 0.0 : s.sigma[0]);
  Index r = 0;
  while (r < static_cast<Index>(s.sigma.size()) && s.sigma[static_cast<std::size_t>(r)] > tol) ++r;
  std::vector<double> q(static_cast<std::size_t>(m * r));
  auto u = s.u.dense_data();
  std::copy(u.begin(), u.begin() + m * r, q.begin());
  return Matrix::dense(m, r, std::move(q));
}

/// Least-squares solution of min ||A x - b|| by Householder QR (A dense,
/// m >= n, full column rank).
inline std::vector<double> dense_lstsq(const Matrix& a, std::span<const double> b) {
  Index m = a.rows(), n = a.cols();
  detail::require(m >= n, ErrorKind::invalid_argument, "dense_lstsq: need m >= n");
  detail::require(static_cast<Index>(b.size()) == m, ErrorKind::dimension_mismatch,
                  "dense_lstsq: rhs length mismatch");
  detail::HouseholderQr f = detail::householder_qr(m, n, detail::dense_buffer(a.to_dense()));
  std::vector<double> y(b.begin(), b.end());
  detail::apply_q_transpose(f, y);
  std::vector<double> x(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = y[static_cast<std::size_t>(i)];
  // back substitution on the R factor stored in f.a (leading n x n upper block)
  for (Index i = n - 1; i >= 0; --i) {
    double s = x[static_cast<std::size_t>(i)];
    for (Index j = i + 1; j < n; ++j) s -= f.a[static_cast<std::size_t>(j * m + i)] * x[static_cast<std::size_t>(j)];
    double d = f.a[static_cast<std::size_t>(i * m + i)];
    if (d == 0.0) detail::fail(ErrorKind::singular, "dense_lstsq: rank-deficient", i);
    x[static_cast<std::size_t>(i)] = s / d;
  }
  return x;
}

} // namespace aplicur

#endif
