#ifndef APLICUR_PRECONDITIONER_HPP
#define APLICUR_PRECONDITIONER_HPP

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "aplicur/cur.hpp"
#include "aplicur/dense_factor.hpp"
#include "aplicur/error.hpp"
#include "aplicur/matrix.hpp"

namespace aplicur {

/// Right preconditioner interface; implementations are immutable once built
/// and reentrant.
class Preconditioner {
 public:
  virtual ~Preconditioner() = default;
  virtual Index dim() const = 0;
  virtual Index rank() const = 0;
  virtual double target_level() const = 0;
  virtual void apply_inv(std::span<const double> v, std::span<double> out) const = 0;
  virtual void apply_inv_transpose(std::span<const double> v, std::span<double> out) const = 0;
  virtual void apply_forward(std::span<const double> v, std::span<double> out) const = 0;
};

/// Rank-l spectral preconditioner built from the truncated spectrum of a
/// low-rank approximation:
///   P = sigma_hat^{-1} V diag(sqrt(s_i^2 + mu^2)) V^T + (I - V V^T),
/// which maps the captured singular directions to the common level sigma_hat
/// and leaves the complement untouched. P is symmetric, so the inverse
/// transpose equals the inverse. V is held either as an explicit dense n x l
/// factor or implicitly as R^T T_R^{-1} V_M when the selected rows are sparse.
class SvdPreconditioner final : public Preconditioner {
 public:
  static SvdPreconditioner identity(Index n) {
    SvdPreconditioner p;
    p.n_ = n;
    p.sigma_hat_ = 1.0;
    return p;
  }

  Index dim() const override { return n_; }
  Index rank() const override { return static_cast<Index>(sigma_reg_.size()); }
  double target_level() const override { return sigma_hat_; }
  double mu() const { return mu_; }
  bool implicit_basis() const { return implicit_; }
  const std::vector<double>& regularized_spectrum() const { return sigma_reg_; }
  const std::vector<double>& cur_spectrum() const { return sigma_cur_; }
  /// Smallest singular value of the underlying low-rank approximation;
  /// used as the cvgdiff floor of the dynamic stopping rule.
  double smallest_cur_sigma() const { return sigma_cur_.empty() ? 0.0 : sigma_cur_.back(); }

  /// Number of doubles held in dense n x l factors (0 in implicit form).
  std::uint64_t dense_factor_entries() const {
    return vhat_.is_sparse() ? 0 : static_cast<std::uint64_t>(vhat_.rows() * vhat_.cols());
  }

  void apply_inv(std::span<const double> v, std::span<double> out) const override {
    apply_shift(v, out, true);
  }
  void apply_inv_transpose(std::span<const double> v, std::span<double> out) const override {
    apply_shift(v, out, true); // symmetric
  }
  void apply_forward(std::span<const double> v, std::span<double> out) const override {
    apply_shift(v, out, false);
  }

 private:
  friend SvdPreconditioner build_svd_precond(const Matrix&, const CoreFactor&, const Matrix&,
                                             double, const Matrix&, const Matrix&);
  friend SvdPreconditioner build_svd_precond_implicit(const Matrix&, const CoreFactor&,
                                                      const Matrix&, double, const Matrix&);
  friend SvdPreconditioner optimal_precond(const Matrix&, Index, double);

  // out = v + V (d .* (V^T v)) with d_i = sigma_hat/sigma_reg_i - 1 (inverse)
  // or sigma_reg_i/sigma_hat - 1 (forward).
  void apply_shift(std::span<const double> v, std::span<double> out, bool inverse) const {
    detail::require(static_cast<Index>(v.size()) == n_ && static_cast<Index>(out.size()) == n_,
                    ErrorKind::dimension_mismatch, "SvdPreconditioner: length mismatch");
    std::copy(v.begin(), v.end(), out.begin());
    Index l = rank();
    if (l == 0) return;
    std::vector<double> z(static_cast<std::size_t>(l));
    project(v, z); // z = V^T v
    for (Index i = 0; i < l; ++i) {
      double ratio = inverse ? sigma_hat_ / sigma_reg_[static_cast<std::size_t>(i)]
                             : sigma_reg_[static_cast<std::size_t>(i)] / sigma_hat_;
      z[static_cast<std::size_t>(i)] *= ratio - 1.0;
    }
    expand_add(z, out); // out += V z
  }

  void project(std::span<const double> v, std::span<double> z) const {
    if (!implicit_) {
      vhat_.matvec_transpose(v, z);
      return;
    }
    // V^T v = V_M^T T_R^{-T} (R v)
    std::vector<double> t(static_cast<std::size_t>(rank()));
    r_.matvec(v, t);
    tri_solve_vec(t_r_, t, true);
    v_m_.matvec_transpose(t, z);
  }

  void expand_add(std::span<const double> z, std::span<double> out) const {
    Index l = rank();
    if (!implicit_) {
      std::vector<double> t(static_cast<std::size_t>(n_));
      vhat_.matvec(z, t);
      for (Index i = 0; i < n_; ++i) out[static_cast<std::size_t>(i)] += t[static_cast<std::size_t>(i)];
      return;
    }
    // V z = R^T T_R^{-1} (V_M z)
    std::vector<double> t(static_cast<std::size_t>(l));
    v_m_.matvec(z, t);
    tri_solve_vec(t_r_, t, false);
    std::vector<double> w(static_cast<std::size_t>(n_));
    r_.matvec_transpose(t, w);
    for (Index i = 0; i < n_; ++i) out[static_cast<std::size_t>(i)] += w[static_cast<std::size_t>(i)];
  }

  Index n_ = 0;
  double mu_ = 0.0;
  double sigma_hat_ = 1.0;
  std::vector<double> sigma_reg_; // sqrt(s_i^2 + mu^2), nonincreasing
  std::vector<double> sigma_cur_; // unregularized spectrum of the approximation
  bool implicit_ = false;
  Matrix vhat_; // explicit basis (dense n x l) when !implicit_
  Matrix r_;    // implicit form: selected rows (l x n)
  Matrix t_r_;  // triangular factor with T_R^T T_R = R R^T
  Matrix v_m_;  // right singular vectors of the compact core
};

namespace detail {

// Triangular factor of C^T C. Cholesky of the Gram matrix squares the
// condition number, so on a failed pivot fall back to the QR route, which
// produces the same factor stably.
inline Matrix gram_factor(const Matrix& c) {
  try {
    return chol_gram(c);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::not_positive) throw;
    return thin_qr(c.to_dense()).t;
  }
}

struct CoreSpectrum {
  std::vector<double> sigma;
  Matrix v_m;
};

// Spectrum of the compact core M = T_C U T_R^T shared by both builders.
inline CoreSpectrum core_spectrum(const Matrix& c, const CoreFactor& core, const Matrix& t_r) {
  Matrix t_c = gram_factor(c);
  Matrix ut = core.solve_matrix(t_r.transpose()); // U T_R^T
  Matrix m = matmul(t_c, ut);
  Svd s = small_svd(m);
  return {std::move(s.sigma), std::move(s.v)};
}

} // namespace detail

/// Build the spectral preconditioner from cross-approximation factors with an
/// explicit orthonormal basis Q_R of range(R^T): T_C = chol(C^T C), the
/// compact core M = T_C U T_R^T is decomposed, and V = Q_R V_M.
inline SvdPreconditioner build_svd_precond(const Matrix& c, const CoreFactor& core,
                                           const Matrix& r, double mu, const Matrix& q_r,
                                           const Matrix& t_r) {
  Index l = core.size(), n = r.cols();
  detail::require(l >= 1, ErrorKind::invalid_argument, "build_svd_precond: empty factors");
  Matrix t_c = detail::gram_factor(c);
  Matrix ut = core.solve_matrix(t_r.transpose());
  Matrix m = matmul(t_c, ut);
  Svd s = small_svd(m);

  SvdPreconditioner p;
  p.n_ = n;
  p.mu_ = mu;
  p.sigma_cur_ = s.sigma;
  p.sigma_reg_.resize(static_cast<std::size_t>(l));
  for (Index i = 0; i < l; ++i)
    p.sigma_reg_[static_cast<std::size_t>(i)] =
        std::sqrt(s.sigma[static_cast<std::size_t>(i)] * s.sigma[static_cast<std::size_t>(i)] + mu * mu);
  p.sigma_hat_ = p.sigma_reg_.back();
  p.implicit_ = false;
  p.vhat_ = matmul(q_r, s.v);
  return p;
}

/// Implicit-basis variant for sparse rows: V is represented as
/// R^T T_R^{-1} V_M and no dense n x l factor is stored.
inline SvdPreconditioner build_svd_precond_implicit(const Matrix& c, const CoreFactor& core,
                                                    const Matrix& r, double mu,
                                                    const Matrix& t_r) {
  Index l = core.size();
  detail::require(l >= 1, ErrorKind::invalid_argument, "build_svd_precond: empty factors");
  detail::CoreSpectrum cs = detail::core_spectrum(c, core, t_r);

  SvdPreconditioner p;
  p.n_ = r.cols();
  p.mu_ = mu;
  p.sigma_cur_ = cs.sigma;
  p.sigma_reg_.resize(static_cast<std::size_t>(l));
  for (Index i = 0; i < l; ++i)
    p.sigma_reg_[static_cast<std::size_t>(i)] =
        std::sqrt(cs.sigma[static_cast<std::size_t>(i)] * cs.sigma[static_cast<std::size_t>(i)] + mu * mu);
  p.sigma_hat_ = p.sigma_reg_.back();
  p.implicit_ = true;
  p.r_ = r;
  p.t_r_ = t_r;
  p.v_m_ = cs.v_m;
  return p;
}

/// Convenience builder computing Q_R / T_R from scratch; picks the implicit
/// basis automatically for sparse rows below 10% density.
inline SvdPreconditioner build_svd_precond(const CurState& state, double mu) {
  const Matrix& r = state.r();
  bool implicit_v = r.is_sparse() && r.density() < 0.10;
  if (implicit_v) {
    Matrix t_r = detail::gram_factor(r.transpose());
    return build_svd_precond_implicit(state.c(), state.core(), r, mu, t_r);
  }
  ThinQr qr = thin_qr(r.transpose().to_dense());
  return build_svd_precond(state.c(), state.core(), r, mu, qr.q, qr.t);
}

inline SvdPreconditioner build_svd_precond(const FixedCur& f, double mu) {
  const Matrix& r = f.r;
  bool implicit_v = r.is_sparse() && r.density() < 0.10;
  if (implicit_v) {
    Matrix t_r = detail::gram_factor(r.transpose());
    return build_svd_precond_implicit(f.c, f.core, r, mu, t_r);
  }
  ThinQr qr = thin_qr(r.transpose().to_dense());
  return build_svd_precond(f.c, f.core, r, mu, qr.q, qr.t);
}

/// SVD-free spectral preconditioner:
///   P^{-1} = sigma_hat Q_R M^{-1} Q_R^T + (I - Q_R Q_R^T),
///   M^{-1} = T_R^{-T} B T_C^{-1} with B the selected intersection block,
/// so applications cost two l x l triangular solves and a multiply by B.
/// Unlike the SVD form this operator is not symmetric; the transpose path
/// uses M^{-T}. No l x l SVD is ever taken on this route.
class SvdFreePreconditioner final : public Preconditioner {
 public:
  Index dim() const override { return n_; }
  Index rank() const override { return t_c_.rows(); }
  double target_level() const override { return sigma_hat_; }
  bool implicit_basis() const { return implicit_; }

  std::uint64_t dense_factor_entries() const {
    return implicit_ ? 0 : static_cast<std::uint64_t>(q_r_.rows() * q_r_.cols());
  }

  void apply_inv(std::span<const double> v, std::span<double> out) const override {
    apply_impl(v, out, false, true);
  }
  void apply_inv_transpose(std::span<const double> v, std::span<double> out) const override {
    apply_impl(v, out, true, true);
  }
  void apply_forward(std::span<const double> v, std::span<double> out) const override {
    apply_impl(v, out, false, false);
  }

 private:
  friend SvdFreePreconditioner build_svdfree_precond(const Matrix&, const CoreFactor&,
                                                     const Matrix&, const Matrix&,
                                                     const Matrix&, const Matrix&, double);
  friend SvdFreePreconditioner build_svdfree_precond_implicit(const Matrix&, const CoreFactor&,
                                                              const Matrix&, const Matrix&,
                                                              const Matrix&, double);

  void apply_impl(std::span<const double> v, std::span<double> out, bool transpose,
                  bool inverse) const {
    detail::require(static_cast<Index>(v.size()) == n_ && static_cast<Index>(out.size()) == n_,
                    ErrorKind::dimension_mismatch, "SvdFreePreconditioner: length mismatch");
    Index l = rank();
    std::copy(v.begin(), v.end(), out.begin());
    std::vector<double> t(static_cast<std::size_t>(l));
    project(v, t); // t = Q_R^T v
    std::vector<double> w(t);
    if (inverse) {
      if (!transpose) {
        // M^{-1} w = T_R^{-T} (B (T_C^{-1} w))
        tri_solve_vec(t_c_, w, false);
        std::vector<double> bw(static_cast<std::size_t>(l));
        block_.matvec(w, bw);
        tri_solve_vec(t_r_, bw, true);
        w = std::move(bw);
      } else {
        // M^{-T} w = T_C^{-T} (B^T (T_R^{-1} w))
        tri_solve_vec(t_r_, w, false);
        std::vector<double> bw(static_cast<std::size_t>(l));
        block_.matvec_transpose(w, bw);
        tri_solve_vec(t_c_, bw, true);
        w = std::move(bw);
      }
      for (auto& x : w) x *= sigma_hat_;
    } else {
      // forward: M w / sigma_hat with M = T_C B^{-1} T_R^T
      std::vector<double> tw(static_cast<std::size_t>(l));
      t_r_.matvec_transpose(w, tw); // T_R^T w  (T_R upper => T_R^T acts by matvec_transpose)
      core_.solve(tw);
      std::vector<double> mw(static_cast<std::size_t>(l));
      t_c_.matvec(tw, mw);
      for (auto& x : mw) x /= sigma_hat_;
      w = std::move(mw);
    }
    // out = v + Q_R (w - t)
    for (Index i = 0; i < l; ++i) w[static_cast<std::size_t>(i)] -= t[static_cast<std::size_t>(i)];
    expand_add(w, out);
  }

  void project(std::span<const double> v, std::span<double> t) const {
    if (!implicit_) {
      q_r_.matvec_transpose(v, t);
      return;
    }
    r_.matvec(v, t);
    tri_solve_vec(t_r_, t, true);
  }

  void expand_add(std::span<const double> z, std::span<double> out) const {
    std::vector<double> w(static_cast<std::size_t>(n_));
    if (!implicit_) {
      q_r_.matvec(z, w);
    } else {
      std::vector<double> t(z.begin(), z.end());
      tri_solve_vec(t_r_, t, false);
      r_.matvec_transpose(t, w);
    }
    for (Index i = 0; i < n_; ++i) out[static_cast<std::size_t>(i)] += w[static_cast<std::size_t>(i)];
  }

  Index n_ = 0;
  double sigma_hat_ = 1.0;
  bool implicit_ = false;
  Matrix q_r_;   // explicit orthonormal basis (dense n x l)
  Matrix r_;     // implicit form
  Matrix t_r_, t_c_;
  Matrix block_; // intersection block B = A(I, J), dense l x l
  CoreFactor core_;
};

inline SvdFreePreconditioner build_svdfree_precond(const Matrix& c, const CoreFactor& core,
                                                   const Matrix& r, const Matrix& block,
                                                   const Matrix& q_r, const Matrix& t_r,
                                                   double target_level) {
  SvdFreePreconditioner p;
  p.n_ = r.cols();
  p.sigma_hat_ = target_level;
  p.implicit_ = false;
  p.q_r_ = q_r.to_dense();
  p.t_r_ = t_r;
  p.t_c_ = detail::gram_factor(c);
  p.block_ = block.to_dense();
  p.core_ = core;
  return p;
}

inline SvdFreePreconditioner build_svdfree_precond_implicit(const Matrix& c, const CoreFactor& core,
                                                            const Matrix& r, const Matrix& block,
                                                            const Matrix& t_r, double target_level) {
  SvdFreePreconditioner p;
  p.n_ = r.cols();
  p.sigma_hat_ = target_level;
  p.implicit_ = true;
  p.r_ = r;
  p.t_r_ = t_r;
  p.t_c_ = detail::gram_factor(c);
  p.block_ = block.to_dense();
  p.core_ = core;
  return p;
}

/// Convenience builder; the target level defaults to the state's current
/// spectral-error estimate, and may be overridden to match an SVD-form
/// preconditioner built from the same factors.
inline SvdFreePreconditioner build_svdfree_precond(const CurState& state,
                                                   std::optional<double> target_level = {}) {
  double lvl = target_level.value_or(state.rho());
  const Matrix& r = state.r();
  bool implicit_v = r.is_sparse() && r.density() < 0.10;
  if (implicit_v) {
    Matrix t_r = detail::gram_factor(r.transpose());
    return build_svdfree_precond_implicit(state.c(), state.core(), r, state.intersection(), t_r, lvl);
  }
  ThinQr qr = thin_qr(r.transpose().to_dense());
  return build_svdfree_precond(state.c(), state.core(), r, state.intersection(), qr.q, qr.t, lvl);
}

/// Reference preconditioner from the exact truncated SVD (dense, desk scale):
/// flattens the leading l regularized singular values to sqrt(s_{l+1}^2+mu^2).
inline SvdPreconditioner optimal_precond(const Matrix& a, Index l, double mu) {
  Index n = a.cols();
  detail::require(l >= 1 && l < n, ErrorKind::invalid_argument, "optimal_precond: need 1 <= l < n");
  Svd s = small_svd(a.to_dense());
  SvdPreconditioner p;
  p.n_ = n;
  p.mu_ = mu;
  p.sigma_cur_.assign(s.sigma.begin(), s.sigma.begin() + l);
  p.sigma_reg_.resize(static_cast<std::size_t>(l));
  for (Index i = 0; i < l; ++i)
    p.sigma_reg_[static_cast<std::size_t>(i)] =
        std::sqrt(s.sigma[static_cast<std::size_t>(i)] * s.sigma[static_cast<std::size_t>(i)] + mu * mu);
  p.sigma_hat_ = std::sqrt(s.sigma[static_cast<std::size_t>(l)] * s.sigma[static_cast<std::size_t>(l)] + mu * mu);
  p.implicit_ = false;
  std::vector<double> v(static_cast<std::size_t>(n * l));
  auto vd = s.v.dense_data();
  std::copy(vd.begin(), vd.begin() + n * l, v.begin());
  p.vhat_ = Matrix::dense(n, l, std::move(v));
  return p;
}

/// Growing thin QR of a column stack, appended block by block with one
/// mandatory reorthogonalization pass. Equals the from-scratch factorization
/// of the stacked columns up to roundoff.
class QrAccumulator {
 public:
  Index rows() const { return q_.rows(); }
  Index cols() const { return q_.cols(); }
  bool empty() const { return q_.cols() == 0; }
  const Matrix& q() const { return q_; }
  const Matrix& t() const { return t_; }

  /// Append a dense block of new columns. A block whose columns are already
  /// spanned (triangular diagonal under 1e-12 of the incoming column scale)
  /// is rejected; callers fall back to a full refactorization.
  void append(const Matrix& newcols) {
    Matrix c = newcols.to_dense();
    detail::require(c.cols() >= 1, ErrorKind::invalid_argument, "QrAccumulator: empty block");
    double scale = 0.0;
    for (Index j = 0; j < c.cols(); ++j) scale = std::max(scale, c.col_norm(j));
    if (empty()) {
      ThinQr qr = factor_checked(c, scale);
      q_ = std::move(qr.q);
      t_ = std::move(qr.t);
      return;
    }
    detail::require(c.rows() == q_.rows(), ErrorKind::dimension_mismatch,
                    "QrAccumulator: row count mismatch");
    Matrix p1 = matmul(q_.transpose(), c);
    Matrix e = subtract(c, matmul(q_, p1));
    Matrix p2 = matmul(q_.transpose(), e);
    e = subtract(e, matmul(q_, p2));
    ThinQr qr = factor_checked(e, scale);

    Index n0 = q_.cols(), b = c.cols(), m = q_.rows();
    std::vector<double> qnew(static_cast<std::size_t>(m * (n0 + b)));
    auto qd = q_.dense_data();
    auto qe = qr.q.dense_data();
    std::copy(qd.begin(), qd.end(), qnew.begin());
    std::copy(qe.begin(), qe.end(), qnew.begin() + m * n0);
    std::vector<double> tnew(static_cast<std::size_t>((n0 + b) * (n0 + b)), 0.0);
    auto td = t_.dense_data();
    for (Index j = 0; j < n0; ++j)
      for (Index i = 0; i <= j; ++i)
        tnew[static_cast<std::size_t>(j * (n0 + b) + i)] = td[static_cast<std::size_t>(j * n0 + i)];
    for (Index j = 0; j < b; ++j)
      for (Index i = 0; i < n0; ++i)
        tnew[static_cast<std::size_t>((n0 + j) * (n0 + b) + i)] =
            p1(i, j) + p2(i, j);
    auto te = qr.t.dense_data();
    for (Index j = 0; j < b; ++j)
      for (Index i = 0; i <= j; ++i)
        tnew[static_cast<std::size_t>((n0 + j) * (n0 + b) + n0 + i)] =
            te[static_cast<std::size_t>(j * b + i)];
    q_ = Matrix::dense(m, n0 + b, std::move(qnew));
    t_ = Matrix::dense(n0 + b, n0 + b, std::move(tnew));
  }

 private:
  static Matrix subtract(const Matrix& a, const Matrix& b) {
    std::vector<double> buf = detail::dense_buffer(a);
    auto bd = b.dense_data();
    for (std::size_t k = 0; k < buf.size(); ++k) buf[k] -= bd[k];
    return Matrix::dense(a.rows(), a.cols(), std::move(buf));
  }

  static ThinQr factor_checked(const Matrix& e, double incoming_scale) {
    detail::HouseholderQr f = detail::householder_qr(e.rows(), e.cols(), detail::dense_buffer(e));
    for (Index j = 0; j < e.cols(); ++j)
      if (std::fabs(f.a[static_cast<std::size_t>(j * e.rows() + j)]) <= 1e-12 * incoming_scale)
        detail::fail(ErrorKind::rank_deficient, "QrAccumulator: dependent block", j);
    std::vector<double> q = detail::form_thin_q(f);
    Index m = e.rows(), k = e.cols();
    std::vector<double> t(static_cast<std::size_t>(k * k), 0.0);
    for (Index j = 0; j < k; ++j)
      for (Index i = 0; i <= j; ++i)
        t[static_cast<std::size_t>(j * k + i)] = f.a[static_cast<std::size_t>(j * m + i)];
    for (Index j = 0; j < k; ++j)
      if (t[static_cast<std::size_t>(j * k + j)] < 0.0) {
        for (Index jj = j; jj < k; ++jj)
          t[static_cast<std::size_t>(jj * k + j)] = -t[static_cast<std::size_t>(jj * k + j)];
        for (Index i = 0; i < m; ++i)
          q[static_cast<std::size_t>(j * m + i)] = -q[static_cast<std::size_t>(j * m + i)];
      }
    return {Matrix::dense(m, k, std::move(q)), Matrix::dense(k, k, std::move(t))};
  }

  Matrix q_;
  Matrix t_;
};

/// Append-only Cholesky factor of the Gram matrix R R^T, maintained blockwise
/// so the sparse path never stores a dense n x l basis.
class CholGramAccumulator {
 public:
  bool empty() const { return t_.cols() == 0; }
  const Matrix& t() const { return t_; }

  /// r_t is the transpose of the full current row stack (n x l_total); the
  /// trailing `added` columns are new since the last call.
  void append(const Matrix& r_t, Index added) {
    Index total = r_t.cols();
    Index old = total - added;
    detail::require(old == t_.cols(), ErrorKind::invalid_argument,
                    "CholGramAccumulator: unexpected block boundary");
    if (old == 0) {
      t_ = chol_gram(extract(r_t, all, firstcols(r_t, added)));
      return;
    }
    // cross products against the scattered new columns
    Matrix newcols = extract(r_t, all, lastcols(r_t, added)).to_dense();
    Matrix oldcols = extract(r_t, all, firstcols(r_t, old));
    Matrix g12 = matmul(oldcols.transpose(), newcols); // old x added
    Matrix g22 = matmul(newcols.transpose(), newcols);
    Matrix t12 = tri_solve(t_, g12, true); // T11^T X = G12
    // T22 = chol(G22 - T12^T T12)
    std::vector<double> s(static_cast<std::size_t>(added * added));
    for (Index j = 0; j < added; ++j)
      for (Index i = 0; i < added; ++i) {
        double acc = g22(i, j);
        for (Index k = 0; k < old; ++k) acc -= t12(k, i) * t12(k, j);
        s[static_cast<std::size_t>(j * added + i)] = acc;
      }
    Matrix t22 = chol_of_dense(Matrix::dense(added, added, std::move(s)));
    // assemble [[T11, T12], [0, T22]]
    std::vector<double> tnew(static_cast<std::size_t>(total * total), 0.0);
    auto t11 = t_.dense_data();
    for (Index j = 0; j < old; ++j)
      for (Index i = 0; i <= j; ++i)
        tnew[static_cast<std::size_t>(j * total + i)] = t11[static_cast<std::size_t>(j * old + i)];
    for (Index j = 0; j < added; ++j) {
      for (Index i = 0; i < old; ++i)
        tnew[static_cast<std::size_t>((old + j) * total + i)] = t12(i, j);
      for (Index i = 0; i <= j; ++i)
        tnew[static_cast<std::size_t>((old + j) * total + old + i)] = t22(i, j);
    }
    t_ = Matrix::dense(total, total, std::move(tnew));
  }

 private:
  static IndexList firstcols(const Matrix& m, Index k) {
    (void)m;
    IndexList v(static_cast<std::size_t>(k));
    for (Index i = 0; i < k; ++i) v[static_cast<std::size_t>(i)] = i;
    return v;
  }
  static IndexList lastcols(const Matrix& m, Index k) {
    IndexList v(static_cast<std::size_t>(k));
    for (Index i = 0; i < k; ++i) v[static_cast<std::size_t>(i)] = m.cols() - k + i;
    return v;
  }
  static Matrix chol_of_dense(const Matrix& g) {
    Index k = g.rows();
    std::vector<double> t(static_cast<std::size_t>(k * k), 0.0);
    for (Index j = 0; j < k; ++j) {
      for (Index i = 0; i < j; ++i) {
        double s = g(i, j);
        for (Index r = 0; r < i; ++r)
          s -= t[static_cast<std::size_t>(i * k + r)] * t[static_cast<std::size_t>(j * k + r)];
        t[static_cast<std::size_t>(j * k + i)] = s / t[static_cast<std::size_t>(i * k + i)];
      }
      double s = g(j, j);
      for (Index r = 0; r < j; ++r)
        s -= t[static_cast<std::size_t>(j * k + r)] * t[static_cast<std::size_t>(j * k + r)];
      if (!(s > 0.0))
        detail::fail(ErrorKind::not_positive, "CholGramAccumulator: dependent block", j);
      t[static_cast<std::size_t>(j * k + j)] = std::sqrt(s);
    }
    return Matrix::dense(k, k, std::move(t));
  }

  Matrix t_{Matrix::dense_zeros(0, 0)};
};

} // namespace aplicur

#endif
