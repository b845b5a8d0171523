#ifndef APLICUR_CUR_HPP
#define APLICUR_CUR_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "aplicur/dense_factor.hpp"
#include "aplicur/error.hpp"
#include "aplicur/matrix.hpp"
#include "aplicur/rng.hpp"
#include "aplicur/sketch.hpp"

namespace aplicur {

/// Non-owning view of the matrix a CUR approximation targets: either a plain
/// matrix or the augmented stack [A; mu I].
class CurTarget {
 public:
  explicit CurTarget(const Matrix& a) : a_(&a) {}
  explicit CurTarget(const AugmentedOperator& aug) : aug_(&aug) {}

  Index rows() const { return aug_ ? aug_->rows() : a_->rows(); }
  Index cols() const { return aug_ ? aug_->cols() : a_->cols(); }
  bool is_sparse() const { return aug_ ? aug_->base().is_sparse() : a_->is_sparse(); }
  bool is_augmented() const { return aug_ != nullptr; }

  Matrix extract_cols(std::span<const Index> j) const {
    return aug_ ? aug_->extract_cols(j) : extract(*a_, all, j);
  }
  Matrix extract_rows(std::span<const Index> i) const {
    return aug_ ? aug_->extract_rows(i) : extract(*a_, i, all);
  }
  Matrix extract_block(std::span<const Index> i, std::span<const Index> j) const {
    return aug_ ? aug_->extract_block(i, j) : extract(*a_, i, j).to_dense();
  }
  Matrix sketch(const SparseSignEmbedding& s) const {
    return aug_ ? s.apply_to_augmented(*aug_) : s.apply(*a_);
  }

 private:
  const Matrix* a_ = nullptr;
  const AugmentedOperator* aug_ = nullptr;
};

enum class CoreFactorKind { qr, lu };

/// Factorization of the intersection block A(I, J) used to apply the core
/// U = A(I,J)^{-1} of a cross approximation without forming a pseudoinverse.
class CoreFactor {
 public:
  CoreFactor() = default;

  /// Factorize a dense square block; reports a singular block when the
  /// diagonal ratio of the triangular factor collapses below 1e-14.
  static CoreFactor build(const Matrix& block, CoreFactorKind kind) {
    Index l = block.rows();
    detail::require(block.cols() == l && l >= 1, ErrorKind::invalid_argument,
                    "CoreFactor: square nonempty block required");
    CoreFactor f;
    f.l_ = l;
    f.kind_ = kind;
    if (kind == CoreFactorKind::qr) {
      f.qr_ = detail::householder_qr(l, l, detail::dense_buffer(block));
      double dmin = std::numeric_limits<double>::infinity(), dmax = 0.0;
      for (Index j = 0; j < l; ++j) {
        double d = std::fabs(f.qr_.a[static_cast<std::size_t>(j * l + j)]);
        dmin = std::min(dmin, d);
        dmax = std::max(dmax, d);
      }
      if (!(dmin > 1e-14 * dmax))
        detail::fail(ErrorKind::singular, "CoreFactor: intersection block numerically singular");
    } else {
      // LU with partial pivoting, factors kept in place
      f.lu_ = detail::dense_buffer(block);
      f.perm_.resize(static_cast<std::size_t>(l));
      for (Index i = 0; i < l; ++i) f.perm_[static_cast<std::size_t>(i)] = i;
      double dmax = 0.0, dmin = std::numeric_limits<double>::infinity();
      for (Index k = 0; k < l; ++k) {
        Index best = k;
        double best_mag = -1.0;
        for (Index i = k; i < l; ++i) {
          double mag = std::fabs(f.lu_[static_cast<std::size_t>(k * l + i)]);
          if (mag > best_mag) {
            best_mag = mag;
            best = i;
          }
        }
        if (best != k) {
          for (Index j = 0; j < l; ++j)
            std::swap(f.lu_[static_cast<std::size_t>(j * l + k)],
                      f.lu_[static_cast<std::size_t>(j * l + best)]);
          std::swap(f.perm_[static_cast<std::size_t>(k)], f.perm_[static_cast<std::size_t>(best)]);
        }
        double piv = f.lu_[static_cast<std::size_t>(k * l + k)];
        dmax = std::max(dmax, std::fabs(piv));
        dmin = std::min(dmin, std::fabs(piv));
        if (piv == 0.0)
          detail::fail(ErrorKind::singular, "CoreFactor: intersection block numerically singular");
        for (Index i = k + 1; i < l; ++i) {
          double fac = f.lu_[static_cast<std::size_t>(k * l + i)] / piv;
          f.lu_[static_cast<std::size_t>(k * l + i)] = fac;
          for (Index j = k + 1; j < l; ++j)
            f.lu_[static_cast<std::size_t>(j * l + i)] -= fac * f.lu_[static_cast<std::size_t>(j * l + k)];
        }
      }
      if (!(dmin > 1e-14 * dmax))
        detail::fail(ErrorKind::singular, "CoreFactor: intersection block numerically singular");
    }
    return f;
  }

  Index size() const { return l_; }

  /// x <- A(I,J)^{-1} x
  void solve(std::span<double> x) const {
    if (kind_ == CoreFactorKind::qr) {
      std::vector<double> y(x.begin(), x.end());
      detail::apply_q_transpose(qr_, y);
      for (Index i = l_ - 1; i >= 0; --i) {
        double s = y[static_cast<std::size_t>(i)];
        for (Index j = i + 1; j < l_; ++j)
          s -= qr_.a[static_cast<std::size_t>(j * l_ + i)] * y[static_cast<std::size_t>(j)];
        y[static_cast<std::size_t>(i)] = s / qr_.a[static_cast<std::size_t>(i * l_ + i)];
      }
      std::copy(y.begin(), y.end(), x.begin());
    } else {
      std::vector<double> y(static_cast<std::size_t>(l_));
      for (Index i = 0; i < l_; ++i)
        y[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(perm_[static_cast<std::size_t>(i)])];
      for (Index i = 1; i < l_; ++i)
        for (Index j = 0; j < i; ++j)
          y[static_cast<std::size_t>(i)] -= lu_[static_cast<std::size_t>(j * l_ + i)] * y[static_cast<std::size_t>(j)];
      for (Index i = l_ - 1; i >= 0; --i) {
        for (Index j = i + 1; j < l_; ++j)
          y[static_cast<std::size_t>(i)] -= lu_[static_cast<std::size_t>(j * l_ + i)] * y[static_cast<std::size_t>(j)];
        y[static_cast<std::size_t>(i)] /= lu_[static_cast<std::size_t>(i * l_ + i)];
      }
      std::copy(y.begin(), y.end(), x.begin());
    }
  }

  /// x <- A(I,J)^{-T} x
  void solve_transpose(std::span<double> x) const {
    if (kind_ == CoreFactorKind::qr) {
      std::vector<double> y(x.begin(), x.end());
      for (Index i = 0; i < l_; ++i) {
        double s = y[static_cast<std::size_t>(i)];
        for (Index j = 0; j < i; ++j)
          s -= qr_.a[static_cast<std::size_t>(i * l_ + j)] * y[static_cast<std::size_t>(j)];
        y[static_cast<std::size_t>(i)] = s / qr_.a[static_cast<std::size_t>(i * l_ + i)];
      }
      detail::apply_q(qr_, y);
      std::copy(y.begin(), y.end(), x.begin());
    } else {
      // (P^T L U)^{-T} x = P^T L^{-T} U^{-T} x
      std::vector<double> y(x.begin(), x.end());
      for (Index i = 0; i < l_; ++i) {
        for (Index j = 0; j < i; ++j)
          y[static_cast<std::size_t>(i)] -= lu_[static_cast<std::size_t>(i * l_ + j)] * y[static_cast<std::size_t>(j)];
        y[static_cast<std::size_t>(i)] /= lu_[static_cast<std::size_t>(i * l_ + i)];
      }
      for (Index i = l_ - 1; i >= 0; --i)
        for (Index j = i + 1; j < l_; ++j)
          y[static_cast<std::size_t>(i)] -= lu_[static_cast<std::size_t>(i * l_ + j)] * y[static_cast<std::size_t>(j)];
      for (Index i = 0; i < l_; ++i)
        x[static_cast<std::size_t>(perm_[static_cast<std::size_t>(i)])] = y[static_cast<std::size_t>(i)];
    }
  }

  /// X = A(I,J)^{-1} B, column by column.
  Matrix solve_matrix(const Matrix& b) const {
    detail::require(b.rows() == l_, ErrorKind::dimension_mismatch, "CoreFactor: shape mismatch");
    std::vector<double> x = detail::dense_buffer(b);
    for (Index j = 0; j < b.cols(); ++j)
      solve(std::span<double>(x.data() + j * l_, static_cast<std::size_t>(l_)));
    return Matrix::dense(l_, b.cols(), std::move(x));
  }

  Matrix solve_matrix_transpose(const Matrix& b) const {
    detail::require(b.rows() == l_, ErrorKind::dimension_mismatch, "CoreFactor: shape mismatch");
    std::vector<double> x = detail::dense_buffer(b);
    for (Index j = 0; j < b.cols(); ++j)
      solve_transpose(std::span<double>(x.data() + j * l_, static_cast<std::size_t>(l_)));
    return Matrix::dense(l_, b.cols(), std::move(x));
  }

 private:
  Index l_ = 0;
  CoreFactorKind kind_ = CoreFactorKind::qr;
  detail::HouseholderQr qr_;
  std::vector<double> lu_;
  std::vector<Index> perm_;
};

struct AugmentOutcome {
  Index added = 0;
  bool exhausted = false; // fewer admissible pivots than requested remained
};

/// Single-sketch rank-adaptive cross approximation. The sketch Y = S * target
/// is computed exactly once at init; every later rank increase reuses it, and
/// sketched columns S*C are read out of Y rather than recomputed.
class CurState {
 public:
  static CurState init(CurTarget target, Index block, std::uint64_t seed, Index xi = 8,
                       Index probe_count = 10, CoreFactorKind core_kind = CoreFactorKind::qr) {
    detail::require(block >= 1, ErrorKind::invalid_argument, "CurState: block size must be >= 1");
    detail::require(block <= target.cols(), ErrorKind::invalid_argument,
                    "CurState: block size exceeds column count");
    CurState st(std::move(target));
    st.block_ = block;
    st.probe_count_ = probe_count;
    st.core_kind_ = core_kind;
    st.probe_rng_ = Rng(seed, RngStream::probes);
    Index s = static_cast<Index>(std::ceil(1.1 * static_cast<double>(block)));
    st.embedding_.emplace(s, st.target_.rows(), xi, detail::mix64(seed ^ 0x5ce7c3a1b2d4f688ULL));
    st.y_ = st.target_.sketch(*st.embedding_);
    ++st.sketch_applications_;
    st.eres_ = st.y_;
    st.ztol_ = 1e-14 * st.y_.frob_norm();
    return st;
  }

  Index rank() const { return static_cast<Index>(i_.size()); }
  Index block_size() const { return block_; }
  const IndexList& row_indices() const { return i_; }
  const IndexList& col_indices() const { return j_; }
  double rho() const { return rho_; }
  const Matrix& sketch_matrix() const { return y_; }
  const Matrix& sketch_residual() const { return eres_; }
  const SparseSignEmbedding& embedding() const { return *embedding_; }
  const Matrix& c() const { return c_; }
  const Matrix& r() const { return r_; }
  const Matrix& intersection() const { return block_mat_; }
  const CoreFactor& core() const { return core_; }
  const CurTarget& target() const { return target_; }
  std::uint64_t sketch_applications() const { return sketch_applications_; }
  const std::vector<double>& rho_history() const { return rho_history_; }

  /// Grow the index sets by up to the block size using pivoted selection on
  /// the sketched residual: LUPP over (E^row)^T picks new columns, LUPP over
  /// the column residual picks matching rows. Previously selected indices are
  /// zeroed out first so they cannot repeat.
  AugmentOutcome augment() {
    Index want = block_;
    Index room = std::min(target_.rows(), target_.cols()) - rank();
    detail::require(room > 0, ErrorKind::invalid_argument, "CurState::augment: rank at capacity");
    want = std::min(want, room);

    Matrix ez = eres_;
    {
      std::vector<double> buf = detail::dense_buffer(ez);
      for (Index j : j_)
        for (Index i = 0; i < ez.rows(); ++i) buf[static_cast<std::size_t>(j * ez.rows() + i)] = 0.0;
      ez = Matrix::dense(ez.rows(), ez.cols(), std::move(buf));
    }
    PivotOrder col_piv = lu_partial_pivot(ez.transpose(), want);
    IndexList jplus = admissible(col_piv, want);
    if (jplus.empty()) {
      if (rank() == 0) refresh_rho_only();
      return {0, true};
    }

    Matrix ecol = target_.extract_cols(jplus).to_dense();
    if (rank() > 0) {
      Matrix rj = extract(r_, all, jplus).to_dense(); // R(:, J+)
      Matrix urj = core_.solve_matrix(rj);
      Matrix curj = matmul(c_, urj);
      std::vector<double> buf = detail::dense_buffer(ecol);
      auto cd = curj.dense_data();
      for (std::size_t k = 0; k < buf.size(); ++k) buf[k] -= cd[k];
      ecol = Matrix::dense(ecol.rows(), ecol.cols(), std::move(buf));
    }
    {
      std::vector<double> buf = detail::dense_buffer(ecol);
      for (Index i : i_)
        for (Index j = 0; j < ecol.cols(); ++j) buf[static_cast<std::size_t>(j * ecol.rows() + i)] = 0.0;
      ecol = Matrix::dense(ecol.rows(), ecol.cols(), std::move(buf));
    }
    PivotOrder row_piv = lu_partial_pivot(ecol, static_cast<Index>(jplus.size()));
    IndexList iplus = admissible(row_piv, static_cast<Index>(jplus.size()));
    if (iplus.empty()) return {0, true};
    bool exhausted = static_cast<Index>(iplus.size()) < want;
    jplus.resize(iplus.size()); // keep |I| == |J|

    i_.insert(i_.end(), iplus.begin(), iplus.end());
    j_.insert(j_.end(), jplus.begin(), jplus.end());
    last_added_ = static_cast<Index>(iplus.size());
    return {last_added_, exhausted};
  }

  /// Refactor the intersection block and bring the sketched residual and its
  /// spectral estimate in line with the current index sets.
  void refresh() {
    detail::require(rank() > 0, ErrorKind::invalid_argument, "CurState::refresh: empty index sets");
    block_mat_ = target_.extract_block(i_, j_);
    core_ = CoreFactor::build(block_mat_, core_kind_);
    c_ = target_.extract_cols(j_);
    r_ = target_.extract_rows(i_);

    // E^row = Y - (S C) (U R); S C is the column subset Y(:, J)
    Matrix sc = extract(y_, all, j_);
    Matrix h = core_.solve_matrix(r_.to_dense()); // U R, l x n
    Matrix low = matmul(sc, h);
    std::vector<double> buf = detail::dense_buffer(y_);
    auto ld = low.dense_data();
    for (std::size_t k = 0; k < buf.size(); ++k) buf[k] -= ld[k];
    eres_ = Matrix::dense(y_.rows(), y_.cols(), std::move(buf));
    rho_ = spectral_norm_estimate(eres_, probe_count_, probe_rng_);
    rho_history_.push_back(rho_);
  }

  /// v -> C U (R v) without materializing the approximation.
  void apply(std::span<const double> v, std::span<double> out) const {
    detail::require(rank() > 0, ErrorKind::invalid_argument, "CurState::apply: empty approximation");
    std::vector<double> rv(static_cast<std::size_t>(rank()));
    r_.matvec(v, rv);
    core_.solve(rv);
    c_.matvec(rv, out);
  }

  Index last_added() const { return last_added_; }

  /// Drop the indices appended by the most recent augment; factors from the
  /// preceding refresh stay valid for the shrunk sets.
  void rollback_last_augment() {
    detail::require(last_added_ > 0 && last_added_ <= rank(), ErrorKind::invalid_argument,
                    "CurState::rollback_last_augment: nothing to roll back");
    i_.resize(i_.size() - static_cast<std::size_t>(last_added_));
    j_.resize(j_.size() - static_cast<std::size_t>(last_added_));
    last_added_ = 0;
  }

 private:
  explicit CurState(CurTarget target) : target_(std::move(target)), probe_rng_(0) {}

  IndexList admissible(const PivotOrder& piv, Index cap) const {
    IndexList out;
    for (std::size_t k = 0; k < piv.order.size() && static_cast<Index>(out.size()) < cap; ++k) {
      if (piv.magnitudes[k] <= ztol_) break;
      out.push_back(piv.order[k]);
    }
    return out;
  }

  void refresh_rho_only() {
    rho_ = spectral_norm_estimate(eres_, probe_count_, probe_rng_);
    rho_history_.push_back(rho_);
  }

  CurTarget target_;
  Index block_ = 0;
  Index probe_count_ = 10;
  CoreFactorKind core_kind_ = CoreFactorKind::qr;
  std::optional<SparseSignEmbedding> embedding_;
  Matrix y_;    // S * target, computed once
  Matrix eres_; // sketched residual
  Matrix c_, r_, block_mat_;
  CoreFactor core_;
  IndexList i_, j_;
  double rho_ = std::numeric_limits<double>::infinity();
  double ztol_ = 0.0;
  Index last_added_ = 0;
  Rng probe_rng_;
  std::uint64_t sketch_applications_ = 0;
  std::vector<double> rho_history_;
};

struct FixedCur {
  Matrix c, r;
  IndexList i, j;
  Matrix intersection;
  CoreFactor core;
};

/// One-shot sketched cross approximation at a fixed target rank: LUPP over
/// (S A)^T selects columns, LUPP over those columns selects rows.
inline FixedCur fixed_rank_cur(const Matrix& a, Index l, std::uint64_t seed, Index xi = 8,
                               CoreFactorKind core_kind = CoreFactorKind::qr) {
  detail::require(l >= 1 && l <= std::min(a.rows(), a.cols()), ErrorKind::invalid_argument,
                  "fixed_rank_cur: invalid target rank");
  Index s = std::max<Index>(l, static_cast<Index>(std::floor(1.1 * static_cast<double>(l))));
  SparseSignEmbedding emb(s, a.rows(), xi, detail::mix64(seed ^ 0x5ce7c3a1b2d4f688ULL));
  Matrix y = emb.apply(a);
  PivotOrder col_piv = lu_partial_pivot(y.transpose(), l);
  FixedCur f;
  f.j.assign(col_piv.order.begin(), col_piv.order.end());
  f.c = extract(a, all, f.j);
  PivotOrder row_piv = lu_partial_pivot(f.c.to_dense(), l);
  f.i.assign(row_piv.order.begin(), row_piv.order.end());
  f.r = extract(a, f.i, all);
  f.intersection = extract(a, f.i, f.j).to_dense();
  f.core = CoreFactor::build(f.intersection, core_kind);
  return f;
}

/// v -> C U (R v) for any cross approximation triple.
inline void cur_apply(const Matrix& c, const CoreFactor& core, const Matrix& r,
                      std::span<const double> v, std::span<double> out) {
  std::vector<double> rv(static_cast<std::size_t>(r.rows()));
  r.matvec(v, rv);
  core.solve(rv);
  c.matvec(rv, out);
}

} // namespace aplicur

#endif
