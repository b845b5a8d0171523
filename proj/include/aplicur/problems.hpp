#ifndef APLICUR_PROBLEMS_HPP
#define APLICUR_PROBLEMS_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "aplicur/dense_factor.hpp"
#include "aplicur/error.hpp"
#include "aplicur/matrix.hpp"
#include "aplicur/rng.hpp"

namespace aplicur {

enum class SpectrumProfile { sharp_1e7, sharp_1e15, smooth_1e15 };

inline const char* to_string(SpectrumProfile p) {
  switch (p) {
    case SpectrumProfile::sharp_1e7: return "sharp-1e7";
    case SpectrumProfile::sharp_1e15: return "sharp-1e15";
    case SpectrumProfile::smooth_1e15: return "smooth-1e15";
  }
  return "unknown";
}

inline std::optional<SpectrumProfile> spectrum_profile_from_string(const std::string& s) {
  if (s == "sharp-1e7") return SpectrumProfile::sharp_1e7;
  if (s == "sharp-1e15") return SpectrumProfile::sharp_1e15;
  if (s == "smooth-1e15") return SpectrumProfile::smooth_1e15;
  return std::nullopt;
}

/// m points spaced logarithmically from 10^a to 10^b (a single point lands on
/// 10^b).
inline std::vector<double> logspace(double a, double b, Index m) {
  detail::require(m >= 1, ErrorKind::invalid_argument, "logspace: m >= 1");
  std::vector<double> v(static_cast<std::size_t>(m));
  if (m == 1) {
    v[0] = std::pow(10.0, b);
    return v;
  }
  for (Index i = 0; i < m; ++i)
    v[static_cast<std::size_t>(i)] =
        std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(m - 1));
  return v;
}

/// Prescribed singular-value profiles. The sharp profiles put the top 20% of
/// the spectrum on a 1e2..1e-2 log grid with a flat faraway tail; the smooth
/// profile decays root-exponentially from 1e2 to 1e-13.
inline std::vector<double> spectrum(SpectrumProfile profile, Index n) {
  detail::require(n >= 5, ErrorKind::invalid_argument, "spectrum: n >= 5 required");
  Index n1 = static_cast<Index>(std::llround(0.2 * static_cast<double>(n)));
  n1 = std::max<Index>(1, std::min(n1, n - 1));
  Index n2 = n - n1;
  std::vector<double> sig;
  sig.reserve(static_cast<std::size_t>(n));
  switch (profile) {
    case SpectrumProfile::sharp_1e7: {
      auto head = logspace(2.0, -2.0, n1);
      auto tail = logspace(-4.8, -5.0, n2);
      sig.insert(sig.end(), head.begin(), head.end());
      sig.insert(sig.end(), tail.begin(), tail.end());
      break;
    }
    case SpectrumProfile::sharp_1e15: {
      auto head = logspace(2.0, -2.0, n1);
      auto tail = logspace(-12.0, -13.0, n2);
      sig.insert(sig.end(), head.begin(), head.end());
      sig.insert(sig.end(), tail.begin(), tail.end());
      break;
    }
    case SpectrumProfile::smooth_1e15: {
      for (Index i = 0; i < n; ++i)
        sig.push_back(std::pow(
            10.0, 2.0 - 15.0 * std::sqrt(static_cast<double>(i) / static_cast<double>(n - 1))));
      break;
    }
  }
  return sig;
}

enum class Coherence { incoherent, coherent };

namespace detail {

inline Matrix gaussian_dense(Index m, Index n, Rng& rng) {
  std::vector<double> v(static_cast<std::size_t>(m * n));
  for (auto& x : v) x = rng.gaussian();
  return Matrix::dense(m, n, std::move(v));
}

// Orthonormal basis of the column space via thin QR; the nonnegative-diagonal
// convention makes Gaussian inputs Haar distributed.
inline Matrix orth_qr(const Matrix& a) { return thin_qr(a.to_dense()).q; }

} // namespace detail

/// Dense test matrix A = U diag(sigma) V^T with prescribed singular values.
/// Incoherent factors are Haar; coherent ones orthonormalize a perturbed
/// identity stack so the leading rows carry all the weight.
inline Matrix dense_matrix(Index m, Index n, std::span<const double> sigma, Coherence coh,
                           std::uint64_t seed) {
  detail::require(m >= n && static_cast<Index>(sigma.size()) == n, ErrorKind::invalid_argument,
                  "dense_matrix: need m >= n = |sigma|");
  Rng rng(seed, RngStream::problem);
  Matrix u, v;
  if (coh == Coherence::incoherent) {
    u = detail::orth_qr(detail::gaussian_dense(m, n, rng));
    v = detail::orth_qr(detail::gaussian_dense(n, n, rng));
  } else {
    std::vector<double> ub(static_cast<std::size_t>(m * n), 1e-8);
    for (Index j = 0; j < n; ++j) ub[static_cast<std::size_t>(j * m + j)] += 1.0;
    std::vector<double> vb(static_cast<std::size_t>(n * n), 1e-8);
    for (Index j = 0; j < n; ++j) vb[static_cast<std::size_t>(j * n + j)] += 1.0;
    u = detail::orth_qr(Matrix::dense(m, n, std::move(ub)));
    v = detail::orth_qr(Matrix::dense(n, n, std::move(vb)));
  }
  // A = (U diag(sigma)) V^T
  std::vector<double> us = aplicur::detail::dense_buffer(u);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < m; ++i) us[static_cast<std::size_t>(j * m + i)] *= sigma[static_cast<std::size_t>(j)];
  return matmul(Matrix::dense(m, n, std::move(us)), v.transpose());
}

/// Sparse test matrix: a random sparse normal pattern, rows amplified by a
/// diagonal Gaussian raised to the coherency factor f, columns normalized,
/// then scaled by the prescribed singular values.
inline Matrix sparse_matrix(Index m, Index n, std::span<const double> sigma, int f, double density,
                            std::uint64_t seed) {
  detail::require(static_cast<Index>(sigma.size()) == n, ErrorKind::invalid_argument,
                  "sparse_matrix: |sigma| must equal n");
  detail::require(density > 0.0 && density <= 1.0, ErrorKind::invalid_argument,
                  "sparse_matrix: density in (0, 1]");
  Rng rng(seed, RngStream::problem);
  std::vector<double> dscale(static_cast<std::size_t>(m));
  for (auto& d : dscale) d = rng.gaussian();

  std::vector<Triplet> trips;
  const int max_redraws = 100;
  for (Index j = 0; j < n; ++j) {
    std::vector<Triplet> col;
    int attempts = 0;
    while (col.empty()) {
      detail::require(attempts++ < max_redraws, ErrorKind::invalid_argument,
                      "sparse_matrix: column stayed empty after redraws", j);
      for (Index i = 0; i < m; ++i)
        if (rng.uniform() < density) col.push_back({i, j, rng.gaussian()});
    }
    double norm2 = 0.0;
    for (auto& t : col) {
      double rowscale = (f == 0) ? 1.0 : std::pow(dscale[static_cast<std::size_t>(t.row)],
                                                  static_cast<double>(f));
      t.value *= rowscale;
      norm2 += t.value * t.value;
    }
    double inv = sigma[static_cast<std::size_t>(j)] / std::sqrt(norm2);
    for (auto& t : col) t.value *= inv;
    trips.insert(trips.end(), col.begin(), col.end());
  }
  return Matrix::sparse(m, n, std::move(trips));
}

struct ConsistentX {
  std::vector<double> b;
  std::vector<double> x_star;
  std::vector<double> noise;
};

/// Right-hand side with a known minimizer: b = A x* + e where the noise e is
/// projected out of range(A) twice and rescaled to the requested norm, so the
/// optimal residual equals eta exactly.
inline ConsistentX rhs_consistent_x(const Matrix& a, double eta, std::uint64_t seed) {
  detail::require(eta >= 0.0, ErrorKind::invalid_argument, "rhs_consistent_x: eta >= 0");
  Index m = a.rows(), n = a.cols();
  Rng rng(seed, RngStream::rhs);
  ConsistentX out;
  out.x_star.resize(static_cast<std::size_t>(n));
  for (auto& x : out.x_star) x = rng.gaussian();
  out.b.resize(static_cast<std::size_t>(m));
  a.matvec(out.x_star, out.b);
  out.noise.assign(static_cast<std::size_t>(m), 0.0);
  if (eta > 0.0) {
    std::vector<double> e(static_cast<std::size_t>(m));
    for (auto& x : e) x = rng.gaussian();
    detail::HouseholderQr qr =
        detail::householder_qr(m, n, detail::dense_buffer(a.to_dense()));
    // twice-orthogonalized projection onto the complement of range(A)
    for (int pass = 0; pass < 2; ++pass) {
      detail::apply_q_transpose(qr, e);
      for (Index i = 0; i < std::min(m, n); ++i) e[static_cast<std::size_t>(i)] = 0.0;
      detail::apply_q(qr, e);
    }
    double norm = 0.0;
    for (double x : e) norm += x * x;
    norm = std::sqrt(norm);
    detail::require(norm > 1e-12, ErrorKind::invalid_argument,
                    "rhs_consistent_x: no orthogonal complement to place noise in");
    for (std::size_t i = 0; i < e.size(); ++i) {
      out.noise[i] = e[i] * (eta / norm);
      out.b[i] += out.noise[i];
    }
  }
  return out;
}

/// Right-hand side sampled from the column space: b = orth(A) g.
inline std::vector<double> rhs_consistent_b(const Matrix& a, std::uint64_t seed) {
  Matrix basis = orth(a.to_dense());
  Rng rng(seed, RngStream::rhs);
  std::vector<double> g(static_cast<std::size_t>(basis.cols()));
  for (auto& x : g) x = rng.gaussian();
  std::vector<double> b(static_cast<std::size_t>(a.rows()));
  basis.matvec(g, b);
  return b;
}

/// Coherence nu(A) = max_i ||U_i||_2 over rows of the left singular factor
/// (rank-truncated). Dense desk scale.
inline double coherence(const Matrix& a) {
  Svd s = small_svd(a.to_dense());
  Index m = a.rows(), n = a.cols();
  double tol = static_cast<double>(std::max(m, n)) * std::numeric_limits<double>::epsilon() *
               (s.sigma.empty() ? 0.0 : s.sigma[0]);
  Index r = 0;
  while (r < static_cast<Index>(s.sigma.size()) && s.sigma[static_cast<std::size_t>(r)] > tol) ++r;
  auto u = s.u.dense_data();
  double best = 0.0;
  for (Index i = 0; i < m; ++i) {
    double row2 = 0.0;
    for (Index j = 0; j < r; ++j) {
      double x = u[static_cast<std::size_t>(j * m + i)];
      row2 += x * x;
    }
    best = std::max(best, row2);
  }
  return std::sqrt(best);
}

struct ProblemMetadata {
  std::optional<std::vector<double>> x_star;
  double noise_norm = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> opt_relres_unreg; // min ||A x - b|| / ||b||
  std::optional<double> opt_relres_reg;   // min ||[A; mu I] x - [b; 0]|| / ||b||
  std::optional<double> coherence;
};

struct ProblemInstance {
  Matrix a;
  std::vector<double> b;
  double mu = 0.0;
  ProblemMetadata meta;
};

inline double vec_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

/// Residual norms the solvers are judged against, by dense QR least squares.
/// The regularized value minimizes the augmented stack; both are relative to
/// ||b||.
inline void compute_oracle_residuals(ProblemInstance& p) {
  Index m = p.a.rows(), n = p.a.cols();
  double bnorm = vec_norm(p.b);
  detail::require(bnorm > 0.0, ErrorKind::invalid_argument, "oracle: zero right-hand side");
  Matrix ad = p.a.to_dense();
  {
    std::vector<double> x = dense_lstsq(ad, p.b);
    std::vector<double> r(static_cast<std::size_t>(m));
    p.a.matvec(x, r);
    for (Index i = 0; i < m; ++i) r[static_cast<std::size_t>(i)] -= p.b[static_cast<std::size_t>(i)];
    p.meta.opt_relres_unreg = vec_norm(r) / bnorm;
  }
  if (p.mu > 0.0) {
    AugmentedOperator aug(p.a, p.mu);
    std::vector<double> stacked(static_cast<std::size_t>((m + n) * n), 0.0);
    auto add = ad.dense_data();
    for (Index j = 0; j < n; ++j) {
      for (Index i = 0; i < m; ++i)
        stacked[static_cast<std::size_t>(j * (m + n) + i)] = add[static_cast<std::size_t>(j * m + i)];
      stacked[static_cast<std::size_t>(j * (m + n) + m + j)] = p.mu;
    }
    std::vector<double> baug(static_cast<std::size_t>(m + n), 0.0);
    std::copy(p.b.begin(), p.b.end(), baug.begin());
    std::vector<double> x = dense_lstsq(Matrix::dense(m + n, n, std::move(stacked)), baug);
    std::vector<double> r(static_cast<std::size_t>(m + n));
    aug.matvec(x, r);
    for (Index i = 0; i < m + n; ++i) r[static_cast<std::size_t>(i)] -= baug[static_cast<std::size_t>(i)];
    p.meta.opt_relres_reg = vec_norm(r) / bnorm;
  } else {
    p.meta.opt_relres_reg = p.meta.opt_relres_unreg;
  }
}

} // namespace aplicur

#endif
