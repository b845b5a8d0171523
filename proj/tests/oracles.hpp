#ifndef APLICUR_TESTS_ORACLES_HPP
#define APLICUR_TESTS_ORACLES_HPP

// Test-side reference implementations, kept independent of the library code
// paths they are used to check.

#include <algorithm>
#include <cmath>
#include <vector>

#include "aplicur/matrix.hpp"
#include "aplicur/rng.hpp"

namespace oracles {

using aplicur::Index;
using aplicur::Matrix;

inline std::vector<double> densify(const Matrix& a) {
  std::vector<double> v(static_cast<std::size_t>(a.rows() * a.cols()));
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i) v[static_cast<std::size_t>(j * a.rows() + i)] = a(i, j);
  return v;
}

inline double frob_diff(const Matrix& a, const Matrix& b) {
  std::vector<double> va = densify(a), vb = densify(b);
  double s = 0.0;
  for (std::size_t k = 0; k < va.size(); ++k) s += (va[k] - vb[k]) * (va[k] - vb[k]);
  return std::sqrt(s);
}

inline double frob(const Matrix& a) {
  std::vector<double> v = densify(a);
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Straightforward elimination that explicitly scans for the max-|entry| row
// at each step (ties to the lowest original row index), recording pivots.
inline std::vector<Index> naive_lupp_order(const Matrix& m, Index steps) {
  Index rows = m.rows(), cols = m.cols();
  std::vector<double> w = densify(m);
  std::vector<bool> used(static_cast<std::size_t>(rows), false);
  std::vector<Index> order;
  for (Index k = 0; k < steps && k < std::min(rows, cols); ++k) {
    Index best = -1;
    double best_mag = -1.0;
    for (Index i = 0; i < rows; ++i) {
      if (used[static_cast<std::size_t>(i)]) continue;
      double mag = std::fabs(w[static_cast<std::size_t>(k * rows + i)]);
      if (mag > best_mag) {
        best_mag = mag;
        best = i;
      }
    }
    used[static_cast<std::size_t>(best)] = true;
    order.push_back(best);
    double piv = w[static_cast<std::size_t>(k * rows + best)];
    if (piv == 0.0) continue;
    for (Index i = 0; i < rows; ++i) {
      if (used[static_cast<std::size_t>(i)]) continue;
      double f = w[static_cast<std::size_t>(k * rows + i)] / piv;
      if (f == 0.0) continue;
      for (Index j = k; j < cols; ++j)
        w[static_cast<std::size_t>(j * rows + i)] -= f * w[static_cast<std::size_t>(j * rows + best)];
    }
  }
  return order;
}

inline Matrix random_dense(Index m, Index n, std::uint64_t seed) {
  aplicur::Rng rng(seed);
  std::vector<double> v(static_cast<std::size_t>(m * n));
  for (auto& x : v) x = rng.gaussian();
  return Matrix::dense(m, n, std::move(v));
}

inline Matrix random_sparse(Index m, Index n, double density, std::uint64_t seed) {
  aplicur::Rng rng(seed);
  std::vector<aplicur::Triplet> trips;
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < m; ++i)
      if (rng.uniform() < density) trips.push_back({i, j, rng.gaussian()});
  return Matrix::sparse(m, n, std::move(trips));
}

inline std::vector<double> random_vec(Index n, std::uint64_t seed) {
  aplicur::Rng rng(seed);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = rng.gaussian();
  return v;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

// Dense matrix with prescribed singular values from seeded orthogonal factors
// (built by plain Gram-Schmidt here, not the library's QR).
inline Matrix with_spectrum(Index m, Index n, std::span<const double> sigma, std::uint64_t seed,
                            Matrix* u_out = nullptr, Matrix* v_out = nullptr) {
  auto orthonormalize = [](std::vector<std::vector<double>>& cols) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      for (int pass = 0; pass < 2; ++pass)
        for (std::size_t k = 0; k < j; ++k) {
          double d = dot(cols[j], cols[k]);
          for (std::size_t i = 0; i < cols[j].size(); ++i) cols[j][i] -= d * cols[k][i];
        }
      double nrm = norm(cols[j]);
      for (auto& x : cols[j]) x /= nrm;
    }
  };
  aplicur::Rng rng(seed);
  std::vector<std::vector<double>> ucols(static_cast<std::size_t>(n)),
      vcols(static_cast<std::size_t>(n));
  for (auto& c : ucols) {
    c.resize(static_cast<std::size_t>(m));
    for (auto& x : c) x = rng.gaussian();
  }
  for (auto& c : vcols) {
    c.resize(static_cast<std::size_t>(n));
    for (auto& x : c) x = rng.gaussian();
  }
  orthonormalize(ucols);
  orthonormalize(vcols);
  std::vector<double> a(static_cast<std::size_t>(m * n), 0.0);
  for (Index k = 0; k < n; ++k)
    for (Index j = 0; j < n; ++j) {
      double svk = sigma[static_cast<std::size_t>(k)] * vcols[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
      if (svk == 0.0) continue;
      for (Index i = 0; i < m; ++i)
        a[static_cast<std::size_t>(j * m + i)] += ucols[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] * svk;
    }
  if (u_out) {
    std::vector<double> ub(static_cast<std::size_t>(m * n));
    for (Index k = 0; k < n; ++k)
      std::copy(ucols[static_cast<std::size_t>(k)].begin(), ucols[static_cast<std::size_t>(k)].end(),
                ub.begin() + k * m);
    *u_out = Matrix::dense(m, n, std::move(ub));
  }
  if (v_out) {
    std::vector<double> vb(static_cast<std::size_t>(n * n));
    for (Index k = 0; k < n; ++k)
      std::copy(vcols[static_cast<std::size_t>(k)].begin(), vcols[static_cast<std::size_t>(k)].end(),
                vb.begin() + k * n);
    *v_out = Matrix::dense(n, n, std::move(vb));
  }
  return Matrix::dense(m, n, std::move(a));
}

} // namespace oracles

#endif
