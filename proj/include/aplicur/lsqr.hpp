#ifndef APLICUR_LSQR_HPP
#define APLICUR_LSQR_HPP

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "aplicur/error.hpp"
#include "aplicur/operators.hpp"

namespace aplicur {

enum class StopReason {
  none,
  gradient_tol,   // ||op^T r|| small relative to ||op|| ||r||
  dynamic_rate,   // convergence rate degraded past nu_lsqr
  dynamic_diff,   // phibar decrease fell below the sigma floor
  iteration_cap,
  exact_zero_rhs,
};

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::none: return "none";
    case StopReason::gradient_tol: return "gradient-tol";
    case StopReason::dynamic_rate: return "dynamic-rate";
    case StopReason::dynamic_diff: return "dynamic-diff";
    case StopReason::iteration_cap: return "iteration-cap";
    case StopReason::exact_zero_rhs: return "exact-zero-rhs";
  }
  return "unknown";
}

struct LsqrTraceRow {
  int phase = 0;
  Index iter = 0;          // 0 is the pre-iteration state of a phase
  double phibar = 0.0;     // bidiagonalization residual estimate
  double cvgrate = 0.0;    // log(phibar_{j-1} / phibar_j)
  double cvgdiff = 0.0;    // phibar_{j-1} - phibar_j
  std::uint64_t matvecs = 0;
  double wall_ms = 0.0;
  double true_relres = std::numeric_limits<double>::quiet_NaN(); // sampled by observer
};

struct LsqrTrace {
  std::vector<LsqrTraceRow> rows;
  StopReason reason = StopReason::none;
};

struct StopConfig {
  double eps_lsqr = 1e-10;  // relative gradient tolerance
  double nu_lsqr = std::numeric_limits<double>::infinity(); // rate ratio; +inf disables
  double sigma_floor = 0.0; // cvgdiff floor; 0 disables
  Index max_iters = 0;      // 0 means 4 * cols
};

/// Dynamic phase-stopping predicate on the trace tail: stop once
/// cvgrate_1 / cvgrate_j > nu (rate collapsed) or cvgdiff_j < sigma_floor.
/// A stalled or increasing phibar counts as an infinite rate ratio. The whole
/// rule is deactivated by nu = +inf (final phase).
inline StopReason dynamic_stop_check(double cvgrate1, double cvgrate_j, double cvgdiff_j,
                                     double sigma_floor, double nu) {
  if (std::isinf(nu)) return StopReason::none;
  if (sigma_floor > 0.0 && cvgdiff_j < sigma_floor) return StopReason::dynamic_diff;
  if (cvgrate_j <= 0.0) return StopReason::dynamic_rate;
  if (cvgrate1 / cvgrate_j > nu) return StopReason::dynamic_rate;
  return StopReason::none;
}

struct LsqrResult {
  std::vector<double> y;
  LsqrTrace trace;
};

/// LSQR (Golub-Kahan bidiagonalization) for min ||op y - rhs||, started from
/// y = 0. Standard stopping uses the running estimate of ||op||; the dynamic
/// rule compares the per-iteration convergence rate against the first
/// iteration of this call. An optional observer sees (j, y_j) after each
/// update and must not modify solver state.
inline LsqrResult lsqr_solve(
    const LinearOperator& op, std::span<const double> rhs, const StopConfig& stop,
    int phase = 0,
    const std::function<void(Index, std::span<const double>)>& observer = nullptr) {
  using clock = std::chrono::steady_clock;
  auto t0 = clock::now();
  auto wall_ms = [&t0] {
    return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  };

  Index m = op.rows(), n = op.cols();
  detail::require(static_cast<Index>(rhs.size()) == m, ErrorKind::dimension_mismatch,
                  "lsqr_solve: rhs length mismatch");
  Index cap = stop.max_iters > 0 ? stop.max_iters : 4 * n;
  std::uint64_t mv0 = op.counts().total();

  LsqrResult res;
  res.y.assign(static_cast<std::size_t>(n), 0.0);

  auto norm2 = [](std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  };

  std::vector<double> u(rhs.begin(), rhs.end());
  double beta = norm2(u);
  res.trace.rows.push_back({phase, 0, beta, 0.0, 0.0, 0, wall_ms()});
  if (beta == 0.0) {
    res.trace.reason = StopReason::exact_zero_rhs;
    return res;
  }
  for (auto& x : u) x /= beta;

  std::vector<double> v(static_cast<std::size_t>(n));
  op.apply_transpose(u, v);
  double alpha = norm2(v);
  if (alpha == 0.0) {
    // rhs orthogonal to the range: y = 0 is already optimal
    res.trace.reason = StopReason::gradient_tol;
    return res;
  }
  for (auto& x : v) x /= alpha;

  std::vector<double> w = v;
  std::vector<double> tmp_m(static_cast<std::size_t>(m));
  std::vector<double> tmp_n(static_cast<std::size_t>(n));

  double phibar = beta;
  double rhobar = alpha;
  double opnorm2 = alpha * alpha; // running ||op||_F^2 estimate
  double cvgrate1 = 0.0;

  for (Index j = 1; j <= cap; ++j) {
    // continue the bidiagonalization
    op.apply(v, tmp_m);
    for (Index i = 0; i < m; ++i)
      tmp_m[static_cast<std::size_t>(i)] -= alpha * u[static_cast<std::size_t>(i)];
    u = tmp_m;
    beta = norm2(u);
    if (beta > 0.0)
      for (auto& x : u) x /= beta;

    op.apply_transpose(u, tmp_n);
    for (Index i = 0; i < n; ++i)
      tmp_n[static_cast<std::size_t>(i)] -= beta * v[static_cast<std::size_t>(i)];
    v = tmp_n;
    alpha = norm2(v);
    if (alpha > 0.0)
      for (auto& x : v) x /= alpha;
    opnorm2 += alpha * alpha + beta * beta;

    // plane rotation collapsing the lower bidiagonal
    double rho = std::hypot(rhobar, beta);
    double c = rhobar / rho;
    double s = beta / rho;
    double theta = s * alpha;
    rhobar = -c * alpha;
    double phi = c * phibar;
    double phibar_prev = phibar;
    phibar = s * phibar;

    double t1 = phi / rho;
    double t2 = -theta / rho;
    for (Index i = 0; i < n; ++i) {
      res.y[static_cast<std::size_t>(i)] += t1 * w[static_cast<std::size_t>(i)];
      w[static_cast<std::size_t>(i)] = v[static_cast<std::size_t>(i)] + t2 * w[static_cast<std::size_t>(i)];
    }

    if (!std::isfinite(phibar) || !std::isfinite(alpha) || !std::isfinite(beta))
      detail::fail(ErrorKind::numerical_breakdown, "lsqr_solve: non-finite recurrence");

    double cvgrate = (phibar > 0.0 && phibar_prev > 0.0) ? std::log(phibar_prev / phibar)
                                                         : std::numeric_limits<double>::infinity();
    double cvgdiff = phibar_prev - phibar;
    if (j == 1) cvgrate1 = cvgrate;
    res.trace.rows.push_back({phase, j, phibar, cvgrate, cvgdiff,
                              op.counts().total() - mv0, wall_ms()});
    if (observer) observer(j, res.y);

    // standard criteria: gradient ||op^T r|| = phibar * alpha * |c| relative
    // to the running norm estimate, plus the residual-level test that covers
    // consistent systems driven to machine precision
    double grad = phibar * alpha * std::fabs(c);
    double ynorm = 0.0;
    for (double x : res.y) ynorm += x * x;
    ynorm = std::sqrt(ynorm);
    bool grad_small = grad <= stop.eps_lsqr * std::sqrt(opnorm2) * phibar;
    bool res_small = phibar <= stop.eps_lsqr * (std::sqrt(opnorm2) * ynorm + res.trace.rows[0].phibar);
    if (grad_small || res_small || phibar == 0.0) {
      res.trace.reason = StopReason::gradient_tol;
      return res;
    }
    if (j >= 2) {
      StopReason dyn = dynamic_stop_check(cvgrate1, cvgrate, cvgdiff, stop.sigma_floor, stop.nu_lsqr);
      if (dyn != StopReason::none) {
        res.trace.reason = dyn;
        return res;
      }
    }
  }
  res.trace.reason = StopReason::iteration_cap;
  return res;
}

} // namespace aplicur

#endif
