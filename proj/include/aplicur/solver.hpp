#ifndef APLICUR_SOLVER_HPP
#define APLICUR_SOLVER_HPP

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "aplicur/cur.hpp"
#include "aplicur/error.hpp"
#include "aplicur/lsqr.hpp"
#include "aplicur/operators.hpp"
#include "aplicur/preconditioner.hpp"
#include "aplicur/problems.hpp"

namespace aplicur {

enum class PrecondVariant { svd, svd_free };

inline const char* to_string(PrecondVariant v) {
  return v == PrecondVariant::svd ? "svd" : "svd-free";
}

struct SolverConfig {
  Index block = 0;       // 0: max(1, round(n / 50))
  double eps_cur = -1.0; // < 0: 30 * mu
  double eps_lsqr = 1e-10;
  double nu_prec = 10.0;
  double nu_lsqr = 100.0;
  double mu = 0.0;
  PrecondVariant variant = PrecondVariant::svd;
  Index sketch_xi = 8;
  Index probe_count = 10;
  Index lsqr_cap = 0; // 0: 4 * n per phase
  Index max_rank = 0; // 0: min of target dimensions
  std::uint64_t seed = 0;
  CoreFactorKind core = CoreFactorKind::qr;
  Index trace_sample_stride = 1; // true-residual sampling; 0 disables
  Index outer_cap = 100000;

  /// Fill the size- and mu-dependent defaults for a given problem.
  SolverConfig resolved(Index n) const {
    SolverConfig c = *this;
    if (c.block <= 0) c.block = std::max<Index>(1, static_cast<Index>(std::llround(static_cast<double>(n) / 50.0)));
    c.block = std::min(c.block, n);
    if (c.eps_cur < 0.0) c.eps_cur = 30.0 * c.mu;
    return c;
  }

  void validate() const {
    detail::require(mu >= 0.0, ErrorKind::invalid_argument, "SolverConfig: mu >= 0");
    detail::require(nu_prec > 1.0, ErrorKind::invalid_argument, "SolverConfig: nu_prec > 1");
    detail::require(nu_lsqr > 1.0, ErrorKind::invalid_argument, "SolverConfig: nu_lsqr > 1");
    detail::require(eps_lsqr > 0.0, ErrorKind::invalid_argument, "SolverConfig: eps_lsqr > 0");
    detail::require(sketch_xi >= 1 && probe_count >= 1, ErrorKind::invalid_argument,
                    "SolverConfig: sketch parameters must be positive");
  }
};

/// Rebuild trigger: fire when the accuracy gained since the last build is a
/// nu_prec multiple of the remaining gap, or once the tolerance is met. The
/// +inf sentinel (before any build) always fires.
inline bool reprecondition_check(double d_cur, double rho, double eps_cur, double nu_prec) {
  if (rho <= eps_cur) return true;
  if (std::isinf(d_cur)) return true;
  return d_cur / (rho - eps_cur) >= nu_prec;
}

struct PhaseReport {
  int phase = 0;
  Index rank = 0;         // target rank of this phase's preconditioner
  double rho = 0.0;       // spectral-error estimate at rebuild
  double sigma_hat = 0.0; // target level
  double mu = 0.0;
  Index lsqr_iters = 0;
  StopReason reason = StopReason::none;
  double t_augment_ms = 0.0;
  double t_factor_ms = 0.0;
  double t_precond_ms = 0.0;
  double t_lsqr_ms = 0.0;
  double relres_at_end = 0.0; // system relative residual at the phase boundary
  std::vector<double> precond_spectrum; // regularized spectrum (svd variant only)
};

enum class SolveStatus { converged, rank_exhausted, breakdown };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::rank_exhausted: return "rank-exhausted";
    case SolveStatus::breakdown: return "breakdown";
  }
  return "unknown";
}

struct SolveResult {
  std::vector<double> x;
  std::vector<PhaseReport> phases;
  LsqrTrace trace; // rows of all phases concatenated
  SolveStatus status = SolveStatus::converged;
  double final_rho = std::numeric_limits<double>::infinity();
  double final_relres = 0.0;
  std::uint64_t sketch_applications = 0;
  std::uint64_t system_matvecs = 0; // applications of [A; mu I] (or A) over the solve
  IndexList row_indices, col_indices;
  std::vector<double> rho_history;
};

/// Observers for diagnostics; they must not mutate solver state.
struct SolveHooks {
  // after a preconditioner rebuild, before its LSQR phase
  std::function<void(const CurState&, const Preconditioner&, int phase)> on_rebuild;
  // at the end of each phase: (phase, x so far)
  std::function<void(int phase, std::span<const double> x)> on_phase_end;
};

namespace detail {

struct SystemOps {
  Index rows = 0, cols = 0;
  std::function<void(std::span<const double>, std::span<double>)> fwd, adj;
};

// The least-squares system actually iterated on: [A; mu I] when mu > 0,
// A itself otherwise.
inline SystemOps make_system(const Matrix& a, const AugmentedOperator* aug) {
  SystemOps s;
  if (aug) {
    s.rows = aug->rows();
    s.cols = aug->cols();
    s.fwd = [aug](std::span<const double> x, std::span<double> y) { aug->matvec(x, y); };
    s.adj = [aug](std::span<const double> x, std::span<double> y) { aug->matvec_transpose(x, y); };
  } else {
    s.rows = a.rows();
    s.cols = a.cols();
    s.fwd = [&a](std::span<const double> x, std::span<double> y) { a.matvec(x, y); };
    s.adj = [&a](std::span<const double> x, std::span<double> y) { a.matvec_transpose(x, y); };
  }
  return s;
}

inline double system_relres(const SystemOps& sys, std::span<const double> x,
                            std::span<const double> rhs_full, double bnorm) {
  std::vector<double> r(static_cast<std::size_t>(sys.rows));
  sys.fwd(x, r);
  for (Index i = 0; i < sys.rows; ++i) r[static_cast<std::size_t>(i)] -= rhs_full[static_cast<std::size_t>(i)];
  return vec_norm(r) / bnorm;
}

} // namespace detail

/// Adaptive solve: grow a single-sketch cross approximation in blocks,
/// rebuild the spectral preconditioner when the accuracy gain warrants it,
/// and run warm-started right-preconditioned LSQR phases until the
/// approximation meets eps_cur. Rank exhaustion degrades to a final phase
/// and a warning status instead of an error.
inline SolveResult aplicur_solve(const ProblemInstance& problem, const SolverConfig& config_in,
                                 const SolveHooks* hooks = nullptr) {
  using clock = std::chrono::steady_clock;
  const Matrix& a = problem.a;
  Index n = a.cols();
  SolverConfig cfg = config_in.resolved(n);
  cfg.validate();
  detail::require(cfg.block <= n, ErrorKind::invalid_argument, "aplicur_solve: block > cols");

  double mu = cfg.mu;
  std::optional<AugmentedOperator> aug;
  if (mu > 0.0) aug.emplace(a, mu);
  detail::SystemOps sys = detail::make_system(a, aug ? &*aug : nullptr);
  LinearOperator sys_op(sys.rows, sys.cols, sys.fwd, sys.adj);

  std::vector<double> rhs_full(static_cast<std::size_t>(sys.rows), 0.0);
  std::copy(problem.b.begin(), problem.b.end(), rhs_full.begin());
  double bnorm = vec_norm(problem.b);
  detail::require(std::isfinite(bnorm), ErrorKind::invalid_argument,
                  "aplicur_solve: non-finite right-hand side");

  // CUR target: the plain matrix for the svd variant; the regularized stack
  // for the svd-free variant whenever mu > 0.
  bool target_augmented = (cfg.variant == PrecondVariant::svd_free && mu > 0.0);
  CurTarget target = target_augmented ? CurTarget(*aug) : CurTarget(a);
  CurState cur = CurState::init(target, cfg.block, cfg.seed, cfg.sketch_xi, cfg.probe_count, cfg.core);

  Index max_rank = std::min(target.rows(), target.cols());
  if (cfg.max_rank > 0) max_rank = std::min(max_rank, cfg.max_rank);

  bool implicit_mode = target.is_sparse() && a.density() < 0.10;
  QrAccumulator qr_acc;
  CholGramAccumulator chol_acc;
  Matrix t_r_implicit;
  bool chol_ok = true; // incremental appends abandoned after a failure

  SolveResult res;
  res.x.assign(static_cast<std::size_t>(n), 0.0);
  double d_cur = std::numeric_limits<double>::infinity();
  int phase = 0;
  bool done = false;

  auto run_phase = [&](const Preconditioner& p, bool final_phase, double rho_at_build,
                       PhaseReport& rep) {
    auto t0 = clock::now();
    std::vector<double> rhs(static_cast<std::size_t>(sys.rows));
    sys_op.apply(res.x, rhs);
    for (Index i = 0; i < sys.rows; ++i)
      rhs[static_cast<std::size_t>(i)] = rhs_full[static_cast<std::size_t>(i)] - rhs[static_cast<std::size_t>(i)];

    StopConfig stop;
    stop.eps_lsqr = cfg.eps_lsqr;
    stop.nu_lsqr = final_phase ? std::numeric_limits<double>::infinity() : cfg.nu_lsqr;
    stop.max_iters = cfg.lsqr_cap > 0 ? cfg.lsqr_cap : 4 * n;
    if (const auto* sp = dynamic_cast<const SvdPreconditioner*>(&p))
      stop.sigma_floor = sp->smallest_cur_sigma();
    else
      stop.sigma_floor = p.target_level();

    LinearOperator pre_op = right_preconditioned(sys_op, p);
    std::vector<double> sampled;
    std::function<void(Index, std::span<const double>)> obs;
    if (cfg.trace_sample_stride > 0) {
      obs = [&](Index iter, std::span<const double> y) {
        if (iter % cfg.trace_sample_stride != 0) return;
        std::vector<double> xfull(static_cast<std::size_t>(n));
        p.apply_inv(y, xfull);
        for (Index i = 0; i < n; ++i) xfull[static_cast<std::size_t>(i)] += res.x[static_cast<std::size_t>(i)];
        double rr = bnorm > 0.0 ? detail::system_relres(sys, xfull, rhs_full, bnorm) : 0.0;
        if (static_cast<Index>(sampled.size()) <= iter)
          sampled.resize(static_cast<std::size_t>(iter) + 1,
                         std::numeric_limits<double>::quiet_NaN());
        sampled[static_cast<std::size_t>(iter)] = rr;
      };
    }
    LsqrResult lr = lsqr_solve(pre_op, rhs, stop, phase, obs);
    std::vector<double> dx(static_cast<std::size_t>(n));
    p.apply_inv(lr.y, dx);
    for (Index i = 0; i < n; ++i) res.x[static_cast<std::size_t>(i)] += dx[static_cast<std::size_t>(i)];

    for (auto& row : lr.trace.rows) {
      if (row.iter >= 0 && row.iter < static_cast<Index>(sampled.size()))
        row.true_relres = sampled[static_cast<std::size_t>(row.iter)];
      res.trace.rows.push_back(row);
    }
    res.trace.reason = lr.trace.reason;

    rep.phase = phase;
    rep.mu = mu;
    rep.rho = rho_at_build;
    rep.sigma_hat = p.target_level();
    rep.rank = p.rank();
    rep.lsqr_iters = static_cast<Index>(lr.trace.rows.size()) - 1;
    rep.reason = lr.trace.reason;
    rep.t_lsqr_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    rep.relres_at_end =
        bnorm > 0.0 ? detail::system_relres(sys, res.x, rhs_full, bnorm) : 0.0;
    if (const auto* sp = dynamic_cast<const SvdPreconditioner*>(&p))
      rep.precond_spectrum = sp->regularized_spectrum();
    if (hooks && hooks->on_phase_end) hooks->on_phase_end(phase, res.x);
  };

  for (Index outer = 0; outer < cfg.outer_cap && !done; ++outer) {
    PhaseReport rep;
    bool final_phase = false;

    auto t_aug0 = clock::now();
    bool grew = false;
    if (cur.rank() < max_rank) {
      AugmentOutcome out = cur.augment();
      if (out.added > 0) {
        try {
          cur.refresh();
          grew = true;
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::singular) throw;
          cur.rollback_last_augment();
          res.status = SolveStatus::rank_exhausted;
          final_phase = true;
          done = true;
        }
      } else {
        res.status = SolveStatus::rank_exhausted;
        final_phase = true;
        done = true;
      }
    } else {
      if (cur.rho() > cfg.eps_cur) res.status = SolveStatus::rank_exhausted;
      final_phase = true;
      done = true;
    }
    rep.t_augment_ms = std::chrono::duration<double, std::milli>(clock::now() - t_aug0).count();

    auto t_fac0 = clock::now();
    if (grew) {
      if (implicit_mode) {
        if (chol_ok) {
          try {
            chol_acc.append(cur.r().transpose(), cur.last_added());
            t_r_implicit = chol_acc.t();
          } catch (const Error&) {
            // dependent block or squared-conditioning failure: refactor stably
            t_r_implicit = detail::gram_factor(cur.r().transpose());
            chol_ok = false;
          }
        } else {
          t_r_implicit = detail::gram_factor(cur.r().transpose());
        }
      } else {
        IndexList newrows(cur.row_indices().end() - cur.last_added(), cur.row_indices().end());
        Matrix newblock = target.extract_rows(newrows).transpose().to_dense();
        try {
          qr_acc.append(newblock);
        } catch (const Error&) {
          qr_acc = QrAccumulator();
          qr_acc.append(cur.r().transpose().to_dense()); // full refactorization
        }
      }
      if (cur.rank() >= max_rank) {
        // no further growth possible; make the imminent phase the last one
        final_phase = true;
        done = true;
        if (cur.rho() > cfg.eps_cur) res.status = SolveStatus::rank_exhausted;
      }
    }
    rep.t_factor_ms = std::chrono::duration<double, std::milli>(clock::now() - t_fac0).count();

    double rho = cur.rho();
    if (rho <= cfg.eps_cur) {
      final_phase = true;
      done = true;
      res.status = SolveStatus::converged;
    }

    bool trigger = final_phase || reprecondition_check(d_cur, rho, cfg.eps_cur, cfg.nu_prec);
    if (trigger && cur.rank() > 0) {
      // skip a would-be duplicate phase at an unchanged rank
      if (!res.phases.empty() && res.phases.back().rank == cur.rank()) {
        break;
      }
      ++phase;
      auto t_pre0 = clock::now();
      std::unique_ptr<Preconditioner> p;
      try {
        if (cfg.variant == PrecondVariant::svd) {
          if (implicit_mode)
            p = std::make_unique<SvdPreconditioner>(build_svd_precond_implicit(
                cur.c(), cur.core(), cur.r(), mu, t_r_implicit));
          else
            p = std::make_unique<SvdPreconditioner>(
                build_svd_precond(cur.c(), cur.core(), cur.r(), mu, qr_acc.q(), qr_acc.t()));
        } else {
          if (implicit_mode)
            p = std::make_unique<SvdFreePreconditioner>(build_svdfree_precond_implicit(
                cur.c(), cur.core(), cur.r(), cur.intersection(), t_r_implicit, rho));
          else
            p = std::make_unique<SvdFreePreconditioner>(build_svdfree_precond(
                cur.c(), cur.core(), cur.r(), cur.intersection(), qr_acc.q(), qr_acc.t(), rho));
        }
      } catch (const Error&) {
        res.status = SolveStatus::breakdown;
        --phase;
        break;
      }
      rep.t_precond_ms = std::chrono::duration<double, std::milli>(clock::now() - t_pre0).count();
      if (hooks && hooks->on_rebuild) hooks->on_rebuild(cur, *p, phase);
      run_phase(*p, final_phase, rho, rep);
      if (std::isfinite(rho)) d_cur = rho - cfg.eps_cur;
      res.phases.push_back(std::move(rep));
    }
  }

  // a degenerate problem (zero or instantly exhausted target) still gets one
  // preconditioned phase, with the identity as preconditioner
  if (res.phases.empty()) {
    ++phase;
    PhaseReport rep;
    SvdPreconditioner ident = SvdPreconditioner::identity(n);
    run_phase(ident, true, cur.rho(), rep);
    res.phases.push_back(std::move(rep));
  }

  res.final_rho = cur.rho();
  res.final_relres = bnorm > 0.0 ? detail::system_relres(sys, res.x, rhs_full, bnorm) : 0.0;
  res.sketch_applications = cur.sketch_applications();
  res.system_matvecs = sys_op.counts().total();
  res.row_indices = cur.row_indices();
  res.col_indices = cur.col_indices();
  res.rho_history = cur.rho_history();
  return res;
}

/// Unpreconditioned LSQR on the same system, reported in the same shape; the
/// baseline the adaptive solver is compared against.
inline SolveResult plain_lsqr_solve(const ProblemInstance& problem, const SolverConfig& config_in) {
  const Matrix& a = problem.a;
  Index n = a.cols();
  SolverConfig cfg = config_in.resolved(n);
  cfg.validate();
  double mu = cfg.mu;
  std::optional<AugmentedOperator> aug;
  if (mu > 0.0) aug.emplace(a, mu);
  detail::SystemOps sys = detail::make_system(a, aug ? &*aug : nullptr);
  LinearOperator sys_op(sys.rows, sys.cols, sys.fwd, sys.adj);

  std::vector<double> rhs(static_cast<std::size_t>(sys.rows), 0.0);
  std::copy(problem.b.begin(), problem.b.end(), rhs.begin());
  double bnorm = vec_norm(problem.b);

  StopConfig stop;
  stop.eps_lsqr = cfg.eps_lsqr;
  stop.max_iters = cfg.lsqr_cap > 0 ? cfg.lsqr_cap : 4 * n;

  SolveResult res;
  std::vector<double> sampled;
  std::function<void(Index, std::span<const double>)> obs;
  if (cfg.trace_sample_stride > 0) {
    obs = [&](Index iter, std::span<const double> y) {
      if (iter % cfg.trace_sample_stride != 0) return;
      double rr = bnorm > 0.0 ? detail::system_relres(sys, y, rhs, bnorm) : 0.0;
      if (static_cast<Index>(sampled.size()) <= iter)
        sampled.resize(static_cast<std::size_t>(iter) + 1, std::numeric_limits<double>::quiet_NaN());
      sampled[static_cast<std::size_t>(iter)] = rr;
    };
  }
  LsqrResult lr = lsqr_solve(sys_op, rhs, stop, 1, obs);
  res.x = std::move(lr.y);
  for (auto& row : lr.trace.rows) {
    if (row.iter >= 0 && row.iter < static_cast<Index>(sampled.size()))
      row.true_relres = sampled[static_cast<std::size_t>(row.iter)];
    res.trace.rows.push_back(row);
  }
  res.trace.reason = lr.trace.reason;

  PhaseReport rep;
  rep.phase = 1;
  rep.rank = 0;
  rep.mu = mu;
  rep.lsqr_iters = static_cast<Index>(res.trace.rows.size()) - 1;
  rep.reason = lr.trace.reason;
  rep.relres_at_end = bnorm > 0.0 ? detail::system_relres(sys, res.x, rhs, bnorm) : 0.0;
  res.phases.push_back(std::move(rep));
  res.final_relres = res.phases.back().relres_at_end;
  res.system_matvecs = sys_op.counts().total();
  res.status = SolveStatus::converged;
  return res;
}

} // namespace aplicur

#endif
