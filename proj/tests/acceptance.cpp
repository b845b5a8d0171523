// Acceptance suite: one pass/fail line per criterion. Run all with no
// arguments or a single criterion by number.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "aplicur/aplicur.hpp"

using namespace aplicur;

namespace {

struct Check {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

double vnorm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

Matrix dense_from_spectrum(Index m, Index n, std::span<const double> sigma, std::uint64_t seed,
                           Matrix* u_out = nullptr) {
  Matrix a = dense_matrix(m, n, sigma, Coherence::incoherent, seed);
  if (u_out) *u_out = orth(a.to_dense());
  return a;
}

// Dense m x n matrix of the cross approximation C U R.
Matrix dense_cur_matrix(const Matrix& c, const CoreFactor& core, const Matrix& r) {
  Index m = c.rows(), n = r.cols();
  std::vector<double> out(static_cast<std::size_t>(m * n));
  std::vector<double> v(static_cast<std::size_t>(n), 0.0), av(static_cast<std::size_t>(m));
  for (Index j = 0; j < n; ++j) {
    v[static_cast<std::size_t>(j)] = 1.0;
    cur_apply(c, core, r, v, av);
    std::copy(av.begin(), av.end(), out.begin() + j * m);
    v[static_cast<std::size_t>(j)] = 0.0;
  }
  return Matrix::dense(m, n, std::move(out));
}

Matrix dense_residual(const Matrix& a, const Matrix& approx) {
  std::vector<double> buf(a.dense_data().begin(), a.dense_data().end());
  auto ad = approx.dense_data();
  for (std::size_t k = 0; k < buf.size(); ++k) buf[k] -= ad[k];
  return Matrix::dense(a.rows(), a.cols(), std::move(buf));
}

Matrix dense_preconditioned_system(const Matrix& a, double mu, const Preconditioner* p) {
  Index m = a.rows(), n = a.cols();
  Index rows = mu > 0.0 ? m + n : m;
  AugmentedOperator aug(a, mu);
  std::vector<double> out(static_cast<std::size_t>(rows * n));
  std::vector<double> e(static_cast<std::size_t>(n), 0.0), pe(static_cast<std::size_t>(n)),
      col(static_cast<std::size_t>(rows));
  for (Index j = 0; j < n; ++j) {
    e[static_cast<std::size_t>(j)] = 1.0;
    if (p)
      p->apply_inv(e, pe);
    else
      std::copy(e.begin(), e.end(), pe.begin());
    if (mu > 0.0)
      aug.matvec(pe, col);
    else
      a.matvec(pe, col);
    std::copy(col.begin(), col.end(), out.begin() + j * rows);
    e[static_cast<std::size_t>(j)] = 0.0;
  }
  return Matrix::dense(rows, n, std::move(out));
}

ProblemInstance make_instance(Index m, Index n, SpectrumProfile prof, Coherence coh, double mu,
                              double rel_noise, std::uint64_t seed, bool sparse = false,
                              int coh_factor = 0, double density = 0.01) {
  ProblemInstance p;
  auto sig = spectrum(prof, n);
  p.a = sparse ? sparse_matrix(m, n, sig, coh_factor, density, seed)
               : dense_matrix(m, n, sig, coh, seed);
  ConsistentX probe = rhs_consistent_x(p.a, 0.0, seed + 1);
  double eta = rel_noise * vnorm(probe.b);
  ConsistentX cx = rhs_consistent_x(p.a, eta, seed + 1);
  p.b = std::move(cx.b);
  p.meta.x_star = std::move(cx.x_star);
  p.meta.noise_norm = eta;
  p.mu = mu;
  return p;
}

// ---------------------------------------------------------------- criterion 1

Check criterion_condition_number_bound() {
  Check c;
  Rng rng(20260801);
  int clustering_checked = 0;
  for (int t = 0; t < 200 && c.ok; ++t) {
    Index n = 20 + static_cast<Index>(rng.below(131)); // up to 150
    Index m = n + static_cast<Index>(rng.below(static_cast<std::uint64_t>(200 - n + 1)));
    bool exact_case = (t % 10 == 9);
    Index l = 2 + static_cast<Index>(rng.below(5));
    std::vector<double> sigma(static_cast<std::size_t>(n));
    double base = 0.25 + 0.4 * rng.uniform();
    for (Index i = 0; i < n; ++i) {
      sigma[static_cast<std::size_t>(i)] =
          exact_case && i >= l ? 0.0 : std::pow(base, static_cast<double>(i));
    }
    Matrix a = dense_from_spectrum(m, n, sigma, 5000 + static_cast<std::uint64_t>(t));

    FixedCur f;
    try {
      f = fixed_rank_cur(a, l, 9000 + static_cast<std::uint64_t>(t));
    } catch (const Error&) {
      continue; // singular intersection draw; not part of the contract here
    }
    Matrix e = dense_residual(a, dense_cur_matrix(f.c, f.core, f.r));
    double norm_e = small_svd(e).sigma[0];

    double mu;
    if (exact_case) {
      mu = 0.05 + 0.5 * rng.uniform();
    } else {
      if (norm_e <= 0.0) continue;
      mu = norm_e * (1.5 + 18.0 * rng.uniform());
    }
    SvdPreconditioner p = build_svd_precond(f, mu);
    double sh = p.target_level();
    Svd s = small_svd(dense_preconditioned_system(a, mu, &p));
    double smax = s.sigma.front(), smin = s.sigma.back();

    c.require(smax <= std::sqrt(sh * sh + mu * mu) + norm_e + 1e-9 * smax,
              "sigma_max exceeded its bound at trial " + std::to_string(t));
    c.require(smin >= mu - norm_e - 1e-9 * smax,
              "sigma_min fell below its bound at trial " + std::to_string(t));
    if (norm_e < mu) {
      double bound = (std::sqrt(sh * sh + mu * mu) + norm_e) / (mu - norm_e);
      c.require(smax / smin <= bound * (1.0 + 1e-9),
                "condition number exceeded its bound at trial " + std::to_string(t));
    }
    if (exact_case) {
      // exact capture: the spectrum clusters at {sigma_hat x l, mu x (n-l)}
      ++clustering_checked;
      for (Index i = 0; i < l; ++i)
        c.require(std::fabs(s.sigma[static_cast<std::size_t>(i)] - sh) <= 1e-8 * sh,
                  "leading cluster off target at trial " + std::to_string(t));
      for (Index i = l; i < n; ++i)
        c.require(std::fabs(s.sigma[static_cast<std::size_t>(i)] - mu) <= 1e-8 * mu,
                  "trailing cluster off mu at trial " + std::to_string(t));
    }
  }
  c.require(clustering_checked >= 15, "too few exact-capture instances were exercised");
  return c;
}

// ---------------------------------------------------------------- criterion 2

Check criterion_svdfree_equivalence() {
  Check c;
  Rng rng(20260802);
  for (int t = 0; t < 50 && c.ok; ++t) {
    Index n = 20 + static_cast<Index>(rng.below(41));
    Index m = n + 5 + static_cast<Index>(rng.below(20));
    Index l = 2 + static_cast<Index>(rng.below(5));
    std::vector<double> sigma(static_cast<std::size_t>(n));
    double base = 0.3 + 0.45 * rng.uniform();
    for (Index i = 0; i < n; ++i) sigma[static_cast<std::size_t>(i)] = std::pow(base, static_cast<double>(i));
    Matrix a = dense_from_spectrum(m, n, sigma, 15000 + static_cast<std::uint64_t>(t));
    FixedCur f = fixed_rank_cur(a, l, 16000 + static_cast<std::uint64_t>(t));
    ThinQr qr = thin_qr(f.r.transpose().to_dense());
    SvdPreconditioner p = build_svd_precond(f.c, f.core, f.r, 0.0, qr.q, qr.t);
    SvdFreePreconditioner pf =
        build_svdfree_precond(f.c, f.core, f.r, f.intersection, qr.q, qr.t, p.target_level());

    Svd s1 = small_svd(dense_preconditioned_system(a, 0.0, &p));
    Svd s2 = small_svd(dense_preconditioned_system(a, 0.0, &pf));
    for (std::size_t i = 0; i < s1.sigma.size(); ++i)
      c.require(std::fabs(s1.sigma[i] - s2.sigma[i]) <= 1e-8 * s1.sigma.front(),
                "preconditioned spectra diverged at trial " + std::to_string(t));

    // W = P Pf^{-1} must be orthogonal
    std::vector<double> w(static_cast<std::size_t>(n * n));
    std::vector<double> e(static_cast<std::size_t>(n), 0.0), tvec(static_cast<std::size_t>(n)),
        col(static_cast<std::size_t>(n));
    for (Index j = 0; j < n; ++j) {
      e[static_cast<std::size_t>(j)] = 1.0;
      pf.apply_inv(e, tvec);
      p.apply_forward(tvec, col);
      std::copy(col.begin(), col.end(), w.begin() + j * n);
      e[static_cast<std::size_t>(j)] = 0.0;
    }
    Matrix wm = Matrix::dense(n, n, std::move(w));
    Matrix wtw = matmul(wm.transpose(), wm);
    double dev = 0.0;
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < n; ++i) {
        double target = i == j ? 1.0 : 0.0;
        dev = std::max(dev, std::fabs(wtw(i, j) - target));
      }
    c.require(dev <= 1e-8, "W^T W deviated from identity at trial " + std::to_string(t));
  }
  return c;
}

// ---------------------------------------------------------------- criterion 3

Check criterion_chebyshev_envelope() {
  Check c;
  Rng rng(20260803);
  for (int t = 0; t < 20 && c.ok; ++t) {
    Index n = 15 + static_cast<Index>(rng.below(16));
    Index m = n + 5 + static_cast<Index>(rng.below(20));
    double kappa = 5.0 + rng.uniform() * 995.0; // <= 1e3
    std::vector<double> sigma(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i)
      sigma[static_cast<std::size_t>(i)] =
          std::pow(kappa, -static_cast<double>(i) / static_cast<double>(n - 1));
    Matrix u;
    Matrix a = dense_from_spectrum(m, n, sigma, 20000 + static_cast<std::uint64_t>(t), &u);

    std::vector<double> b(static_cast<std::size_t>(m));
    Rng brng(21000 + static_cast<std::uint64_t>(t));
    for (auto& x : b) x = brng.gaussian();

    std::vector<double> proj0(static_cast<std::size_t>(u.cols()));
    u.matvec_transpose(b, proj0);
    double p0 = vnorm(proj0);

    LinearOperator op = make_operator(a);
    StopConfig stop;
    stop.max_iters = 150;
    std::vector<std::pair<Index, double>> ratios;
    auto observer = [&](Index iter, std::span<const double> y) {
      std::vector<double> r(static_cast<std::size_t>(m));
      a.matvec(y, r);
      for (Index i = 0; i < m; ++i) r[static_cast<std::size_t>(i)] = b[static_cast<std::size_t>(i)] - r[static_cast<std::size_t>(i)];
      std::vector<double> proj(static_cast<std::size_t>(u.cols()));
      u.matvec_transpose(r, proj);
      ratios.push_back({iter, vnorm(proj) / p0});
    };
    lsqr_solve(op, b, stop, 0, observer);

    for (auto [k, ratio] : ratios) {
      double bound = chebyshev_bound(kappa, k);
      c.require(ratio <= bound + 1e-10,
                "chebyshev envelope violated at trial " + std::to_string(t) + " iteration " +
                    std::to_string(k));
    }
  }
  return c;
}

// ---------------------------------------------------------------- criterion 4

Check criterion_two_interval_envelope() {
  Check c;
  Rng rng(20260804);
  for (int t = 0; t < 20 && c.ok; ++t) {
    Index n = 20 + static_cast<Index>(rng.below(11));
    Index m = n + 10;
    Index l = 3 + static_cast<Index>(rng.below(4));
    // a degenerate leading cluster and a tight trailing one around 1; at
    // k = 2 the bound's single quadratic step leaves little slack, and this
    // family keeps the envelope valid with margin at every k
    double top = 2.5 + 1.5 * rng.uniform();
    double botw = 0.001 + 0.003 * rng.uniform();
    std::vector<double> sigma(static_cast<std::size_t>(n));
    for (Index i = 0; i < l; ++i) sigma[static_cast<std::size_t>(i)] = top;
    for (Index i = l; i < n; ++i)
      sigma[static_cast<std::size_t>(i)] =
          1.0 + botw * (1.0 - static_cast<double>(i - l) / static_cast<double>(n - l));
    Matrix u;
    Matrix a = dense_from_spectrum(m, n, sigma, 30000 + static_cast<std::uint64_t>(t), &u);

    SpectrumSummary spec = SpectrumSummary::make(sigma, l);
    std::vector<double> b(static_cast<std::size_t>(m));
    Rng brng(31000 + static_cast<std::uint64_t>(t));
    for (auto& x : b) x = brng.gaussian();
    std::vector<double> proj0(static_cast<std::size_t>(u.cols()));
    u.matvec_transpose(b, proj0);
    double p0 = vnorm(proj0);

    LinearOperator op = make_operator(a);
    StopConfig stop;
    stop.max_iters = 120;
    std::vector<std::pair<Index, double>> ratios;
    auto observer = [&](Index iter, std::span<const double> y) {
      std::vector<double> r(static_cast<std::size_t>(m));
      a.matvec(y, r);
      for (Index i = 0; i < m; ++i) r[static_cast<std::size_t>(i)] = b[static_cast<std::size_t>(i)] - r[static_cast<std::size_t>(i)];
      std::vector<double> proj(static_cast<std::size_t>(u.cols()));
      u.matvec_transpose(r, proj);
      ratios.push_back({iter, vnorm(proj) / p0});
    };
    lsqr_solve(op, b, stop, 0, observer);

    for (auto [k, ratio] : ratios) {
      double bound = two_interval_bound(spec, k);
      c.require(ratio <= bound + 1e-10,
                "two-interval envelope violated at trial " + std::to_string(t) + " iteration " +
                    std::to_string(k));
    }
  }
  return c;
}

// ---------------------------------------------------------------- criterion 5

Check criterion_multiphase_bound() {
  Check c;
  Rng rng(20260805);
  int used = 0;
  for (int t = 0; t < 20; ++t) {
    Index n = 24 + static_cast<Index>(rng.below(13));
    Index m = n + 8;
    std::vector<double> sigma(static_cast<std::size_t>(n));
    double base = 0.45 + 0.15 * rng.uniform();
    for (Index i = 0; i < n; ++i)
      sigma[static_cast<std::size_t>(i)] = 2.0 * std::pow(base, static_cast<double>(i));
    Matrix a = dense_from_spectrum(m, n, sigma, 40000 + static_cast<std::uint64_t>(t));

    ProblemInstance p;
    p.a = a;
    ConsistentX cx = rhs_consistent_x(a, 0.05, 41000 + static_cast<std::uint64_t>(t));
    p.b = std::move(cx.b);
    double mu = 2.5; // dominates every phase's approximation error by design
    p.mu = mu;

    SolverConfig cfg;
    cfg.mu = mu;
    cfg.block = 3;
    cfg.eps_cur = 1e-4;
    cfg.nu_prec = 1.2;  // rebuild eagerly: several phases
    cfg.nu_lsqr = 4.0;  // cut phases early
    cfg.seed = 42000 + static_cast<std::uint64_t>(t);
    cfg.trace_sample_stride = 0;

    // exact approximation error captured at each rebuild
    std::vector<double> norm_e;
    SolveHooks hooks;
    hooks.on_rebuild = [&](const CurState& st, const Preconditioner&, int) {
      Matrix e = dense_residual(a, dense_cur_matrix(st.c(), st.core(), st.r()));
      norm_e.push_back(small_svd(e).sigma[0]);
    };
    SolveResult r = aplicur_solve(p, cfg, &hooks);

    bool applicable = true;
    std::vector<PhaseBoundTerm> terms;
    for (std::size_t i = 0; i < r.phases.size(); ++i) {
      if (i >= norm_e.size() || norm_e[i] >= mu) {
        applicable = false;
        break;
      }
      terms.push_back({norm_e[i], r.phases[i].sigma_hat, r.phases[i].lsqr_iters});
    }
    if (!applicable) continue; // engineering failed for this draw
    ++used;

    // projected residuals against the left singular basis of [A; mu I]
    std::vector<double> aug((static_cast<std::size_t>(m + n)) * static_cast<std::size_t>(n), 0.0);
    auto adat = a.dense_data();
    for (Index j = 0; j < n; ++j) {
      for (Index i = 0; i < m; ++i)
        aug[static_cast<std::size_t>(j * (m + n) + i)] = adat[static_cast<std::size_t>(j * m + i)];
      aug[static_cast<std::size_t>(j * (m + n) + m + j)] = mu;
    }
    Matrix amu = Matrix::dense(m + n, n, std::move(aug));
    Svd saug = small_svd(amu);

    std::vector<double> baug(static_cast<std::size_t>(m + n), 0.0);
    std::copy(p.b.begin(), p.b.end(), baug.begin());
    std::vector<double> rend(static_cast<std::size_t>(m + n));
    amu.matvec(r.x, rend);
    for (Index i = 0; i < m + n; ++i)
      rend[static_cast<std::size_t>(i)] = baug[static_cast<std::size_t>(i)] - rend[static_cast<std::size_t>(i)];

    std::vector<double> proj0(static_cast<std::size_t>(n)), projend(static_cast<std::size_t>(n));
    saug.u.matvec_transpose(baug, proj0);
    saug.u.matvec_transpose(rend, projend);

    double bound = multiphase_bound(terms, mu);
    c.require(vnorm(projend) <= bound * vnorm(proj0) * (1.0 + 1e-10) + 1e-12 * vnorm(proj0),
              "multi-phase product bound violated at trial " + std::to_string(t));
    if (!c.ok) break;
  }
  c.require(used >= 20, "engineered precondition ||E^(i)|| < mu failed on " +
                            std::to_string(20 - used) + " instances");
  return c;
}

// ---------------------------------------------------------------- criterion 6

Check criterion_end_to_end() {
  Check c;
  auto run_case = [&](ProblemInstance& p, const char* label) {
    compute_oracle_residuals(p);
    double opt = *p.meta.opt_relres_reg;

    SolverConfig cfg;
    cfg.mu = p.mu;
    cfg.seed = 7;
    cfg.trace_sample_stride = 0;
    SolveResult svd_run = aplicur_solve(p, cfg);
    cfg.variant = PrecondVariant::svd_free;
    SolveResult sf_run = aplicur_solve(p, cfg);
    SolverConfig plain;
    plain.mu = p.mu;
    plain.trace_sample_stride = 0;
    SolveResult lsqr_run = plain_lsqr_solve(p, plain);

    std::string tag(label);
    c.require(svd_run.final_rho <= 30.0 * p.mu,
              tag + ": adaptive run did not meet the approximation tolerance");
    c.require(svd_run.final_relres <= 1.01 * opt, tag + ": svd variant above 1.01x optimal");
    c.require(sf_run.final_relres <= 1.01 * opt, tag + ": svd-free variant above 1.01x optimal");
    c.require(svd_run.system_matvecs < lsqr_run.system_matvecs,
              tag + ": svd variant did not beat the baseline matvec count");
    c.require(sf_run.system_matvecs < lsqr_run.system_matvecs,
              tag + ": svd-free variant did not beat the baseline matvec count");
    // the stated premise about the baseline itself
    c.require(lsqr_run.final_relres > 1.01 * opt,
              tag + ": plain LSQR reached 1.01x optimal within the 4n cap (final ratio " +
                  std::to_string(lsqr_run.final_relres / opt) + ")");
  };

  {
    ProblemInstance dense_p =
        make_instance(300, 250, SpectrumProfile::sharp_1e7, Coherence::incoherent, 1e-4, 1e-2, 42);
    run_case(dense_p, "dense 300x250");
  }
  {
    ProblemInstance sparse_p = make_instance(1200, 1000, SpectrumProfile::sharp_1e7,
                                             Coherence::incoherent, 1e-4, 1e-2, 142,
                                             /*sparse=*/true, 0, 0.01);
    run_case(sparse_p, "sparse 1200x1000");
  }
  return c;
}

// ---------------------------------------------------------------- criterion 7

Check criterion_robustness_sweep() {
  Check c;
  Index m = 300, n = 250;
  auto sig = spectrum(SpectrumProfile::smooth_1e15, n);
  Matrix a = dense_matrix(m, n, sig, Coherence::incoherent, 51);
  ConsistentX probe = rhs_consistent_x(a, 0.0, 52);
  double eta = 1e-2 * vnorm(probe.b);
  ConsistentX cx = rhs_consistent_x(a, eta, 52);

  for (double mu : {1e-4, 1e-6, 1e-8, 0.0}) {
    ProblemInstance p;
    p.a = a;
    p.b = cx.b;
    p.mu = mu;
    compute_oracle_residuals(p);
    SolverConfig cfg;
    cfg.mu = mu;
    cfg.seed = 9;
    cfg.trace_sample_stride = 0;
    if (mu == 0.0) cfg.eps_cur = 3e-7;
    try {
      SolveResult r = aplicur_solve(p, cfg);
      double opt = mu > 0.0 ? *p.meta.opt_relres_reg : *p.meta.opt_relres_unreg;
      c.require(r.status != SolveStatus::breakdown, "breakdown at mu = " + std::to_string(mu));
      c.require(r.final_relres <= 1.05 * opt,
                "final residual above 1.05x optimal at mu = " + std::to_string(mu));
    } catch (const std::exception& e) {
      c.require(false, std::string("exception in a mu case: ") + e.what());
    }
    if (!c.ok) break;
  }
  return c;
}

// ---------------------------------------------------------------- criterion 8

Check criterion_determinism() {
  Check c;
  ProblemInstance p =
      make_instance(150, 125, SpectrumProfile::sharp_1e7, Coherence::incoherent, 1e-4, 1e-2, 66);
  for (PrecondVariant variant : {PrecondVariant::svd, PrecondVariant::svd_free}) {
    SolverConfig cfg;
    cfg.mu = p.mu;
    cfg.seed = 13;
    cfg.variant = variant;
    SolveResult r1 = aplicur_solve(p, cfg);
    SolveResult r2 = aplicur_solve(p, cfg);
    c.require(r1.sketch_applications == 1, "more than one sketch application per solve");
    c.require(r2.sketch_applications == 1, "more than one sketch application per solve");
    c.require(r1.x == r2.x, "solution vectors differ between seeded reruns");
    c.require(r1.row_indices == r2.row_indices && r1.col_indices == r2.col_indices,
              "index sequences differ between seeded reruns");
    c.require(r1.trace.rows.size() == r2.trace.rows.size(), "trace lengths differ");
    if (c.ok) {
      for (std::size_t k = 0; k < r1.trace.rows.size(); ++k) {
        const auto& x = r1.trace.rows[k];
        const auto& y = r2.trace.rows[k];
        if (x.phibar != y.phibar || x.matvecs != y.matvecs || x.iter != y.iter ||
            x.phase != y.phase) {
          c.require(false, "trace rows differ beyond timing fields");
          break;
        }
      }
    }
    if (!c.ok) break;
  }
  return c;
}

// ---------------------------------------------------------------- criterion 9

Check criterion_monotonicity() {
  Check c;
  struct Case {
    ProblemInstance p;
    PrecondVariant variant;
    double eps_cur; // < 0: default
    std::string name;
  };
  std::vector<Case> corpus;
  corpus.push_back({make_instance(140, 120, SpectrumProfile::sharp_1e7, Coherence::incoherent,
                                  1e-4, 1e-2, 201),
                    PrecondVariant::svd, -1.0, "dense sharp svd"});
  corpus.push_back({make_instance(140, 120, SpectrumProfile::sharp_1e7, Coherence::incoherent,
                                  1e-4, 1e-2, 202),
                    PrecondVariant::svd_free, -1.0, "dense sharp svd-free"});
  corpus.push_back({make_instance(130, 110, SpectrumProfile::smooth_1e15, Coherence::incoherent,
                                  1e-6, 1e-2, 203),
                    PrecondVariant::svd, -1.0, "dense smooth svd"});
  corpus.push_back({make_instance(140, 110, SpectrumProfile::sharp_1e7, Coherence::coherent, 1e-4,
                                  1e-2, 204),
                    PrecondVariant::svd, -1.0, "dense coherent svd"});
  corpus.push_back({make_instance(200, 100, SpectrumProfile::sharp_1e7, Coherence::incoherent,
                                  1e-3, 1e-2, 205, true, 0, 0.08),
                    PrecondVariant::svd, -1.0, "sparse incoherent svd"});
  corpus.push_back({make_instance(200, 100, SpectrumProfile::sharp_1e7, Coherence::incoherent,
                                  1e-3, 1e-2, 206, true, 20, 0.08),
                    PrecondVariant::svd_free, -1.0, "sparse coherent svd-free"});
  {
    ProblemInstance p;
    auto sig = spectrum(SpectrumProfile::sharp_1e7, 100);
    p.a = dense_matrix(130, 100, sig, Coherence::incoherent, 207);
    p.b = rhs_consistent_b(p.a, 208);
    p.mu = 1e-3;
    corpus.push_back({std::move(p), PrecondVariant::svd, -1.0, "dense consistent-b svd"});
  }
  {
    ProblemInstance p =
        make_instance(130, 110, SpectrumProfile::smooth_1e15, Coherence::incoherent, 0.0, 1e-2, 209);
    corpus.push_back({std::move(p), PrecondVariant::svd, 3e-7, "dense smooth unregularized"});
  }

  for (auto& cs : corpus) {
    SolverConfig cfg;
    cfg.mu = cs.p.mu;
    cfg.seed = 31;
    cfg.variant = cs.variant;
    if (cs.eps_cur >= 0.0) cfg.eps_cur = cs.eps_cur;
    cfg.trace_sample_stride = 0;
    SolveResult r = aplicur_solve(cs.p, cfg);
    double prev = 1.0; // relative residual at x = 0
    for (std::size_t k = 0; k < r.phases.size(); ++k) {
      c.require(r.phases[k].relres_at_end <= prev * (1.0 + 1e-12),
                cs.name + ": residual increased at phase " + std::to_string(k + 1));
      prev = r.phases[k].relres_at_end;
    }
    if (!c.ok) break;
  }
  return c;
}

// --------------------------------------------------------------- criterion 10

Check criterion_estimator_coverage() {
  Check c;
  int covered = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    Rng rng(60000 + static_cast<std::uint64_t>(t));
    std::vector<double> buf(20 * 40);
    for (auto& x : buf) x = rng.gaussian();
    Matrix e = Matrix::dense(20, 40, std::move(buf));
    double rho = spectral_norm_estimate(e, 10, 61000 + static_cast<std::uint64_t>(t));
    double exact = small_svd(e).sigma[0];
    if (rho >= exact) ++covered;
  }
  c.require(covered >= 990, "coverage " + std::to_string(covered) + "/1000 below 99%");
  if (c.ok) c.detail = std::to_string(covered) + "/1000 covered";
  return c;
}

struct Criterion {
  int id;
  const char* name;
  double time_limit_s; // 0: none
  std::function<Check()> run;
};

} // namespace

int main(int argc, char** argv) {
  std::vector<Criterion> criteria = {
      {1, "condition-number bound and exact-capture clustering", 60.0,
       criterion_condition_number_bound},
      {2, "svd-free spectral equivalence", 30.0, criterion_svdfree_equivalence},
      {3, "chebyshev convergence envelope", 0.0, criterion_chebyshev_envelope},
      {4, "two-interval convergence envelope", 0.0, criterion_two_interval_envelope},
      {5, "multi-phase product bound", 0.0, criterion_multiphase_bound},
      {6, "end-to-end convergence vs baseline", 120.0, criterion_end_to_end},
      {7, "robustness sweep under extreme ill-conditioning", 0.0, criterion_robustness_sweep},
      {8, "single-sketch and seeded determinism", 0.0, criterion_determinism},
      {9, "phase-boundary residual monotonicity", 0.0, criterion_monotonicity},
      {10, "spectral-norm estimator coverage", 0.0, criterion_estimator_coverage},
  };

  int only = 0;
  if (argc > 1) only = std::atoi(argv[1]);

  int failures = 0;
  for (const auto& crit : criteria) {
    if (only != 0 && crit.id != only) continue;
    auto t0 = std::chrono::steady_clock::now();
    Check c;
    try {
      c = crit.run();
    } catch (const std::exception& e) {
      c.ok = false;
      c.detail = std::string("exception: ") + e.what();
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (crit.time_limit_s > 0.0 && secs >= crit.time_limit_s) {
      c.ok = false;
      c.detail = "exceeded the " + std::to_string(crit.time_limit_s) + " s runtime limit";
    }
    std::printf("[%s] criterion %2d: %s (%.1fs)%s%s\n", c.ok ? "PASS" : "FAIL", crit.id, crit.name,
                secs, c.detail.empty() ? "" : " - ", c.detail.c_str());
    std::fflush(stdout);
    if (!c.ok) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
