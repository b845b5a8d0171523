#include <doctest.h>

#include <cmath>

#include "aplicur/bench.hpp"
#include "aplicur/solver.hpp"
#include "oracles.hpp"

using namespace aplicur;

namespace {

ProblemInstance sharp_instance(Index m, Index n, double mu, double rel_noise, std::uint64_t seed) {
  ProblemInstance p;
  auto sig = spectrum(SpectrumProfile::sharp_1e7, n);
  p.a = dense_matrix(m, n, sig, Coherence::incoherent, seed);
  ConsistentX probe = rhs_consistent_x(p.a, 0.0, seed + 1);
  double eta = rel_noise * vec_norm(probe.b);
  ConsistentX cx = rhs_consistent_x(p.a, eta, seed + 1);
  p.b = std::move(cx.b);
  p.meta.x_star = std::move(cx.x_star);
  p.meta.noise_norm = eta;
  p.mu = mu;
  return p;
}

} // namespace

TEST_SUITE_BEGIN("solver");

TEST_CASE("reprecondition trigger") {
  double inf = std::numeric_limits<double>::infinity();
  CHECK(reprecondition_check(inf, 1.0, 0.1, 10.0));              // sentinel
  CHECK_FALSE(reprecondition_check(1.0, 0.3, 0.1, 10.0));        // ratio 5 < 10
  CHECK(reprecondition_check(2.0, 0.3, 0.1, 10.0));              // ratio 10 >= 10
  CHECK(reprecondition_check(0.0, 0.05, 0.1, 10.0));             // rho below tolerance
  CHECK(reprecondition_check(-1.0, 0.05, 0.1, 10.0));            // forced regardless of gap
}

TEST_CASE("exact rank-b instance: one phase, converged") {
  Index b = 4, m = 20, n = 16;
  std::vector<double> sig(static_cast<std::size_t>(n), 0.0);
  for (Index i = 0; i < b; ++i) sig[static_cast<std::size_t>(i)] = 2.0 + static_cast<double>(b - i);
  ProblemInstance p;
  p.a = oracles::with_spectrum(m, n, sig, 71);
  ConsistentX cx = rhs_consistent_x(p.a, 0.0, 72);
  p.b = std::move(cx.b);
  p.mu = 1e-3;

  SolverConfig cfg;
  cfg.mu = p.mu;
  cfg.block = b;
  cfg.eps_cur = 1e-6 * p.a.frob_norm();
  cfg.seed = 5;
  SolveResult r = aplicur_solve(p, cfg);
  CHECK(r.status == SolveStatus::converged);
  CHECK(r.phases.size() == 1);
  CHECK(r.final_rho <= cfg.eps_cur);
  CHECK(r.sketch_applications == 1);
}

TEST_CASE("full-rank block equal to n: direct least-squares quality") {
  Index n = 6, m = 12;
  std::vector<double> sig{3.0, 2.5, 2.0, 1.5, 1.0, 0.5};
  ProblemInstance p;
  p.a = oracles::with_spectrum(m, n, sig, 81);
  ConsistentX cx = rhs_consistent_x(p.a, 0.3, 82);
  p.b = std::move(cx.b);
  p.mu = 0.0;

  SolverConfig cfg;
  cfg.mu = 0.0;
  cfg.block = n;
  cfg.eps_cur = 0.0;
  cfg.seed = 3;
  SolveResult r = aplicur_solve(p, cfg);
  // the dense optimum has residual exactly eta
  double relres_opt = 0.3 / vec_norm(p.b);
  CHECK(r.final_relres <= relres_opt * (1.0 + 1e-8) + 1e-12);
  CHECK(r.phases.back().rank == n);
}

TEST_CASE("baseline convergence on a desk-scale sharp-decay instance") {
  ProblemInstance p = sharp_instance(150, 125, 1e-4, 1e-2, 900);
  compute_oracle_residuals(p);
  SolverConfig cfg; // baseline defaults: b = n/50, eps_cur = 30 mu
  cfg.mu = p.mu;
  cfg.seed = 11;

  SUBCASE("svd variant") {
    SolveResult r = aplicur_solve(p, cfg);
    CHECK(r.status == SolveStatus::converged);
    CHECK(r.final_rho <= 30.0 * p.mu);
    CHECK(r.final_relres <= 1.01 * *p.meta.opt_relres_reg);
    CHECK(r.sketch_applications == 1);
    // rank grew by the block each phase boundary
    for (std::size_t k = 1; k < r.phases.size(); ++k)
      CHECK(r.phases[k].rank > r.phases[k - 1].rank);
  }
  SUBCASE("svd-free variant") {
    cfg.variant = PrecondVariant::svd_free;
    SolveResult r = aplicur_solve(p, cfg);
    CHECK(r.status == SolveStatus::converged);
    CHECK(r.final_relres <= 1.01 * *p.meta.opt_relres_reg);
  }
}

TEST_CASE("phase-boundary residuals never increase") {
  ProblemInstance p = sharp_instance(120, 100, 1e-4, 1e-2, 901);
  SolverConfig cfg;
  cfg.mu = p.mu;
  cfg.seed = 21;
  SolveResult r = aplicur_solve(p, cfg);
  REQUIRE(r.phases.size() >= 2);
  for (std::size_t k = 1; k < r.phases.size(); ++k)
    CHECK(r.phases[k].relres_at_end <=
          r.phases[k - 1].relres_at_end * (1.0 + 1e-12));
}

TEST_CASE("bit-identical reruns under a fixed seed") {
  ProblemInstance p = sharp_instance(90, 75, 1e-3, 1e-2, 902);
  SolverConfig cfg;
  cfg.mu = p.mu;
  cfg.seed = 33;
  SolveResult r1 = aplicur_solve(p, cfg);
  SolveResult r2 = aplicur_solve(p, cfg);
  REQUIRE(r1.x.size() == r2.x.size());
  for (std::size_t i = 0; i < r1.x.size(); ++i) CHECK(r1.x[i] == r2.x[i]);
  CHECK(r1.row_indices == r2.row_indices);
  CHECK(r1.col_indices == r2.col_indices);
  REQUIRE(r1.trace.rows.size() == r2.trace.rows.size());
  for (std::size_t k = 0; k < r1.trace.rows.size(); ++k) {
    CHECK(r1.trace.rows[k].phibar == r2.trace.rows[k].phibar);
    CHECK(r1.trace.rows[k].matvecs == r2.trace.rows[k].matvecs);
  }
}

TEST_CASE("true-residual sampling does not perturb the solve") {
  ProblemInstance p = sharp_instance(100, 90, 1e-4, 1e-2, 910);
  SolverConfig cfg;
  cfg.mu = p.mu;
  cfg.seed = 71;
  cfg.trace_sample_stride = 1;
  SolveResult sampled = aplicur_solve(p, cfg);
  cfg.trace_sample_stride = 0;
  SolveResult plain = aplicur_solve(p, cfg);
  CHECK(sampled.x == plain.x);
  CHECK(sampled.system_matvecs == plain.system_matvecs);
  REQUIRE(sampled.trace.rows.size() == plain.trace.rows.size());
  for (std::size_t k = 0; k < plain.trace.rows.size(); ++k)
    CHECK(sampled.trace.rows[k].phibar == plain.trace.rows[k].phibar);
}

TEST_CASE("final phase runs with dynamic stopping disabled") {
  ProblemInstance p = sharp_instance(100, 80, 1e-4, 1e-2, 903);
  SolverConfig cfg;
  cfg.mu = p.mu;
  cfg.seed = 44;
  SolveResult r = aplicur_solve(p, cfg);
  REQUIRE(!r.phases.empty());
  StopReason last = r.phases.back().reason;
  CHECK(last != StopReason::dynamic_rate);
  CHECK(last != StopReason::dynamic_diff);
}

TEST_CASE("zero matrix degrades to a single identity-preconditioned phase") {
  ProblemInstance p;
  p.a = Matrix::dense_zeros(10, 6);
  p.b = oracles::random_vec(10, 5);
  p.mu = 0.5;
  SolverConfig cfg;
  cfg.mu = p.mu;
  cfg.block = 2;
  SolveResult r = aplicur_solve(p, cfg);
  CHECK(r.phases.size() == 1);
  for (double v : r.x) CHECK(v == 0.0); // minimizer of mu^2 ||x||^2 alone
}

TEST_CASE("sparse problem uses the implicit path and converges") {
  std::vector<double> sig(40);
  for (std::size_t i = 0; i < sig.size(); ++i)
    sig[i] = (i < 8) ? std::pow(10.0, 1.0 - static_cast<double>(i) * 0.5)
                     : 1e-4;
  ProblemInstance p;
  p.a = sparse_matrix(120, 40, sig, 0, 0.05, 904);
  ConsistentX cx = rhs_consistent_x(p.a, 0.01, 905);
  p.b = std::move(cx.b);
  p.mu = 1e-3;
  compute_oracle_residuals(p);

  SolverConfig cfg;
  cfg.mu = p.mu;
  cfg.block = 4;
  cfg.seed = 55;
  SUBCASE("svd variant") {
    SolveResult r = aplicur_solve(p, cfg);
    CHECK(r.final_relres <= 1.05 * *p.meta.opt_relres_reg);
  }
  SUBCASE("svd-free variant over the regularized stack") {
    cfg.variant = PrecondVariant::svd_free;
    SolveResult r = aplicur_solve(p, cfg);
    CHECK(r.final_relres <= 1.05 * *p.meta.opt_relres_reg);
  }
}

TEST_CASE("plain lsqr baseline on an easy instance") {
  std::vector<double> sig{4.0, 3.0, 2.0, 1.0};
  ProblemInstance p;
  p.a = oracles::with_spectrum(12, 4, sig, 906);
  auto b = rhs_consistent_b(p.a, 907);
  p.b = b;
  p.mu = 0.0;
  SolverConfig cfg;
  cfg.mu = 0.0;
  SolveResult r = plain_lsqr_solve(p, cfg);
  CHECK(r.final_relres <= 1e-8);
  CHECK(r.phases.size() == 1);
}

TEST_CASE("unregularized run with a spectral-error budget") {
  // mu = 0: growth stops once the estimate clears the explicit tolerance
  std::vector<double> sig(30);
  for (std::size_t i = 0; i < sig.size(); ++i)
    sig[i] = std::pow(10.0, 1.0 - 0.6 * static_cast<double>(i));
  ProblemInstance p;
  p.a = oracles::with_spectrum(60, 30, sig, 908);
  ConsistentX cx = rhs_consistent_x(p.a, 1e-3, 909);
  p.b = std::move(cx.b);
  p.mu = 0.0;
  compute_oracle_residuals(p);

  SolverConfig cfg;
  cfg.mu = 0.0;
  cfg.block = 3;
  cfg.eps_cur = 1e-5 * p.a.frob_norm();
  cfg.seed = 66;
  SolveResult r = aplicur_solve(p, cfg);
  CHECK(r.final_relres <= 1.05 * *p.meta.opt_relres_unreg);
}

TEST_SUITE_END();
