#ifndef APLICUR_BENCH_HPP
#define APLICUR_BENCH_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "aplicur/matrix_market.hpp"
#include "aplicur/preconditioner.hpp"
#include "aplicur/problems.hpp"
#include "aplicur/report_io.hpp"
#include "aplicur/solver.hpp"

namespace aplicur {

using nlohmann::json;

namespace detail {

inline void check_keys(const json& j, std::initializer_list<const char*> allowed,
                       const std::string& ctx) {
  require(j.is_object(), ErrorKind::invalid_argument, ctx + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    require(ok, ErrorKind::invalid_argument, ctx + ": unknown key '" + it.key() + "'");
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

} // namespace detail

struct ProblemSpec {
  // generate
  bool from_files = false;
  Index m = 0, n = 0;
  std::string structure = "dense"; // dense | sparse
  SpectrumProfile profile = SpectrumProfile::sharp_1e7;
  Coherence coh = Coherence::incoherent;
  int coherency_factor = 0;
  double density = 0.01;
  std::string rhs = "consistent-x"; // consistent-x | consistent-b
  double noise = 0.0;
  bool noise_relative = true;
  double mu = 0.0;
  std::uint64_t seed = 0;
  // files
  std::string matrix_path, rhs_path;

  static ProblemSpec parse(const json& j) {
    ProblemSpec s;
    std::string kind = detail::get_or<std::string>(j, "kind", "generate");
    if (kind == "files") {
      detail::check_keys(j, {"kind", "matrix", "rhs", "mu"}, "problem");
      s.from_files = true;
      s.matrix_path = j.at("matrix").get<std::string>();
      s.rhs_path = j.at("rhs").get<std::string>();
      s.mu = detail::get_or<double>(j, "mu", 0.0);
      return s;
    }
    detail::require(kind == "generate", ErrorKind::invalid_argument,
                    "problem: kind must be 'generate' or 'files'");
    detail::check_keys(j,
                       {"kind", "m", "n", "structure", "spectrum", "coherence",
                        "coherency_factor", "density", "rhs", "noise", "noise_mode", "mu", "seed"},
                       "problem");
    s.m = j.at("m").get<Index>();
    s.n = j.at("n").get<Index>();
    s.structure = detail::get_or<std::string>(j, "structure", "dense");
    detail::require(s.structure == "dense" || s.structure == "sparse", ErrorKind::invalid_argument,
                    "problem: structure must be dense or sparse");
    auto prof = spectrum_profile_from_string(detail::get_or<std::string>(j, "spectrum", "sharp-1e7"));
    detail::require(prof.has_value(), ErrorKind::invalid_argument, "problem: unknown spectrum");
    s.profile = *prof;
    std::string c = detail::get_or<std::string>(j, "coherence", "incoherent");
    detail::require(c == "incoherent" || c == "coherent", ErrorKind::invalid_argument,
                    "problem: coherence must be incoherent or coherent");
    s.coh = c == "coherent" ? Coherence::coherent : Coherence::incoherent;
    s.coherency_factor = detail::get_or<int>(j, "coherency_factor", 0);
    s.density = detail::get_or<double>(j, "density", 0.01);
    s.rhs = detail::get_or<std::string>(j, "rhs", "consistent-x");
    detail::require(s.rhs == "consistent-x" || s.rhs == "consistent-b", ErrorKind::invalid_argument,
                    "problem: rhs must be consistent-x or consistent-b");
    s.noise = detail::get_or<double>(j, "noise", 0.0);
    std::string nm = detail::get_or<std::string>(j, "noise_mode", "relative");
    detail::require(nm == "relative" || nm == "absolute", ErrorKind::invalid_argument,
                    "problem: noise_mode must be relative or absolute");
    s.noise_relative = nm == "relative";
    s.mu = detail::get_or<double>(j, "mu", 0.0);
    s.seed = detail::get_or<std::uint64_t>(j, "seed", 0);
    return s;
  }

  json to_json() const {
    json j;
    if (from_files) {
      j["kind"] = "files";
      j["matrix"] = matrix_path;
      j["rhs"] = rhs_path;
      j["mu"] = mu;
      return j;
    }
    j["kind"] = "generate";
    j["m"] = m;
    j["n"] = n;
    j["structure"] = structure;
    j["spectrum"] = to_string(profile);
    j["coherence"] = coh == Coherence::coherent ? "coherent" : "incoherent";
    j["coherency_factor"] = coherency_factor;
    j["density"] = density;
    j["rhs"] = rhs;
    j["noise"] = noise;
    j["noise_mode"] = noise_relative ? "relative" : "absolute";
    j["mu"] = mu;
    j["seed"] = seed;
    return j;
  }
};

inline ProblemInstance build_problem(const ProblemSpec& s) {
  ProblemInstance p;
  p.mu = s.mu;
  if (s.from_files) {
    p.a = read_matrix_market(s.matrix_path);
    Matrix bm = read_matrix_market(s.rhs_path);
    detail::require(bm.cols() == 1 && bm.rows() == p.a.rows(), ErrorKind::invalid_argument,
                    "problem: rhs must be an m x 1 matrix");
    Matrix bd = bm.to_dense();
    p.b.assign(bd.dense_data().begin(), bd.dense_data().end());
    return p;
  }
  std::vector<double> sig = spectrum(s.profile, s.n);
  if (s.structure == "dense") {
    p.a = dense_matrix(s.m, s.n, sig, s.coh, s.seed);
  } else {
    p.a = sparse_matrix(s.m, s.n, sig, s.coherency_factor, s.density, s.seed);
  }
  if (s.rhs == "consistent-b") {
    p.b = rhs_consistent_b(p.a, s.seed);
  } else {
    double eta = s.noise;
    if (s.noise_relative && s.noise > 0.0) {
      ConsistentX probe = rhs_consistent_x(p.a, 0.0, s.seed);
      eta = s.noise * vec_norm(probe.b); // ||A x*||
    }
    ConsistentX cx = rhs_consistent_x(p.a, eta, s.seed);
    p.b = std::move(cx.b);
    p.meta.x_star = std::move(cx.x_star);
    p.meta.noise_norm = eta;
  }
  return p;
}

struct MethodSpec {
  std::string name;   // record label
  std::string method; // aplicur | aplicur-sf | lsqr
  SolverConfig config;
  bool mu_overridden = false;

  static MethodSpec parse(const json& j) {
    detail::check_keys(j,
                       {"name", "method", "block", "eps_cur", "eps_lsqr", "nu_prec", "nu_lsqr",
                        "mu", "xi", "probes", "lsqr_cap", "core", "max_rank"},
                       "method");
    MethodSpec m;
    m.method = j.at("method").get<std::string>();
    detail::require(m.method == "aplicur" || m.method == "aplicur-sf" || m.method == "lsqr",
                    ErrorKind::invalid_argument, "method: must be aplicur, aplicur-sf or lsqr");
    m.name = detail::get_or<std::string>(j, "name", m.method);
    m.config.variant = m.method == "aplicur-sf" ? PrecondVariant::svd_free : PrecondVariant::svd;
    m.config.block = detail::get_or<Index>(j, "block", 0);
    m.config.eps_cur = detail::get_or<double>(j, "eps_cur", -1.0);
    m.config.eps_lsqr = detail::get_or<double>(j, "eps_lsqr", 1e-10);
    m.config.nu_prec = detail::get_or<double>(j, "nu_prec", 10.0);
    m.config.nu_lsqr = detail::get_or<double>(j, "nu_lsqr", 100.0);
    if (j.contains("mu")) {
      m.config.mu = j.at("mu").get<double>();
      m.mu_overridden = true;
    }
    m.config.sketch_xi = detail::get_or<Index>(j, "xi", 8);
    m.config.probe_count = detail::get_or<Index>(j, "probes", 10);
    m.config.lsqr_cap = detail::get_or<Index>(j, "lsqr_cap", 0);
    m.config.max_rank = detail::get_or<Index>(j, "max_rank", 0);
    std::string core = detail::get_or<std::string>(j, "core", "qr");
    detail::require(core == "qr" || core == "lu", ErrorKind::invalid_argument,
                    "method: core must be qr or lu");
    m.config.core = core == "qr" ? CoreFactorKind::qr : CoreFactorKind::lu;
    return m;
  }
};

struct ExperimentConfig {
  ProblemSpec problem;
  std::vector<MethodSpec> methods;
  Index trials = 1;
  std::uint64_t seed_base = 0;
  std::string output_dir = "out";
  Index true_residual_stride = 0; // 0: auto (1 at desk scale, 10 above)
  bool dump_spectrum = false;

  static ExperimentConfig parse(const json& j) {
    detail::check_keys(j, {"problem", "methods", "trials", "seed_base", "output_dir", "metrics"},
                       "config");
    ExperimentConfig c;
    c.problem = ProblemSpec::parse(j.at("problem"));
    detail::require(j.contains("methods") && j.at("methods").is_array() && !j.at("methods").empty(),
                    ErrorKind::invalid_argument, "config: methods must be a nonempty array");
    for (const auto& mj : j.at("methods")) c.methods.push_back(MethodSpec::parse(mj));
    c.trials = detail::get_or<Index>(j, "trials", 1);
    detail::require(c.trials >= 1, ErrorKind::invalid_argument, "config: trials >= 1");
    c.seed_base = detail::get_or<std::uint64_t>(j, "seed_base", 0);
    c.output_dir = detail::get_or<std::string>(j, "output_dir", "out");
    if (j.contains("metrics")) {
      detail::check_keys(j.at("metrics"), {"true_residual_stride", "dump_spectrum"}, "metrics");
      c.true_residual_stride = detail::get_or<Index>(j.at("metrics"), "true_residual_stride", 0);
      c.dump_spectrum = detail::get_or<bool>(j.at("metrics"), "dump_spectrum", false);
    }
    return c;
  }
};

struct RunRecord {
  std::string method;
  Index trial = 0;
  std::uint64_t seed = 0;
  double final_relres = 0.0;
  double optimal_relres = 0.0;
  double final_relres_plain = 0.0;
  std::string status;
  std::uint64_t system_matvecs = 0;
  std::uint64_t sketch_applications = 0;
  double wall_ms = 0.0;
  std::string trace_file;
  std::vector<PhaseReport> phases;
};

inline json run_record_to_json(const RunRecord& r, const SolverConfig& cfg,
                               const SolveResult& result) {
  json j = solve_report_to_json(cfg, result, r.trace_file);
  j["method"] = r.method;
  j["trial"] = r.trial;
  j["seed"] = r.seed;
  j["final_relres"] = r.final_relres;
  j["optimal_relres"] = r.optimal_relres;
  j["final_relres_plain"] = r.final_relres_plain;
  j["wall_ms"] = r.wall_ms;
  return j;
}

namespace detail {

inline double plain_relres(const ProblemInstance& p, std::span<const double> x) {
  std::vector<double> r(static_cast<std::size_t>(p.a.rows()));
  p.a.matvec(x, r);
  for (Index i = 0; i < p.a.rows(); ++i) r[static_cast<std::size_t>(i)] -= p.b[static_cast<std::size_t>(i)];
  return vec_norm(r) / vec_norm(p.b);
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

} // namespace detail

/// Run one (method, trial) cell and write its trace CSV; the caller provides
/// the shared problem and its oracle values.
inline RunRecord run_single(const ProblemInstance& problem, const MethodSpec& method, Index trial,
                            std::uint64_t seed, Index stride,
                            const std::filesystem::path& outdir) {
  using clock = std::chrono::steady_clock;
  auto t0 = clock::now();
  SolverConfig cfg = method.config;
  if (!method.mu_overridden) cfg.mu = problem.mu;
  cfg.seed = seed;
  cfg.trace_sample_stride = stride;

  SolveResult result = method.method == "lsqr" ? plain_lsqr_solve(problem, cfg)
                                               : aplicur_solve(problem, cfg);

  RunRecord rec;
  rec.method = method.name;
  rec.trial = trial;
  rec.seed = seed;
  rec.status = to_string(result.status);
  rec.final_relres = result.final_relres;
  rec.final_relres_plain = detail::plain_relres(problem, result.x);
  double mu_used = cfg.mu;
  rec.optimal_relres = mu_used > 0.0 ? problem.meta.opt_relres_reg.value_or(0.0)
                                     : problem.meta.opt_relres_unreg.value_or(0.0);
  detail::require(rec.final_relres >= rec.optimal_relres - 1e-12, ErrorKind::invalid_argument,
                  "run record: relative residual below the optimal oracle");
  rec.system_matvecs = result.system_matvecs;
  rec.sketch_applications = result.sketch_applications;
  rec.phases = result.phases;

  std::ostringstream name;
  name << "trace_" << method.name << "_" << trial << ".csv";
  rec.trace_file = name.str();
  std::ostringstream csv;
  trace_to_csv(result.trace, csv, result.phases);
  atomic_write(outdir / rec.trace_file, csv.str());

  std::ostringstream rn;
  rn << "record_" << method.name << "_" << trial << ".json";
  rec.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  atomic_write(outdir / rn.str(), run_record_to_json(rec, cfg, result).dump(2) + "\n");
  return rec;
}

/// Full experiment: every (method, trial) cell in a worker pool, then a
/// summary JSON aggregating medians across trials.
inline json run_experiment(const ExperimentConfig& cfg, Index threads = 0) {
  std::filesystem::create_directories(cfg.output_dir);
  ProblemInstance problem = build_problem(cfg.problem);
  compute_oracle_residuals(problem);

  Index stride = cfg.true_residual_stride;
  if (stride == 0) stride = (problem.a.rows() * problem.a.cols() <= 1'000'000) ? 1 : 10;

  // the environment variable overrides any --threads flag
  if (const char* env = std::getenv("APLICUR_THREADS"); env != nullptr)
    threads = static_cast<Index>(std::atoll(env));
  if (threads <= 0) threads = 1;

  struct Cell {
    std::size_t method_idx;
    Index trial;
  };
  std::vector<Cell> cells;
  for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi)
    for (Index t = 0; t < cfg.trials; ++t) cells.push_back({mi, t});
  std::vector<RunRecord> records(cells.size());
  std::vector<std::string> failures(cells.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      std::size_t k = next.fetch_add(1);
      if (k >= cells.size()) return;
      const Cell& c = cells[k];
      try {
        records[k] = run_single(problem, cfg.methods[c.method_idx], c.trial,
                                cfg.seed_base + static_cast<std::uint64_t>(c.trial), stride,
                                cfg.output_dir);
      } catch (const std::exception& e) {
        failures[k] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  Index nthreads = std::min<Index>(threads, static_cast<Index>(cells.size()));
  for (Index t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  for (std::size_t k = 0; k < cells.size(); ++k)
    detail::require(failures[k].empty(), ErrorKind::numerical_breakdown,
                    "trial failed: " + failures[k]);

  json summary;
  summary["problem"] = cfg.problem.to_json();
  summary["optimal_relres_unreg"] = problem.meta.opt_relres_unreg.value_or(0.0);
  summary["optimal_relres_reg"] = problem.meta.opt_relres_reg.value_or(0.0);
  summary["trials"] = cfg.trials;
  json per_method = json::array();
  for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
    std::vector<double> relres, matvecs, wall;
    json recs = json::array();
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (cells[k].method_idx != mi) continue;
      relres.push_back(records[k].final_relres);
      matvecs.push_back(static_cast<double>(records[k].system_matvecs));
      wall.push_back(records[k].wall_ms);
      recs.push_back("record_" + records[k].method + "_" + std::to_string(records[k].trial) +
                     ".json");
    }
    json mj;
    mj["method"] = cfg.methods[mi].name;
    mj["median_final_relres"] = detail::median(relres);
    mj["median_system_matvecs"] = detail::median(matvecs);
    mj["median_wall_ms"] = detail::median(wall);
    mj["records"] = recs;
    per_method.push_back(mj);
  }
  summary["methods"] = per_method;
  atomic_write(std::filesystem::path(cfg.output_dir) / "summary.json", summary.dump(2) + "\n");
  return summary;
}

/// Singular values of the right-preconditioned system by dense SVD; refused
/// above desk scale.
inline std::vector<double> preconditioned_spectrum(const ProblemInstance& problem,
                                                   const Preconditioner* p) {
  Index m = problem.a.rows(), n = problem.a.cols();
  detail::require(static_cast<double>(m + n) * static_cast<double>(n) <= 1.2e6,
                  ErrorKind::invalid_argument,
                  "spectrum: problem too large for a dense decomposition; keep (m+n)*n <= 1.2e6");
  double mu = problem.mu;
  Index rows = mu > 0.0 ? m + n : m;
  std::optional<AugmentedOperator> aug;
  if (mu > 0.0) aug.emplace(problem.a, mu);
  std::vector<double> dense(static_cast<std::size_t>(rows * n), 0.0);
  std::vector<double> e(static_cast<std::size_t>(n), 0.0);
  std::vector<double> pe(static_cast<std::size_t>(n));
  std::vector<double> col(static_cast<std::size_t>(rows));
  for (Index j = 0; j < n; ++j) {
    e[static_cast<std::size_t>(j)] = 1.0;
    if (p != nullptr)
      p->apply_inv(e, pe);
    else
      std::copy(e.begin(), e.end(), pe.begin());
    if (mu > 0.0)
      aug->matvec(pe, col);
    else
      problem.a.matvec(pe, col);
    std::copy(col.begin(), col.end(), dense.begin() + j * rows);
    e[static_cast<std::size_t>(j)] = 0.0;
  }
  Svd s = small_svd(Matrix::dense(rows, n, std::move(dense)));
  return s.sigma;
}

} // namespace aplicur

#endif
