// Command-line harness: generate or load least-squares problems, run the
// adaptive solver variants against plain LSQR, and dump traces, spectra and
// oracle residuals for offline analysis.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "aplicur/aplicur.hpp"

namespace fs = std::filesystem;
using aplicur::Index;
using nlohmann::json;

namespace {

json load_json(const std::string& path) {
  std::ifstream f(path);
  if (!f.good()) throw aplicur::Error(aplicur::ErrorKind::io, "cannot open config: " + path);
  json j;
  f >> j;
  return j;
}

aplicur::ProblemInstance problem_from_config(const std::string& config_path) {
  json j = load_json(config_path);
  aplicur::detail::check_keys(j, {"problem"}, "problem config");
  return aplicur::build_problem(aplicur::ProblemSpec::parse(j.at("problem")));
}

int cmd_run(const std::string& config_path, const std::string& out_override,
            std::optional<std::uint64_t> seed_override, Index threads,
            const std::string& method_filter) {
  json j = load_json(config_path);
  aplicur::ExperimentConfig cfg = aplicur::ExperimentConfig::parse(j);
  if (!out_override.empty()) cfg.output_dir = out_override;
  if (seed_override) cfg.seed_base = *seed_override;
  if (!method_filter.empty()) {
    std::vector<aplicur::MethodSpec> kept;
    for (auto& m : cfg.methods)
      if (m.name == method_filter || m.method == method_filter) kept.push_back(m);
    if (kept.empty())
      throw aplicur::Error(aplicur::ErrorKind::invalid_argument,
                           "no method matches --method " + method_filter);
    cfg.methods = std::move(kept);
  }
  json summary = aplicur::run_experiment(cfg, threads);
  std::cout << summary.dump(2) << std::endl;
  return 0;
}

int cmd_spectrum(const std::string& config_path, const std::string& method,
                 const std::string& rank_arg, const std::string& out_path,
                 std::uint64_t seed) {
  aplicur::ProblemInstance problem = problem_from_config(config_path);
  Index n = problem.a.cols();
  std::vector<double> sigma;

  if (method == "none" || rank_arg == "0") {
    sigma = aplicur::preconditioned_spectrum(problem, nullptr);
  } else if (method == "optimal") {
    Index l = static_cast<Index>(std::stoll(rank_arg));
    aplicur::SvdPreconditioner p = aplicur::optimal_precond(problem.a.to_dense(), l, problem.mu);
    sigma = aplicur::preconditioned_spectrum(problem, &p);
  } else if (method == "aplicur" || method == "aplicur-sf") {
    aplicur::SolverConfig cfg;
    cfg.mu = problem.mu;
    cfg.seed = seed;
    cfg.variant = method == "aplicur-sf" ? aplicur::PrecondVariant::svd_free
                                         : aplicur::PrecondVariant::svd;
    if (rank_arg == "final") {
      // run the adaptive solve and keep a copy of the last preconditioner
      std::unique_ptr<aplicur::Preconditioner> last;
      aplicur::SolveHooks hooks;
      hooks.on_rebuild = [&](const aplicur::CurState&, const aplicur::Preconditioner& p, int) {
        if (const auto* sp = dynamic_cast<const aplicur::SvdPreconditioner*>(&p))
          last = std::make_unique<aplicur::SvdPreconditioner>(*sp);
        else if (const auto* sf = dynamic_cast<const aplicur::SvdFreePreconditioner*>(&p))
          last = std::make_unique<aplicur::SvdFreePreconditioner>(*sf);
      };
      aplicur::aplicur_solve(problem, cfg, &hooks);
      if (!last)
        throw aplicur::Error(aplicur::ErrorKind::invalid_argument, "no preconditioner was built");
      sigma = aplicur::preconditioned_spectrum(problem, last.get());
    } else {
      Index l = static_cast<Index>(std::stoll(rank_arg));
      aplicur::FixedCur f = aplicur::fixed_rank_cur(problem.a, l, seed, cfg.sketch_xi, cfg.core);
      if (method == "aplicur") {
        aplicur::SvdPreconditioner p = aplicur::build_svd_precond(f, problem.mu);
        sigma = aplicur::preconditioned_spectrum(problem, &p);
      } else {
        aplicur::ThinQr qr = aplicur::thin_qr(f.r.transpose().to_dense());
        // target level from the exact spectral error of the fixed-rank factors
        aplicur::Matrix dense = problem.a.to_dense();
        std::vector<double> buf = aplicur::detail::dense_buffer(dense);
        std::vector<double> v(static_cast<std::size_t>(n), 0.0), av(static_cast<std::size_t>(problem.a.rows()));
        for (Index jcol = 0; jcol < n; ++jcol) {
          v.assign(v.size(), 0.0);
          v[static_cast<std::size_t>(jcol)] = 1.0;
          aplicur::cur_apply(f.c, f.core, f.r, v, av);
          for (Index i = 0; i < problem.a.rows(); ++i)
            buf[static_cast<std::size_t>(jcol * problem.a.rows() + i)] -= av[static_cast<std::size_t>(i)];
        }
        aplicur::Svd es = aplicur::small_svd(aplicur::Matrix::dense(problem.a.rows(), n, std::move(buf)));
        aplicur::SvdFreePreconditioner p = aplicur::build_svdfree_precond(
            f.c, f.core, f.r, f.intersection, qr.q, qr.t, es.sigma.front());
        sigma = aplicur::preconditioned_spectrum(problem, &p);
      }
    }
  } else {
    throw aplicur::Error(aplicur::ErrorKind::invalid_argument,
                         "spectrum: method must be aplicur, aplicur-sf, optimal or none");
  }

  std::ostringstream csv;
  csv << "i,sigma\n";
  for (std::size_t i = 0; i < sigma.size(); ++i)
    csv << (i + 1) << "," << aplicur::format_double(sigma[i]) << "\n";
  if (out_path.empty()) {
    std::cout << csv.str();
  } else {
    aplicur::atomic_write(out_path, csv.str());
  }
  return 0;
}

int cmd_oracle(const std::string& config_path, const std::string& out_path) {
  aplicur::ProblemInstance problem = problem_from_config(config_path);
  double mn = static_cast<double>(problem.a.rows() + problem.a.cols()) *
              static_cast<double>(problem.a.cols());
  if (mn > 6.0e9)
    throw aplicur::Error(aplicur::ErrorKind::invalid_argument,
                         "oracle: problem too large for a dense solve; keep (m+n)*n <= 6e9");
  aplicur::compute_oracle_residuals(problem);
  json j;
  j["optimal_relres_unreg"] = problem.meta.opt_relres_unreg.value_or(0.0);
  j["optimal_relres_reg"] = problem.meta.opt_relres_reg.value_or(0.0);
  j["mu"] = problem.mu;
  std::string text = j.dump(2) + "\n";
  if (out_path.empty())
    std::cout << text;
  else
    aplicur::atomic_write(out_path, text);
  return 0;
}

int cmd_gen(const std::string& config_path, const std::string& out_dir) {
  json j = load_json(config_path);
  aplicur::detail::check_keys(j, {"problem"}, "problem config");
  aplicur::ProblemSpec spec = aplicur::ProblemSpec::parse(j.at("problem"));
  aplicur::ProblemInstance problem = aplicur::build_problem(spec);
  fs::create_directories(out_dir);
  aplicur::write_matrix_market(problem.a, (fs::path(out_dir) / "A.mtx").string());
  aplicur::Matrix bm = aplicur::Matrix::dense(problem.a.rows(), 1, problem.b);
  aplicur::write_matrix_market(bm, (fs::path(out_dir) / "b.mtx").string());
  json meta;
  meta["mu"] = problem.mu;
  meta["m"] = problem.a.rows();
  meta["n"] = problem.a.cols();
  meta["spec"] = spec.to_json();
  if (problem.meta.x_star) meta["x_star"] = *problem.meta.x_star;
  if (!std::isnan(problem.meta.noise_norm)) meta["noise_norm"] = problem.meta.noise_norm;
  aplicur::atomic_write(fs::path(out_dir) / "meta.json", meta.dump(2) + "\n");
  std::cout << "wrote A.mtx, b.mtx, meta.json to " << out_dir << std::endl;
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptively preconditioned LSQR benchmark harness"};
  app.require_subcommand(1);

  std::string config, out, method, rank = "final";
  std::uint64_t seed = 0;
  bool seed_given = false;
  Index threads = 0;

  auto* run = app.add_subcommand("run", "run an experiment config and record traces");
  run->add_option("--config", config, "experiment config (JSON)")->required();
  run->add_option("--out", out, "output directory override");
  run->add_option("--seed", seed, "seed base override")->each([&](const std::string&) { seed_given = true; });
  run->add_option("--threads", threads, "worker threads (env APLICUR_THREADS overrides)");
  run->add_option("--method", method, "run only the matching method");

  auto* spectrum = app.add_subcommand("spectrum", "singular values of the preconditioned system");
  spectrum->add_option("--config", config, "problem config (JSON with a 'problem' object)")->required();
  spectrum->add_option("--method", method, "aplicur | aplicur-sf | optimal | none")->required();
  spectrum->add_option("--rank", rank, "target rank, or 'final'");
  spectrum->add_option("--out", out, "output CSV (stdout if omitted)");
  spectrum->add_option("--seed", seed, "sketch seed");

  auto* oracle = app.add_subcommand("oracle", "dense optimal residuals for a problem");
  oracle->add_option("--config", config, "problem config (JSON with a 'problem' object)")->required();
  oracle->add_option("--out", out, "output JSON (stdout if omitted)");

  auto* gen = app.add_subcommand("gen", "emit a generated problem to files");
  gen->add_option("--config", config, "problem config (JSON with a 'problem' object)")->required();
  gen->add_option("--out", out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed())
      return cmd_run(config, out, seed_given ? std::optional<std::uint64_t>(seed) : std::nullopt,
                     threads, method);
    if (spectrum->parsed()) return cmd_spectrum(config, method, rank, out, seed);
    if (oracle->parsed()) return cmd_oracle(config, out);
    if (gen->parsed()) return cmd_gen(config, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
