#ifndef APLICUR_REPORT_IO_HPP
#define APLICUR_REPORT_IO_HPP

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "aplicur/error.hpp"
#include "aplicur/lsqr.hpp"
#include "aplicur/solver.hpp"

namespace aplicur {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// CSV trace: one row per LSQR iteration (iter 0 is the phase start), fixed
/// column order, reason emitted on the last row of each phase. The wall_ms
/// column is the only nondeterministic one.
inline void trace_to_csv(const LsqrTrace& trace, std::ostream& out,
                         std::span<const PhaseReport> phases = {}) {
  out << "phase,iter,phibar,relres,matvecs,wall_ms,reason\n";
  for (std::size_t k = 0; k < trace.rows.size(); ++k) {
    const auto& r = trace.rows[k];
    bool last_of_phase =
        (k + 1 == trace.rows.size()) || (trace.rows[k + 1].phase != r.phase);
    const char* reason = "";
    if (last_of_phase) {
      reason = to_string(trace.reason);
      for (const auto& ph : phases)
        if (ph.phase == r.phase) reason = to_string(ph.reason);
    }
    out << r.phase << "," << r.iter << "," << format_double(r.phibar) << ",";
    if (!std::isnan(r.true_relres)) out << format_double(r.true_relres);
    out << "," << r.matvecs << "," << format_double(r.wall_ms) << "," << reason << "\n";
  }
}

inline nlohmann::json phase_report_to_json(const PhaseReport& p) {
  nlohmann::json j;
  j["phase"] = p.phase;
  j["rank"] = p.rank;
  j["rho"] = p.rho;
  j["sigma_hat"] = p.sigma_hat;
  j["mu"] = p.mu;
  j["lsqr_iters"] = p.lsqr_iters;
  j["reason"] = to_string(p.reason);
  j["relres_at_end"] = p.relres_at_end;
  j["wall_ms"] = {{"augment", p.t_augment_ms},
                  {"factor", p.t_factor_ms},
                  {"precond", p.t_precond_ms},
                  {"lsqr", p.t_lsqr_ms}};
  if (!p.precond_spectrum.empty()) j["precond_spectrum"] = p.precond_spectrum;
  return j;
}

inline nlohmann::json solver_config_to_json(const SolverConfig& c) {
  nlohmann::json j;
  j["block"] = c.block;
  j["eps_cur"] = c.eps_cur;
  j["eps_lsqr"] = c.eps_lsqr;
  j["nu_prec"] = c.nu_prec;
  j["nu_lsqr"] = c.nu_lsqr;
  j["mu"] = c.mu;
  j["variant"] = to_string(c.variant);
  j["sketch_xi"] = c.sketch_xi;
  j["probe_count"] = c.probe_count;
  j["lsqr_cap"] = c.lsqr_cap;
  j["seed"] = c.seed;
  j["core"] = c.core == CoreFactorKind::qr ? "qr" : "lu";
  j["trace_sample_stride"] = c.trace_sample_stride;
  return j;
}

/// Index-set / estimate-history dump of a finished solve.
inline nlohmann::json cur_indices_to_json(const SolveResult& r) {
  nlohmann::json j;
  j["row_indices"] = r.row_indices;
  j["col_indices"] = r.col_indices;
  j["rho_history"] = r.rho_history;
  return j;
}

inline nlohmann::json solve_report_to_json(const SolverConfig& cfg, const SolveResult& r,
                                           const std::string& trace_path) {
  nlohmann::json j;
  j["config"] = solver_config_to_json(cfg);
  j["status"] = to_string(r.status);
  j["final_relres"] = r.final_relres;
  j["final_rho"] = r.final_rho;
  j["sketch_applications"] = r.sketch_applications;
  j["system_matvecs"] = r.system_matvecs;
  j["trace"] = trace_path;
  j["cur"] = cur_indices_to_json(r);
  nlohmann::json phases = nlohmann::json::array();
  for (const auto& p : r.phases) phases.push_back(phase_report_to_json(p));
  j["phases"] = phases;
  return j;
}

/// Write-then-rename so observers never see a partial file.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    detail::require(f.good(), ErrorKind::io, "cannot open for writing: " + tmp.string());
    f << content;
    detail::require(f.good(), ErrorKind::io, "write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

} // namespace aplicur

#endif
