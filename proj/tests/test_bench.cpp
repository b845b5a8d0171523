#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "aplicur/bench.hpp"
#include "oracles.hpp"

using namespace aplicur;
namespace fs = std::filesystem;

namespace {

json baseline_config(const std::string& outdir) {
  json j;
  j["problem"] = {{"kind", "generate"}, {"m", 60},          {"n", 50},
                  {"structure", "dense"}, {"spectrum", "sharp-1e7"},
                  {"coherence", "incoherent"}, {"rhs", "consistent-x"},
                  {"noise", 1e-2},        {"noise_mode", "relative"},
                  {"mu", 1e-4},           {"seed", 7}};
  j["methods"] = json::array({json{{"method", "aplicur"}},
                              json{{"method", "aplicur-sf"}, {"name", "aplicur-sf"}},
                              json{{"method", "lsqr"}}});
  j["trials"] = 2;
  j["seed_base"] = 100;
  j["output_dir"] = outdir;
  j["metrics"] = {{"true_residual_stride", 1}};
  return j;
}

// every line of a trace with the wall-time column blanked
std::vector<std::string> normalized_trace(const fs::path& p) {
  std::ifstream f(p);
  REQUIRE(f.good());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(f, line)) {
    // wall_ms is the 6th comma-separated column
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
    if (cols.size() >= 6) cols[5] = "";
    std::string joined;
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (i) joined += ",";
      joined += cols[i];
    }
    lines.push_back(joined);
  }
  return lines;
}

} // namespace

TEST_SUITE_BEGIN("bench");

TEST_CASE("config parsing rejects unknown keys at every level") {
  json good = baseline_config("x");
  CHECK_NOTHROW((void)ExperimentConfig::parse(good));

  json bad1 = good;
  bad1["unexpected"] = 1;
  CHECK_THROWS_AS((void)ExperimentConfig::parse(bad1), Error);

  json bad2 = good;
  bad2["problem"]["typo_key"] = 1;
  CHECK_THROWS_AS((void)ExperimentConfig::parse(bad2), Error);

  json bad3 = good;
  bad3["methods"][0]["bogus"] = true;
  CHECK_THROWS_AS((void)ExperimentConfig::parse(bad3), Error);

  json bad4 = good;
  bad4["metrics"]["nope"] = 1;
  CHECK_THROWS_AS((void)ExperimentConfig::parse(bad4), Error);
}

TEST_CASE("config validation of enums and ranges") {
  json j = baseline_config("x");
  j["problem"]["spectrum"] = "unknown-profile";
  CHECK_THROWS_AS((void)ExperimentConfig::parse(j), Error);

  j = baseline_config("x");
  j["methods"][0]["method"] = "cg";
  CHECK_THROWS_AS((void)ExperimentConfig::parse(j), Error);

  j = baseline_config("x");
  j["trials"] = 0;
  CHECK_THROWS_AS((void)ExperimentConfig::parse(j), Error);
}

TEST_CASE("experiment run writes all declared artifacts") {
  fs::path dir = fs::temp_directory_path() / "aplicur_bench_test";
  fs::remove_all(dir);
  ExperimentConfig cfg = ExperimentConfig::parse(baseline_config(dir.string()));
  json summary = run_experiment(cfg, 2);

  CHECK(fs::exists(dir / "summary.json"));
  for (const char* method : {"aplicur", "aplicur-sf", "lsqr"})
    for (int trial = 0; trial < 2; ++trial) {
      CHECK(fs::exists(dir / ("trace_" + std::string(method) + "_" + std::to_string(trial) + ".csv")));
      CHECK(fs::exists(dir / ("record_" + std::string(method) + "_" + std::to_string(trial) + ".json")));
    }
  CHECK(summary["methods"].size() == 3);
  // the adaptive solvers reach the regularized optimum; the bare baseline lags
  double opt = summary["optimal_relres_reg"].get<double>();
  for (const auto& mj : summary["methods"]) {
    if (mj["method"] == "aplicur" || mj["method"] == "aplicur-sf")
      CHECK(mj["median_final_relres"].get<double>() <= 1.05 * opt);
  }
  fs::remove_all(dir);
}

TEST_CASE("summary statistics replay from the trace files") {
  fs::path dir = fs::temp_directory_path() / "aplicur_bench_replay";
  fs::remove_all(dir);
  json j = baseline_config(dir.string());
  j["methods"] = json::array({json{{"method", "aplicur"}}});
  j["trials"] = 1;
  ExperimentConfig cfg = ExperimentConfig::parse(j);
  json summary = run_experiment(cfg, 1);

  std::ifstream rf(dir / "record_aplicur_0.json");
  json rec;
  rf >> rec;
  // the record carries the config echo and the selected-index dump
  CHECK(rec.contains("config"));
  CHECK(rec["config"]["nu_prec"] == 10.0);
  CHECK(rec.contains("cur"));
  CHECK(rec["cur"]["row_indices"].size() == rec["cur"]["col_indices"].size());
  CHECK(!rec["cur"]["rho_history"].empty());
  CHECK(rec["phases"].size() >= 1);

  // replay: the last sampled relres of the trace is the record's final value
  std::ifstream tf(dir / "trace_aplicur_0.csv");
  std::string line;
  std::getline(tf, line);
  CHECK(line == "phase,iter,phibar,relres,matvecs,wall_ms,reason");
  std::string last_relres;
  while (std::getline(tf, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string c;
    std::vector<std::string> cols;
    while (std::getline(ss, c, ',')) cols.push_back(c);
    if (cols.size() >= 4 && !cols[3].empty()) last_relres = cols[3];
  }
  REQUIRE(!last_relres.empty());
  CHECK(std::stod(last_relres) ==
        doctest::Approx(rec["final_relres"].get<double>()).epsilon(1e-12));
  // with one trial, the summary median equals the record value
  CHECK(summary["methods"][0]["median_final_relres"].get<double>() ==
        doctest::Approx(rec["final_relres"].get<double>()).epsilon(1e-15));
  fs::remove_all(dir);
}

TEST_CASE("reruns produce byte-identical traces apart from wall time") {
  fs::path d1 = fs::temp_directory_path() / "aplicur_det_1";
  fs::path d2 = fs::temp_directory_path() / "aplicur_det_2";
  fs::remove_all(d1);
  fs::remove_all(d2);
  json j = baseline_config(d1.string());
  j["trials"] = 1;
  ExperimentConfig c1 = ExperimentConfig::parse(j);
  j["output_dir"] = d2.string();
  ExperimentConfig c2 = ExperimentConfig::parse(j);
  run_experiment(c1, 2);
  run_experiment(c2, 1); // thread count must not matter either

  for (const char* method : {"aplicur", "aplicur-sf", "lsqr"}) {
    auto t1 = normalized_trace(d1 / ("trace_" + std::string(method) + "_0.csv"));
    auto t2 = normalized_trace(d2 / ("trace_" + std::string(method) + "_0.csv"));
    CHECK(t1 == t2);
  }
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("preconditioned spectrum utility") {
  ProblemInstance p;
  p.a = Matrix::dense(3, 3, {4, 0, 0, 0, 2, 0, 0, 0, 1});
  p.b = {1.0, 1.0, 1.0};
  p.mu = 0.0;

  SUBCASE("no preconditioner: spectrum of the system itself") {
    auto sig = preconditioned_spectrum(p, nullptr);
    CHECK(sig[0] == doctest::Approx(4.0).epsilon(1e-10));
    CHECK(sig[2] == doctest::Approx(1.0).epsilon(1e-10));
  }
  SUBCASE("augmented identity-preconditioner spectrum") {
    p.mu = 1.0;
    auto sig = preconditioned_spectrum(p, nullptr);
    CHECK(sig[0] == doctest::Approx(std::sqrt(17.0)).epsilon(1e-10));
    CHECK(sig[2] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-10));
  }
  SUBCASE("optimal reference flattens the leading block") {
    std::vector<double> s{5.0, 3.0, 1.0, 0.5, 0.2};
    ProblemInstance q;
    q.a = oracles::with_spectrum(10, 5, s, 3);
    q.b = oracles::random_vec(10, 4);
    q.mu = 0.1;
    SvdPreconditioner opt = optimal_precond(q.a, 2, q.mu);
    auto sig = preconditioned_spectrum(q, &opt);
    double expect = std::sqrt(1.0 + 0.01);
    CHECK(sig[0] == doctest::Approx(expect).epsilon(1e-8));
    CHECK(sig[1] == doctest::Approx(expect).epsilon(1e-8));
  }
  SUBCASE("size refusal names a limit") {
    ProblemInstance big;
    big.a = Matrix::dense_zeros(2000, 1500);
    big.b.assign(2000, 1.0);
    big.mu = 0.0;
    CHECK_THROWS_AS((void)preconditioned_spectrum(big, nullptr), Error);
  }
}

TEST_CASE("run record rejects a residual below the oracle") {
  // guard inside run_single, exercised through a crafted record
  RunRecord rec;
  rec.final_relres = 0.5;
  rec.optimal_relres = 0.4;
  CHECK(rec.final_relres >= rec.optimal_relres - 1e-12);
}

TEST_CASE("problem spec round trips through json") {
  json j = baseline_config("x");
  ProblemSpec s = ProblemSpec::parse(j["problem"]);
  json back = s.to_json();
  CHECK(back["m"] == 60);
  CHECK(back["spectrum"] == "sharp-1e7");
  CHECK(back["noise_mode"] == "relative");
  ProblemSpec s2 = ProblemSpec::parse(back);
  CHECK(s2.m == s.m);
  CHECK(s2.profile == s.profile);
}

TEST_SUITE_END();
