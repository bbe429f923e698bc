// Drives the command-line binary through a scratch directory: synthetic
// world -> ingest -> estimate -> decompose -> counterfactual -> dml ->
// sensitivity, then each promised exit code. argv[1] is the binary path.
#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

int failures = 0;
std::string cli;

void check(bool ok, const std::string& what) {
  std::printf("%s  %s\n", ok ? "ok " : "FAIL", what.c_str());
  if (!ok) ++failures;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void put(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

int run(const std::string& args, std::string* output = nullptr) {
  const std::string cmd = cli + " " + args + " > last_output.txt 2>&1";
  const int rc = std::system(cmd.c_str());
  if (output) *output = slurp("last_output.txt");
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(cell);
    rows.push_back(row);
  }
  return rows;
}

const std::string kConfig = R"({
  "data": {
    "cases_deaths": "data/cases_deaths.csv",
    "tests": "data/tests.csv",
    "policies": "data/policies.csv",
    "mobility": "data/mobility.csv",
    "covariates": "data/covariates.csv"
  },
  "panel_series": "panel/panel_series.csv",
  "panel_covariates": "panel/panel_covariates.csv",
  "window_start": "2020-03-01",
  "window_end": "2020-05-20",
  "bootstrap_draws": 60,
  "seed": 21
}
)";

void test_pipeline_recovery() {
  check(run("sird-synth --seed 21 --out data --states 24 --days 122") == 0, "sird-synth runs");
  check(fs::exists("data/truth.json"), "sird-synth writes truth.json");

  put("cfg.json", kConfig);
  check(run("ingest --config cfg.json --out panel") == 0, "ingest runs");
  check(fs::exists("panel/panel_series.csv") && fs::exists("panel/panel_covariates.csv"),
        "ingest writes the panel pair");

  check(run("estimate --config cfg.json --out est") == 0, "estimate runs");
  const auto eq = nlohmann::json::parse(slurp("est/equations.json"));
  const auto truth = nlohmann::json::parse(slurp("data/truth.json"));
  check(eq["behaviors"].size() == 4, "estimate fits four behavior equations");
  // The generator reports per-day effects; weekly growth sees seven days.
  bool recovered = true;
  for (const auto& [name, theta] : truth["theta_total"].items()) {
    const double want = 7.0 * theta.get<double>();
    const double got = eq["reduced"]["coefficients"][name]["estimate"].get<double>();
    if (std::abs(got - want) > 0.2 * std::abs(want)) {
      recovered = false;
      std::printf("      %s: reduced %.4f vs implied %.4f\n", name.c_str(), got, want);
    }
  }
  check(recovered, "reduced-form policy coefficients within 20% of generator truth");
}

void test_decompose() {
  check(run("decompose --config cfg.json --out dec") == 0, "decompose runs");
  const auto j = nlohmann::json::parse(slurp("dec/effects.json"));
  bool closure = true, averaged = true;
  for (const auto& row : j["rows"]) {
    const double direct = row["direct"]["estimate"].get<double>();
    const double indirect = row["indirect"]["estimate"].get<double>();
    const double total = row["total"]["estimate"].get<double>();
    const double reduced = row["reduced"]["estimate"].get<double>();
    const double average = row["average"]["estimate"].get<double>();
    if (std::abs(direct + indirect - total) > 1e-12) closure = false;
    if (std::abs(0.5 * (total + reduced) - average) > 1e-12) averaged = false;
  }
  check(closure, "direct + indirect equals total in effects.json");
  check(averaged, "average column is the mean of total and reduced");
  check(!read_csv("dec/effects.csv").empty(), "decompose writes effects.csv");
}

void test_counterfactual() {
  put("identity.json", R"({"name": "identity", "rules": [], "coef_column": "average"}
)");
  check(run("counterfactual --config cfg.json --out cf "
            "--scenario identity.json --scenario mask_march14") == 0,
        "counterfactual runs builtin and file scenarios");

  // No rules means no contrast: 0 growth change, ratio 1, 0 relative cases.
  bool exact = true;
  for (const char* file : {"cf/identity_trajectory.csv", "cf/identity_endpoint.csv"}) {
    const auto rows = read_csv(file);
    if (rows.size() < 2) exact = false;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const double want = rows[i][3] == "weekly_ratio" ? 1.0 : 0.0;
      for (int c = 4; c <= 6; ++c)
        if (std::stod(rows[i][c]) != want) exact = false;
    }
  }
  check(exact, "identity scenario yields the null contrast exactly");

  const auto rows = read_csv("cf/mask_march14_endpoint.csv");
  bool fewer_cases = false;
  for (const auto& r : rows)
    if (r[0] == "national" && r[3] == "cumulative_relative")
      fewer_cases = std::stod(r[6]) < 0;  // upper band below zero
  check(fewer_cases, "early mask mandate lowers national cumulative cases");
}

void test_dml() {
  check(run("dml --config cfg.json --out dml --target mask_employees --lambda 0.02") == 0,
        "dml runs");
  const auto j = nlohmann::json::parse(slurp("dml/dml.json"));
  const double theta = j["theta"].get<double>();
  const auto eq = nlohmann::json::parse(slurp("est/equations.json"));
  const double ols = eq["reduced"]["coefficients"]["mask_employees"]["estimate"].get<double>();
  check(std::isfinite(theta) && j["se"].get<double>() > 0, "dml reports finite theta and se");
  check(theta < 0 && std::abs(theta - ols) < std::abs(ols),
        "dml mask coefficient stays near the least-squares one");
}

void test_sensitivity() {
  check(run("sensitivity --config cfg.json --out sens --variant 1") == 0, "sensitivity runs");
  const auto rows = read_csv("sens/whisker.csv");
  // Header plus 4 policies x (2 timings x 2 outcomes x 2 info sets).
  check(rows.size() == 1 + 32, "variant 1 grid has 32 cells");
  bool all_ok = rows.size() > 1;
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].back() != "ok") all_ok = false;
  check(all_ok, "all baseline cells estimate cleanly");
}

void test_rerun_determinism() {
  check(run("estimate --config cfg.json --out est2") == 0, "estimate rerun");
  const std::string manifest = slurp("est2/manifest.txt");
  check(run("estimate --config cfg.json --out est2") == 0, "estimate rerun again");
  const std::string manifest2 = slurp("est2/manifest.txt");

  check(slurp("est/equations.json") == slurp("est2/equations.json"),
        "equations.json is byte-identical across reruns");
  const auto rest = [](const std::string& m) { return m.substr(m.find('\n') + 1); };
  check(manifest.rfind("generated_at: ", 0) == 0 && rest(manifest) == rest(manifest2),
        "manifests differ at most in the generated_at line");
}

void test_exit_codes() {
  std::string out;
  put("bad.json", R"({"lags": {"case": "soon"}})");
  check(run("estimate --config bad.json --out e1", &out) == 1 &&
            out.find("lags.case") != std::string::npos,
        "config type violation exits 1 naming the field");

  put("unknown.json", R"({"window_stop": "2020-06-01"})");
  check(run("estimate --config unknown.json --out e1", &out) == 1 &&
            out.find("window_stop") != std::string::npos,
        "unknown config field exits 1 naming the field");

  check(run("estimate --out e1") == 1, "estimate without a panel exits 1");

  put("missing.json", R"({"panel_series": "no.csv", "panel_covariates": "no2.csv"})");
  check(run("estimate --config missing.json --out e1", &out) == 2 &&
            out.find("no.csv") != std::string::npos,
        "missing panel file exits 2 naming the file");

  check(run("counterfactual --config cfg.json --out e1 --scenario nope.json") == 2,
        "missing scenario file exits 2");

  check(run("estimate --bogus-flag") == 1, "unknown flag exits 1");
  check(run("--help") == 0, "--help exits 0");

  // A noiseless world makes behavior an exact function of policy; the
  // structural design loses rank and the failure is numerical, not data.
  check(run("sird-synth --seed 21 --out data0 --states 12 --days 100 --noise 0") == 0,
        "noiseless generator runs");
  put("cfg0.json", R"({
    "data": {"cases_deaths": "data0/cases_deaths.csv", "tests": "data0/tests.csv",
             "policies": "data0/policies.csv", "mobility": "data0/mobility.csv",
             "covariates": "data0/covariates.csv"},
    "panel_series": "panel0/panel_series.csv",
    "panel_covariates": "panel0/panel_covariates.csv",
    "window_start": "2020-03-01", "window_end": "2020-04-25", "seed": 21
  })");
  check(run("ingest --config cfg0.json --out panel0") == 0, "noiseless ingest runs");
  check(run("estimate --config cfg0.json --out e3", &out) == 3 &&
            out.find("rank deficient") != std::string::npos,
        "rank-deficient design exits 3");
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: cli_tests <binary>\n");
    return 2;
  }
  cli = fs::absolute(argv[1]).string();

  const fs::path work = fs::temp_directory_path() / "covidsem_cli_test";
  fs::remove_all(work);
  fs::create_directories(work);
  fs::current_path(work);

  test_pipeline_recovery();
  test_decompose();
  test_counterfactual();
  test_dml();
  test_sensitivity();
  test_rerun_determinism();
  test_exit_codes();

  std::printf("%s: %d failure(s)\n", failures == 0 ? "PASS" : "FAIL", failures);
  return failures == 0 ? 0 : 1;
}
