#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "dpwate/cli.hpp"
#include "dpwate/pipeline.hpp"
#include "dpwate/simlab.hpp"

using namespace dpwate;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int run_cli(std::vector<std::string> args) {
  std::vector<const char*> argv{"dpwate"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

fs::path test_dir() {
  fs::path dir = fs::temp_directory_path() / "dpwate_cli_tests";
  fs::create_directories(dir);
  return dir;
}

std::string write_file(const std::string& name, const std::string& body) {
  fs::path path = test_dir() / name;
  std::ofstream out(path);
  out << body;
  return path.string();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// A synthetic CSV large enough for a small partitioned analysis.
std::string synthetic_csv(int n, std::uint64_t seed) {
  ScenarioConfig config;
  config.n = n;
  SyntheticData sim = generate_scenario_data(config, seed);
  std::ostringstream csv;
  csv << "y,z,x1,x2,x3,x4\n";
  csv.precision(17);
  for (int i = 0; i < n; ++i) {
    csv << sim.data.outcomes[i] << ',' << sim.data.treatments[i];
    for (int j = 0; j < 4; ++j) csv << ',' << sim.data.covariates(i, j);
    csv << "\n";
  }
  return write_file("analyze_input_" + std::to_string(seed) + ".csv",
                    csv.str());
}

const char* kPlainSchema = R"({
  "outcome": "y", "treatment": "z",
  "covariates": ["x1", "x2", "x3", "x4"]
})";

}  // namespace

TEST_CASE("analyze produces a deterministic report with interval estimates") {
  const std::string input = synthetic_csv(1200, 314);
  const std::string out1 = (test_dir() / "report1.json").string();
  const std::string out2 = (test_dir() / "report2.json").string();

  std::vector<std::string> args{"analyze", "--input", input,
                                "--schema", kPlainSchema,
                                "--estimand", "all",
                                "--m", "6",
                                "--a", "0.05",
                                "--epsilon", "1.0",
                                "--pi", "0.5",
                                "--draws", "2000",
                                "--seed", "99",
                                "--out", out1};
  REQUIRE(run_cli(args) == 0);
  args.back() = out2;
  REQUIRE(run_cli(args) == 0);

  CHECK(read_file(out1) == read_file(out2));  // byte-identical reruns

  json report = json::parse(read_file(out1));
  CHECK(report["command"] == "analyze");
  CHECK(report["data"]["n"] == 1200);
  for (const char* est : {"ate", "att", "atc"}) {
    const json& block = report["results"][est];
    CHECK(block.contains("point"));
    CHECK(double(block["lower"]) <= double(block["point"]));
    CHECK(double(block["point"]) <= double(block["upper"]));
    CHECK(block["release"]["epsilon"] == 1.0);
  }
  // Three releases on the same dataset compose sequentially.
  CHECK(report["ledger"]["releases"] == 3);
  CHECK(double(report["ledger"]["total_epsilon_spent"]) ==
        doctest::Approx(3.0));
}

TEST_CASE("reports never leak confidential intermediates by default") {
  const std::string input = synthetic_csv(800, 2718);
  const std::string out = (test_dir() / "scan.json").string();
  std::vector<std::string> base{"analyze", "--input", input,
                                "--schema", kPlainSchema,
                                "--estimand", "ate",
                                "--m", "4",
                                "--draws", "1500",
                                "--seed", "5",
                                "--out", out};
  REQUIRE(run_cli(base) == 0);
  const std::string text = read_file(out);
  for (const char* forbidden :
       {"tau_bar", "v_bar", "per_partition", "coefficients",
        "unsafe_debug"}) {
    CHECK(text.find(forbidden) == std::string::npos);
  }

  // The exact confidential aggregate value must not appear either.
  Schema schema = Schema::parse(kPlainSchema);
  CausalDataset data = load_csv(input, schema);
  PipelineParams params;
  params.partition_count = 4;
  params.draws = 1500;
  params.seed = 5;
  PrivatePipelineResult ref =
      run_private_pipeline(data, {Estimand::kAte}, params);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g",
                ref.debug.partition_estimates.at(Estimand::kAte).tau_bar);
  CHECK(text.find(buf) == std::string::npos);

  SUBCASE("the debug flag exposes them explicitly") {
    auto debug_args = base;
    debug_args.push_back("--unsafe-debug");
    REQUIRE(run_cli(debug_args) == 0);
    const std::string debug_text = read_file(out);
    CHECK(debug_text.find("unsafe_debug") != std::string::npos);
    CHECK(debug_text.find("tau_bar") != std::string::npos);
    CHECK(debug_text.find("per_partition_tau") != std::string::npos);
    CHECK(debug_text.find(buf) != std::string::npos);
  }
}

TEST_CASE("parameter validation happens before any data access") {
  // The input path does not exist; a bad epsilon must still win (exit 2,
  // not the data error 3).
  CHECK(run_cli({"analyze", "--input", "/nonexistent.csv", "--schema",
                 kPlainSchema, "--epsilon", "-2"}) == 2);
  CHECK(run_cli({"analyze", "--input", "/nonexistent.csv", "--schema",
                 kPlainSchema, "--a", "0.7"}) == 2);
  CHECK(run_cli({"analyze", "--input", "/nonexistent.csv", "--schema",
                 kPlainSchema, "--draws", "10"}) == 2);
}

TEST_CASE("exit codes distinguish validation, data, and degeneracy") {
  const std::string input = synthetic_csv(300, 161);

  SUBCASE("missing file is a data error") {
    CHECK(run_cli({"analyze", "--input", "/nonexistent.csv", "--schema",
                   kPlainSchema}) == 3);
  }
  SUBCASE("an oversized partition count is a validation error") {
    CHECK(run_cli({"analyze", "--input", input, "--schema", kPlainSchema,
                   "--m", "301"}) == 2);
  }
  SUBCASE("bad flags are validation errors") {
    CHECK(run_cli({"analyze", "--no-such-flag"}) == 2);
    CHECK(run_cli({}) == 2);
  }
  SUBCASE("degenerate partitions fail closed without the fallback") {
    // One lonely treated record: almost every partition lacks treated rows.
    std::ostringstream csv;
    csv << "y,z,x1,x2,x3,x4\n";
    for (int i = 0; i < 60; ++i) {
      csv << (i % 2) << ',' << (i == 0 ? 1 : 0) << ",0.1,0.2,0.3,0.4\n";
    }
    const std::string degenerate = write_file("degenerate.csv", csv.str());
    CHECK(run_cli({"analyze", "--input", degenerate, "--schema",
                   kPlainSchema, "--m", "10", "--draws", "1000"}) == 4);
  }
}

TEST_CASE("fallback runs are labeled in the report") {
  // Five treated rows over four partitions: at least one partition must end
  // up with fewer than two treated records, and at least one with two or
  // more, for every possible assignment. A single covariate keeps the
  // healthy partitions' fits away from separation.
  ScenarioConfig config;
  config.n = 400;
  SyntheticData sim = generate_scenario_data(config, 404);
  std::ostringstream csv;
  csv << "y,z,x1\n";
  csv.precision(17);
  int treated_kept = 0;
  for (int i = 0; i < 400; ++i) {
    int z = sim.data.treatments[i];
    if (z == 1 && ++treated_kept > 5) z = 0;
    csv << sim.data.outcomes[i] << ',' << z << ','
        << sim.data.covariates(i, 0) << "\n";
  }
  const std::string input = write_file("fallback.csv", csv.str());
  const std::string out = (test_dir() / "fallback.json").string();
  const char* schema1 = R"({"outcome":"y","treatment":"z",
                            "covariates":["x1"]})";
  int code = run_cli({"analyze", "--input", input, "--schema", schema1,
                      "--m", "4", "--draws", "1000", "--seed", "7",
                      "--allow-fallback", "--out", out});
  REQUIRE(code == 0);
  json report = json::parse(read_file(out));
  CHECK(int(report["data"]["degenerate_partitions"]) > 0);
  CHECK(report["results"]["ate"]["release"]["used_fallback"] == true);
  CHECK(int(report["results"]["ate"]["release"]["fallback_count"]) > 0);
}

TEST_CASE("partition assignments export for audit") {
  const std::string input = synthetic_csv(500, 888);
  const std::string out = (test_dir() / "audit_report.json").string();
  const std::string parts = (test_dir() / "audit_parts.csv").string();
  REQUIRE(run_cli({"analyze", "--input", input, "--schema", kPlainSchema,
                   "--estimand", "ate", "--m", "5", "--draws", "1000",
                   "--seed", "3", "--out", out, "--export-partitions",
                   parts}) == 0);
  std::ifstream in(parts);
  std::string line;
  std::getline(in, line);
  CHECK(line == "row_index,partition_index");
  int rows = 0;
  int max_part = 0;
  while (std::getline(in, line)) {
    ++rows;
    max_part = std::max(max_part,
                        std::stoi(line.substr(line.find(',') + 1)));
  }
  CHECK(rows == 500);
  CHECK(max_part == 5);  // 1-based partition ids
}

TEST_CASE("the mcmc sampler runs end to end") {
  const std::string input = synthetic_csv(600, 909);
  const std::string out = (test_dir() / "mcmc_report.json").string();
  REQUIRE(run_cli({"analyze", "--input", input, "--schema", kPlainSchema,
                   "--estimand", "ate", "--m", "4", "--draws", "1500",
                   "--sampler", "mcmc", "--seed", "44", "--out", out}) == 0);
  json report = json::parse(read_file(out));
  CHECK(report["results"]["ate"]["sampler"] == "mcmc");
  CHECK(double(report["results"]["ate"]["lower"]) <=
        double(report["results"]["ate"]["upper"]));
}

TEST_CASE("plan reproduces the worked example through the CLI") {
  const std::string out = (test_dir() / "plan.json").string();
  REQUIRE(run_cli({"plan", "--epsilon", "1.0", "--pi", "0.5", "--a", "0.05",
                   "--n", "30162", "--delta", "0.10", "--out", out}) == 0);
  json report = json::parse(read_file(out));
  CHECK(report["plan"]["m_simplified"] == 80);
  CHECK(report["plan"]["m_full"] == 86);

  // Infeasible margin: the constraint is named in the warning.
  const std::string out2 = (test_dir() / "plan2.json").string();
  REQUIRE(run_cli({"plan", "--epsilon", "1.0", "--n", "100", "--a", "0.05",
                   "--delta", "0.10", "--out", out2}) == 0);
  json report2 = json::parse(read_file(out2));
  CHECK(report2["plan"]["full_formula_feasible"] == false);
  const std::string warnings = report2["plan"]["warnings"].dump();
  CHECK(warnings.find("delta^2/4 > 1/(2 a n)") != std::string::npos);
}

TEST_CASE("simulate sweeps scenarios and writes tabular reports") {
  const std::string config = write_file("study.conf",
                                        "# tiny smoke study\n"
                                        "n = 600\n"
                                        "eta = 2\n"
                                        "gamma = 0\n"
                                        "m = 4,6\n"
                                        "a = 0.05\n"
                                        "epsilon = 1\n"
                                        "replications = 2\n"
                                        "draws = 1200\n"
                                        "seed = 123\n"
                                        "estimands = ate\n"
                                        "threads = 2\n");
  const std::string out_dir = (test_dir() / "study_out").string();
  REQUIRE(run_cli({"simulate", "--config", config, "--out-dir", out_dir}) ==
          0);

  json report = json::parse(read_file(out_dir + "/study.json"));
  REQUIRE(report["scenarios"].size() == 2);  // m = 4 and m = 6
  for (const auto& block : report["scenarios"]) {
    // gamma = 0: the average true effect is zero up to Monte Carlo noise.
    CHECK(std::abs(double(block["results"]["ate"]["mean_true_tau"])) < 0.05);
    CHECK(block.contains("overlap_histogram"));
  }

  const std::string csv = read_file(out_dir + "/study.csv");
  CHECK(csv.find("scenario_1,") != std::string::npos);
  CHECK(csv.find("scenario_2,") != std::string::npos);
  CHECK(csv.find(",dp") != std::string::npos);
  CHECK(csv.find(",nonprivate") != std::string::npos);
  CHECK(fs::exists(out_dir + "/overlap.csv"));
}

TEST_CASE("simulate rejects malformed config files") {
  const std::string bad = write_file("bad.conf", "this is not a key value\n");
  CHECK(run_cli({"simulate", "--config", bad}) == 3);
  CHECK(run_cli({"simulate", "--config", "/nonexistent.conf"}) == 3);
}
