#include "dpwate/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dpwate/dataset.hpp"
#include "dpwate/diagnostics.hpp"
#include "dpwate/pipeline.hpp"
#include "dpwate/simlab.hpp"

namespace dpwate::cli {
namespace {

using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file: " + path);
  out << text;
}

void emit_report(const json& report, const std::string& out_path) {
  const std::string text = report.dump(2) + "\n";
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
  } else {
    write_text(out_path, text);
  }
}

std::vector<Estimand> resolve_estimands(const std::string& name) {
  if (name == "all") {
    return {Estimand::kAte, Estimand::kAtt, Estimand::kAtc};
  }
  return {parse_estimand(name)};
}

PosteriorConfig::Sampler resolve_sampler(const std::string& name) {
  if (name == "exact") return PosteriorConfig::Sampler::kExact;
  if (name == "mcmc") return PosteriorConfig::Sampler::kMcmc;
  throw ParameterError("unknown sampler '" + name + "' (exact or mcmc)");
}

struct AnalyzeOptions {
  std::string input;
  std::string schema;
  std::string estimand = "all";
  int m = 100;
  double a = 0.05;
  double epsilon = 1.0;
  double pi = 0.5;
  int draws = 10000;
  std::uint64_t seed = 20240601;
  std::string sampler = "exact";
  std::string variance = "fitted";
  std::string out;
  std::string export_partitions;
  bool unsafe_debug = false;
  bool allow_fallback = false;
};

int cmd_analyze(const AnalyzeOptions& opt) {
  // Privacy parameters are checked before any data is touched.
  PipelineParams params;
  params.partition_count = opt.m;
  params.a = opt.a;
  params.epsilon = opt.epsilon;
  params.pi = opt.pi;
  params.draws = opt.draws;
  params.sampler = resolve_sampler(opt.sampler);
  params.allow_fallback = opt.allow_fallback;
  params.seed = opt.seed;
  if (opt.variance == "fitted") {
    params.variance_mode = VarianceMode::kFitted;
  } else if (opt.variance == "conservative") {
    params.variance_mode = VarianceMode::kConservative;
  } else {
    throw ParameterError("unknown variance mode '" + opt.variance + "'");
  }
  if (opt.draws < 1000) {
    throw ParameterError("interval quantiles need at least 1000 draws");
  }
  params.validate(-1);
  const std::vector<Estimand> estimands = resolve_estimands(opt.estimand);
  const Schema schema = Schema::parse(opt.schema);

  LoadReport load_report;
  const CausalDataset data = load_csv(opt.input, schema, &load_report);

  BudgetLedger ledger;
  PrivatePipelineResult result =
      run_private_pipeline(data, estimands, params, &ledger);

  if (!opt.export_partitions.empty()) {
    write_partition_csv(opt.export_partitions,
                        random_partition(data, opt.m, opt.seed));
  }

  json results;
  for (const auto& [estimand, res] : result.per_estimand) {
    json block = res.posterior.to_json(false);
    block["epsilon_spent"] = res.release.epsilon;
    block["release"] = res.release.to_json();
    results[to_string(estimand)] = block;
  }

  json report{
      {"tool", "dpwate"},
      {"version", kVersion},
      {"command", "analyze"},
      {"parameters",
       {{"input", opt.input},
        {"estimand", opt.estimand},
        {"m", opt.m},
        {"a", opt.a},
        {"epsilon", opt.epsilon},
        {"pi", opt.pi},
        {"draws", opt.draws},
        {"seed", opt.seed},
        {"sampler", opt.sampler},
        {"variance_mode", opt.variance},
        {"allow_fallback", opt.allow_fallback}}},
      {"data",
       {{"n", data.n()},
        {"p", data.p()},
        {"n_partition", data.n() / opt.m},
        {"rows_read", load_report.rows_read},
        {"rows_dropped_missing", load_report.rows_dropped_missing},
        {"degenerate_partitions", result.degenerate_partitions}}},
      {"results", results},
      {"ledger",
       {{"total_epsilon_spent", ledger.total_spent()},
        {"releases", ledger.releases()}}},
  };

  if (opt.unsafe_debug) {
    json debug;
    for (const auto& [estimand, agg] : result.debug.partition_estimates) {
      debug[to_string(estimand)] = json{{"tau_bar", agg.tau_bar},
                                        {"v_bar", agg.v_bar},
                                        {"per_partition_tau", agg.tau_m},
                                        {"per_partition_v", agg.v_m}};
    }
    json coefs = json::array();
    for (const auto& c : result.debug.partition_coefficients) {
      coefs.push_back(std::vector<double>(c.data(), c.data() + c.size()));
    }
    debug["partition_coefficients"] = coefs;
    report["unsafe_debug"] = debug;
  }

  emit_report(report, opt.out);
  return 0;
}

// ---------------------------------------------------------------------------
// simulate

struct FlatConfig {
  std::map<std::string, std::string> values;

  bool has(const std::string& key) const { return values.count(key) > 0; }
  std::string get(const std::string& key, const std::string& fallback) const {
    auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
  }
};

FlatConfig parse_flat_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file: " + path);
  FlatConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto strip = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    line = strip(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError("config line " + std::to_string(line_no) +
                      ": expected key = value");
    }
    cfg.values[strip(line.substr(0, eq))] = strip(line.substr(eq + 1));
  }
  return cfg;
}

std::vector<double> parse_number_list(const std::string& text,
                                      const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (...) {
      throw ParameterError("config key '" + key + "': bad number '" + item +
                           "'");
    }
  }
  if (out.empty()) throw ParameterError("config key '" + key + "' is empty");
  return out;
}

struct SimulateOptions {
  std::string config;
  std::string out_dir = ".";
};

int cmd_simulate(const SimulateOptions& opt) {
  const FlatConfig cfg = parse_flat_config(opt.config);

  ScenarioConfig base;
  base.replications = std::stoi(cfg.get("replications", "100"));
  base.base_seed = std::stoull(cfg.get("seed", "20240601"));
  base.rho = std::stod(cfg.get("rho", "0.2"));
  base.pipeline.pi = std::stod(cfg.get("pi", "0.5"));
  base.pipeline.draws = std::stoi(cfg.get("draws", "10000"));
  base.pipeline.sampler = resolve_sampler(cfg.get("sampler", "exact"));
  base.pipeline.allow_fallback =
      cfg.get("allow_fallback", "true") == "true";
  base.pipeline.variance_mode =
      cfg.get("variance_mode", "fitted") == "conservative"
          ? VarianceMode::kConservative
          : VarianceMode::kFitted;
  base.threads = std::stoi(cfg.get("threads", "0"));
  {
    std::vector<Estimand> requested;
    std::stringstream ss(cfg.get("estimands", "ate,att,atc"));
    std::string item;
    while (std::getline(ss, item, ',')) {
      requested.push_back(parse_estimand(item));
    }
    base.estimands = requested;
  }

  // Comma-separated values in any of these keys sweep that dimension; the
  // scenarios form the Cartesian product.
  const auto ns = parse_number_list(cfg.get("n", "10000"), "n");
  const auto etas = parse_number_list(cfg.get("eta", "2"), "eta");
  const auto gammas = parse_number_list(cfg.get("gamma", "1"), "gamma");
  const auto ms = parse_number_list(cfg.get("m", "100"), "m");
  const auto as = parse_number_list(cfg.get("a", "0.05"), "a");
  const auto epsilons = parse_number_list(cfg.get("epsilon", "1"), "epsilon");

  std::vector<ScenarioConfig> scenarios;
  for (double n : ns) {
    for (double eta : etas) {
      for (double gamma : gammas) {
        for (double m : ms) {
          for (double a : as) {
            for (double epsilon : epsilons) {
              ScenarioConfig sc = base;
              sc.n = static_cast<int>(n);
              sc.eta = eta;
              sc.gamma = gamma;
              sc.pipeline.partition_count = static_cast<int>(m);
              sc.pipeline.a = a;
              sc.pipeline.epsilon = epsilon;
              sc.validate();
              scenarios.push_back(sc);
            }
          }
        }
      }
    }
  }

  std::filesystem::create_directories(opt.out_dir);

  json blocks = json::array();
  std::ostringstream csv;
  csv << StudySummary::csv_header() << "\n";
  std::ostringstream overlap_csv;
  overlap_csv << "scenario,bin_lower,bin_upper,treated,control\n";
  overlap_csv.precision(17);

  for (size_t s = 0; s < scenarios.size(); ++s) {
    const std::string id = "scenario_" + std::to_string(s + 1);
    StudySummary summary = run_study(scenarios[s]);
    json block = summary.to_json();
    block["scenario_id"] = id;
    blocks.push_back(block);
    for (const auto& row : summary.csv_rows(id)) csv << row << "\n";
    for (int b = 0; b < 20; ++b) {
      overlap_csv << id << ',' << b / 20.0 << ',' << (b + 1) / 20.0 << ','
                  << summary.overlap.treated[b] << ','
                  << summary.overlap.control[b] << "\n";
    }
  }

  json report{{"tool", "dpwate"},
              {"version", kVersion},
              {"command", "simulate"},
              {"config_file", opt.config},
              {"scenarios", blocks}};
  write_text(opt.out_dir + "/study.json", report.dump(2) + "\n");
  write_text(opt.out_dir + "/study.csv", csv.str());
  write_text(opt.out_dir + "/overlap.csv", overlap_csv.str());
  std::cout << "wrote " << scenarios.size() << " scenario(s) to "
            << opt.out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// plan

struct PlanOptions {
  double epsilon = 1.0;
  double pi = 0.5;
  double a = 0.1;  // recommended default truncation level
  long n = 0;
  double delta = 0.1;
  double treated_share = 0.5;
  std::string out;
};

int cmd_plan(const PlanOptions& opt) {
  PlanResult plan =
      plan_m(opt.epsilon, opt.pi, opt.a, opt.n, opt.delta, opt.treated_share);
  json report{{"tool", "dpwate"},
              {"version", kVersion},
              {"command", "plan"},
              {"plan", plan.to_json()}};
  emit_report(report, opt.out);
  return 0;
}

json error_json(const std::string& type, const std::string& message) {
  return json{{"error", {{"type", type}, {"message", message}}}};
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Differentially private weighted average treatment effects"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  AnalyzeOptions analyze;
  CLI::App* cmd_a = app.add_subcommand(
      "analyze", "Private WATE point and interval estimates from a CSV");
  cmd_a->add_option("--input", analyze.input, "Input CSV path")->required();
  cmd_a->add_option("--schema", analyze.schema,
                    "Schema JSON (inline or a file path)")
      ->required();
  cmd_a->add_option("--estimand", analyze.estimand,
                    "ate, att, atc, or all");
  cmd_a->add_option("--m", analyze.m, "Number of partitions");
  cmd_a->add_option("--a", analyze.a, "Propensity truncation level");
  cmd_a->add_option("--epsilon", analyze.epsilon, "Total privacy budget");
  cmd_a->add_option("--pi", analyze.pi,
                    "Budget fraction for the variance estimate");
  cmd_a->add_option("--draws", analyze.draws, "Posterior draws");
  cmd_a->add_option("--seed", analyze.seed, "RNG seed");
  cmd_a->add_option("--sampler", analyze.sampler, "exact or mcmc");
  cmd_a->add_option("--variance", analyze.variance,
                    "Outcome variance model: fitted or conservative");
  cmd_a->add_option("--out", analyze.out, "Report path (default stdout)");
  cmd_a->add_option("--export-partitions", analyze.export_partitions,
                    "Write the partition assignment CSV for audit");
  cmd_a->add_flag("--unsafe-debug", analyze.unsafe_debug,
                  "Include confidential intermediates in the report");
  cmd_a->add_flag("--allow-fallback", analyze.allow_fallback,
                  "Replace degenerate partitions by uniform draws");

  SimulateOptions simulate;
  CLI::App* cmd_s =
      app.add_subcommand("simulate", "Repeated-replication study driver");
  cmd_s->add_option("--config", simulate.config, "Flat key=value config file")
      ->required();
  cmd_s->add_option("--out-dir", simulate.out_dir, "Report directory");

  PlanOptions plan;
  CLI::App* cmd_p = app.add_subcommand(
      "plan", "Rule-of-thumb partition count for a target margin of error");
  cmd_p->add_option("--epsilon", plan.epsilon, "Total privacy budget")
      ->required();
  cmd_p->add_option("--pi", plan.pi,
                    "Budget fraction for the variance estimate");
  cmd_p->add_option("--a", plan.a, "Propensity truncation level");
  cmd_p->add_option("--n", plan.n, "Record count")->required();
  cmd_p->add_option("--delta", plan.delta, "Target margin of error")
      ->required();
  cmd_p->add_option("--treated-share", plan.treated_share,
                    "Anticipated treated fraction (risk check only)");
  cmd_p->add_option("--out", plan.out, "Report path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << error_json("validation", e.what()).dump() << "\n";
    return 2;
  }

  try {
    if (cmd_a->parsed()) return cmd_analyze(analyze);
    if (cmd_s->parsed()) return cmd_simulate(simulate);
    if (cmd_p->parsed()) return cmd_plan(plan);
    std::cerr << error_json("validation", "no subcommand given").dump()
              << "\n";
    return 2;
  } catch (const ParameterError& e) {
    std::cerr << error_json("validation", e.what()).dump() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << error_json("data", e.what()).dump() << "\n";
    return 3;
  } catch (const DegenerateError& e) {
    std::cerr << error_json("degenerate_partition", e.what()).dump() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << error_json("internal", e.what()).dump() << "\n";
    return 1;
  }
}

}  // namespace dpwate::cli
