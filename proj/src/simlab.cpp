#include "dpwate/simlab.hpp"

#include <atomic>
#include <cmath>
#include <optional>
#include <sstream>
#include <thread>

namespace dpwate {
namespace {

double inverse_logit(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Eigen::VectorXd default_outcome_beta() {
  Eigen::VectorXd beta(5);
  beta << 0.15, -0.2, 0.3, -0.4, 0.6;
  return beta;
}

void ScenarioConfig::validate() const {
  if (n < 100) throw ParameterError("scenario: n must be at least 100");
  if (!(rho >= 0.0 && rho < 1.0)) {
    throw ParameterError("scenario: rho must lie in [0, 1)");
  }
  if (replications < 1) {
    throw ParameterError("scenario: at least one replication required");
  }
  if (estimands.empty()) {
    throw ParameterError("scenario: no estimand requested");
  }
  pipeline.validate(n);
}

Eigen::MatrixXd generate_covariates(int n, double rho, RngStream& rng) {
  if (!(rho >= 0.0 && rho < 1.0)) {
    throw ParameterError("generate_covariates: rho must lie in [0, 1)");
  }
  constexpr int kP = 4;
  const double shared = std::sqrt(rho);
  const double idio = std::sqrt(1.0 - rho);
  Eigen::MatrixXd x(n, kP);
  for (int i = 0; i < n; ++i) {
    const double g = rng.normal();
    for (int j = 0; j < kP; ++j) {
      x(i, j) = shared * g + idio * rng.normal();
    }
  }
  return x;
}

TreatmentAssignment assign_treatment(const Eigen::MatrixXd& covariates,
                                     double eta, RngStream& rng) {
  if (covariates.cols() != 4) {
    throw ParameterError("assign_treatment: expected 4 covariate columns");
  }
  const int n = static_cast<int>(covariates.rows());
  TreatmentAssignment out;
  out.z.resize(n);
  out.propensity.resize(n);
  for (int i = 0; i < n; ++i) {
    const double lp = 0.1 + eta * (0.2 * covariates(i, 0) +
                                   0.5 * covariates(i, 1) -
                                   0.25 * covariates(i, 2) -
                                   0.45 * covariates(i, 3));
    out.propensity[i] = inverse_logit(lp);
    out.z[i] = rng.uniform() < out.propensity[i] ? 1 : 0;
  }
  return out;
}

PotentialOutcomes generate_outcomes(const Eigen::MatrixXd& covariates,
                                    const std::vector<int>& z, double gamma,
                                    const Eigen::VectorXd& beta,
                                    RngStream& rng) {
  const int n = static_cast<int>(covariates.rows());
  if (static_cast<int>(z.size()) != n || beta.size() != covariates.cols() + 1) {
    throw ParameterError("generate_outcomes: inconsistent shapes");
  }
  PotentialOutcomes out;
  out.y0.resize(n);
  out.y1.resize(n);
  out.observed.resize(n);
  out.p0.resize(n);
  out.p1.resize(n);
  for (int i = 0; i < n; ++i) {
    double lp = beta[0];
    for (Eigen::Index j = 0; j < covariates.cols(); ++j) {
      lp += beta[j + 1] * covariates(i, j);
    }
    out.p0[i] = inverse_logit(lp);
    out.p1[i] = inverse_logit(lp + gamma);
    out.y0[i] = rng.uniform() < out.p0[i] ? 1 : 0;
    out.y1[i] = rng.uniform() < out.p1[i] ? 1 : 0;
    out.observed[i] = z[i] == 1 ? out.y1[i] : out.y0[i];
  }
  return out;
}

double TrueEffects::get(Estimand e) const {
  switch (e) {
    case Estimand::kAte:
      return ate;
    case Estimand::kAtt:
      return att;
    case Estimand::kAtc:
      return atc;
  }
  return 0.0;
}

TrueEffects true_effects(const Eigen::MatrixXd& covariates,
                         const std::vector<int>& z, double gamma,
                         const Eigen::VectorXd& beta) {
  const int n = static_cast<int>(covariates.rows());
  if (static_cast<int>(z.size()) != n || beta.size() != covariates.cols() + 1) {
    throw ParameterError("true_effects: inconsistent shapes");
  }
  double sum_all = 0.0, sum_t = 0.0, sum_c = 0.0;
  int n_t = 0, n_c = 0;
  for (int i = 0; i < n; ++i) {
    double lp = beta[0];
    for (Eigen::Index j = 0; j < covariates.cols(); ++j) {
      lp += beta[j + 1] * covariates(i, j);
    }
    const double diff = inverse_logit(lp + gamma) - inverse_logit(lp);
    sum_all += diff;
    if (z[i] == 1) {
      sum_t += diff;
      ++n_t;
    } else {
      sum_c += diff;
      ++n_c;
    }
  }
  if (n_t == 0 || n_c == 0) {
    throw DegenerateError("true_effects: ATT/ATC undefined without both arms");
  }
  return TrueEffects{sum_all / n, sum_t / n_t, sum_c / n_c};
}

SyntheticData generate_scenario_data(const ScenarioConfig& config,
                                     std::uint64_t seed) {
  RngStream cov_rng(seed, Stream::kCovariates);
  RngStream trt_rng(seed, Stream::kTreatment);
  RngStream out_rng(seed, Stream::kOutcomes);

  SyntheticData data;
  Eigen::MatrixXd x = generate_covariates(config.n, config.rho, cov_rng);
  TreatmentAssignment trt = assign_treatment(x, config.eta, trt_rng);
  const Eigen::VectorXd beta = default_outcome_beta();
  PotentialOutcomes outcomes =
      generate_outcomes(x, trt.z, config.gamma, beta, out_rng);

  data.truth = true_effects(x, trt.z, config.gamma, beta);
  data.true_propensity = std::move(trt.propensity);
  data.data.covariates = std::move(x);
  data.data.treatments = std::move(trt.z);
  data.data.outcomes = std::move(outcomes.observed);
  data.data.covariate_names = {"x1", "x2", "x3", "x4"};
  return data;
}

OverlapHistogram overlap_histogram(const Eigen::VectorXd& propensity,
                                   const std::vector<int>& z) {
  OverlapHistogram hist;
  for (Eigen::Index i = 0; i < propensity.size(); ++i) {
    int bin = std::min(19, static_cast<int>(propensity[i] * 20.0));
    bin = std::max(0, bin);
    if (z[static_cast<size_t>(i)] == 1) {
      ++hist.treated[bin];
    } else {
      ++hist.control[bin];
    }
  }
  return hist;
}

double overlap_statistic(const Eigen::VectorXd& propensity) {
  return (propensity.array() - 0.5).abs().mean();
}

nlohmann::json OverlapHistogram::to_json() const {
  nlohmann::json bins = nlohmann::json::array();
  for (int b = 0; b < 20; ++b) {
    bins.push_back(nlohmann::json{{"lower", b / 20.0},
                                  {"upper", (b + 1) / 20.0},
                                  {"treated", treated[b]},
                                  {"control", control[b]}});
  }
  return bins;
}

namespace {

struct EstimandReplication {
  double true_tau = 0.0;
  NonPrivateEstimate nonprivate;
  double dp_point = 0.0, dp_lower = 0.0, dp_upper = 0.0;
  int fallback_count = 0;
};

struct ReplicationOutcome {
  std::map<Estimand, EstimandReplication> per_estimand;
};

std::optional<ReplicationOutcome> run_replication(const ScenarioConfig& config,
                                                  int rep_index) {
  const std::uint64_t seed = config.base_seed + rep_index;
  try {
    SyntheticData sim = generate_scenario_data(config, seed);

    PipelineParams params = config.pipeline;
    params.seed = seed;
    PrivatePipelineResult dp =
        run_private_pipeline(sim.data, config.estimands, params);

    ReplicationOutcome out;
    for (Estimand e : config.estimands) {
      EstimandReplication r;
      r.true_tau = sim.truth.get(e);
      // Comparator uses raw scores: no partitions, truncation, or noise.
      r.nonprivate =
          nonprivate_estimate(sim.data, e, params.variance_mode);
      const auto& res = dp.per_estimand.at(e);
      r.dp_point = res.posterior.point;
      r.dp_lower = res.posterior.lower;
      r.dp_upper = res.posterior.upper;
      r.fallback_count = res.release.fallback_count;
      out.per_estimand.emplace(e, r);
    }
    return out;
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace

StudySummary run_study(const ScenarioConfig& config) {
  config.validate();
  const int R = config.replications;

  std::vector<std::optional<ReplicationOutcome>> slots(R);
  unsigned hw = std::thread::hardware_concurrency();
  int thread_count = config.threads > 0
                         ? config.threads
                         : static_cast<int>(hw == 0 ? 1 : hw);
  thread_count = std::min(thread_count, R);

  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= R) return;
      slots[i] = run_replication(config, i);
    }
  };
  if (thread_count <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(thread_count);
    for (int t = 0; t < thread_count; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  StudySummary summary;
  summary.config = config;
  {
    SyntheticData first = generate_scenario_data(config, config.base_seed);
    summary.overlap =
        overlap_histogram(first.true_propensity, first.data.treatments);
  }

  for (Estimand e : config.estimands) {
    EstimandStudySummary agg;
    double sum_true = 0.0, sumsq_true = 0.0;
    double np_se = 0.0, np_len = 0.0, np_cov = 0.0, np_point = 0.0;
    double dp_se = 0.0, dp_len = 0.0, dp_cov = 0.0, dp_point = 0.0;
    double abs_dev = 0.0;
    int used = 0;
    for (const auto& slot : slots) {
      if (!slot) continue;
      const auto& r = slot->per_estimand.at(e);
      ++used;
      sum_true += r.true_tau;
      sumsq_true += r.true_tau * r.true_tau;
      np_se += (r.nonprivate.tau_hat - r.true_tau) *
               (r.nonprivate.tau_hat - r.true_tau);
      np_len += r.nonprivate.ci_upper - r.nonprivate.ci_lower;
      np_cov += (r.nonprivate.ci_lower <= r.true_tau &&
                 r.true_tau <= r.nonprivate.ci_upper)
                    ? 1.0
                    : 0.0;
      np_point += r.nonprivate.tau_hat;
      dp_se += (r.dp_point - r.true_tau) * (r.dp_point - r.true_tau);
      dp_len += r.dp_upper - r.dp_lower;
      dp_cov +=
          (r.dp_lower <= r.true_tau && r.true_tau <= r.dp_upper) ? 1.0 : 0.0;
      dp_point += r.dp_point;
      abs_dev += std::abs(r.dp_point - r.nonprivate.tau_hat);
      if (r.fallback_count > 0) ++agg.fallback_replications;
    }
    if (used == 0) {
      summary.per_estimand.emplace(e, agg);
      continue;
    }
    const double du = static_cast<double>(used);
    agg.mean_true_tau = sum_true / du;
    const double var_true =
        std::max(0.0, sumsq_true / du - agg.mean_true_tau * agg.mean_true_tau);
    agg.sd_true_tau = std::sqrt(var_true);
    agg.nonprivate = PipelineStats{std::sqrt(np_se / du), np_cov / du,
                                   np_len / du, np_point / du};
    agg.dp = PipelineStats{std::sqrt(dp_se / du), dp_cov / du, dp_len / du,
                           dp_point / du};
    agg.mean_abs_deviation = abs_dev / du;
    summary.per_estimand.emplace(e, agg);
  }
  for (const auto& slot : slots) {
    if (!slot) ++summary.failed_replications;
  }
  return summary;
}

namespace {

nlohmann::json stats_to_json(const PipelineStats& s) {
  return nlohmann::json{{"rmse", s.rmse},
                        {"coverage", s.coverage},
                        {"mean_ci_length", s.mean_ci_length},
                        {"mean_point", s.mean_point}};
}

}  // namespace

nlohmann::json StudySummary::to_json() const {
  nlohmann::json per;
  for (const auto& [e, s] : per_estimand) {
    per[to_string(e)] = nlohmann::json{
        {"mean_true_tau", s.mean_true_tau},
        {"sd_true_tau", s.sd_true_tau},
        {"nonprivate", stats_to_json(s.nonprivate)},
        {"dp", stats_to_json(s.dp)},
        {"mean_abs_deviation", s.mean_abs_deviation},
        {"fallback_replications", s.fallback_replications},
    };
  }
  return nlohmann::json{
      {"scenario",
       {{"n", config.n},
        {"rho", config.rho},
        {"eta", config.eta},
        {"gamma", config.gamma},
        {"replications", config.replications},
        {"base_seed", config.base_seed},
        {"m", config.pipeline.partition_count},
        {"a", config.pipeline.a},
        {"epsilon", config.pipeline.epsilon},
        {"pi", config.pipeline.pi},
        {"draws", config.pipeline.draws},
        {"sampler",
         config.pipeline.sampler == PosteriorConfig::Sampler::kExact
             ? "exact"
             : "mcmc"}}},
      {"results", per},
      {"overlap_histogram", overlap.to_json()},
      {"failed_replications", failed_replications},
  };
}

std::string StudySummary::csv_header() {
  return "scenario,n,eta,gamma,m,a,epsilon,pi,estimand,pipeline,"
         "mean_true_tau,sd_true_tau,rmse,coverage,mean_ci_length,mean_point,"
         "mean_abs_deviation,fallback_replications,failed_replications";
}

std::vector<std::string> StudySummary::csv_rows(
    const std::string& scenario_id) const {
  std::vector<std::string> rows;
  for (const auto& [e, s] : per_estimand) {
    for (const char* pipeline : {"nonprivate", "dp"}) {
      const PipelineStats& st =
          std::string(pipeline) == "dp" ? s.dp : s.nonprivate;
      std::ostringstream row;
      row.precision(17);
      row << scenario_id << ',' << config.n << ',' << config.eta << ','
          << config.gamma << ',' << config.pipeline.partition_count << ','
          << config.pipeline.a << ',' << config.pipeline.epsilon << ','
          << config.pipeline.pi << ',' << to_string(e) << ',' << pipeline
          << ',' << s.mean_true_tau << ',' << s.sd_true_tau << ',' << st.rmse
          << ',' << st.coverage << ',' << st.mean_ci_length << ','
          << st.mean_point << ',' << s.mean_abs_deviation << ','
          << s.fallback_replications << ',' << failed_replications;
      rows.push_back(row.str());
    }
  }
  return rows;
}

}  // namespace dpwate
