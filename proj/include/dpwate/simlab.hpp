#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpwate/pipeline.hpp"
#include "dpwate/rng.hpp"
#include "dpwate/wate.hpp"

namespace dpwate {

// Outcome-model coefficients (beta0..beta4) of the synthetic generator.
Eigen::VectorXd default_outcome_beta();

struct ScenarioConfig {
  int n = 10000;
  double rho = 0.2;   // pairwise covariate correlation
  double eta = 2.0;   // overlap strength in the treatment model
  double gamma = 1.0; // additive treatment effect on the logit scale
  int replications = 100;
  std::uint64_t base_seed = 20240601;
  std::vector<Estimand> estimands{Estimand::kAte, Estimand::kAtt,
                                  Estimand::kAtc};
  PipelineParams pipeline;  // pipeline.seed is derived per replication
  int threads = 0;          // 0 = hardware concurrency

  void validate() const;
};

// Covariates with unit variances and constant pairwise correlation rho,
// via x = sqrt(rho) g 1 + sqrt(1-rho) eps with g a shared scalar normal.
Eigen::MatrixXd generate_covariates(int n, double rho, RngStream& rng);

struct TreatmentAssignment {
  std::vector<int> z;
  Eigen::VectorXd propensity;  // true assignment probabilities
};
TreatmentAssignment assign_treatment(const Eigen::MatrixXd& covariates,
                                     double eta, RngStream& rng);

struct PotentialOutcomes {
  std::vector<int> y0;
  std::vector<int> y1;
  std::vector<int> observed;  // z*y1 + (1-z)*y0
  Eigen::VectorXd p0;         // P(y(0)=1 | x)
  Eigen::VectorXd p1;         // P(y(1)=1 | x)
};
PotentialOutcomes generate_outcomes(const Eigen::MatrixXd& covariates,
                                    const std::vector<int>& z, double gamma,
                                    const Eigen::VectorXd& beta,
                                    RngStream& rng);

struct TrueEffects {
  double ate = 0.0;
  double att = 0.0;
  double atc = 0.0;
  double get(Estimand e) const;
};

// Exact per-sample averages of P(y(1)=1|x) - P(y(0)=1|x) over all units,
// treated units, and control units; computed from the generating
// probabilities, never from sampled outcomes.
TrueEffects true_effects(const Eigen::MatrixXd& covariates,
                         const std::vector<int>& z, double gamma,
                         const Eigen::VectorXd& beta);

struct SyntheticData {
  CausalDataset data;
  Eigen::VectorXd true_propensity;
  TrueEffects truth;
};
SyntheticData generate_scenario_data(const ScenarioConfig& config,
                                     std::uint64_t seed);

// 20-bin histogram of true propensity scores per arm (overlap diagnostic).
struct OverlapHistogram {
  std::vector<int> treated{std::vector<int>(20, 0)};
  std::vector<int> control{std::vector<int>(20, 0)};
  nlohmann::json to_json() const;
};
OverlapHistogram overlap_histogram(const Eigen::VectorXd& propensity,
                                   const std::vector<int>& z);
// Mean |e - 1/2|; larger values mean less treated/control overlap.
double overlap_statistic(const Eigen::VectorXd& propensity);

struct PipelineStats {
  double rmse = 0.0;
  double coverage = 0.0;
  double mean_ci_length = 0.0;
  double mean_point = 0.0;
};

struct EstimandStudySummary {
  double mean_true_tau = 0.0;
  double sd_true_tau = 0.0;
  PipelineStats nonprivate;
  PipelineStats dp;
  // Mean over replications of |DP point - non-private point estimate|.
  double mean_abs_deviation = 0.0;
  int fallback_replications = 0;
};

struct StudySummary {
  ScenarioConfig config;
  std::map<Estimand, EstimandStudySummary> per_estimand;
  OverlapHistogram overlap;
  int failed_replications = 0;

  nlohmann::json to_json() const;
  // One row per estimand x pipeline, matching the CSV report layout.
  std::vector<std::string> csv_rows(const std::string& scenario_id) const;
  static std::string csv_header();
};

// Repeated-replication driver: fresh data per replication, both the
// non-private and the private pipeline, reduced into RMSE / coverage /
// mean interval length per estimand. Replications run in parallel and are
// reduced deterministically by index; per-replication failures are counted
// rather than fatal.
StudySummary run_study(const ScenarioConfig& config);

}  // namespace dpwate
