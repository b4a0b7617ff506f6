#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "dpwate/dataset.hpp"
#include "dpwate/posterior.hpp"
#include "dpwate/privacy.hpp"
#include "dpwate/propensity.hpp"
#include "dpwate/wate.hpp"

namespace dpwate {

struct PipelineParams {
  int partition_count = 100;
  double a = 0.05;
  double epsilon = 1.0;
  double pi = 0.5;
  int draws = 10000;
  PosteriorConfig::Sampler sampler = PosteriorConfig::Sampler::kExact;
  VarianceMode variance_mode = VarianceMode::kFitted;
  // When false, any degenerate partition aborts the run instead of being
  // replaced by the uniform-draw fallback.
  bool allow_fallback = false;
  std::uint64_t seed = 0;

  void validate(int n_records) const;
};

struct EstimandResult {
  PrivateRelease release;
  PosteriorSummary posterior;
};

// Confidential intermediates, exposed only behind an explicit debug flag.
struct PipelineDebug {
  std::map<Estimand, PartitionEstimates> partition_estimates;
  std::vector<Eigen::VectorXd> partition_coefficients;
};

struct PrivatePipelineResult {
  std::map<Estimand, EstimandResult> per_estimand;
  int degenerate_partitions = 0;
  PipelineDebug debug;
};

// The end-to-end private release: partition the data, fit per-partition
// propensity and outcome models, estimate each requested WATE, aggregate
// with the fallback rule, add Laplace noise, and post-process into point
// and interval estimates. One partitioning and one set of fits is shared
// across estimands; each estimand consumes its own privacy budget.
PrivatePipelineResult run_private_pipeline(const CausalDataset& data,
                                           const std::vector<Estimand>& which,
                                           const PipelineParams& params,
                                           BudgetLedger* ledger = nullptr);

struct NonPrivateEstimate {
  double tau_hat = 0.0;
  double v_hat = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
};

// Single full-data fit with no partitions or noise; truncation optional
// (nullopt = raw scores). CI is the large-sample tau_hat +/- 1.96 sqrt(v).
NonPrivateEstimate nonprivate_estimate(const CausalDataset& data,
                                       Estimand estimand, VarianceMode mode,
                                       std::optional<double> truncation = {});

}  // namespace dpwate
