#include "dpwate/pipeline.hpp"

#include <cmath>

namespace dpwate {

void PipelineParams::validate(int n_records) const {
  PrivacyBudget::create(epsilon, pi);
  if (!(a > 0.0 && a < 0.5)) {
    throw ParameterError("truncation level a must lie in (0, 1/2)");
  }
  if (partition_count < 1) {
    throw ParameterError("partition count must be at least 1");
  }
  if (n_records >= 0 && partition_count > n_records) {
    throw ParameterError("partition count " +
                         std::to_string(partition_count) +
                         " exceeds record count " + std::to_string(n_records));
  }
  if (draws < 1) {
    throw ParameterError("posterior draw count must be positive");
  }
}

namespace {

struct FittedPartition {
  CausalDataset subset;
  PropensityScores scores;
  OutcomeVariances variances;
  Eigen::VectorXd coefficients;
};

}  // namespace

PrivatePipelineResult run_private_pipeline(const CausalDataset& data,
                                           const std::vector<Estimand>& which,
                                           const PipelineParams& params,
                                           BudgetLedger* ledger) {
  params.validate(data.n());
  data.validate_for_estimation();
  if (which.empty()) {
    throw ParameterError("no estimand requested");
  }

  const Partitioning parts =
      random_partition(data, params.partition_count, params.seed);
  const PartitionHealth health = partition_health(data, parts);

  std::vector<std::optional<FittedPartition>> fits(params.partition_count);
  int degenerate = 0;
  for (int m = 0; m < params.partition_count; ++m) {
    if (health.degenerate[m]) {
      ++degenerate;
      continue;
    }
    FittedPartition fp;
    fp.subset = data.subset(parts.members[m]);
    try {
      PropensityModel model =
          fit_logistic(fp.subset.covariates, fp.subset.treatments);
      fp.coefficients = model.coefficients;
      fp.scores = predict_scores(model, fp.subset.covariates, params.a);
      fp.variances = estimate_outcome_variances(
          fp.subset.covariates, fp.subset.outcomes, fp.subset.treatments,
          params.variance_mode);
      fits[m] = std::move(fp);
    } catch (const FitError&) {
      ++degenerate;
    }
  }

  if (degenerate > 0 && !params.allow_fallback) {
    throw DegenerateError(
        std::to_string(degenerate) +
        " partition(s) lack two treated and two control records or failed "
        "to fit; re-run with a different seed, a smaller partition count, "
        "or the fallback enabled");
  }

  const int n_partition = data.n() / params.partition_count;
  const PrivacyBudget budget =
      PrivacyBudget::create(params.epsilon, params.pi);

  PrivatePipelineResult result;
  result.degenerate_partitions = degenerate;
  for (const auto& fit : fits) {
    if (fit) result.debug.partition_coefficients.push_back(fit->coefficients);
  }

  for (Estimand estimand : which) {
    std::vector<std::optional<WateEstimate>> estimates(params.partition_count);
    for (int m = 0; m < params.partition_count; ++m) {
      if (!fits[m]) continue;
      const auto& fp = *fits[m];
      estimates[m] =
          estimate_pair(fp.subset.outcomes, fp.subset.treatments,
                        fp.scores.truncated, fp.variances, estimand, params.a);
    }

    RngStream fallback_rng(params.seed, Stream::kFallback,
                           static_cast<std::uint64_t>(estimand));
    const double v_bound = sensitivity_v(estimand, params.a, n_partition);
    PartitionEstimates agg = aggregate(estimates, v_bound, fallback_rng);

    PrivateRelease release =
        privatize(agg, budget, estimand, params.a, data.n(),
                  params.partition_count, params.seed, ledger);

    PosteriorConfig config;
    config.draws = params.draws;
    config.sampler = params.sampler;
    PosteriorSummary summary = summarize(release, config, params.seed);

    result.debug.partition_estimates.emplace(estimand, std::move(agg));
    result.per_estimand.emplace(
        estimand, EstimandResult{std::move(release), std::move(summary)});
  }
  return result;
}

NonPrivateEstimate nonprivate_estimate(const CausalDataset& data,
                                       Estimand estimand, VarianceMode mode,
                                       std::optional<double> truncation) {
  data.validate_for_estimation();
  PropensityModel model = fit_logistic(data.covariates, data.treatments);
  Eigen::VectorXd scores = predict_probabilities(model, data.covariates);
  if (truncation) {
    if (!(*truncation > 0.0 && *truncation < 0.5)) {
      throw ParameterError("truncation level a must lie in (0, 1/2)");
    }
    const double a = *truncation;
    scores = scores.unaryExpr([a](double e) { return truncate_score(e, a); });
  }
  OutcomeVariances variances = estimate_outcome_variances(
      data.covariates, data.outcomes, data.treatments, mode);

  NonPrivateEstimate out;
  out.tau_hat = estimate_tau(data.outcomes, data.treatments, scores, estimand);
  out.v_hat = estimate_variance(data.outcomes, data.treatments, scores,
                                variances, estimand);
  const double half = 1.96 * std::sqrt(out.v_hat);
  out.ci_lower = out.tau_hat - half;
  out.ci_upper = out.tau_hat + half;
  return out;
}

}  // namespace dpwate
