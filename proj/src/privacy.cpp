#include "dpwate/privacy.hpp"

#include <cmath>

namespace dpwate {

PrivacyBudget PrivacyBudget::create(double epsilon, double pi) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw ParameterError("epsilon must be a positive real");
  }
  if (!(pi > 0.0 && pi < 1.0)) {
    throw ParameterError("pi must lie in (0, 1)");
  }
  return PrivacyBudget{epsilon, pi};
}

double sensitivity_tau(int partition_count) {
  if (partition_count < 1) {
    throw ParameterError("sensitivity_tau: partition count must be >= 1");
  }
  return 2.0 / partition_count;
}

double sensitivity_v(Estimand estimand, double a, int n_partition) {
  if (!(a > 0.0 && a < 0.5)) {
    throw ParameterError("sensitivity_v: a must lie in (0, 1/2)");
  }
  if (n_partition < 4) {
    throw ParameterError("sensitivity_v: partition size must be >= 4");
  }
  switch (estimand) {
    case Estimand::kAte:
      return 1.0 / (a * n_partition);
    case Estimand::kAtt:
    case Estimand::kAtc:
      return 1.0 / (2.0 * a * a * n_partition);
  }
  throw ParameterError("sensitivity_v: unknown estimand");
}

PartitionEstimates aggregate(
    const std::vector<std::optional<WateEstimate>>& estimates,
    double v_fallback_bound, RngStream& fallback_rng) {
  if (estimates.empty()) {
    throw ParameterError("aggregate: no partition estimates");
  }
  if (!(v_fallback_bound > 0.0)) {
    throw ParameterError("aggregate: fallback variance bound must be > 0");
  }
  size_t missing = 0;
  for (const auto& e : estimates) {
    if (!e) ++missing;
  }
  if (missing == estimates.size()) {
    throw DegenerateError("aggregate: every partition is degenerate");
  }

  PartitionEstimates out;
  out.tau_m.reserve(estimates.size());
  out.v_m.reserve(estimates.size());
  for (size_t m = 0; m < estimates.size(); ++m) {
    if (estimates[m]) {
      out.tau_m.push_back(estimates[m]->tau_hat);
      out.v_m.push_back(estimates[m]->v_hat);
    } else {
      out.tau_m.push_back(fallback_rng.uniform(-1.0, 1.0));
      out.v_m.push_back(fallback_rng.uniform(0.0, v_fallback_bound));
      out.fallback_indices.push_back(static_cast<int>(m));
    }
  }
  double tau_sum = 0.0, v_sum = 0.0;
  for (size_t m = 0; m < estimates.size(); ++m) {
    tau_sum += out.tau_m[m];
    v_sum += out.v_m[m];
  }
  out.tau_bar = tau_sum / static_cast<double>(estimates.size());
  out.v_bar = v_sum / static_cast<double>(estimates.size());
  return out;
}

double laplace_quantile(double u, double scale) {
  if (!(scale > 0.0)) {
    throw ParameterError("laplace_quantile: scale must be positive");
  }
  if (!(u >= 0.0 && u <= 1.0)) {
    throw ParameterError("laplace_quantile: u must lie in [0, 1]");
  }
  const double centered = u - 0.5;
  if (centered == 0.0) return 0.0;
  const double sign = centered > 0.0 ? 1.0 : -1.0;
  return -scale * sign * std::log1p(-2.0 * std::abs(centered));
}

double laplace_sample(double scale, RngStream& rng) {
  return laplace_quantile(rng.uniform_open(), scale);
}

void BudgetLedger::record(double epsilon) {
  std::lock_guard<std::mutex> lock(mu_);
  total_ += epsilon;
  ++count_;
}

double BudgetLedger::total_spent() const {
  std::lock_guard<std::mutex> lock(mu_);
  return total_;
}

int BudgetLedger::releases() const {
  std::lock_guard<std::mutex> lock(mu_);
  return count_;
}

double PrivateRelease::v_sensitivity() const {
  return sensitivity_v(estimand, a, n_partition);
}

nlohmann::json PrivateRelease::to_json() const {
  // Public parameters and the two noisy statistics only; confidential
  // intermediates never pass through here.
  return nlohmann::json{
      {"tau_private", tau_private},
      {"v_private", v_private},
      {"scale_tau", scale_tau},
      {"scale_v", scale_v},
      {"epsilon", epsilon},
      {"pi", pi},
      {"a", a},
      {"partition_count", partition_count},
      {"n_records", n_records},
      {"n_partition", n_partition},
      {"estimand", to_string(estimand)},
      {"seed", seed},
      {"used_fallback", used_fallback},
      {"fallback_count", fallback_count},
  };
}

PrivateRelease privatize(const PartitionEstimates& agg,
                         const PrivacyBudget& budget, Estimand estimand,
                         double a, int n_records, int partition_count,
                         std::uint64_t seed, BudgetLedger* ledger) {
  if (partition_count < 1 || n_records < partition_count) {
    throw ParameterError("privatize: invalid partition layout");
  }
  PrivacyBudget checked = PrivacyBudget::create(budget.epsilon, budget.pi);

  PrivateRelease rel;
  rel.epsilon = checked.epsilon;
  rel.pi = checked.pi;
  rel.a = a;
  rel.partition_count = partition_count;
  rel.n_records = n_records;
  rel.n_partition = n_records / partition_count;  // smallest partition
  rel.estimand = estimand;
  rel.seed = seed;
  rel.used_fallback = !agg.fallback_indices.empty();
  rel.fallback_count = static_cast<int>(agg.fallback_indices.size());

  rel.scale_tau =
      sensitivity_tau(partition_count) / checked.tau_budget();
  rel.scale_v = sensitivity_v(estimand, a, rel.n_partition) /
                (partition_count * checked.v_budget());

  const auto stream_index = static_cast<std::uint64_t>(estimand);
  RngStream tau_rng(seed, Stream::kNoiseTau, stream_index);
  RngStream v_rng(seed, Stream::kNoiseV, stream_index);
  rel.tau_private = agg.tau_bar + laplace_sample(rel.scale_tau, tau_rng);
  rel.v_private = agg.v_bar + laplace_sample(rel.scale_v, v_rng);

  if (ledger) {
    ledger->record(checked.epsilon);
  }
  return rel;
}

}  // namespace dpwate
