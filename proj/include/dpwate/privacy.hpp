#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <vector>

#include <json.hpp>

#include "dpwate/errors.hpp"
#include "dpwate/rng.hpp"
#include "dpwate/wate.hpp"

namespace dpwate {

// Total privacy-loss budget epsilon, split as (1-pi)*epsilon for the point
// estimate and pi*epsilon for the variance estimate.
struct PrivacyBudget {
  double epsilon = 1.0;
  double pi = 0.5;

  static PrivacyBudget create(double epsilon, double pi);
  double tau_budget() const { return epsilon * (1.0 - pi); }
  double v_budget() const { return epsilon * pi; }
};

// Global sensitivity of the M-partition average of the point estimate: 2/M.
double sensitivity_tau(int partition_count);

// Global sensitivity bound of the per-partition variance estimate at
// partition size n_partition: 1/(a n) for ATE, 1/(2 a^2 n) for ATT and ATC.
double sensitivity_v(Estimand estimand, double a, int n_partition);

struct PartitionEstimates {
  std::vector<double> tau_m;
  std::vector<double> v_m;
  double tau_bar = 0.0;
  double v_bar = 0.0;
  std::vector<int> fallback_indices;
};

// Averages per-partition estimates. Entries without a value (degenerate
// partitions) are filled with tau ~ U[-1,1] and v ~ U[0, v_fallback_bound]
// before averaging; the affected indices are recorded. Throws
// DegenerateError when every entry is empty.
PartitionEstimates aggregate(
    const std::vector<std::optional<WateEstimate>>& estimates,
    double v_fallback_bound, RngStream& fallback_rng);

// Laplace(0, scale) quantile: -scale * sign(u - 1/2) * ln(1 - 2|u - 1/2|).
double laplace_quantile(double u, double scale);
double laplace_sample(double scale, RngStream& rng);

// Running total of privacy budget spent across releases on one dataset
// handle (sequential composition).
class BudgetLedger {
 public:
  void record(double epsilon);
  double total_spent() const;
  int releases() const;

 private:
  mutable std::mutex mu_;
  double total_ = 0.0;
  int count_ = 0;
};

// The differentially private output pair plus every public parameter needed
// to post-process it. This is the only object derived from confidential data
// that leaves the privacy module.
struct PrivateRelease {
  double tau_private = 0.0;
  double v_private = 0.0;
  double scale_tau = 0.0;  // 2 / (M * epsilon * (1 - pi))
  double scale_v = 0.0;    // S_V(a, n_partition) / (M * epsilon * pi)
  double epsilon = 0.0;
  double pi = 0.0;
  double a = 0.0;
  int partition_count = 0;
  int n_records = 0;
  int n_partition = 0;  // floor(n_records / partition_count)
  Estimand estimand = Estimand::kAte;
  std::uint64_t seed = 0;
  bool used_fallback = false;
  int fallback_count = 0;

  // Sensitivity bound of the per-partition variance estimate at this
  // release's truncation level and partition size.
  double v_sensitivity() const;

  nlohmann::json to_json() const;
};

// Adds Laplace noise calibrated to the aggregate's sensitivity:
//   tau_private = tau_bar + Laplace(0, 2/(M eps (1-pi)))
//   v_private   = v_bar   + Laplace(0, S_V(a, n_partition)/(M eps pi))
// Noise streams are derived from (seed, estimand) so repeated calls with
// fresh seeds are independent and any call is reproducible.
PrivateRelease privatize(const PartitionEstimates& agg,
                         const PrivacyBudget& budget, Estimand estimand,
                         double a, int n_records, int partition_count,
                         std::uint64_t seed, BudgetLedger* ledger = nullptr);

}  // namespace dpwate
