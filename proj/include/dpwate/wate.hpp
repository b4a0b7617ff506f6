#pragma once

#include <Eigen/Dense>
#include <string>
#include <string_view>
#include <vector>

#include "dpwate/errors.hpp"

namespace dpwate {

// Target population: everyone (ATE), the treated (ATT), or the controls
// (ATC). The estimand fixes the tilting function t(x), the weights, the
// variance formula, and the sensitivity constants.
enum class Estimand { kAte, kAtt, kAtc };

const char* to_string(Estimand e);
Estimand parse_estimand(std::string_view name);

// t(x) evaluated at a propensity score: 1, e, or 1-e.
double tilt(Estimand estimand, double score);

enum class VarianceMode { kFitted, kConservative };

// Per-row conditional outcome variances v_z(x) = Var(y(z) | x), each in
// [0, 1/4]. Fitted mode uses per-arm logistic outcome regressions,
// v = p(1-p); an arm whose outcomes are constant gets v = 0 exactly, and an
// arm whose fit fails falls back to the conservative bound 1/4.
struct OutcomeVariances {
  Eigen::VectorXd v0;
  Eigen::VectorXd v1;
  bool treated_fallback = false;
  bool control_fallback = false;
};

OutcomeVariances estimate_outcome_variances(const Eigen::MatrixXd& covariates,
                                            const std::vector<int>& outcomes,
                                            const std::vector<int>& treatments,
                                            VarianceMode mode);

struct WateEstimate {
  double tau_hat = 0.0;  // always in [-1, 1] for binary outcomes
  double v_hat = 0.0;    // nonnegative; bounded by half the sensitivity bound
  int n_used = 0;
  Estimand estimand = Estimand::kAte;
  double a = 0.0;  // truncation level of the scores used (0 = untruncated)
};

// Ratio-of-weighted-sums treatment effect estimate. `scores` are the
// propensity scores to weight with (truncated or not, per the caller).
// Throws DegenerateError when either arm is empty.
double estimate_tau(const std::vector<int>& outcomes,
                    const std::vector<int>& treatments,
                    const Eigen::VectorXd& scores, Estimand estimand);

// Plug-in variance estimate:
//   sum_i t(x_i)^2 [v1_i / e_i + v0_i / (1 - e_i)] / (sum_i t(x_i))^2.
double estimate_variance(const std::vector<int>& outcomes,
                         const std::vector<int>& treatments,
                         const Eigen::VectorXd& scores,
                         const OutcomeVariances& variances, Estimand estimand);

WateEstimate estimate_pair(const std::vector<int>& outcomes,
                           const std::vector<int>& treatments,
                           const Eigen::VectorXd& scores,
                           const OutcomeVariances& variances,
                           Estimand estimand, double a);

}  // namespace dpwate
