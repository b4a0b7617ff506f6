#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "dpwate/errors.hpp"

namespace dpwate {

// Closed-form KL divergence between N(tau_bar, v_bar) and N(tau, v),
// decomposed into its three additive components:
//   u1 = (tau_bar - tau)^2 / (2v)
//   u2 = v_bar / (2v) - 1/2
//   u3 = -(1/2) log(v_bar / v)
struct KlDiagnostic {
  double tau_bar, v_bar, tau, v;
  double u1, u2, u3;
  double kl;  // u1 + u2 + u3, always >= 0

  nlohmann::json to_json() const;
};

KlDiagnostic kl_normal(double tau_bar, double v_bar, double tau, double v);

// Tail-bound expression for the probability that the KL diagnostic exceeds
// c:  2 exp(-M eps (1-pi) sqrt(2 V c) / (6 sqrt(3))) + 4 exp(-M eps pi V c / 9).
// This is an asymptotic bound; it is evaluated for inspection, never
// asserted at finite sample sizes.
double theorem3_bound(double m, double epsilon, double pi, double v, double c);

// The two single-statistic tail terms behind the bound above:
//   point term     2 exp(-M eps (1-pi) c / 6)
//   variance term  2 exp(-M eps pi c / 6)
struct TailBounds {
  double point_term;
  double variance_term;
};
TailBounds concentration_terms(double m, double epsilon, double pi, double c);

// Rule-of-thumb partition count for a target margin of error delta:
//   full:       M ~ (2 / (eps (1-pi))) / sqrt(delta^2/4 - 1/(2 a n))
//   simplified: M ~ 4 / (eps (1-pi) delta)
// The full formula requires delta^2/4 > 1/(2 a n); otherwise only the
// simplified value is available and a warning is recorded.
struct PlanResult {
  double epsilon, pi, a, delta;
  long n;
  bool full_feasible = false;
  int m_full = 0;        // valid when full_feasible
  int m_simplified = 0;
  bool meets_minimum_recommendation = false;  // recommended M >= 50
  double degenerate_partition_risk = 0.0;  // expected degenerate partitions
  std::vector<std::string> warnings;

  int recommended() const { return full_feasible ? m_full : m_simplified; }
  nlohmann::json to_json() const;
};

// treated_share is the anticipated fraction of treated records, used only
// for the degenerate-partition risk estimate.
PlanResult plan_m(double epsilon, double pi, double a, long n, double delta,
                  double treated_share = 0.5);

}  // namespace dpwate
