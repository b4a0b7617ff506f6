#include "dpwate/diagnostics.hpp"

#include <cmath>

namespace dpwate {
namespace {

// Ceiling that snaps values a hair below an integer back onto it, so
// closed-form expressions like 4 / (0.5 * 0.1) plan exactly 80 partitions.
int ceil_snapped(double x) {
  const double nearest = std::nearbyint(x);
  if (std::abs(x - nearest) < 1e-9 * std::max(1.0, std::abs(x))) {
    return static_cast<int>(nearest);
  }
  return static_cast<int>(std::ceil(x));
}

void check_budget_args(double epsilon, double pi) {
  if (!(epsilon > 0.0)) throw ParameterError("epsilon must be positive");
  if (!(pi > 0.0 && pi < 1.0)) throw ParameterError("pi must lie in (0,1)");
}

}  // namespace

KlDiagnostic kl_normal(double tau_bar, double v_bar, double tau, double v) {
  if (!(v > 0.0) || !(v_bar > 0.0)) {
    throw ParameterError("kl_normal: variances must be positive");
  }
  KlDiagnostic d;
  d.tau_bar = tau_bar;
  d.v_bar = v_bar;
  d.tau = tau;
  d.v = v;
  d.u1 = (tau_bar - tau) * (tau_bar - tau) / (2.0 * v);
  d.u2 = v_bar / (2.0 * v) - 0.5;
  d.u3 = -0.5 * std::log(v_bar / v);
  d.kl = d.u1 + d.u2 + d.u3;
  return d;
}

nlohmann::json KlDiagnostic::to_json() const {
  return nlohmann::json{{"tau_bar", tau_bar}, {"v_bar", v_bar},
                        {"tau", tau},         {"v", v},
                        {"u1", u1},           {"u2", u2},
                        {"u3", u3},           {"kl", kl}};
}

double theorem3_bound(double m, double epsilon, double pi, double v,
                      double c) {
  check_budget_args(epsilon, pi);
  if (!(m > 0.0)) throw ParameterError("theorem3_bound: M must be positive");
  if (!(v > 0.0)) throw ParameterError("theorem3_bound: V must be positive");
  if (!(c > 0.0)) throw ParameterError("theorem3_bound: c must be positive");
  const double term1 = 2.0 * std::exp(-m * epsilon * (1.0 - pi) *
                                      std::sqrt(2.0 * v * c) /
                                      (6.0 * std::sqrt(3.0)));
  const double term2 = 4.0 * std::exp(-m * epsilon * pi * v * c / 9.0);
  return term1 + term2;
}

TailBounds concentration_terms(double m, double epsilon, double pi,
                               double c) {
  check_budget_args(epsilon, pi);
  if (!(m > 0.0) || !(c > 0.0)) {
    throw ParameterError("concentration_terms: M and c must be positive");
  }
  return TailBounds{
      2.0 * std::exp(-m * epsilon * (1.0 - pi) * c / 6.0),
      2.0 * std::exp(-m * epsilon * pi * c / 6.0),
  };
}

PlanResult plan_m(double epsilon, double pi, double a, long n, double delta,
                  double treated_share) {
  check_budget_args(epsilon, pi);
  if (!(a > 0.0 && a < 0.5)) {
    throw ParameterError("plan_m: a must lie in (0, 1/2)");
  }
  if (n < 1) throw ParameterError("plan_m: n must be positive");
  if (!(delta > 0.0)) throw ParameterError("plan_m: delta must be positive");
  if (!(treated_share > 0.0 && treated_share < 1.0)) {
    throw ParameterError("plan_m: treated share must lie in (0,1)");
  }

  PlanResult plan;
  plan.epsilon = epsilon;
  plan.pi = pi;
  plan.a = a;
  plan.n = n;
  plan.delta = delta;

  const double tau_budget = epsilon * (1.0 - pi);
  plan.m_simplified =
      std::max(1, ceil_snapped(4.0 / (tau_budget * delta)));

  const double slack =
      delta * delta / 4.0 - 1.0 / (2.0 * a * static_cast<double>(n));
  if (slack > 0.0) {
    plan.full_feasible = true;
    plan.m_full = std::max(
        1, ceil_snapped((2.0 / tau_budget) / std::sqrt(slack)));
  } else {
    plan.warnings.push_back(
        "margin of error is infeasible for the full formula (requires "
        "delta^2/4 > 1/(2 a n)); only the simplified value is available");
  }

  const int recommended = plan.recommended();
  plan.meets_minimum_recommendation = recommended >= 50;
  if (!plan.meets_minimum_recommendation) {
    plan.warnings.push_back(
        "recommended partition count is below the advised minimum of 50");
  }

  // Expected number of partitions left with fewer than two treated or two
  // control records, at the anticipated treated share.
  const long n_part = n / recommended;
  if (n_part >= 2) {
    const double q = treated_share;
    const double np = static_cast<double>(n_part);
    const double log_1mq = std::log1p(-q);
    const double log_q = std::log(q);
    const double p_low = std::exp(np * log_1mq) +
                         np * std::exp(log_q + (np - 1.0) * log_1mq);
    const double p_high = std::exp(np * log_q) +
                          np * std::exp(log_1mq + (np - 1.0) * log_q);
    plan.degenerate_partition_risk = recommended * (p_low + p_high);
  } else {
    plan.degenerate_partition_risk = static_cast<double>(recommended);
  }
  if (plan.degenerate_partition_risk > 0.01) {
    plan.warnings.push_back(
        "partitions this small risk having fewer than two treated or two "
        "control records; consider a smaller partition count");
  }
  return plan;
}

nlohmann::json PlanResult::to_json() const {
  nlohmann::json j{
      {"epsilon", epsilon},
      {"pi", pi},
      {"a", a},
      {"n", n},
      {"delta", delta},
      {"m_simplified", m_simplified},
      {"full_formula_feasible", full_feasible},
      {"recommended_m", recommended()},
      {"meets_minimum_recommendation", meets_minimum_recommendation},
      {"degenerate_partition_risk", degenerate_partition_risk},
      {"warnings", warnings},
  };
  if (full_feasible) j["m_full"] = m_full;
  return j;
}

}  // namespace dpwate
