#include "dpwate/wate.hpp"

#include <algorithm>
#include <cmath>

#include "dpwate/propensity.hpp"

namespace dpwate {

const char* to_string(Estimand e) {
  switch (e) {
    case Estimand::kAte:
      return "ate";
    case Estimand::kAtt:
      return "att";
    case Estimand::kAtc:
      return "atc";
  }
  return "?";
}

Estimand parse_estimand(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (lower == "ate") return Estimand::kAte;
  if (lower == "att") return Estimand::kAtt;
  if (lower == "atc") return Estimand::kAtc;
  throw ParameterError("unknown estimand '" + lower +
                       "' (expected ate, att, or atc)");
}

double tilt(Estimand estimand, double score) {
  switch (estimand) {
    case Estimand::kAte:
      return 1.0;
    case Estimand::kAtt:
      return score;
    case Estimand::kAtc:
      return 1.0 - score;
  }
  return 0.0;
}

OutcomeVariances estimate_outcome_variances(const Eigen::MatrixXd& covariates,
                                            const std::vector<int>& outcomes,
                                            const std::vector<int>& treatments,
                                            VarianceMode mode) {
  const Eigen::Index n = covariates.rows();
  OutcomeVariances out;
  if (mode == VarianceMode::kConservative) {
    out.v0 = Eigen::VectorXd::Constant(n, 0.25);
    out.v1 = Eigen::VectorXd::Constant(n, 0.25);
    return out;
  }

  auto fit_arm = [&](int arm, bool* fell_back) -> Eigen::VectorXd {
    std::vector<int> rows;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (treatments[i] == arm) rows.push_back(static_cast<int>(i));
    }
    std::vector<int> y_arm;
    y_arm.reserve(rows.size());
    int ones = 0;
    for (int r : rows) {
      y_arm.push_back(outcomes[r]);
      ones += outcomes[r];
    }
    if (rows.empty()) {
      *fell_back = true;
      return Eigen::VectorXd::Constant(n, 0.25);
    }
    // Constant outcomes in the arm: the ML fit is the constant itself, so
    // the conditional variance is exactly zero.
    if (ones == 0 || ones == static_cast<int>(rows.size())) {
      return Eigen::VectorXd::Zero(n);
    }
    Eigen::MatrixXd x_arm(rows.size(), covariates.cols());
    for (size_t k = 0; k < rows.size(); ++k) {
      x_arm.row(k) = covariates.row(rows[k]);
    }
    try {
      PropensityModel fit = fit_logistic(x_arm, y_arm);
      Eigen::VectorXd p = predict_probabilities(fit, covariates);
      return p.array() * (1.0 - p.array());
    } catch (const FitError&) {
      *fell_back = true;
      return Eigen::VectorXd::Constant(n, 0.25);
    }
  };

  out.v1 = fit_arm(1, &out.treated_fallback);
  out.v0 = fit_arm(0, &out.control_fallback);
  return out;
}

double estimate_tau(const std::vector<int>& outcomes,
                    const std::vector<int>& treatments,
                    const Eigen::VectorXd& scores, Estimand estimand) {
  const size_t n = outcomes.size();
  if (treatments.size() != n || static_cast<size_t>(scores.size()) != n) {
    throw ParameterError("estimate_tau: input lengths differ");
  }
  double num1 = 0.0, den1 = 0.0, num0 = 0.0, den0 = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double e = scores[static_cast<Eigen::Index>(i)];
    const double t = tilt(estimand, e);
    if (treatments[i] == 1) {
      const double w1 = t / e;
      den1 += w1;
      num1 += w1 * outcomes[i];
    } else {
      const double w0 = t / (1.0 - e);
      den0 += w0;
      num0 += w0 * outcomes[i];
    }
  }
  // Weights are strictly positive, so a zero denominator means an empty arm.
  if (den1 <= 0.0 || den0 <= 0.0) {
    throw DegenerateError("estimate_tau: subset lacks treated or control "
                          "records for estimand " +
                          std::string(to_string(estimand)));
  }
  return num1 / den1 - num0 / den0;
}

double estimate_variance(const std::vector<int>& outcomes,
                         const std::vector<int>& treatments,
                         const Eigen::VectorXd& scores,
                         const OutcomeVariances& variances,
                         Estimand estimand) {
  const size_t n = outcomes.size();
  if (treatments.size() != n || static_cast<size_t>(scores.size()) != n ||
      static_cast<size_t>(variances.v0.size()) != n ||
      static_cast<size_t>(variances.v1.size()) != n) {
    throw ParameterError("estimate_variance: input lengths differ");
  }
  double num = 0.0, den = 0.0;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
    const double e = scores[i];
    const double t = tilt(estimand, e);
    num += t * t * (variances.v1[i] / e + variances.v0[i] / (1.0 - e));
    den += t;
  }
  if (den <= 0.0) {
    throw DegenerateError("estimate_variance: zero tilt mass");
  }
  return num / (den * den);
}

WateEstimate estimate_pair(const std::vector<int>& outcomes,
                           const std::vector<int>& treatments,
                           const Eigen::VectorXd& scores,
                           const OutcomeVariances& variances,
                           Estimand estimand, double a) {
  WateEstimate est;
  est.tau_hat = estimate_tau(outcomes, treatments, scores, estimand);
  est.v_hat = estimate_variance(outcomes, treatments, scores, variances,
                                estimand);
  est.n_used = static_cast<int>(outcomes.size());
  est.estimand = estimand;
  est.a = a;
  return est;
}

}  // namespace dpwate
