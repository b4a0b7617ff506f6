#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dpwate/errors.hpp"

namespace dpwate {

struct LogisticFitOptions {
  int max_iterations = 100;
  double gradient_tolerance = 1e-8;
};

struct PropensityModel {
  Eigen::VectorXd coefficients;  // intercept first, length p + 1
  bool converged = false;
  int iterations = 0;
  double final_gradient_norm = 0.0;
};

// Maximum-likelihood logistic regression of binary labels on an
// intercept-augmented feature matrix, fitted by iteratively reweighted
// least squares (Newton-Raphson) with step halving from a zero start.
//
// Throws FitError on rank deficiency, and on perfect separation: fitted
// probabilities pinned outside (1e-10, 1 - 1e-10) while the gradient norm
// stalls, which means the likelihood maximizer lies at infinity.
// Non-convergence within max_iterations is reported via converged=false.
PropensityModel fit_logistic(const Eigen::MatrixXd& features,
                             const std::vector<int>& labels,
                             const LogisticFitOptions& options = {});

// Probability of label 1 for each row, i.e. the inverse logit of the
// fitted linear predictor.
Eigen::VectorXd predict_probabilities(const PropensityModel& model,
                                      const Eigen::MatrixXd& features);

// Clamp of a raw score into [a, 1-a].
double truncate_score(double raw, double a);

struct PropensityScores {
  Eigen::VectorXd raw;        // each strictly in (0,1)
  Eigen::VectorXd truncated;  // each in [a, 1-a]
  double a = 0.0;
};

// Raw and truncated propensity scores for each row. The truncation level a
// is a public parameter fixed before the data are seen; it must lie in
// (0, 1/2).
PropensityScores predict_scores(const PropensityModel& model,
                                const Eigen::MatrixXd& features, double a);

}  // namespace dpwate
