#include "dpwate/propensity.hpp"

#include <algorithm>
#include <cmath>

namespace dpwate {
namespace {

constexpr double kBoundaryProb = 1e-10;

double sigmoid(double x) {
  if (x >= 0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow.
double log1pexp(double x) {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double log_likelihood(const Eigen::VectorXd& lp, const std::vector<int>& y) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < lp.size(); ++i) {
    ll += y[i] * lp[i] - log1pexp(lp[i]);
  }
  return ll;
}

Eigen::MatrixXd augment_intercept(const Eigen::MatrixXd& features) {
  Eigen::MatrixXd X(features.rows(), features.cols() + 1);
  X.col(0).setOnes();
  X.rightCols(features.cols()) = features;
  return X;
}

}  // namespace

PropensityModel fit_logistic(const Eigen::MatrixXd& features,
                             const std::vector<int>& labels,
                             const LogisticFitOptions& options) {
  const Eigen::Index n = features.rows();
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    throw ParameterError("fit_logistic: labels do not match feature rows");
  }
  const Eigen::MatrixXd X = augment_intercept(features);
  const Eigen::Index p = X.cols();

  if (n < p) {
    throw FitError("fit_logistic: fewer rows than coefficients");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < p) {
    throw FitError("fit_logistic: design matrix is rank deficient");
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd lp = Eigen::VectorXd::Zero(n);
  double ll = log_likelihood(lp, labels);
  double prev_grad_norm = std::numeric_limits<double>::infinity();

  PropensityModel model;
  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    Eigen::VectorXd mu(n), w(n);
    bool at_boundary = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      mu[i] = sigmoid(lp[i]);
      if (mu[i] <= kBoundaryProb || mu[i] >= 1.0 - kBoundaryProb) {
        at_boundary = true;
      }
      w[i] = std::max(mu[i] * (1.0 - mu[i]), 1e-14);
    }
    Eigen::VectorXd resid(n);
    for (Eigen::Index i = 0; i < n; ++i) resid[i] = labels[i] - mu[i];
    Eigen::VectorXd grad = X.transpose() * resid;
    double grad_norm = grad.norm();

    bool stalled = grad_norm <= options.gradient_tolerance ||
                   grad_norm > 0.9 * prev_grad_norm;
    if (at_boundary && stalled) {
      throw FitError(
          "fit_logistic: perfect separation (fitted probabilities pinned at "
          "0/1 while the gradient stalls)");
    }

    if (grad_norm <= options.gradient_tolerance) {
      model.coefficients = beta;
      model.converged = true;
      model.iterations = iter - 1;
      model.final_gradient_norm = grad_norm;
      return model;
    }
    prev_grad_norm = grad_norm;

    Eigen::MatrixXd H = X.transpose() * w.asDiagonal() * X;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    if (ldlt.info() != Eigen::Success) {
      throw FitError("fit_logistic: Hessian factorization failed");
    }
    Eigen::VectorXd step = ldlt.solve(grad);
    if (!step.allFinite()) {
      throw FitError("fit_logistic: non-finite Newton step");
    }

    // Step halving keeps the likelihood monotone when Newton overshoots.
    double scale = 1.0;
    for (int half = 0; half < 30; ++half) {
      Eigen::VectorXd cand = beta + scale * step;
      Eigen::VectorXd cand_lp = X * cand;
      double cand_ll = log_likelihood(cand_lp, labels);
      if (cand_ll >= ll - 1e-12) {
        beta = cand;
        lp = cand_lp;
        ll = cand_ll;
        break;
      }
      scale *= 0.5;
    }
    model.iterations = iter;
  }

  Eigen::VectorXd mu_final = lp.unaryExpr([](double v) { return sigmoid(v); });
  model.coefficients = beta;
  model.converged = false;
  model.final_gradient_norm =
      (X.transpose() *
       (Eigen::Map<const Eigen::VectorXi>(labels.data(), n).cast<double>() -
        mu_final))
          .norm();
  return model;
}

Eigen::VectorXd predict_probabilities(const PropensityModel& model,
                                      const Eigen::MatrixXd& features) {
  if (features.cols() + 1 != model.coefficients.size()) {
    throw ParameterError(
        "predict_probabilities: feature width does not match model");
  }
  Eigen::VectorXd lp =
      (features * model.coefficients.tail(features.cols())).array() +
      model.coefficients[0];
  return lp.unaryExpr([](double v) { return sigmoid(v); });
}

double truncate_score(double raw, double a) {
  if (raw < a) return a;
  if (raw > 1.0 - a) return 1.0 - a;
  return raw;
}

PropensityScores predict_scores(const PropensityModel& model,
                                const Eigen::MatrixXd& features, double a) {
  if (!(a > 0.0 && a < 0.5)) {
    throw ParameterError("truncation level a must lie in (0, 1/2)");
  }
  PropensityScores scores;
  scores.a = a;
  scores.raw = predict_probabilities(model, features);
  scores.truncated =
      scores.raw.unaryExpr([a](double e) { return truncate_score(e, a); });
  return scores;
}

}  // namespace dpwate
