#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <json.hpp>

#include "dpwate/privacy.hpp"
#include "dpwate/rng.hpp"

namespace dpwate {

// A Laplace distribution restricted to [lower, upper], with closed-form CDF
// and quantile function. The posteriors of both aggregate statistics under a
// uniform prior and a Laplace noise likelihood have exactly this form, which
// is why the default sampler is an exact inverse-CDF transform.
class TruncatedLaplace {
 public:
  TruncatedLaplace(double center, double scale, double lower, double upper);

  double sample(RngStream& rng) const;  // one uniform per draw
  double quantile(double u) const;      // u in [0,1]
  double cdf(double x) const;
  double log_density(double x) const;  // unnormalized; -inf outside support

  double center() const { return center_; }
  double scale() const { return scale_; }
  double lower() const { return lo_; }
  double upper() const { return hi_; }

 private:
  double center_;
  double scale_;
  double lo_;
  double hi_;
};

// One slice-sampling transition for a univariate log density on (lo, hi).
double slice_step(double x0, double lo, double hi, double width,
                  const std::function<double(double)>& log_density,
                  RngStream& rng);

struct PosteriorConfig {
  int draws = 10000;     // retained draws L
  int burn_in = 1000;    // discarded draws, MCMC mode only
  int thin = 3;          // chain steps per retained draw, MCMC mode only
  enum class Sampler { kExact, kMcmc } sampler = Sampler::kExact;
};

// Posterior of the aggregated point estimate: truncated Laplace centered at
// the released noisy value, restricted to (-1, 1).
TruncatedLaplace tau_bar_posterior(const PrivateRelease& release);

// Posterior of the aggregated variance estimate: truncated Laplace centered
// at the released noisy value, restricted to (0, S_V/2) where S_V is the
// variance sensitivity bound at the release's partition size.
TruncatedLaplace v_bar_posterior(const PrivateRelease& release);

double posterior_tau_bar(const PrivateRelease& release, RngStream& rng);
double posterior_v_bar(const PrivateRelease& release, RngStream& rng);

struct PosteriorSummary {
  std::vector<double> draws;           // L draws of the treatment effect
  std::vector<double> tau_bar_draws;
  std::vector<double> v_bar_draws;
  double point = 0.0;   // mean of draws
  double lower = 0.0;   // 2.5% empirical quantile
  double upper = 0.0;   // 97.5% empirical quantile
  PosteriorConfig::Sampler sampler = PosteriorConfig::Sampler::kExact;

  nlohmann::json to_json(bool include_draws = false) const;
};

// Step 4 of the release pipeline: L independent draws of the pair
// (tau_bar, v_bar) from their posteriors, one normal draw
// N(tau_bar, v_bar) per pair, then the mean and the equal-tailed 95%
// interval of those draws. Reads only the private release.
PosteriorSummary summarize(const PrivateRelease& release,
                           const PosteriorConfig& config, std::uint64_t seed);

// Linear-interpolation empirical quantile of a sorted vector.
double empirical_quantile(const std::vector<double>& sorted, double q);

}  // namespace dpwate
