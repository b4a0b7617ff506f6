#include "dpwate/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace dpwate {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double clamp_open(double x, double lo, double hi) {
  const double lo_in = std::nextafter(lo, hi);
  const double hi_in = std::nextafter(hi, lo);
  return std::min(std::max(x, lo_in), hi_in);
}

}  // namespace

TruncatedLaplace::TruncatedLaplace(double center, double scale, double lower,
                                   double upper)
    : center_(center), scale_(scale), lo_(lower), hi_(upper) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw ParameterError("TruncatedLaplace: scale must be positive");
  }
  if (!(lower < upper)) {
    throw ParameterError("TruncatedLaplace: lower must be below upper");
  }
  if (!std::isfinite(center)) {
    throw ParameterError("TruncatedLaplace: center must be finite");
  }
}

double TruncatedLaplace::quantile(double u) const {
  if (!(u >= 0.0 && u <= 1.0)) {
    throw ParameterError("TruncatedLaplace::quantile: u must be in [0,1]");
  }
  const double b = scale_;
  double x;
  if (center_ <= lo_) {
    // Pure decaying exponential on [lo, hi], anchored at lo.
    const double d = (hi_ - lo_) / b;
    x = lo_ - b * std::log1p(u * std::expm1(-d));
  } else if (center_ >= hi_) {
    // Pure growing exponential on [lo, hi], anchored at hi.
    const double d = (hi_ - lo_) / b;
    const double ed = std::exp(-d);
    x = hi_ + b * std::log(ed * (1.0 - u) + u);
  } else {
    const double left = -std::expm1(-(center_ - lo_) / b) / 2.0;
    const double right = -std::expm1(-(hi_ - center_) / b) / 2.0;
    const double mass = u * (left + right);
    if (mass <= left) {
      x = center_ + b * std::log(2.0 * mass + std::exp(-(center_ - lo_) / b));
    } else {
      x = center_ - b * std::log1p(-2.0 * (mass - left));
    }
  }
  return std::min(std::max(x, lo_), hi_);
}

double TruncatedLaplace::cdf(double x) const {
  if (x <= lo_) return 0.0;
  if (x >= hi_) return 1.0;
  const double b = scale_;
  if (center_ <= lo_) {
    const double d = (hi_ - lo_) / b;
    return std::expm1(-(x - lo_) / b) / std::expm1(-d);
  }
  if (center_ >= hi_) {
    const double d = (hi_ - lo_) / b;
    const double ed = std::exp(-d);
    return (std::exp((x - hi_) / b) - ed) / (1.0 - ed);
  }
  const double left = -std::expm1(-(center_ - lo_) / b) / 2.0;
  const double right = -std::expm1(-(hi_ - center_) / b) / 2.0;
  const double total = left + right;
  if (x <= center_) {
    const double below =
        (std::exp((x - center_) / b) - std::exp(-(center_ - lo_) / b)) / 2.0;
    return below / total;
  }
  const double below = left - std::expm1(-(x - center_) / b) / 2.0;
  return below / total;
}

double TruncatedLaplace::log_density(double x) const {
  if (x < lo_ || x > hi_) return kNegInf;
  return -std::abs(x - center_) / scale_;
}

double TruncatedLaplace::sample(RngStream& rng) const {
  return clamp_open(quantile(rng.uniform_open()), lo_, hi_);
}

double slice_step(double x0, double lo, double hi, double width,
                  const std::function<double(double)>& log_density,
                  RngStream& rng) {
  const double log_y = log_density(x0) + std::log(rng.uniform_open());
  const double r = rng.uniform();
  double left = std::max(x0 - r * width, lo);
  double right = std::min(x0 + (1.0 - r) * width, hi);
  // Step out until both edges leave the slice or hit the support.
  while (left > lo && log_density(left) > log_y) {
    left = std::max(left - width, lo);
  }
  while (right < hi && log_density(right) > log_y) {
    right = std::min(right + width, hi);
  }
  for (int tries = 0; tries < 1000; ++tries) {
    const double x1 = rng.uniform(left, right);
    if (log_density(x1) >= log_y) return x1;
    if (x1 < x0) {
      left = x1;
    } else {
      right = x1;
    }
  }
  return x0;  // shrinkage exhausted; keep the current state
}

TruncatedLaplace tau_bar_posterior(const PrivateRelease& release) {
  return TruncatedLaplace(release.tau_private, release.scale_tau, -1.0, 1.0);
}

TruncatedLaplace v_bar_posterior(const PrivateRelease& release) {
  return TruncatedLaplace(release.v_private, release.scale_v, 0.0,
                          release.v_sensitivity() / 2.0);
}

double posterior_tau_bar(const PrivateRelease& release, RngStream& rng) {
  return tau_bar_posterior(release).sample(rng);
}

double posterior_v_bar(const PrivateRelease& release, RngStream& rng) {
  return v_bar_posterior(release).sample(rng);
}

double empirical_quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) {
    throw ParameterError("empirical_quantile: empty sample");
  }
  if (sorted.size() == 1) return sorted[0];
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto i = static_cast<size_t>(std::floor(h));
  if (i + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(i);
  return sorted[i] + frac * (sorted[i + 1] - sorted[i]);
}

nlohmann::json PosteriorSummary::to_json(bool include_draws) const {
  nlohmann::json j{
      {"point", point},
      {"lower", lower},
      {"upper", upper},
      {"draws_retained", static_cast<int>(draws.size())},
      {"sampler",
       sampler == PosteriorConfig::Sampler::kExact ? "exact" : "mcmc"},
  };
  if (include_draws) {
    j["draws"] = draws;
    j["tau_bar_draws"] = tau_bar_draws;
    j["v_bar_draws"] = v_bar_draws;
  }
  return j;
}

PosteriorSummary summarize(const PrivateRelease& release,
                           const PosteriorConfig& config, std::uint64_t seed) {
  if (config.draws < 1) {
    throw ParameterError("summarize: draw count must be positive");
  }
  if (config.burn_in < 0) {
    throw ParameterError("summarize: burn-in cannot be negative");
  }
  const TruncatedLaplace m1 = tau_bar_posterior(release);
  const TruncatedLaplace m2 = v_bar_posterior(release);
  RngStream rng(seed, Stream::kPosterior,
                static_cast<std::uint64_t>(release.estimand));

  const int L = config.draws;
  PosteriorSummary out;
  out.sampler = config.sampler;
  out.draws.resize(L);
  out.tau_bar_draws.resize(L);
  out.v_bar_draws.resize(L);

  if (config.sampler == PosteriorConfig::Sampler::kExact) {
    for (int l = 0; l < L; ++l) {
      const double tb = m1.sample(rng);
      const double vb = m2.sample(rng);
      out.tau_bar_draws[l] = tb;
      out.v_bar_draws[l] = vb;
      out.draws[l] = tb + std::sqrt(vb) * rng.normal();
    }
  } else {
    auto logf1 = [&m1](double x) { return m1.log_density(x); };
    auto logf2 = [&m2](double x) { return m2.log_density(x); };
    const double w1 = std::min(2.0 * m1.scale(), m1.upper() - m1.lower());
    const double w2 = std::min(2.0 * m2.scale(), m2.upper() - m2.lower());
    double xt = clamp_open(m1.center(), m1.lower(), m1.upper());
    double xv = clamp_open(m2.center(), m2.lower(), m2.upper());
    const int thin = std::max(1, config.thin);
    for (int l = 0; l < config.burn_in; ++l) {
      xt = slice_step(xt, m1.lower(), m1.upper(), w1, logf1, rng);
      xv = slice_step(xv, m2.lower(), m2.upper(), w2, logf2, rng);
    }
    for (int l = 0; l < L; ++l) {
      for (int t = 0; t < thin; ++t) {
        xt = slice_step(xt, m1.lower(), m1.upper(), w1, logf1, rng);
        xv = slice_step(xv, m2.lower(), m2.upper(), w2, logf2, rng);
      }
      out.tau_bar_draws[l] = xt;
      out.v_bar_draws[l] = xv;
      out.draws[l] = xt + std::sqrt(xv) * rng.normal();
    }
  }

  out.point = std::accumulate(out.draws.begin(), out.draws.end(), 0.0) /
              static_cast<double>(L);
  std::vector<double> sorted = out.draws;
  std::sort(sorted.begin(), sorted.end());
  out.lower = empirical_quantile(sorted, 0.025);
  out.upper = empirical_quantile(sorted, 0.975);
  return out;
}

}  // namespace dpwate
