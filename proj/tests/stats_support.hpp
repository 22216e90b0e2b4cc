#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "aevac/sampler.hpp"

namespace aevac::testing {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// CDF of spec's variate, including the 3-sd cut for normals and any bounds.
inline std::function<double(double)> analytic_cdf(const DistributionSpec& d) {
  double lo = -std::numeric_limits<double>::infinity(), hi = -lo;
  std::function<double(double)> base;
  switch (d.kind) {
    case DistKind::Normal:
      base = [d](double x) { return normal_cdf((x - d.p1) / d.p2); };
      lo = d.p1 - 3.0 * d.p2;
      hi = d.p1 + 3.0 * d.p2;
      break;
    case DistKind::Lognormal:
      base = [d](double x) { return x <= 0.0 ? 0.0 : normal_cdf((std::log(x) - d.p1) / d.p2); };
      lo = 0.0;
      break;
    case DistKind::Uniform:
      base = [d](double x) { return std::clamp((x - d.p1) / (d.p2 - d.p1), 0.0, 1.0); };
      break;
    case DistKind::Binomial:
      base = [d](double x) { return x < 0.0 ? 0.0 : x < 1.0 ? 1.0 - d.p1 : 1.0; };
      break;
  }
  if (d.positive) lo = std::max(lo, 0.0);
  if (d.truncate) {
    lo = std::max(lo, d.truncate->first);
    hi = std::min(hi, d.truncate->second);
  }
  const double f_lo = std::isfinite(lo) ? base(lo) : 0.0, f_hi = std::isfinite(hi) ? base(hi) : 1.0;
  return [=](double x) {
    if (x < lo) return 0.0;
    if (x > hi) return 1.0;
    return (base(x) - f_lo) / (f_hi - f_lo);
  };
}

/// Two-sided Kolmogorov-Smirnov statistic of a sample against a continuous CDF.
inline double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

}  // namespace aevac::testing
