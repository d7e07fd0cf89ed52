#pragma once

// Central and noncentral chi-square / F distribution functions.
//
// Noncentral CDFs are Poisson(lambda/2) mixtures of central CDFs:
//   chi-square: sum_j w_j P(chi2_{df+2j} <= x)
//   F:          sum_j w_j I_y(df1/2 + j, df2/2),  y = df1 x / (df1 x + df2)
// The sum starts at the Poisson mode and walks outward until the accumulated
// weight reaches 1 - 1e-12 and the unvisited weight is negligible against the
// sum; the leftover mass is reported as the truncation bound. Upper tails are summed from complemented terms directly so that
// power values near 1 keep their precision.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "errors.hpp"

namespace fleximrt {

enum class Family { chi_square, f };

struct DistRequest {
  Family family = Family::chi_square;
  double df1 = 1.0;
  double df2 = 0.0;  // F only
  double ncp = 0.0;
};

struct MixtureValue {
  double value = 0.0;
  double truncation_bound = 0.0;  // Poisson mass not visited
};

inline constexpr double kMixtureTailMass = 1e-12;
inline constexpr double kMaxNoncentrality = 1e5;

namespace detail {

inline void check_request(const DistRequest& r) {
  if (!(r.df1 > 0.0) || !std::isfinite(r.df1)) throw ValidationError("df1 must be > 0");
  if (r.family == Family::f && (!(r.df2 > 0.0) || !std::isfinite(r.df2))) {
    throw ValidationError("df2 must be > 0");
  }
  if (!(r.ncp >= 0.0)) throw ValidationError("noncentrality must be ≥ 0");
  if (r.ncp > kMaxNoncentrality) {
    throw NumericError("noncentrality " + std::to_string(r.ncp) + " exceeds supported limit 1e5");
  }
}

// Central term j of the mixture; upper selects the complement.
inline double central_term(const DistRequest& r, double x, int j, bool upper) {
  namespace bm = boost::math;
  if (r.family == Family::chi_square) {
    const double a = 0.5 * r.df1 + j;
    return upper ? bm::gamma_q(a, 0.5 * x) : bm::gamma_p(a, 0.5 * x);
  }
  const double num = r.df1 * x;
  const double y = num / (num + r.df2);
  const double a = 0.5 * r.df1 + j;
  const double b = 0.5 * r.df2;
  return upper ? bm::ibetac(a, b, y) : bm::ibeta(a, b, y);
}

inline MixtureValue mixture(const DistRequest& r, double x, bool upper) {
  check_request(r);
  if (std::isnan(x)) throw ValidationError("x is NaN");
  if (x <= 0.0) return {upper ? 1.0 : 0.0, 0.0};
  if (std::isinf(x)) return {upper ? 0.0 : 1.0, 0.0};

  if (r.ncp == 0.0) return {central_term(r, x, 0, upper), 0.0};

  const double mu = 0.5 * r.ncp;
  const int mode = static_cast<int>(std::floor(mu));
  auto log_weight = [mu](int j) { return -mu + j * std::log(mu) - std::lgamma(j + 1.0); };

  double sum = 0.0;
  double weight_seen = 0.0;
  // Walk down from the mode, then up. Each walk stops once the unvisited
  // weight is negligible next to the running sum, not just next to 1, so tiny
  // tails keep their relative accuracy.
  for (int j = mode; j >= 0; --j) {
    const double w = std::exp(log_weight(j));
    sum += w * central_term(r, x, j, upper);
    weight_seen += w;
    if (j < mode && (w <= 1e-17 * sum || w < 1e-300)) break;
  }
  const int max_terms = mode + 100000;
  int j = mode + 1;
  for (; j <= max_terms; ++j) {
    const double w = std::exp(log_weight(j));
    sum += w * central_term(r, x, j, upper);
    weight_seen += w;
    // past the mode the remaining weights fall at least geometrically by mu / (j + 1)
    const double ratio = mu / (j + 1.0);
    if (ratio >= 1.0) continue;
    const double rest = w * ratio / (1.0 - ratio);
    if (weight_seen >= 1.0 - kMixtureTailMass && (rest <= 1e-17 * sum || rest < 1e-300)) break;
  }
  const double leftover = std::max(0.0, 1.0 - weight_seen);
  if (leftover > 1e-10) {
    throw NumericError("noncentral mixture did not converge, residual mass " +
                       std::to_string(leftover));
  }
  return {std::clamp(sum, 0.0, 1.0), leftover};
}

}  // namespace detail

inline MixtureValue cdf_detail(const DistRequest& r, double x) { return detail::mixture(r, x, false); }

inline double cdf(const DistRequest& r, double x) { return detail::mixture(r, x, false).value; }

// P(X > x)
inline double survival(const DistRequest& r, double x) { return detail::mixture(r, x, true).value; }

inline double noncentral_chisq_cdf(double x, double df, double ncp) {
  return cdf({Family::chi_square, df, 0.0, ncp}, x);
}

inline double noncentral_f_cdf(double x, double df1, double df2, double ncp) {
  return cdf({Family::f, df1, df2, ncp}, x);
}

// Monotone inverse of cdf(). Brackets the root by doubling, then runs a
// regula-falsi/bisection hybrid on [lo, hi] to 1e-10 in x (relative below 1),
// at most 200 iterations.
inline double quantile(const DistRequest& r, double p) {
  detail::check_request(r);
  if (!(p > 0.0 && p < 1.0)) throw ValidationError("probability must lie in (0, 1)");

  // Work on whichever tail is smaller to keep the target well resolved.
  const bool use_upper = p > 0.5;
  const double target = use_upper ? 1.0 - p : p;
  auto g = [&](double x) {
    const double v = use_upper ? survival(r, x) : cdf(r, x);
    return use_upper ? target - v : v - target;  // increasing in x either way
  };

  double lo = 0.0;
  double glo = -target;
  double hi = std::max(1.0, r.family == Family::chi_square ? r.df1 + r.ncp : 1.0 + r.ncp / r.df1);
  double ghi = g(hi);
  for (int k = 0; ghi < 0.0; ++k) {
    if (k > 2000) throw NumericError("quantile bracket search failed");
    lo = hi;
    glo = ghi;
    hi *= 2.0;
    ghi = g(hi);
  }

  int side = 0;
  for (int it = 0; it < 200; ++it) {
    const double width = hi - lo;
    if (width <= 1e-10 * std::min(1.0, hi)) break;
    double mid = lo - glo * (hi - lo) / (ghi - glo);
    // fall back to bisection if the secant step is degenerate or hugs an end
    if (!(mid > lo + 0.01 * width && mid < hi - 0.01 * width) || it % 3 == 2) {
      mid = 0.5 * (lo + hi);
    }
    const double gm = g(mid);
    if (gm == 0.0) return mid;
    if (gm < 0.0) {
      lo = mid;
      glo = gm;
      if (side == -1) ghi *= 0.5;  // Illinois modification
      side = -1;
    } else {
      hi = mid;
      ghi = gm;
      if (side == 1) glo *= 0.5;
      side = 1;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace fleximrt
