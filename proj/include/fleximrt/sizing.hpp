#pragma once

// Minimal-N search for power- and precision-based sizing, and the inverse
// evaluation at a fixed N.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "analytic.hpp"
#include "design.hpp"
#include "errors.hpp"
#include "trend.hpp"

namespace fleximrt {

enum class SizingMethod { power, precision };

inline std::string to_string(SizingMethod m) { return m == SizingMethod::power ? "power" : "precision"; }

inline SizingMethod parse_sizing_method(std::string_view text) {
  if (text == "power") return SizingMethod::power;
  if (text == "precision") return SizingMethod::precision;
  throw ValidationError("method must be 'power' or 'precision', got '" + std::string(text) + "'");
}

inline constexpr long kSampleSizeCap = 1000000;
inline constexpr double kTieTolerance = 1e-12;

// trends hold effect curves (power) or precision targets (precision), one per
// category in schedule order. target is ignored in precision mode, where the
// nominal coverage is 1 - alpha.
struct SizingRequest {
  DesignSpec design;
  std::vector<TrendSpec> trends;
  SizingMethod method = SizingMethod::power;
  StatKind stat = StatKind::hotelling_n_q_1;
  double alpha = 0.05;
  double target = 0.8;

  double nominal() const { return method == SizingMethod::power ? target : 1.0 - alpha; }
};

// Everything known about one N.
struct Evaluation {
  long n = 0;
  double value = 0.0;  // power or coverage
  double ncp = 0.0;    // power only
  double bound = 0.0;  // precision only
  double df1 = 0.0;
  double df2 = 0.0;    // 0 for chi-square
  double critical_value = 0.0;
};

struct SizingResult {
  SizingMethod method = SizingMethod::power;
  StatKind stat = StatKind::hotelling_n_q_1;
  double alpha = 0.05;
  double nominal = 0.8;
  long n = 0;
  long min_n = 0;
  Evaluation at_n;
  std::optional<Evaluation> at_n_minus_1;  // absent when N - 1 is infeasible
  double quadratic_form = 0.0;             // delta^T Lambda delta
  std::vector<Eigen::VectorXd> coefficients;
  Eigen::MatrixXd lambda;
  int q = 0;
  int sum_p = 0;
};

// Resolved engine state shared by search and evaluation.
struct SizingProblem {
  SizingRequest request;
  std::vector<TrendCoefficients> trends;
  InformationMatrix info;
  TestStatistic stat;
  double form = 0.0;

  Evaluation evaluate(long n) const {
    stat.require_feasible(n);
    Evaluation e;
    e.n = n;
    e.df1 = stat.df1();
    e.df2 = stat.df2(n);
    e.critical_value = stat.critical_value(n, request.alpha);
    if (request.method == SizingMethod::power) {
      e.ncp = static_cast<double>(n) * form;
      e.value = survival(stat.reference(n, e.ncp), e.critical_value);
    } else {
      e.bound = stat.f_scale(n) * e.critical_value / static_cast<double>(n);
      e.value = formulated_coverage(stat, form, n);
    }
    return e;
  }

  bool meets_target(const Evaluation& e) const {
    if (request.method == SizingMethod::power) return e.value >= request.target - kTieTolerance;
    return form >= e.bound * (1.0 - kTieTolerance);
  }
};

inline void validate_request(const SizingRequest& req) {
  std::vector<Violation> v;
  if (!(req.alpha > 0.0 && req.alpha < 1.0)) v.push_back({"significance level must lie in (0, 1)", 0, 0});
  if (req.method == SizingMethod::power && !(req.target > 0.0 && req.target < 1.0)) {
    v.push_back({"target power must lie in (0, 1)", 0, 0});
  }
  auto design = validate_design(req.design);
  v.insert(v.end(), design.begin(), design.end());
  if (!design.empty()) throw ValidationError(std::move(v));

  const auto adds = req.design.schedule.category_adding_days();
  if (req.trends.size() != adds.size()) {
    v.push_back({"expected " + std::to_string(adds.size()) + " trend specifications, got " +
                     std::to_string(req.trends.size()),
                 0, 0});
  } else {
    for (std::size_t m = 0; m < adds.size(); ++m) {
      const int cat = static_cast<int>(m) + 1;
      if (req.trends[m].adding_day != adds[m]) {
        v.push_back({"trend adding day disagrees with the schedule", req.trends[m].adding_day, cat});
      }
      for (auto x : validate_trend(req.trends[m], req.design.days)) {
        x.category = cat;
        v.push_back(std::move(x));
      }
    }
  }
  if (!v.empty()) throw ValidationError(std::move(v));
}

inline SizingProblem prepare(const SizingRequest& req) {
  validate_request(req);
  SizingProblem p;
  p.request = req;
  for (const auto& t : req.trends) {
    p.trends.push_back(solve_coefficients(t, req.design.days, req.design.occ_per_day));
  }
  p.info = build_information_matrix(req.design, p.trends);
  p.stat = TestStatistic{req.stat, req.design.q, p.info.sum_p()};
  p.form = quadratic_form(p.info, stack_coefficients(p.trends));
  return p;
}

inline Evaluation evaluate_at_n(const SizingRequest& req, long n) { return prepare(req).evaluate(n); }

// Doubling from N_min until the target is met, then bisection down to the
// smallest passing integer.
inline SizingResult solve_sample_size(const SizingRequest& req) {
  const SizingProblem p = prepare(req);
  if (req.method == SizingMethod::power && !(p.form > 0.0)) {
    throw InfeasibleError("zero effect: no sample size attains the target power");
  }
  if (req.method == SizingMethod::precision && !(p.form > 0.0)) {
    throw InfeasibleError("zero precision target: no sample size attains the coverage");
  }
  const long n_min = p.stat.min_n();

  long fail = n_min - 1;
  long pass = n_min;
  Evaluation pass_eval = p.evaluate(pass);
  while (!p.meets_target(pass_eval)) {
    if (pass >= kSampleSizeCap) {
      throw InfeasibleError("required sample size exceeds the cap of 1000000 (effect too small)");
    }
    fail = pass;
    pass = std::min(pass * 2, kSampleSizeCap);
    pass_eval = p.evaluate(pass);
  }
  while (pass - fail > 1) {
    const long mid = fail + (pass - fail) / 2;
    Evaluation e = p.evaluate(mid);
    if (p.meets_target(e)) {
      pass = mid;
      pass_eval = e;
    } else {
      fail = mid;
    }
  }

  SizingResult r;
  r.method = req.method;
  r.stat = req.stat;
  r.alpha = req.alpha;
  r.nominal = req.nominal();
  r.n = pass;
  r.min_n = n_min;
  r.at_n = pass_eval;
  if (p.stat.feasible(pass - 1)) r.at_n_minus_1 = p.evaluate(pass - 1);
  r.quadratic_form = p.form;
  for (const auto& t : p.trends) r.coefficients.push_back(t.coeffs);
  r.lambda = p.info.lambda;
  r.q = req.design.q;
  r.sum_p = p.info.sum_p();
  return r;
}

inline SizingResult solve_sample_size_power(SizingRequest req) {
  req.method = SizingMethod::power;
  return solve_sample_size(req);
}

inline SizingResult solve_sample_size_precision(SizingRequest req) {
  req.method = SizingMethod::precision;
  return solve_sample_size(req);
}

}  // namespace fleximrt
