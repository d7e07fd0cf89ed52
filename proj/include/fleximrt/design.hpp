#pragma once

// Trial layout: calendar, category-adding schedule, randomization plan and
// availability expectations. Days and occasions are 1-based everywhere in
// the public surface.

#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "trend.hpp"

namespace fleximrt {

struct CategorySchedule {
  std::vector<int> counts;       // M_0, M_1, ..., M_k
  std::vector<int> adding_days;  // d_0 = 1 < d_1 < ... < d_k

  int total() const { return std::accumulate(counts.begin(), counts.end(), 0); }

  // Adding day a(m) for every category m = 1..M, in category order.
  std::vector<int> category_adding_days() const {
    std::vector<int> out;
    for (std::size_t j = 0; j < counts.size() && j < adding_days.size(); ++j) {
      out.insert(out.end(), static_cast<std::size_t>(std::max(counts[j], 0)), adding_days[j]);
    }
    return out;
  }

  int active_count(int day) const {
    int n = 0;
    for (std::size_t j = 0; j < counts.size() && j < adding_days.size(); ++j) {
      if (adding_days[j] <= day) n += counts[j];
    }
    return n;
  }
};

inline std::vector<Violation> validate_schedule(const CategorySchedule& s, int days) {
  std::vector<Violation> out;
  if (s.counts.empty()) {
    out.push_back({"category schedule is empty", 0, 0});
    return out;
  }
  if (s.counts.size() != s.adding_days.size()) {
    out.push_back({"category_counts and adding_days differ in length", 0, 0});
    return out;
  }
  if (s.adding_days.front() > 1) {
    out.push_back({"first adding day must be 1", s.adding_days.front(), 0});
  }
  for (std::size_t j = 0; j < s.counts.size(); ++j) {
    if (s.counts[j] < 1) out.push_back({"category count must be ≥ 1", s.adding_days[j], 0});
    if (s.adding_days[j] > days) out.push_back({"adding day after the last study day", s.adding_days[j], 0});
    if (j > 0 && s.adding_days[j] <= s.adding_days[j - 1]) {
      out.push_back({"adding days must be strictly increasing", s.adding_days[j], 0});
    }
  }
  return out;
}

// D x (M+1) allocation matrix; column 0 is control.
struct RandomizationPlan {
  Eigen::MatrixXd probs;

  int days() const { return static_cast<int>(probs.rows()); }
  int categories() const { return static_cast<int>(probs.cols()) - 1; }
  // pi_{md}, m and d 1-based
  double pi(int category, int day) const { return probs(day - 1, category); }
};

// Every active category and control share each day's mass equally.
inline RandomizationPlan build_uniform_plan(const CategorySchedule& schedule, int days) {
  if (auto v = validate_schedule(schedule, days); !v.empty()) throw ValidationError(std::move(v));
  const auto adds = schedule.category_adding_days();
  RandomizationPlan plan;
  plan.probs = Eigen::MatrixXd::Zero(days, static_cast<Eigen::Index>(adds.size()) + 1);
  for (int d = 1; d <= days; ++d) {
    const double p = 1.0 / (1.0 + schedule.active_count(d));
    plan.probs(d - 1, 0) = p;
    for (std::size_t m = 0; m < adds.size(); ++m) {
      if (adds[m] <= d) plan.probs(d - 1, static_cast<Eigen::Index>(m) + 1) = p;
    }
  }
  return plan;
}

enum class AvailabilityShape { constant, linear, linear_plateau, quadratic, explicit_values };

inline std::string to_string(AvailabilityShape s) {
  switch (s) {
    case AvailabilityShape::constant: return "constant";
    case AvailabilityShape::linear: return "linear";
    case AvailabilityShape::linear_plateau: return "linear_plateau";
    case AvailabilityShape::quadratic: return "quadratic";
    case AvailabilityShape::explicit_values: return "explicit";
  }
  return "unknown";
}

inline AvailabilityShape parse_availability_shape(std::string_view text) {
  if (text == "explicit") return AvailabilityShape::explicit_values;
  switch (parse_trend_shape(text)) {
    case TrendShape::constant: return AvailabilityShape::constant;
    case TrendShape::linear: return AvailabilityShape::linear;
    case TrendShape::linear_plateau: return AvailabilityShape::linear_plateau;
    case TrendShape::quadratic: return AvailabilityShape::quadratic;
  }
  return AvailabilityShape::constant;
}

// Expected availability tau_d. Shaped profiles are realized through the trend
// solver (adding day 1, one point per day); values outside (0, 1] are left in
// place and reported by validate_design.
struct AvailabilityProfile {
  AvailabilityShape shape = AvailabilityShape::constant;
  double mean = 1.0;
  double initial = 1.0;
  int turning_day = 0;
  std::vector<double> values;

  static AvailabilityProfile constant(double tau, int days) {
    return shaped(AvailabilityShape::constant, tau, tau, 0, days);
  }

  static AvailabilityProfile shaped(AvailabilityShape shape, double mean, double initial,
                                    int turning_day, int days) {
    AvailabilityProfile a;
    a.shape = shape;
    a.mean = mean;
    a.initial = initial;
    a.turning_day = turning_day;
    if (shape == AvailabilityShape::explicit_values) {
      throw ValidationError("explicit availability needs a value vector");
    }
    TrendSpec spec;
    spec.average = mean;
    spec.adding_day = 1;
    switch (shape) {
      case AvailabilityShape::constant: spec.shape = TrendShape::constant; break;
      case AvailabilityShape::linear: spec.shape = TrendShape::linear; break;
      case AvailabilityShape::linear_plateau: spec.shape = TrendShape::linear_plateau; break;
      case AvailabilityShape::quadratic: spec.shape = TrendShape::quadratic; break;
      default: break;
    }
    if (spec.shape != TrendShape::constant) spec.initial = initial;
    spec.turning_day = turning_day;
    const auto coeffs = solve_coefficients(spec, days, 1);
    a.values.resize(static_cast<std::size_t>(days));
    for (int d = 1; d <= days; ++d) a.values[static_cast<std::size_t>(d) - 1] = coeffs.value_at(d, 1, 1);
    if (shape == AvailabilityShape::constant) a.initial = mean;
    return a;
  }

  static AvailabilityProfile from_values(std::vector<double> values) {
    AvailabilityProfile a;
    a.shape = AvailabilityShape::explicit_values;
    a.values = std::move(values);
    a.mean = a.values.empty() ? 0.0
                              : std::accumulate(a.values.begin(), a.values.end(), 0.0) /
                                    static_cast<double>(a.values.size());
    a.initial = a.values.empty() ? 0.0 : a.values.front();
    return a;
  }

  double tau(int day) const { return values.at(static_cast<std::size_t>(day) - 1); }
};

// Shape of B_d, the baseline (control-mean) regressors.
struct BaselineBasis {
  enum class Kind { polynomial, linear_plateau };
  Kind kind = Kind::linear_plateau;
  int degree = 1;         // polynomial only; dimension = degree + 1
  int turning_day = 28;   // linear_plateau only

  static BaselineBasis polynomial(int q) { return {Kind::polynomial, q - 1, 0}; }
  static BaselineBasis plateau(int turning_day) { return {Kind::linear_plateau, 1, turning_day}; }

  int dimension() const { return kind == Kind::polynomial ? degree + 1 : 2; }

  Eigen::VectorXd at(int day, int occasion, int occ_per_day) const {
    if (kind == Kind::linear_plateau) {
      return basis_vector(TrendShape::linear_plateau, day, occasion, occ_per_day, turning_day);
    }
    const double T = occ_per_day;
    const double x = ((day - 1) * T + occasion - 1) / T;
    Eigen::VectorXd b(degree + 1);
    double v = 1.0;
    for (int k = 0; k <= degree; ++k, v *= x) b(k) = v;
    return b;
  }
};

struct DesignSpec {
  int days = 1;
  int occ_per_day = 1;
  CategorySchedule schedule;
  RandomizationPlan randomization;
  AvailabilityProfile availability;
  int q = 2;
  BaselineBasis baseline;

  int categories() const { return schedule.total(); }
  int decision_points() const { return days * occ_per_day; }
};

// Uniform plan, constant availability, linear-plateau baseline at day 28
// (or a polynomial baseline when q != 2).
inline DesignSpec make_design(int days, int occ_per_day, CategorySchedule schedule, double tau,
                              int q = 2) {
  DesignSpec d;
  d.days = days;
  d.occ_per_day = occ_per_day;
  d.schedule = std::move(schedule);
  d.randomization = build_uniform_plan(d.schedule, days);
  d.availability = AvailabilityProfile::constant(tau, days);
  d.q = q;
  d.baseline = q == 2 ? BaselineBasis::plateau(std::min(28, days)) : BaselineBasis::polynomial(q);
  return d;
}

// Every invariant breach, with coordinates; empty iff the design is valid.
inline std::vector<Violation> validate_design(const DesignSpec& spec) {
  std::vector<Violation> out;
  if (spec.days < 1) out.push_back({"days must be ≥ 1", 0, 0});
  if (spec.occ_per_day < 1) out.push_back({"occ_per_day must be ≥ 1", 0, 0});
  if (spec.q < 1) out.push_back({"q must be ≥ 1", 0, 0});
  if (spec.q >= 1 && spec.baseline.dimension() != spec.q) {
    out.push_back({"baseline basis dimension does not match q", 0, 0});
  }
  if (spec.baseline.kind == BaselineBasis::Kind::linear_plateau &&
      (spec.baseline.turning_day < 1 || spec.baseline.turning_day > spec.days)) {
    out.push_back({"baseline turning day outside the study period", spec.baseline.turning_day, 0});
  }
  if (!out.empty()) return out;

  auto sched = validate_schedule(spec.schedule, spec.days);
  out.insert(out.end(), sched.begin(), sched.end());
  if (!sched.empty()) return out;

  const int M = spec.schedule.total();
  const auto adds = spec.schedule.category_adding_days();
  const auto& P = spec.randomization.probs;
  if (P.rows() != spec.days || P.cols() != M + 1) {
    out.push_back({"randomization matrix must be days × (M+1) = " + std::to_string(spec.days) +
                       " × " + std::to_string(M + 1),
                   0, 0});
  } else {
    for (int d = 1; d <= spec.days; ++d) {
      double row = 0.0;
      for (int c = 0; c <= M; ++c) {
        const double p = P(d - 1, c);
        row += p;
        if (!(p >= 0.0 && p <= 1.0)) out.push_back({"probability outside [0, 1]", d, c});
      }
      if (std::abs(row - 1.0) > 1e-9) out.push_back({"row sum ≠ 1", d, 0});
      for (int m = 1; m <= M; ++m) {
        const double p = P(d - 1, m);
        const int a = adds[static_cast<std::size_t>(m) - 1];
        if (d < a && p != 0.0) out.push_back({"probability positive before adding day", d, m});
        if (d >= a && !(p > 0.0)) out.push_back({"probability zero on or after adding day", d, m});
      }
    }
  }

  const auto& tau = spec.availability.values;
  if (static_cast<int>(tau.size()) != spec.days) {
    out.push_back({"availability must have one value per day", 0, 0});
  } else {
    for (int d = 1; d <= spec.days; ++d) {
      const double t = tau[static_cast<std::size_t>(d) - 1];
      if (!(t > 0.0 && t <= 1.0)) out.push_back({"availability outside (0, 1]", d, 0});
    }
    const double mean = std::accumulate(tau.begin(), tau.end(), 0.0) / spec.days;
    if (std::abs(mean - spec.availability.mean) > 1e-9) {
      out.push_back({"availability mean differs from declared mean", 0, 0});
    }
  }
  return out;
}

inline void require_valid(const DesignSpec& spec) {
  if (auto v = validate_design(spec); !v.empty()) throw ValidationError(std::move(v));
}

}  // namespace fleximrt
