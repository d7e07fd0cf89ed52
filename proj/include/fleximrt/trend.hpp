#pragma once

// Effect-trend machinery: basis vectors Z_{mdt}, solving coefficients from
// (initial, average, turning day) summaries, and evaluating the fitted curve.
//
// Coordinates are global: the basis argument for day d, occasion t is
// ((d-1)T + t - 1)/T regardless of when a category enters the study.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace fleximrt {

enum class TrendShape { constant, linear, quadratic, linear_plateau };

inline int parameter_count(TrendShape shape) {
  switch (shape) {
    case TrendShape::constant: return 1;
    case TrendShape::linear: return 2;
    case TrendShape::linear_plateau: return 2;
    case TrendShape::quadratic: return 3;
  }
  return 0;
}

inline bool needs_turning_day(TrendShape shape) {
  return shape == TrendShape::quadratic || shape == TrendShape::linear_plateau;
}

inline std::string to_string(TrendShape shape) {
  switch (shape) {
    case TrendShape::constant: return "constant";
    case TrendShape::linear: return "linear";
    case TrendShape::quadratic: return "quadratic";
    case TrendShape::linear_plateau: return "linear_plateau";
  }
  return "unknown";
}

// Accepts the canonical names plus the R-style "linear and constant" and
// hyphenated spellings.
inline TrendShape parse_trend_shape(std::string_view text) {
  std::string s(text);
  for (char& c : s) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (c == '-' || c == ' ') c = '_';
  }
  if (s == "constant") return TrendShape::constant;
  if (s == "linear") return TrendShape::linear;
  if (s == "quadratic") return TrendShape::quadratic;
  if (s == "linear_plateau" || s == "linear_and_constant") return TrendShape::linear_plateau;
  throw ValidationError("unknown trend shape '" + std::string(text) + "'");
}

// Basis vector of length p for day d (1..D), occasion t (1..T).
inline Eigen::VectorXd basis_vector(TrendShape shape, int day, int occasion, int occ_per_day,
                                    int turning_day = 0) {
  if (day < 1 || occasion < 1 || occasion > occ_per_day) {
    throw ValidationError("decision point out of range (day " + std::to_string(day) +
                          ", occasion " + std::to_string(occasion) + ")");
  }
  const double T = occ_per_day;
  const double x = ((day - 1) * T + occasion - 1) / T;
  Eigen::VectorXd z(parameter_count(shape));
  switch (shape) {
    case TrendShape::constant:
      z << 1.0;
      break;
    case TrendShape::linear:
      z << 1.0, x;
      break;
    case TrendShape::quadratic:
      z << 1.0, x, x * x;
      break;
    case TrendShape::linear_plateau: {
      if (turning_day < 1) throw ValidationError("linear_plateau basis needs a turning day");
      const int capped = std::min(turning_day - 1, day - 1);
      z << 1.0, (capped * T + occasion - 1) / T;
      break;
    }
  }
  return z;
}

// User-facing description of one category's standardized effect curve.
struct TrendSpec {
  TrendShape shape = TrendShape::constant;
  std::optional<double> initial;  // value at (adding_day, t = 1); omitted for constant
  double average = 0.0;           // mean over active decision points
  int turning_day = 0;            // vertex (quadratic) or plateau start (linear_plateau)
  int adding_day = 1;
};

struct TrendCoefficients {
  Eigen::VectorXd coeffs;  // standardized delta_m, length p_m
  TrendShape shape = TrendShape::constant;
  int adding_day = 1;
  int turning_day = 0;

  int size() const { return static_cast<int>(coeffs.size()); }

  Eigen::VectorXd basis(int day, int occasion, int occ_per_day) const {
    return basis_vector(shape, day, occasion, occ_per_day, turning_day);
  }

  double value_at(int day, int occasion, int occ_per_day) const {
    return basis(day, occasion, occ_per_day).dot(coeffs);
  }
};

struct EffectSummary {
  double initial = 0.0;
  double average = 0.0;
};

namespace detail {

// Mean of the basis vector over every active decision point of a category.
inline Eigen::VectorXd mean_basis(TrendShape shape, int adding_day, int turning_day, int days,
                                  int occ_per_day) {
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(parameter_count(shape));
  long count = 0;
  for (int d = adding_day; d <= days; ++d) {
    for (int t = 1; t <= occ_per_day; ++t) {
      acc += basis_vector(shape, d, t, occ_per_day, turning_day);
      ++count;
    }
  }
  return acc / static_cast<double>(count);
}

}  // namespace detail

inline std::vector<Violation> validate_trend(const TrendSpec& spec, int days) {
  std::vector<Violation> out;
  if (spec.adding_day < 1 || spec.adding_day > days) {
    out.push_back({"adding day outside the study period", spec.adding_day, 0});
  }
  if (needs_turning_day(spec.shape)) {
    if (spec.turning_day < spec.adding_day || spec.turning_day > days) {
      out.push_back({"turning day must lie in [adding day, days]", spec.turning_day, 0});
    }
  }
  if (spec.shape == TrendShape::constant) {
    if (spec.initial && std::abs(*spec.initial - spec.average) > 1e-12) {
      out.push_back({"constant trend needs initial == average", 0, 0});
    }
  } else if (!spec.initial) {
    out.push_back({to_string(spec.shape) + " trend needs an initial value", 0, 0});
  }
  if (!std::isfinite(spec.average) || (spec.initial && !std::isfinite(*spec.initial))) {
    out.push_back({"trend summaries must be finite", 0, 0});
  }
  return out;
}

// Solves delta_m from the summaries:
//   constant        -> (average)
//   linear / plateau -> curve(adding day) = initial, mean over active points = average
//   quadratic       -> the two above plus zero derivative at the turning day
inline TrendCoefficients solve_coefficients(const TrendSpec& spec, int days, int occ_per_day) {
  if (auto v = validate_trend(spec, days); !v.empty()) throw ValidationError(std::move(v));
  if (occ_per_day < 1) throw ValidationError("occ_per_day must be ≥ 1");

  TrendCoefficients out;
  out.shape = spec.shape;
  out.adding_day = spec.adding_day;
  out.turning_day = needs_turning_day(spec.shape) ? spec.turning_day : 0;

  const int p = parameter_count(spec.shape);
  if (p == 1) {
    out.coeffs = Eigen::VectorXd::Constant(1, spec.average);
    return out;
  }

  Eigen::MatrixXd A(p, p);
  Eigen::VectorXd rhs(p);
  A.row(0) = basis_vector(spec.shape, spec.adding_day, 1, occ_per_day, out.turning_day).transpose();
  rhs(0) = *spec.initial;
  A.row(1) =
      detail::mean_basis(spec.shape, spec.adding_day, out.turning_day, days, occ_per_day).transpose();
  rhs(1) = spec.average;
  if (spec.shape == TrendShape::quadratic) {
    // d/dx (c0 + c1 x + c2 x^2) = c1 + 2 c2 x at the turning day's coordinate
    const double x_turn = spec.turning_day - 1.0;
    A.row(2) << 0.0, 1.0, 2.0 * x_turn;
    rhs(2) = 0.0;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  const auto& sv = svd.singularValues();
  const double smallest = sv(sv.size() - 1);
  if (smallest == 0.0 || sv(0) / smallest > 1e12) {
    throw SingularError("trend constraint system is singular for shape " + to_string(spec.shape) +
                        " (adding day " + std::to_string(spec.adding_day) + ", turning day " +
                        std::to_string(spec.turning_day) + ")");
  }
  out.coeffs = A.fullPivLu().solve(rhs);
  const double residual = (A * out.coeffs - rhs).cwiseAbs().maxCoeff();
  if (residual > 1e-8 * std::max(1.0, rhs.cwiseAbs().maxCoeff())) {
    throw NumericError("trend summaries unreachable for shape " + to_string(spec.shape) +
                       ", residual " + std::to_string(residual));
  }
  return out;
}

inline EffectSummary summarize_effect(const TrendCoefficients& c, int days, int occ_per_day) {
  EffectSummary s;
  s.initial = c.value_at(c.adding_day, 1, occ_per_day);
  s.average =
      detail::mean_basis(c.shape, c.adding_day, c.turning_day, days, occ_per_day).dot(c.coeffs);
  return s;
}

}  // namespace fleximrt
