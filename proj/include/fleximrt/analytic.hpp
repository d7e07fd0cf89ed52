#pragma once

// Working-model power machinery.
//
// Lambda = sum_{d,t} tau_d Q_d with, for categories m, m' active on day d,
//   block (m, m)  += tau_d pi_md (1 - pi_md) Z_md Z_md^T
//   block (m, m') -= tau_d pi_md pi_m'd      Z_md Z_m'd^T
// Under the constant-variance, uncorrelated working assumption
// Sigma_beta = sigma_bar^2 Lambda^{-1}, so the noncentrality of the Wald-type
// statistic is N delta^T Lambda delta and Lambda never needs inverting for
// power.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "design.hpp"
#include "distributions.hpp"
#include "errors.hpp"
#include "trend.hpp"

namespace fleximrt {

struct InformationMatrix {
  Eigen::MatrixXd lambda;
  std::vector<int> offsets;  // start row of each category block; offsets.back() == sum_p

  int sum_p() const { return static_cast<int>(lambda.rows()); }

  // Sigma_beta = sigma_bar^2 Lambda^{-1}; reporting only.
  Eigen::MatrixXd sigma_beta(double sigma_bar = 1.0) const {
    return sigma_bar * sigma_bar *
           lambda.ldlt().solve(Eigen::MatrixXd::Identity(lambda.rows(), lambda.cols()));
  }
};

// Stacks per-category coefficient vectors into one delta of length sum_p.
inline Eigen::VectorXd stack_coefficients(const std::vector<TrendCoefficients>& trends) {
  int total = 0;
  for (const auto& t : trends) total += t.size();
  Eigen::VectorXd out(total);
  int at = 0;
  for (const auto& t : trends) {
    out.segment(at, t.size()) = t.coeffs;
    at += t.size();
  }
  return out;
}

inline InformationMatrix build_information_matrix(const DesignSpec& design,
                                                  const std::vector<TrendCoefficients>& trends) {
  require_valid(design);
  const int M = design.categories();
  if (static_cast<int>(trends.size()) != M) {
    throw ValidationError("expected " + std::to_string(M) + " trends, got " +
                          std::to_string(trends.size()));
  }
  const auto adds = design.schedule.category_adding_days();
  InformationMatrix info;
  info.offsets.resize(static_cast<std::size_t>(M) + 1, 0);
  for (int m = 0; m < M; ++m) {
    if (trends[static_cast<std::size_t>(m)].adding_day != adds[static_cast<std::size_t>(m)]) {
      throw ValidationError(
          std::vector<Violation>{{"trend adding day disagrees with the schedule", 0, m + 1}});
    }
    info.offsets[static_cast<std::size_t>(m) + 1] =
        info.offsets[static_cast<std::size_t>(m)] + trends[static_cast<std::size_t>(m)].size();
  }
  const int P = info.offsets.back();
  info.lambda = Eigen::MatrixXd::Zero(P, P);

  const int T = design.occ_per_day;
  std::vector<Eigen::VectorXd> z(static_cast<std::size_t>(M));
  for (int d = 1; d <= design.days; ++d) {
    const double tau = design.availability.tau(d);
    for (int t = 1; t <= T; ++t) {
      for (int m = 0; m < M; ++m) {
        if (design.randomization.pi(m + 1, d) > 0.0) {
          z[static_cast<std::size_t>(m)] = trends[static_cast<std::size_t>(m)].basis(d, t, T);
        }
      }
      for (int m = 0; m < M; ++m) {
        const double pm = design.randomization.pi(m + 1, d);
        if (pm <= 0.0) continue;
        const auto& zm = z[static_cast<std::size_t>(m)];
        const int om = info.offsets[static_cast<std::size_t>(m)];
        info.lambda.block(om, om, zm.size(), zm.size()).noalias() +=
            (tau * pm * (1.0 - pm)) * zm * zm.transpose();
        for (int k = m + 1; k < M; ++k) {
          const double pk = design.randomization.pi(k + 1, d);
          if (pk <= 0.0) continue;
          const auto& zk = z[static_cast<std::size_t>(k)];
          const int ok = info.offsets[static_cast<std::size_t>(k)];
          info.lambda.block(om, ok, zm.size(), zk.size()).noalias() -=
              (tau * pm * pk) * zm * zk.transpose();
        }
      }
    }
  }
  // mirror the upper triangle of blocks, then average out float drift
  info.lambda.triangularView<Eigen::StrictlyLower>() =
      info.lambda.transpose().triangularView<Eigen::StrictlyLower>();
  info.lambda = 0.5 * (info.lambda + info.lambda.transpose()).eval();

  // Rank check on the unit-diagonal rescaling, so raw polynomial day
  // coordinates (x^2 in the thousands) do not masquerade as collinearity.
  const Eigen::VectorXd d = info.lambda.diagonal();
  if (!(d.minCoeff() > 0.0)) {
    throw SingularError("information matrix is singular (a coefficient has no information)");
  }
  const Eigen::VectorXd s = d.cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd corr = s.asDiagonal() * info.lambda * s.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  if (!(ev(0) > 1e-10 * ev(ev.size() - 1))) {
    throw SingularError("information matrix is singular (scaled eigenvalues " + std::to_string(ev(0)) +
                        " to " + std::to_string(ev(ev.size() - 1)) + ")");
  }
  return info;
}

inline double quadratic_form(const InformationMatrix& info, const Eigen::VectorXd& delta) {
  if (delta.size() != info.sum_p()) {
    throw ValidationError("delta has length " + std::to_string(delta.size()) + ", expected " +
                          std::to_string(info.sum_p()));
  }
  return delta.dot(info.lambda * delta);
}

// N delta^T Lambda delta
inline double noncentrality(const InformationMatrix& info, const Eigen::VectorXd& delta, long n) {
  if (n < 1) throw ValidationError("N must be ≥ 1");
  return static_cast<double>(n) * quadratic_form(info, delta);
}

enum class StatKind { chi_square, hotelling_n_q_1, hotelling_n };

inline std::string to_string(StatKind k) {
  switch (k) {
    case StatKind::chi_square: return "chi_square";
    case StatKind::hotelling_n_q_1: return "hotelling_n_q_1";
    case StatKind::hotelling_n: return "hotelling_n";
  }
  return "unknown";
}

// The R-style labels used by the original calculator.
inline std::string display_label(StatKind k) {
  switch (k) {
    case StatKind::chi_square: return "chi";
    case StatKind::hotelling_n_q_1: return "hotelling N-q-1";
    case StatKind::hotelling_n: return "hotelling N";
  }
  return "unknown";
}

inline StatKind parse_stat_kind(std::string_view text) {
  std::string s;
  for (char c : text) {
    if (c == ' ' || c == '_' || c == '-') continue;
    s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (s == "chi" || s == "chisquare" || s == "chisq") return StatKind::chi_square;
  if (s == "hotellingnq1") return StatKind::hotelling_n_q_1;
  if (s == "hotellingn") return StatKind::hotelling_n;
  if (s == "hotellingn1") {
    throw ValidationError("test 'hotelling N-1' has no defined reference distribution");
  }
  throw ValidationError("unknown test statistic '" + std::string(text) + "'");
}

// Reference distribution of the Wald-type statistic for a given N.
struct TestStatistic {
  StatKind kind = StatKind::hotelling_n_q_1;
  int q = 1;
  int sum_p = 1;

  int min_n() const {
    switch (kind) {
      case StatKind::chi_square: return sum_p + 1;
      case StatKind::hotelling_n_q_1: return q + sum_p + 1;
      case StatKind::hotelling_n: return sum_p;
    }
    return 1;
  }

  bool feasible(long n) const { return n >= min_n(); }

  void require_feasible(long n) const {
    if (!feasible(n)) {
      throw InfeasibleError("N = " + std::to_string(n) + " is too small for " + to_string(kind) +
                            " (needs N ≥ " + std::to_string(min_n()) + ")");
    }
  }

  double df1() const { return sum_p; }

  double df2(long n) const {
    switch (kind) {
      case StatKind::chi_square: return 0.0;
      case StatKind::hotelling_n_q_1: return static_cast<double>(n - q - sum_p);
      case StatKind::hotelling_n: return static_cast<double>(n - sum_p + 1);
    }
    return 0.0;
  }

  // T^2 = scale * F
  double f_scale(long n) const {
    const double nn = static_cast<double>(n);
    switch (kind) {
      case StatKind::chi_square: return 1.0;
      case StatKind::hotelling_n_q_1: return sum_p * (nn - q - 1.0) / (nn - q - sum_p);
      case StatKind::hotelling_n: return sum_p * nn / (nn - sum_p + 1.0);
    }
    return 1.0;
  }

  DistRequest reference(long n, double ncp = 0.0) const {
    if (kind == StatKind::chi_square) return {Family::chi_square, df1(), 0.0, ncp};
    return {Family::f, df1(), df2(n), ncp};
  }

  // Critical value on the reference scale (chi-square or F).
  double critical_value(long n, double alpha) const { return quantile(reference(n), 1.0 - alpha); }

  // Maps the Wald statistic N b^T Sigma^{-1} b onto the reference scale.
  double to_reference_scale(double wald, long n) const { return wald / f_scale(n); }
};

inline void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("significance level must lie in (0, 1)");
}

// P(reference(ncp) > critical value)
inline double formulated_power(const TestStatistic& stat, double ncp, long n, double alpha) {
  check_alpha(alpha);
  stat.require_feasible(n);
  const double crit = stat.critical_value(n, alpha);
  return survival(stat.reference(n, ncp), crit);
}

inline double formulated_power(StatKind kind, double ncp, long n, int q, int sum_p, double alpha) {
  return formulated_power(TestStatistic{kind, q, sum_p}, ncp, n, alpha);
}

// Upper bound on (b_hat - b)^T Sigma_hat^{-1} (b_hat - b) that holds with
// probability 1 - alpha.
inline double precision_bound(const TestStatistic& stat, long n, double alpha) {
  check_alpha(alpha);
  stat.require_feasible(n);
  return stat.f_scale(n) * stat.critical_value(n, alpha) / static_cast<double>(n);
}

inline double precision_bound(StatKind kind, long n, int q, int sum_p, double alpha) {
  return precision_bound(TestStatistic{kind, q, sum_p}, n, alpha);
}

// Probability that the precision pivot stays below the requested precision
// form Delta^T Lambda Delta at sample size n.
inline double formulated_coverage(const TestStatistic& stat, double precision_form, long n) {
  stat.require_feasible(n);
  const double pivot_limit = static_cast<double>(n) * precision_form / stat.f_scale(n);
  return cdf(stat.reference(n), pivot_limit);
}

}  // namespace fleximrt
