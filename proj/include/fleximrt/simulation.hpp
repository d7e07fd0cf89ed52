#pragma once

// Monte-Carlo lab: synthetic trial data, least-squares fit, Mancl-DeRouen
// small-sample sandwich, and per-replicate rejection / coverage events.
//
// The working request only fixes N (and the precision target in precision
// mode). Data are generated and analysed under the truth design.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "analytic.hpp"
#include "design.hpp"
#include "errors.hpp"
#include "sizing.hpp"
#include "trend.hpp"

namespace fleximrt {

enum class ErrorKind { iid_normal, exchangeable, ar1, heteroscedastic_linear };

inline std::string to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::iid_normal: return "iid_normal";
    case ErrorKind::exchangeable: return "exchangeable";
    case ErrorKind::ar1: return "ar1";
    case ErrorKind::heteroscedastic_linear: return "heteroscedastic_linear";
  }
  return "unknown";
}

inline ErrorKind parse_error_kind(std::string_view text) {
  if (text == "iid_normal" || text == "iid") return ErrorKind::iid_normal;
  if (text == "exchangeable") return ErrorKind::exchangeable;
  if (text == "ar1") return ErrorKind::ar1;
  if (text == "heteroscedastic_linear" || text == "heteroscedastic") {
    return ErrorKind::heteroscedastic_linear;
  }
  throw ValidationError("unknown error model '" + std::string(text) + "'");
}

// sigma is the marginal standard deviation; for the heteroscedastic kind the
// per-day variance runs linearly from variance_initial on day 1 with mean
// sigma^2 over the study.
struct ErrorModel {
  ErrorKind kind = ErrorKind::iid_normal;
  double sigma = 1.0;
  double rho = 0.0;
  double phi = 0.0;
  double variance_initial = 1.0;

  double mean_variance() const { return sigma * sigma; }

  double variance_on_day(int day, int days) const {
    if (kind != ErrorKind::heteroscedastic_linear || days == 1) return mean_variance();
    const double slope = 2.0 * (mean_variance() - variance_initial) / (days - 1.0);
    return variance_initial + slope * (day - 1.0);
  }
};

inline std::vector<Violation> validate_error_model(const ErrorModel& e, int days) {
  std::vector<Violation> out;
  if (!(e.sigma >= 0.0) || !std::isfinite(e.sigma)) out.push_back({"sigma must be ≥ 0", 0, 0});
  if (e.kind == ErrorKind::exchangeable && !(std::abs(e.rho) < 1.0 && e.rho >= 0.0)) {
    out.push_back({"exchangeable rho must lie in [0, 1)", 0, 0});
  }
  if (e.kind == ErrorKind::ar1 && !(std::abs(e.phi) < 1.0)) out.push_back({"|phi| must be < 1", 0, 0});
  if (e.kind == ErrorKind::heteroscedastic_linear) {
    if (!(e.variance_initial > 0.0)) out.push_back({"initial variance must be > 0", 0, 0});
    if (!(e.variance_on_day(days, days) > 0.0)) out.push_back({"final-day variance must be > 0", days, 0});
  }
  return out;
}

struct TruthSpec {
  DesignSpec design;
  std::vector<TrendSpec> trends;  // standardized effects; beta = sigma * delta
  Eigen::VectorXd alpha_coeffs;   // length q; empty means zeros
  ErrorModel error;
  std::uint64_t seed = 20240101;
  int replicates = 1000;
};

struct ScenarioConfig {
  std::string scenario_id = "scenario";
  TruthSpec truth;
  SizingRequest working;
  std::optional<long> n;  // overrides the working-model size
  unsigned threads = 0;   // 0 = hardware concurrency
};

struct McResult {
  std::string scenario_id;
  SizingMethod method = SizingMethod::power;
  StatKind stat = StatKind::hotelling_n_q_1;
  long n = 0;
  int replicates = 0;
  int hits = 0;      // rejections or coverage events
  int failures = 0;  // replicates dropped for singular fits
  double fraction = 0.0;
  double se = 0.0;
  double precision_form = 0.0;  // coverage threshold, precision mode only
};

// Column layout of the regressor X_{id} = (B_d, (1{A=m} - pi_md) Z_md for m = 1..M).
class RegressionLayout {
 public:
  RegressionLayout(const DesignSpec& design, const std::vector<TrendCoefficients>& trends)
      : occ_per_day_(design.occ_per_day), q_(design.q) {
    offsets_.push_back(q_);
    for (const auto& t : trends) offsets_.push_back(offsets_.back() + t.size());
    dim_ = offsets_.back();
    const int M = static_cast<int>(trends.size());
    const int J = design.decision_points();
    rows_.resize(static_cast<std::size_t>(J));
    for (int d = 1; d <= design.days; ++d) {
      for (int t = 1; t <= design.occ_per_day; ++t) {
        Eigen::MatrixXd& tab = rows_[static_cast<std::size_t>(point(d, t))];
        tab = Eigen::MatrixXd::Zero(dim_, M + 1);
        const Eigen::VectorXd b = design.baseline.at(d, t, design.occ_per_day);
        for (int a = 0; a <= M; ++a) {
          tab.col(a).head(q_) = b;
          for (int m = 1; m <= M; ++m) {
            const double pi = design.randomization.pi(m, d);
            if (pi <= 0.0) continue;
            const auto& tr = trends[static_cast<std::size_t>(m) - 1];
            const double centered = (a == m ? 1.0 : 0.0) - pi;
            tab.col(a).segment(offsets_[static_cast<std::size_t>(m) - 1], tr.size()) =
                centered * tr.basis(d, t, design.occ_per_day);
          }
        }
      }
    }
  }

  int point(int day, int occasion) const { return (day - 1) * occ_per_day_ + occasion - 1; }
  int dim() const { return dim_; }
  int q() const { return q_; }
  int sum_p() const { return dim_ - q_; }
  int points() const { return static_cast<int>(rows_.size()); }

  // X for decision point j (0-based) and action a (0 = control)
  auto x(int j, int a) const { return rows_[static_cast<std::size_t>(j)].col(a); }

 private:
  int occ_per_day_ = 1;
  int q_ = 0;
  int dim_ = 0;
  std::vector<int> offsets_;
  std::vector<Eigen::MatrixXd> rows_;
};

// Per-participant arrays over the D x T decision points, row-major by participant.
struct Dataset {
  long n = 0;
  int points = 0;
  std::vector<std::uint8_t> available;
  std::vector<std::uint8_t> action;
  std::vector<double> y;

  std::size_t at(long i, int j) const { return static_cast<std::size_t>(i) * points + j; }
};

struct Fit {
  Eigen::VectorXd theta;
  std::vector<Eigen::VectorXd> residuals;  // per participant, length points (0 where unavailable)
  Eigen::MatrixXd bread;                   // S = sum_i sum_j I X X^T
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Independent stream for replicate r; no dependence on scheduling.
inline std::mt19937_64 replicate_stream(std::uint64_t seed, std::uint64_t r) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ splitmix64(r + 0x51ED270B27A1ULL)));
}

// Resolved truth: coefficients, theta and the regression layout.
class TruthModel {
 public:
  explicit TruthModel(TruthSpec spec) : spec_(std::move(spec)) {
    std::vector<Violation> v = validate_design(spec_.design);
    auto e = validate_error_model(spec_.error, spec_.design.days);
    v.insert(v.end(), e.begin(), e.end());
    if (spec_.replicates < 1) v.push_back({"replicates must be ≥ 1", 0, 0});
    if (spec_.alpha_coeffs.size() != 0 && spec_.alpha_coeffs.size() != spec_.design.q) {
      v.push_back({"alpha_coeffs must have length q", 0, 0});
    }
    if (!v.empty()) throw ValidationError(std::move(v));
    const auto adds = spec_.design.schedule.category_adding_days();
    if (spec_.trends.size() != adds.size()) {
      throw ValidationError("truth needs one trend per category");
    }
    for (std::size_t m = 0; m < adds.size(); ++m) {
      if (spec_.trends[m].adding_day != adds[m]) {
        throw ValidationError(std::vector<Violation>{
            {"trend adding day disagrees with the schedule", spec_.trends[m].adding_day,
             static_cast<int>(m) + 1}});
      }
      trends_.push_back(
          solve_coefficients(spec_.trends[m], spec_.design.days, spec_.design.occ_per_day));
    }
    layout_.emplace(spec_.design, trends_);
    const double sigma_bar = std::sqrt(spec_.error.mean_variance());
    theta_ = Eigen::VectorXd::Zero(layout_->dim());
    if (spec_.alpha_coeffs.size() == spec_.design.q) theta_.head(spec_.design.q) = spec_.alpha_coeffs;
    theta_.tail(layout_->sum_p()) = sigma_bar * stack_coefficients(trends_);
    const int D = spec_.design.days;
    for (int d = 1; d <= D; ++d) day_sd_.push_back(std::sqrt(spec_.error.variance_on_day(d, D)));
  }

  TruthModel(const TruthModel&) = delete;
  TruthModel& operator=(const TruthModel&) = delete;

  const TruthSpec& spec() const { return spec_; }
  const RegressionLayout& layout() const { return *layout_; }
  const Eigen::VectorXd& theta() const { return theta_; }
  Eigen::VectorXd beta() const { return theta_.tail(layout_->sum_p()); }
  const std::vector<TrendCoefficients>& trends() const { return trends_; }

  Dataset generate(long n, std::mt19937_64& rng) const {
    const auto& design = spec_.design;
    const int J = design.decision_points();
    const int M = design.categories();
    Dataset ds;
    ds.n = n;
    ds.points = J;
    ds.available.assign(static_cast<std::size_t>(n) * J, 0);
    ds.action.assign(static_cast<std::size_t>(n) * J, 0);
    ds.y.assign(static_cast<std::size_t>(n) * J, 0.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto& err = spec_.error;
    const double innov = std::sqrt(std::max(0.0, 1.0 - err.phi * err.phi));
    const double shared = std::sqrt(std::max(0.0, err.rho));
    const double own = std::sqrt(std::max(0.0, 1.0 - err.rho));

    for (long i = 0; i < n; ++i) {
      const double z0 = err.kind == ErrorKind::exchangeable ? normal(rng) : 0.0;
      double prev = 0.0;
      for (int d = 1; d <= design.days; ++d) {
        const double tau = design.availability.tau(d);
        for (int t = 1; t <= design.occ_per_day; ++t) {
          const int j = layout_->point(d, t);
          const std::size_t k = ds.at(i, j);
          const bool avail = unif(rng) < tau;
          const double u = unif(rng);
          int a = 0;
          if (avail) {
            a = M;
            double acc = 0.0;
            for (int c = 0; c < M; ++c) {
              acc += design.randomization.probs(d - 1, c);
              if (u < acc) {
                a = c;
                break;
              }
            }
          }
          const double z = normal(rng);
          double e = 0.0;
          switch (err.kind) {
            case ErrorKind::iid_normal: e = err.sigma * z; break;
            case ErrorKind::exchangeable: e = err.sigma * (shared * z0 + own * z); break;
            case ErrorKind::ar1:
              e = (d == 1 && t == 1) ? err.sigma * z : err.phi * prev + err.sigma * innov * z;
              prev = e;
              break;
            case ErrorKind::heteroscedastic_linear:
              e = day_sd_[static_cast<std::size_t>(d) - 1] * z;
              break;
          }
          ds.available[k] = avail ? 1 : 0;
          ds.action[k] = static_cast<std::uint8_t>(a);
          ds.y[k] = layout_->x(j, a).dot(theta_) + e;
        }
      }
    }
    return ds;
  }

 private:
  TruthSpec spec_;
  std::vector<TrendCoefficients> trends_;
  std::optional<RegressionLayout> layout_;
  Eigen::VectorXd theta_;
  std::vector<double> day_sd_;
};

inline Dataset generate_dataset(const TruthModel& truth, long n, std::uint64_t stream = 0) {
  auto rng = replicate_stream(truth.spec().seed, stream);
  return truth.generate(n, rng);
}

// theta_hat = S^{-1} sum I X Y
inline Fit fit_least_squares(const RegressionLayout& layout, const Dataset& ds) {
  const int K = layout.dim();
  Fit f;
  f.bread = Eigen::MatrixXd::Zero(K, K);
  Eigen::VectorXd xy = Eigen::VectorXd::Zero(K);
  for (long i = 0; i < ds.n; ++i) {
    for (int j = 0; j < ds.points; ++j) {
      const std::size_t k = ds.at(i, j);
      if (!ds.available[k]) continue;
      const auto x = layout.x(j, ds.action[k]);
      f.bread.selfadjointView<Eigen::Lower>().rankUpdate(x);
      xy.noalias() += ds.y[k] * x;
    }
  }
  f.bread = f.bread.selfadjointView<Eigen::Lower>();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(f.bread);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(f.bread);
  const auto& sv = svd.singularValues();
  if (ldlt.info() != Eigen::Success || !(sv(K - 1) > 1e-12 * sv(0))) {
    throw SingularError("design matrix is rank deficient on the available observations");
  }
  f.theta = ldlt.solve(xy);
  f.residuals.resize(static_cast<std::size_t>(ds.n));
  for (long i = 0; i < ds.n; ++i) {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(ds.points);
    for (int j = 0; j < ds.points; ++j) {
      const std::size_t k = ds.at(i, j);
      if (ds.available[k]) r(j) = ds.y[k] - layout.x(j, ds.action[k]).dot(f.theta);
    }
    f.residuals[static_cast<std::size_t>(i)] = std::move(r);
  }
  return f;
}

// Sigma_hat_theta = N * sum_i (S - S_i)^{-1} g_i g_i^T (S - S_i)^{-1}, g_i = sum_j I X e.
// Equals N S^{-1} [sum_i X_i (I - H_i)^{-1} e_i e_i^T (I - H_i)^{-1} X_i^T] S^{-1}
// by the Woodbury identity, without forming any D x D matrix.
inline Eigen::MatrixXd mancl_derouen_theta(const RegressionLayout& layout, const Dataset& ds,
                                           const Fit& fit) {
  const int K = layout.dim();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(K, K);
  Eigen::MatrixXd si(K, K);
  Eigen::VectorXd g(K);
  for (long i = 0; i < ds.n; ++i) {
    si.setZero();
    g.setZero();
    const auto& r = fit.residuals[static_cast<std::size_t>(i)];
    for (int j = 0; j < ds.points; ++j) {
      const std::size_t k = ds.at(i, j);
      if (!ds.available[k]) continue;
      const auto x = layout.x(j, ds.action[k]);
      si.selfadjointView<Eigen::Lower>().rankUpdate(x);
      g.noalias() += r(j) * x;
    }
    const Eigen::MatrixXd rest = fit.bread - Eigen::MatrixXd(si.selfadjointView<Eigen::Lower>());
    Eigen::LLT<Eigen::MatrixXd> llt(rest);
    if (llt.info() != Eigen::Success) {
      throw SingularError("I - H_i is singular for participant " + std::to_string(i + 1));
    }
    const Eigen::VectorXd u = llt.solve(g);
    acc.selfadjointView<Eigen::Lower>().rankUpdate(u);
  }
  acc = acc.selfadjointView<Eigen::Lower>();
  return static_cast<double>(ds.n) * acc;
}

inline Eigen::MatrixXd mancl_derouen_covariance(const RegressionLayout& layout, const Dataset& ds,
                                                const Fit& fit) {
  const int P = layout.sum_p();
  return mancl_derouen_theta(layout, ds, fit).bottomRightCorner(P, P);
}

// N x^T Sigma^{-1} x, or nullopt when Sigma is not positive definite.
inline std::optional<double> wald_form(const Eigen::MatrixXd& sigma_beta, const Eigen::VectorXd& x,
                                       long n) {
  Eigen::LLT<Eigen::MatrixXd> llt(sigma_beta);
  if (llt.info() != Eigen::Success) return std::nullopt;
  return static_cast<double>(n) * x.dot(llt.solve(x));
}

struct ReplicateOutcome {
  bool failed = false;
  bool hit = false;
  double statistic = 0.0;  // reference-scale test statistic or coverage pivot
};

// Fixed pieces of one study: truth, statistic, N and the event threshold.
struct StudyPlan {
  const TruthModel* truth = nullptr;
  SizingMethod method = SizingMethod::power;
  TestStatistic stat;
  double alpha = 0.05;
  long n = 0;
  double critical = 0.0;        // power mode, reference scale
  double precision_form = 0.0;  // precision mode
};

inline ReplicateOutcome run_replicate(const StudyPlan& plan, std::mt19937_64& rng) {
  ReplicateOutcome out;
  const auto& layout = plan.truth->layout();
  const Dataset ds = plan.truth->generate(plan.n, rng);
  try {
    const Fit fit = fit_least_squares(layout, ds);
    const Eigen::MatrixXd sb = mancl_derouen_covariance(layout, ds, fit);
    const Eigen::VectorXd bhat = fit.theta.tail(layout.sum_p());
    if (plan.method == SizingMethod::power) {
      const auto w = wald_form(sb, bhat, plan.n);
      if (!w) {
        out.failed = true;
        return out;
      }
      out.statistic = plan.stat.to_reference_scale(*w, plan.n);
      out.hit = out.statistic > plan.critical;
    } else {
      const auto w = wald_form(sb, bhat - plan.truth->beta(), plan.n);
      if (!w) {
        out.failed = true;
        return out;
      }
      out.statistic = *w / static_cast<double>(plan.n);
      out.hit = out.statistic <= plan.precision_form;
    }
  } catch (const SingularError&) {
    out.failed = true;
  }
  return out;
}

inline constexpr double kMaxFailureFraction = 0.05;

class SimulationError : public Error {
 public:
  using Error::Error;
};

// Runs replicates on a pool of threads; outcomes land in per-replicate slots
// so the tally does not depend on the schedule.
inline McResult run_study(const ScenarioConfig& sc) {
  const TruthModel truth(sc.truth);
  const auto& w = sc.working;
  if (w.design.days != truth.spec().design.days ||
      w.design.occ_per_day != truth.spec().design.occ_per_day) {
    throw ValidationError("truth and working designs must share days and occ_per_day");
  }

  StudyPlan plan;
  plan.truth = &truth;
  plan.method = w.method;
  plan.alpha = w.alpha;
  plan.stat = TestStatistic{w.stat, truth.spec().design.q, truth.layout().sum_p()};
  std::optional<SizingProblem> working;
  if (w.method == SizingMethod::precision || !sc.n) working = prepare(w);
  plan.n = sc.n ? *sc.n : solve_sample_size(w).n;
  if (plan.n < 1) throw ValidationError("N must be ≥ 1");
  plan.stat.require_feasible(plan.n);
  check_alpha(plan.alpha);
  if (plan.method == SizingMethod::power) {
    plan.critical = plan.stat.critical_value(plan.n, plan.alpha);
  } else {
    plan.precision_form = working->form;
  }

  const int R = truth.spec().replicates;
  std::vector<ReplicateOutcome> outcomes(static_cast<std::size_t>(R));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int r = next++; r < R; r = next++) {
      auto rng = replicate_stream(truth.spec().seed, static_cast<std::uint64_t>(r));
      outcomes[static_cast<std::size_t>(r)] = run_replicate(plan, rng);
    }
  };
  unsigned threads = sc.threads ? sc.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(R));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
  }

  McResult res;
  res.scenario_id = sc.scenario_id;
  res.method = plan.method;
  res.stat = w.stat;
  res.n = plan.n;
  res.replicates = R;
  res.precision_form = plan.precision_form;
  for (const auto& o : outcomes) {
    if (o.failed) ++res.failures;
    else if (o.hit) ++res.hits;
  }
  if (res.failures > kMaxFailureFraction * R) {
    throw SimulationError(std::to_string(res.failures) + " of " + std::to_string(R) +
                          " replicates failed (limit 5%)");
  }
  const int used = R - res.failures;
  res.fraction = used > 0 ? static_cast<double>(res.hits) / used : 0.0;
  res.se = used > 0 ? std::sqrt(res.fraction * (1.0 - res.fraction) / used) : 0.0;
  return res;
}

}  // namespace fleximrt
