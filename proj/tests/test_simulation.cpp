#include <gtest/gtest.h>

#include <cmath>

#include "fleximrt/simulation.hpp"
#include "properties.hpp"
#include "scenarios.hpp"

using namespace fleximrt;

namespace {

// 30 days, two constant categories, intercept-only baseline.
SizingRequest small_request(double effect = 0.1, double tau = 1.0) {
  SizingRequest w;
  w.design = make_design(30, 1, {{2}, {1}}, tau, 1);
  w.trends = {scenarios::flat(effect), scenarios::flat(effect)};
  w.stat = StatKind::hotelling_n;
  return w;
}

TruthSpec truth_of(const SizingRequest& w, std::uint64_t seed = 7) {
  TruthSpec t;
  t.design = w.design;
  t.trends = w.trends;
  t.seed = seed;
  return t;
}

// Rows X_ij over the available points of participant i.
Eigen::MatrixXd participant_rows(const RegressionLayout& layout, const Dataset& ds, long i,
                                 Eigen::VectorXd* resid, const Fit& fit) {
  std::vector<int> js;
  for (int j = 0; j < ds.points; ++j) {
    if (ds.available[ds.at(i, j)]) js.push_back(j);
  }
  Eigen::MatrixXd X(static_cast<Eigen::Index>(js.size()), layout.dim());
  resid->resize(static_cast<Eigen::Index>(js.size()));
  for (std::size_t r = 0; r < js.size(); ++r) {
    X.row(static_cast<Eigen::Index>(r)) = layout.x(js[r], ds.action[ds.at(i, js[r])]).transpose();
    (*resid)(static_cast<Eigen::Index>(r)) = fit.residuals[static_cast<std::size_t>(i)](js[r]);
  }
  return X;
}

}  // namespace

TEST(Fit, NoiselessRecovery) {
  const auto c = props::noiseless_recovery();
  EXPECT_TRUE(c.ok) << c.detail;
}

TEST(Fit, ResidualsOrthogonalToRegressors) {
  const auto w = scenarios::base_study(0.1, 0.7, StatKind::hotelling_n);
  TruthModel truth(truth_of(w));
  const auto ds = generate_dataset(truth, 40);
  const auto fit = fit_least_squares(truth.layout(), ds);
  Eigen::VectorXd score = Eigen::VectorXd::Zero(truth.layout().dim());
  for (long i = 0; i < ds.n; ++i) {
    Eigen::VectorXd e;
    const auto X = participant_rows(truth.layout(), ds, i, &e, fit);
    score += X.transpose() * e;
  }
  EXPECT_LT(score.cwiseAbs().maxCoeff(), 1e-8);
}

// Small-sample corrected sandwich computed the slow way, with explicit hat matrices.
TEST(Sandwich, WoodburyMatchesExplicitHatMatrices) {
  const auto w = small_request();
  auto t = truth_of(w);
  t.error.kind = ErrorKind::ar1;
  t.error.phi = 0.4;
  TruthModel truth(t);
  const auto& layout = truth.layout();
  const auto ds = generate_dataset(truth, 25);
  const auto fit = fit_least_squares(layout, ds);
  const Eigen::MatrixXd Sinv = fit.bread.inverse();
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(layout.dim(), layout.dim());
  for (long i = 0; i < ds.n; ++i) {
    Eigen::VectorXd e;
    const auto X = participant_rows(layout, ds, i, &e, fit);
    const Eigen::MatrixXd H = X * Sinv * X.transpose();
    const Eigen::VectorXd adj =
        (Eigen::MatrixXd::Identity(H.rows(), H.cols()) - H).partialPivLu().solve(e);
    const Eigen::VectorXd g = X.transpose() * adj;
    meat += g * g.transpose();
  }
  const Eigen::MatrixXd naive = ds.n * Sinv * meat * Sinv;
  const Eigen::MatrixXd fast = mancl_derouen_theta(layout, ds, fit);
  EXPECT_LT((naive - fast).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, naive.cwiseAbs().maxCoeff()));
}

TEST(Sandwich, SymmetricPositiveSemidefinite) {
  const auto w = scenarios::base_study(0.1, 0.7, StatKind::hotelling_n);
  TruthModel truth(truth_of(w));
  const auto ds = generate_dataset(truth, 30);
  const auto fit = fit_least_squares(truth.layout(), ds);
  const Eigen::MatrixXd sb = mancl_derouen_covariance(truth.layout(), ds, fit);
  EXPECT_EQ(sb.rows(), truth.layout().sum_p());
  EXPECT_LT((sb - sb.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sb);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12);
}

TEST(Sandwich, LeverageEigenvaluesInUnitInterval) {
  const auto w = small_request();
  TruthModel truth(truth_of(w));
  const auto ds = generate_dataset(truth, 20);
  const auto fit = fit_least_squares(truth.layout(), ds);
  const Eigen::MatrixXd Sinv = fit.bread.inverse();
  for (long i = 0; i < ds.n; ++i) {
    Eigen::VectorXd e;
    const auto X = participant_rows(truth.layout(), ds, i, &e, fit);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X * Sinv * X.transpose());
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12);
    EXPECT_LT(es.eigenvalues().maxCoeff(), 1.0);
  }
}

// Availability and action frequencies against the design, within 4 SE.
TEST(Generator, FrequenciesMatchDesign) {
  SizingRequest w;
  w.design = make_design(2, 1, {{2}, {1}}, 0.6, 1);
  w.trends = {scenarios::flat(0.1), scenarios::flat(0.1)};
  TruthModel truth(truth_of(w, 99));
  const long n = 100000;
  const auto ds = generate_dataset(truth, n);
  const double total = 2.0 * n;
  long avail = 0;
  std::array<long, 3> acts{};
  for (std::size_t k = 0; k < ds.available.size(); ++k) {
    if (!ds.available[k]) continue;
    ++avail;
    ++acts[ds.action[k]];
  }
  EXPECT_NEAR(avail / total, 0.6, 4 * std::sqrt(0.24 / total));
  for (long a : acts) EXPECT_NEAR(double(a) / avail, 1.0 / 3.0, 4 * std::sqrt((2.0 / 9.0) / avail));
}

TEST(Generator, FullAvailability) {
  TruthModel truth(truth_of(small_request()));
  const auto ds = generate_dataset(truth, 50);
  for (auto a : ds.available) EXPECT_EQ(a, 1);
}

TEST(Generator, StreamsAreReproducible) {
  TruthModel truth(truth_of(small_request()));
  const auto a = generate_dataset(truth, 10, 3);
  const auto b = generate_dataset(truth, 10, 3);
  const auto c = generate_dataset(truth, 10, 4);
  EXPECT_EQ(a.y, b.y);
  EXPECT_NE(a.y, c.y);
}

TEST(Study, ThreadCountDoesNotChangeResults) {
  ScenarioConfig sc;
  sc.working = small_request();
  sc.truth = truth_of(sc.working, 31);
  sc.truth.replicates = 60;
  sc.n = 40;
  sc.threads = 1;
  const auto one = run_study(sc);
  sc.threads = 3;
  const auto three = run_study(sc);
  EXPECT_EQ(one.hits, three.hits);
  EXPECT_EQ(one.failures, three.failures);
  EXPECT_EQ(one.fraction, three.fraction);
}

TEST(Study, TypeOneErrorCalibrated) {
  const auto c = props::type_one_calibration();
  EXPECT_TRUE(c.ok) << c.detail;
}

// beta_hat converges: error shrinks with N and is small at N = 10^4.
TEST(Study, EstimatorConsistency) {
  TruthModel truth(truth_of(small_request(0.3)));
  const Eigen::VectorXd beta = truth.beta();
  auto rel_error = [&](long n) {
    const auto ds = generate_dataset(truth, n, 5);
    const auto fit = fit_least_squares(truth.layout(), ds);
    return (fit.theta.tail(beta.size()) - beta).norm() / beta.norm();
  };
  const double e100 = rel_error(100), e10k = rel_error(10000);
  EXPECT_LT(e10k, e100);
  EXPECT_LT(e10k, 0.05);
}

// Replicate spread of beta_hat matches sigma^2 Lambda^{-1} / N.
TEST(Study, SamplingCovarianceMatchesInformation) {
  const auto w = small_request(0.1, 0.8);
  TruthModel truth(truth_of(w, 77));
  const long n = 200;
  const int reps = 400;
  const int P = truth.layout().sum_p();
  std::vector<Eigen::VectorXd> draws;
  for (int r = 0; r < reps; ++r) {
    const auto ds = generate_dataset(truth, n, static_cast<std::uint64_t>(r));
    draws.push_back(fit_least_squares(truth.layout(), ds).theta.tail(P));
  }
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(P);
  for (const auto& d : draws) mean += d;
  mean /= reps;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(P, P);
  for (const auto& d : draws) cov += (d - mean) * (d - mean).transpose();
  cov /= reps - 1;
  const auto info = build_information_matrix(w.design, truth.trends());
  const Eigen::MatrixXd expected = info.lambda.inverse() / static_cast<double>(n);
  for (int k = 0; k < P; ++k) EXPECT_NEAR(cov(k, k) / expected(k, k), 1.0, 0.15) << k;
}

// One participant per replicate leaves S - S_i empty: every replicate fails.
TEST(Study, TooManyFailuresRaise) {
  ScenarioConfig sc;
  sc.working.design = make_design(1, 1, {{1}, {1}}, 1.0, 1);
  sc.working.trends = {scenarios::flat(0.1)};
  sc.working.stat = StatKind::chi_square;
  sc.truth = truth_of(sc.working);
  sc.truth.replicates = 20;
  sc.n = 2;
  EXPECT_THROW(run_study(sc), SimulationError);
}

TEST(Study, CoverageNearNominal) {
  ScenarioConfig sc;
  sc.working = scenarios::base_precision(0.1, StatKind::hotelling_n);
  sc.truth = truth_of(sc.working, 5);
  sc.truth.replicates = 3000;
  const auto r = run_study(sc);
  EXPECT_EQ(r.n, 59);
  EXPECT_NEAR(r.fraction, 0.95, 3 * std::sqrt(0.95 * 0.05 / r.replicates)) << r.fraction;
}

TEST(Study, RejectsMismatchedDesigns) {
  ScenarioConfig sc;
  sc.working = small_request();
  sc.truth = truth_of(scenarios::base_study(0.1, 1.0, StatKind::hotelling_n));
  sc.n = 50;
  EXPECT_THROW(run_study(sc), ValidationError);
}
