#include <gtest/gtest.h>

#include "fleximrt/sizing.hpp"
#include "properties.hpp"
#include "scenarios.hpp"

using namespace fleximrt;
using namespace scenarios;

namespace {

constexpr StatKind kChi = StatKind::chi_square;
constexpr StatKind kN = StatKind::hotelling_n;
constexpr StatKind kNq1 = StatKind::hotelling_n_q_1;

long size_of(const SizingRequest& r) { return solve_sample_size(r).n; }

}  // namespace

struct TableRow {
  double average;
  double tau;
  StatKind stat;
  long n;
};

class CorrectModelTable : public ::testing::TestWithParam<TableRow> {};

TEST_P(CorrectModelTable, ReproducesN) {
  const auto row = GetParam();
  const auto r = solve_sample_size(base_study(row.average, row.tau, row.stat));
  EXPECT_EQ(r.n, row.n);
  EXPECT_GE(r.at_n.value, 0.8);
  ASSERT_TRUE(r.at_n_minus_1.has_value());
  EXPECT_LT(r.at_n_minus_1->value, 0.8);
}

INSTANTIATE_TEST_SUITE_P(
    Power, CorrectModelTable,
    ::testing::Values(TableRow{0.10, 1.0, kChi, 46}, TableRow{0.06, 1.0, kChi, 127}, TableRow{0.10, 1.0, kN, 54},
                      TableRow{0.06, 1.0, kN, 135}, TableRow{0.10, 1.0, kNq1, 54}, TableRow{0.06, 1.0, kNq1, 135},
                      TableRow{0.10, 0.7, kChi, 65}, TableRow{0.06, 0.7, kChi, 182}, TableRow{0.10, 0.7, kN, 73},
                      TableRow{0.06, 0.7, kN, 190}, TableRow{0.10, 0.7, kNq1, 73}, TableRow{0.06, 0.7, kNq1, 190}));

TEST(Diamante, ExactRows) {
  EXPECT_EQ(size_of(diamante_constant()), 117);
  EXPECT_EQ(size_of(diamante_pooled()), 72);
  EXPECT_EQ(size_of(diamante_five()), 163);
  EXPECT_EQ(size_of(diamante_five(0.7)), 230);
  EXPECT_EQ(size_of(diamante_five(0.5)), 319);
}

TEST(Diamante, ReconstructedTrendsWithinTwo) {
  EXPECT_NEAR(size_of(diamante_linear()), 116, 2);
  EXPECT_NEAR(size_of(diamante_quadratic()), 101, 2);
}

TEST(Precision, CorrectModelRows) {
  EXPECT_EQ(size_of(base_precision(0.10, kChi)), 47);
  EXPECT_EQ(size_of(base_precision(0.10, kN)), 59);
  EXPECT_EQ(size_of(base_precision(0.10, kNq1)), 59);
  EXPECT_EQ(size_of(base_precision(0.06, kChi)), 132);
  EXPECT_EQ(size_of(base_precision(0.06, kN)), 143);
  EXPECT_EQ(size_of(base_precision(0.06, kNq1)), 143);
  EXPECT_EQ(size_of(base_precision(0.10, kChi, 90)), 88);
  EXPECT_EQ(size_of(base_precision(0.06, kChi, 90)), 249);
  EXPECT_EQ(size_of(diamante_precision()), 86);
}

TEST(Precision, CoverageAtSolvedN) {
  const auto r = solve_sample_size(base_precision(0.10, kNq1));
  EXPECT_GE(r.at_n.value, 0.95 - 1e-12);
  ASSERT_TRUE(r.at_n_minus_1);
  EXPECT_LT(r.at_n_minus_1->value, 0.95);
  EXPECT_GE(r.quadratic_form, r.at_n.bound);
}

TEST(Evaluate, DemoPowerAt73) {
  const auto e = evaluate_at_n(base_study(0.1, 0.7, kNq1), 73);
  EXPECT_NEAR(e.value, 0.80, 0.005);
  EXPECT_EQ(e.df1, 8);
  EXPECT_EQ(e.df2, 63);
  EXPECT_THROW(evaluate_at_n(base_study(0.1, 0.7, kNq1), 5), InfeasibleError);
}

TEST(Evaluate, ZeroEffectGivesAlpha) {
  auto r = base_study(0.0, 1.0, kChi, 180, 0.0);
  EXPECT_NEAR(evaluate_at_n(r, 40).value, 0.05, 1e-9);
}

TEST(Errors, InfeasibleAndInvalid) {
  EXPECT_THROW(solve_sample_size(base_study(1e-5, 1.0, kNq1, 180, 0.0)), InfeasibleError);
  EXPECT_THROW(solve_sample_size(base_study(0.0, 1.0, kNq1, 180, 0.0)), InfeasibleError);
  auto r = base_study(0.1, 1.0, kNq1);
  r.alpha = 1.5;
  EXPECT_THROW(solve_sample_size(r), ValidationError);
  r = base_study(0.1, 1.0, kNq1);
  r.trends.pop_back();
  EXPECT_THROW(solve_sample_size(r), ValidationError);
  r = base_study(0.1, 1.0, kNq1);
  r.trends[3].adding_day = 1;
  EXPECT_THROW(solve_sample_size(r), ValidationError);
}

TEST(Properties, MinimalityWitness) {
  const auto c = props::minimality_witness(50);
  EXPECT_TRUE(c.ok) << c.detail;
}

TEST(Properties, LargerEffectNeverNeedsMore) {
  for (auto k : {kChi, kN, kNq1}) {
    long prev = std::numeric_limits<long>::max();
    for (double avg = 0.03; avg <= 0.3; avg += 0.015) {
      const long n = size_of(base_study(avg, 0.8, k));
      EXPECT_LE(n, prev) << avg;
      prev = n;
    }
  }
}

// Far into the asymptotic range the three reference distributions agree.
TEST(Properties, StatisticsAgreeForLargeN) {
  const long chi = size_of(base_study(0.008, 1.0, kChi));
  const long hn = size_of(base_study(0.008, 1.0, kN));
  const long nq1 = size_of(base_study(0.008, 1.0, kNq1));
  ASSERT_GE(chi, 5000);
  EXPECT_LE(std::abs(hn - chi) - 8, 1);
  EXPECT_LE(std::abs(nq1 - hn), 1);
}

TEST(Properties, ScaleInvariance) {
  const auto c = props::scale_invariance();
  EXPECT_TRUE(c.ok) << c.detail;
}
