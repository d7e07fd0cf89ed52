#include <gtest/gtest.h>

#include <boost/math/distributions/non_central_chi_squared.hpp>
#include <boost/math/distributions/non_central_f.hpp>

#include "fleximrt/distributions.hpp"
#include "properties.hpp"

using namespace fleximrt;

TEST(Central, TableValues) {
  EXPECT_NEAR(cdf({Family::chi_square, 1, 0, 0}, 3.8415), 0.95, 1e-4);
  EXPECT_NEAR(quantile({Family::chi_square, 1, 0, 0}, 0.95), 3.841458820694124, 1e-8);
  EXPECT_NEAR(quantile({Family::f, 8, 44, 0}, 0.95), 2.15720777984, 1e-8);
}

// Boost's own noncentral distributions serve as an independent oracle.
TEST(Noncentral, MatchesBoostDistributions) {
  namespace bm = boost::math;
  for (double df : {1.0, 3.0, 8.0, 15.0}) {
    for (double ncp : {0.5, 5.0, 40.0, 400.0}) {
      const bm::non_central_chi_squared ref(df, ncp);
      for (double x : {0.5, 5.0, 30.0, 120.0, 500.0}) {
        EXPECT_NEAR(noncentral_chisq_cdf(x, df, ncp), bm::cdf(ref, x), 1e-9) << df << " " << ncp << " " << x;
      }
    }
  }
  for (double df2 : {5.0, 46.0, 180.0}) {
    for (double ncp : {0.0, 3.0, 30.0, 150.0}) {
      const bm::non_central_f ref(8.0, df2, ncp);
      for (double x : {0.3, 1.0, 2.5, 10.0}) {
        EXPECT_NEAR(noncentral_f_cdf(x, 8.0, df2, ncp), bm::cdf(ref, x), 1e-9) << df2 << " " << ncp << " " << x;
      }
    }
  }
}

// Far upper tail: 1 - cdf would round to zero, the complemented sum does not.
TEST(Noncentral, UpperTailKeepsPrecision) {
  const DistRequest r{Family::chi_square, 4, 0, 150};
  EXPECT_NEAR(survival(r, 400) / 9.47116074792997e-15, 1.0, 1e-6);
  EXPECT_NEAR(survival(r, 500) / 5.9840918291364286e-24, 1.0, 1e-6);
  // and symmetrically for a tiny lower tail
  EXPECT_NEAR(cdf({Family::f, 4, 50, 150}, 0.5) / 1.6427011701200376e-28, 1.0, 1e-6);
  // near one the absolute error is bounded by the truncated Poisson mass
  const DistRequest f{Family::f, 4, 50, 150};
  EXPECT_NEAR(survival(f, 0.5) + cdf(f, 0.5), 1.0, 1e-12);
}

TEST(Noncentral, TruncationBoundReported) {
  const auto v = cdf_detail({Family::chi_square, 4, 0, 50}, 40);
  EXPECT_LE(v.truncation_bound, 1e-10);
  EXPECT_GE(v.value, 0.0);
}

TEST(Errors, RejectsBadInput) {
  EXPECT_THROW(cdf({Family::chi_square, 0, 0, 0}, 1.0), ValidationError);
  EXPECT_THROW(cdf({Family::f, 2, 0, 0}, 1.0), ValidationError);
  EXPECT_THROW(cdf({Family::chi_square, 2, 0, -1}, 1.0), ValidationError);
  EXPECT_THROW(cdf({Family::chi_square, 2, 0, 2e5}, 1.0), NumericError);
  EXPECT_THROW(quantile({Family::chi_square, 2, 0, 0}, 1.0), ValidationError);
}

TEST(Edges, BoundaryArguments) {
  EXPECT_EQ(cdf({Family::chi_square, 2, 0, 3}, 0.0), 0.0);
  EXPECT_EQ(cdf({Family::chi_square, 2, 0, 3}, -1.0), 0.0);
  EXPECT_EQ(survival({Family::f, 2, 9, 3}, 0.0), 1.0);
  EXPECT_EQ(cdf({Family::f, 2, 9, 3}, std::numeric_limits<double>::infinity()), 1.0);
}

TEST(Properties, QuantileInvertsCdf) {
  const auto c = props::quantile_cdf_identity(300, 1e-8);
  EXPECT_TRUE(c.ok) << c.detail;
}

TEST(Properties, SamplingOracle) {
  const auto c = props::sampling_oracle(200000, 4e-3);
  EXPECT_TRUE(c.ok) << c.detail;
}

TEST(Properties, CdfMonotoneInXAndDecreasingInNcp) {
  std::mt19937_64 g(3);
  for (int k = 0; k < 100; ++k) {
    auto r = props::random_request(g);
    double prev = 0.0;
    for (double x = 0.1; x < 80; x *= 1.7) {
      const double v = cdf(r, x);
      EXPECT_GE(v, prev - 1e-15);
      prev = v;
    }
    auto bigger = r;
    bigger.ncp += 5.0;
    EXPECT_LE(cdf(bigger, 3.0), cdf(r, 3.0) + 1e-15);
  }
}
