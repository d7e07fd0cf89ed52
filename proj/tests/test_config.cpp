#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "fleximrt/config.hpp"

using namespace fleximrt;
namespace fs = std::filesystem;

namespace {

json load(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

json demo() { return load(fs::path(FLEXIMRT_FIXTURES) / "demo_config.json"); }

std::vector<std::string> messages(const json& doc) {
  try {
    parse_study(doc);
  } catch (const ValidationError& e) {
    std::vector<std::string> out;
    for (const auto& v : e.violations()) out.push_back(v.describe());
    return out;
  }
  return {};
}

bool mentions(const std::vector<std::string>& msgs, const std::string& needle) {
  for (const auto& m : msgs) {
    if (m.find(needle) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

TEST(RoundTrip, EveryTableConfig) {
  for (const char* f : {"power_correct_model.json", "diamante.json", "precision_correct_model.json"}) {
    const json doc = load(fs::path(FLEXIMRT_FIXTURES) / f);
    ASSERT_FALSE(doc.at("cases").empty()) << f;
    for (const auto& c : doc.at("cases")) {
      const json once = to_json(parse_study(c.at("config")));
      EXPECT_EQ(to_json(parse_study(once)), once) << c.at("name");
      EXPECT_EQ(run_size(parse_study(once)).at("n"), run_size(parse_study(c.at("config"))).at("n"));
    }
  }
}

TEST(RoundTrip, EveryScenario) {
  for (const auto& e : fs::directory_iterator(fs::path(FLEXIMRT_FIXTURES) / "scenarios")) {
    const json once = to_json(parse_scenario(load(e.path())));
    EXPECT_EQ(to_json(parse_scenario(once)), once) << e.path();
  }
}

TEST(Parse, DemoDefaults) {
  const auto c = parse_study(demo());
  EXPECT_EQ(c.days, 180);
  EXPECT_EQ(c.categories(), 4);
  EXPECT_EQ(c.test, StatKind::hotelling_n_q_1);
  EXPECT_EQ(c.method, SizingMethod::power);
  ASSERT_EQ(c.beta_mean.size(), 4u);
  EXPECT_EQ(c.beta_mean[3], 0.1);
  EXPECT_FALSE(c.SS);
}

TEST(Parse, Aliases) {
  json d = demo();
  d["method"] = "confidence interval";
  d.erase("beta_mean");
  d.erase("beta_initial");
  d["precision_mean"] = 0.1;
  d["precision_initial"] = 0.01;
  EXPECT_EQ(parse_study(d).method, SizingMethod::precision);
  d = demo();
  d["test"] = "hotelling_n";
  EXPECT_EQ(parse_study(d).test, StatKind::hotelling_n);
  d["test"] = "chi";
  EXPECT_EQ(parse_study(d).test, StatKind::chi_square);
  d["result"] = "power";
  d["SS"] = 50;
  EXPECT_EQ(parse_study(d).result, ResultChoice::power);
}

TEST(Parse, PerCategoryScheduleMatchesCounts) {
  json d = demo();
  d.erase("category_counts");
  d.erase("adding_days");
  d["aa_day_aa"] = {1, 1, 1, 91};
  EXPECT_EQ(to_json(parse_study(d)), to_json(parse_study(demo())));
}

TEST(Validation, DaysMessage) {
  json d = demo();
  d["days"] = 0;
  EXPECT_TRUE(mentions(messages(d), "days must be ≥ 1"));
}

TEST(Validation, PrecisionRejectsEffectSizes) {
  json d = demo();
  d["method"] = "precision";
  const auto m = messages(d);
  EXPECT_TRUE(mentions(m, "beta_mean"));
  EXPECT_TRUE(mentions(m, "beta_initial"));
}

TEST(Validation, CollectsEveryViolation) {
  json d = demo();
  d["bogus"] = 1;
  d["test"] = "hotelling N-1";
  d["sigLev"] = "x";
  const auto m = messages(d);
  EXPECT_TRUE(mentions(m, "bogus: unknown key"));
  EXPECT_TRUE(mentions(m, "test:"));
  EXPECT_TRUE(mentions(m, "sigLev: expected a number"));
}

TEST(Validation, MalformedRandomizationMatrix) {
  json d = demo();
  d["prob"] = json::array({{0.2, 0.2}});
  EXPECT_TRUE(mentions(messages(d), "randomization matrix must be days × (M+1)"));
  d["prob"] = "skewed";
  EXPECT_TRUE(mentions(messages(d), "prob:"));
}

TEST(Validation, EvaluationNeedsSS) {
  json d = demo();
  d["result"] = "choice_power";
  EXPECT_TRUE(mentions(messages(d), "SS is required"));
  d["SS"] = 0;
  EXPECT_TRUE(mentions(messages(d), "SS must be ≥ 1"));
}

TEST(Validation, WrongLengthArray) {
  json d = demo();
  d["beta_mean"] = {0.1, 0.1};
  EXPECT_TRUE(mentions(messages(d), "beta_mean: expected 4 entries"));
}

TEST(Broadcast, ScalarEqualsRepeatedArray) {
  json d = demo();
  d["beta_mean"] = {0.1, 0.1, 0.1, 0.1};
  d["beta_initial"] = {0.01, 0.01, 0.01, 0.01};
  EXPECT_EQ(run_size(parse_study(d)).at("n"), 73);
}

TEST(Effects, RawUnitsDivideBySigma) {
  json d = demo();
  d["effect_units"] = "raw";
  d["sigma"] = 2.0;
  d["beta_mean"] = 0.2;
  d["beta_initial"] = 0.02;
  EXPECT_EQ(run_size(parse_study(d)).at("n"), 73);
}

TEST(Output, Sentences) {
  const auto c = parse_study(demo());
  EXPECT_EQ(run_size(c).at("sentence"),
            "The required sample size is 73 to attain 80% power when the significance level is 0.05.");
  EXPECT_EQ(run_evaluate(c, 73).at("sentence"),
            "The sample size 73 gives 80% power when the significance level is 0.05");
  EXPECT_EQ(format_level(0.05), "0.05");
  EXPECT_EQ(format_percent(0.8), "80");
}

TEST(Output, SizingResultFields) {
  const json r = run_size(parse_study(demo()));
  for (const char* k : {"n", "achieved_power", "at_n", "at_n_minus_1", "min_n", "method", "test", "alpha",
                        "nominal", "q", "sum_p", "quadratic_form", "coefficients", "sigma_beta_inverse",
                        "sentence", "config"}) {
    EXPECT_TRUE(r.contains(k)) << k;
  }
  EXPECT_GE(r.at("achieved_power").get<double>(), 0.8);
  EXPECT_LT(r.at("at_n_minus_1").at("power").get<double>(), 0.8);
  EXPECT_EQ(r.at("sum_p"), 8);
}

TEST(Output, CsvRow) {
  McResult r;
  r.scenario_id = "x";
  r.n = 54;
  r.replicates = 10;
  r.fraction = 0.8;
  const std::string row = csv_row(r);
  EXPECT_EQ(row.rfind("x,", 0), 0u);
  const std::string header = csv_header();
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), std::count(header.begin(), header.end(), ','));
}

TEST(Scenario, UnknownKeysAndDesignMismatch) {
  json s = load(fs::path(FLEXIMRT_FIXTURES) / "scenarios" / "mc_calibration.json");
  json bad = s;
  bad["extra"] = true;
  EXPECT_THROW(parse_scenario(bad), ValidationError);
  bad = s;
  bad["working"]["days"] = 90;
  bad["working"]["adding_days"] = {1, 46};
  bad["working"]["beta_quadratic_max"] = {28, 28, 28, 73};
  EXPECT_THROW(parse_scenario(bad), ValidationError);
}
