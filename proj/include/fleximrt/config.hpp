#pragma once

// JSON study configuration. Key names follow the R calculator's arguments
// (days, occ_per_day, prob, beta_*, tau_*, sigma, pow, sigLev, method, test,
// result, SS); per-category fields accept a scalar (broadcast) or an array.

#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "analytic.hpp"
#include "design.hpp"
#include "errors.hpp"
#include "simulation.hpp"
#include "sizing.hpp"
#include "trend.hpp"

namespace fleximrt {

using json = nlohmann::json;

enum class ResultChoice { sample_size, power, coverage_probability };

inline std::string to_string(ResultChoice r) {
  switch (r) {
    case ResultChoice::sample_size: return "choice_sample_size";
    case ResultChoice::power: return "choice_power";
    case ResultChoice::coverage_probability: return "choice_coverage_probability";
  }
  return "unknown";
}

inline ResultChoice parse_result_choice(std::string_view s) {
  if (s == "choice_sample_size" || s == "sample_size") return ResultChoice::sample_size;
  if (s == "choice_power" || s == "power") return ResultChoice::power;
  if (s == "choice_coverage_probability" || s == "coverage_probability" || s == "coverage") {
    return ResultChoice::coverage_probability;
  }
  throw ValidationError("unknown result choice '" + std::string(s) + "'");
}

struct StudyConfig {
  int days = 0;
  int occ_per_day = 1;
  std::vector<int> category_counts;
  std::vector<int> adding_days;
  std::optional<Eigen::MatrixXd> prob;  // empty means uniform

  std::vector<TrendShape> beta_shape;
  std::vector<double> beta_mean;        // power: effect average; precision: target average
  std::vector<double> beta_initial;     // empty when every shape is constant
  std::vector<int> beta_quadratic_max;  // turning days, 0 where unused
  bool raw_effects = false;             // effects given on the outcome scale; delta = beta / sigma

  AvailabilityShape tau_shape = AvailabilityShape::constant;
  double tau_mean = 1.0;
  double tau_initial = 1.0;
  int tau_quadratic_max = 0;
  std::vector<double> tau_values;  // explicit profile

  std::optional<TrendShape> baseline_shape;  // defaults to the first beta shape
  int baseline_turning_day = 0;

  double sigma = 1.0;
  double pow = 0.8;
  double sigLev = 0.05;
  SizingMethod method = SizingMethod::power;
  StatKind test = StatKind::hotelling_n_q_1;
  ResultChoice result = ResultChoice::sample_size;
  std::optional<long> SS;

  int categories() const {
    int m = 0;
    for (int c : category_counts) m += c;
    return m;
  }
};

namespace detail {

struct Reader {
  const json& doc;
  std::vector<Violation>& out;
  std::string prefix;

  std::string path(const std::string& key) const { return prefix + key; }

  void fail(const std::string& key, const std::string& what) { out.push_back({path(key) + ": " + what, 0, 0}); }

  bool has(const std::string& key) const { return doc.contains(key) && !doc.at(key).is_null(); }

  template <class T>
  std::optional<T> scalar(const std::string& key) {
    if (!has(key)) return std::nullopt;
    const json& v = doc.at(key);
    if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) {
        fail(key, "expected a string");
        return std::nullopt;
      }
      return v.get<std::string>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) {
        if (v.is_number() && std::floor(v.get<double>()) == v.get<double>()) {
          return static_cast<T>(v.get<double>());
        }
        fail(key, "expected an integer");
        return std::nullopt;
      }
      return v.get<T>();
    } else {
      if (!v.is_number()) {
        fail(key, "expected a number");
        return std::nullopt;
      }
      return v.get<T>();
    }
  }

  // Scalar broadcast to n entries, or an array of exactly n entries.
  template <class T>
  std::optional<std::vector<T>> per_category(const std::string& key, int n) {
    if (!has(key)) return std::nullopt;
    const json& v = doc.at(key);
    std::vector<T> vals;
    auto convert = [&](const json& x) -> std::optional<T> {
      if constexpr (std::is_same_v<T, std::string>) {
        if (x.is_string()) return x.get<std::string>();
      } else if constexpr (std::is_integral_v<T>) {
        if (x.is_number() && std::floor(x.get<double>()) == x.get<double>()) {
          return static_cast<T>(x.get<double>());
        }
      } else {
        if (x.is_number()) return x.get<T>();
      }
      return std::nullopt;
    };
    if (v.is_array()) {
      for (const auto& x : v) {
        auto c = convert(x);
        if (!c) {
          fail(key, "array has an entry of the wrong type");
          return std::nullopt;
        }
        vals.push_back(*c);
      }
      if (n >= 0 && static_cast<int>(vals.size()) != n) {
        fail(key, "expected " + std::to_string(n) + " entries, got " + std::to_string(vals.size()));
        return std::nullopt;
      }
      return vals;
    }
    auto c = convert(v);
    if (!c) {
      fail(key, "has the wrong type");
      return std::nullopt;
    }
    if (n < 0) return std::vector<T>{*c};
    return std::vector<T>(static_cast<std::size_t>(n), *c);
  }
};

inline const std::vector<std::string>& known_study_keys() {
  static const std::vector<std::string> keys = {
      "days", "occ_per_day", "category_counts", "adding_days", "aa_day_aa", "prob",
      "beta_shape", "beta_mean", "beta_initial", "beta_quadratic_max", "precision_mean",
      "precision_initial", "effect_units", "tau_shape", "tau_mean", "tau_initial",
      "tau_quadratic_max", "tau_values", "baseline_shape", "baseline_turning_day", "sigma",
      "pow", "sigLev", "method", "test", "result", "SS"};
  return keys;
}

inline json shape_list(const std::vector<TrendShape>& v) {
  json a = json::array();
  for (auto s : v) a.push_back(to_string(s));
  return a;
}

}  // namespace detail

// Parses and cross-checks a study document; every problem found is reported
// in one ValidationError.
inline StudyConfig parse_study(const json& doc, const std::string& prefix = "") {
  std::vector<Violation> v;
  if (!doc.is_object()) throw ValidationError("configuration must be a JSON object");
  detail::Reader rd{doc, v, prefix};
  for (const auto& [key, _] : doc.items()) {
    const auto& known = detail::known_study_keys();
    if (std::find(known.begin(), known.end(), key) == known.end()) rd.fail(key, "unknown key");
  }
  // unknown keys do not stop the rest of the document from being checked
  const std::size_t key_errors = v.size();

  StudyConfig c;
  if (auto d = rd.scalar<int>("days")) c.days = *d;
  else if (!rd.has("days")) rd.fail("days", "required");
  if (auto t = rd.scalar<int>("occ_per_day")) c.occ_per_day = *t;
  if (c.days < 1 && rd.has("days")) v.push_back({"days must be ≥ 1", 0, 0});
  if (c.occ_per_day < 1) v.push_back({"occ_per_day must be ≥ 1", 0, 0});

  // schedule: counts + adding days, or the R-style per-category adding day list
  if (rd.has("aa_day_aa")) {
    if (rd.has("category_counts") || rd.has("adding_days")) {
      rd.fail("aa_day_aa", "conflicts with category_counts/adding_days");
    } else if (auto aa = rd.per_category<int>("aa_day_aa", -1)) {
      for (std::size_t i = 0; i < aa->size(); ++i) {
        if (i > 0 && (*aa)[i] < (*aa)[i - 1]) {
          rd.fail("aa_day_aa", "must be non-decreasing");
          break;
        }
        if (c.adding_days.empty() || c.adding_days.back() != (*aa)[i]) {
          c.adding_days.push_back((*aa)[i]);
          c.category_counts.push_back(0);
        }
        ++c.category_counts.back();
      }
    }
  } else {
    if (auto cc = rd.per_category<int>("category_counts", -1)) c.category_counts = *cc;
    else if (!rd.has("category_counts")) rd.fail("category_counts", "required");
    if (auto ad = rd.per_category<int>("adding_days", -1)) c.adding_days = *ad;
    else if (!rd.has("adding_days")) c.adding_days = std::vector<int>(c.category_counts.empty() ? 0 : 1, 1);
  }
  const int M = c.categories();
  if (v.size() > key_errors || M < 1 || c.days < 1) {
    if (v.empty()) v.push_back({"category schedule is empty", 0, 0});
    throw ValidationError(std::move(v));
  }
  {
    CategorySchedule s{c.category_counts, c.adding_days};
    auto sv = validate_schedule(s, c.days);
    v.insert(v.end(), sv.begin(), sv.end());
    if (!sv.empty()) throw ValidationError(std::move(v));
  }

  if (rd.has("prob")) {
    const json& p = doc.at("prob");
    if (p.is_string()) {
      if (p.get<std::string>() != "uniform") rd.fail("prob", "must be \"uniform\" or a matrix");
    } else if (p.is_array()) {
      const int rows = static_cast<int>(p.size());
      Eigen::MatrixXd mat(rows, M + 1);
      bool ok = rows == c.days;
      if (!ok) {
        v.push_back({"randomization matrix must be days × (M+1) = " + std::to_string(c.days) + " × " +
                         std::to_string(M + 1),
                     0, 0});
      }
      for (int r = 0; ok && r < rows; ++r) {
        const json& row = p[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<int>(row.size()) != M + 1) {
          v.push_back({"randomization matrix must be days × (M+1) = " + std::to_string(c.days) +
                           " × " + std::to_string(M + 1),
                       r + 1, 0});
          ok = false;
          break;
        }
        for (int k = 0; k <= M; ++k) {
          const json& x = row[static_cast<std::size_t>(k)];
          if (!x.is_number()) {
            v.push_back({"probability is not a number", r + 1, k});
            ok = false;
            break;
          }
          mat(r, k) = x.get<double>();
        }
      }
      if (ok) c.prob = mat;
    } else {
      rd.fail("prob", "must be \"uniform\" or a matrix");
    }
  }

  if (auto m = rd.scalar<std::string>("method")) {
    if (*m == "power") c.method = SizingMethod::power;
    else if (*m == "precision" || *m == "confidence interval" || *m == "confidence_interval") {
      c.method = SizingMethod::precision;
    } else {
      rd.fail("method", "must be \"power\" or \"precision\"");
    }
  }
  if (auto t = rd.scalar<std::string>("test")) {
    try {
      c.test = parse_stat_kind(*t);
    } catch (const ValidationError& e) {
      rd.fail("test", e.what());
    }
  }
  if (auto r = rd.scalar<std::string>("result")) {
    try {
      c.result = parse_result_choice(*r);
    } catch (const ValidationError& e) {
      rd.fail("result", e.what());
    }
  }
  if (auto ss = rd.scalar<long>("SS")) c.SS = *ss;
  if (c.result != ResultChoice::sample_size && !c.SS) {
    v.push_back({"SS is required when result is " + to_string(c.result), 0, 0});
  }
  if (c.SS && *c.SS < 1) v.push_back({"SS must be ≥ 1", 0, 0});
  if (c.result == ResultChoice::power && c.method == SizingMethod::precision) {
    v.push_back({"result choice_power needs method power", 0, 0});
  }
  if (c.result == ResultChoice::coverage_probability && c.method == SizingMethod::power) {
    v.push_back({"result choice_coverage_probability needs method precision", 0, 0});
  }

  // effect curves
  if (auto s = rd.per_category<std::string>("beta_shape", M)) {
    for (const auto& name : *s) {
      try {
        c.beta_shape.push_back(parse_trend_shape(name));
      } catch (const ValidationError& e) {
        rd.fail("beta_shape", e.what());
        break;
      }
    }
  } else if (!rd.has("beta_shape")) {
    c.beta_shape.assign(static_cast<std::size_t>(M), TrendShape::constant);
  }
  const bool precision = c.method == SizingMethod::precision;
  const std::string mean_key = precision ? "precision_mean" : "beta_mean";
  const std::string init_key = precision ? "precision_initial" : "beta_initial";
  if (precision) {
    if (rd.has("beta_mean")) rd.fail("beta_mean", "effect sizes are not used by the precision method");
    if (rd.has("beta_initial")) rd.fail("beta_initial", "effect sizes are not used by the precision method");
  } else {
    if (rd.has("precision_mean")) rd.fail("precision_mean", "only valid with method precision");
    if (rd.has("precision_initial")) rd.fail("precision_initial", "only valid with method precision");
  }
  if (auto m = rd.per_category<double>(mean_key, M)) c.beta_mean = *m;
  else if (!rd.has(mean_key)) rd.fail(mean_key, "required");
  if (auto m = rd.per_category<double>(init_key, M)) c.beta_initial = *m;
  if (auto m = rd.per_category<int>("beta_quadratic_max", M)) c.beta_quadratic_max = *m;
  if (auto u = rd.scalar<std::string>("effect_units")) {
    if (*u == "raw") c.raw_effects = true;
    else if (*u != "standardized") rd.fail("effect_units", "must be \"standardized\" or \"raw\"");
  }
  if (!c.beta_shape.empty() && static_cast<int>(c.beta_shape.size()) == M) {
    bool any_shaped = false;
    bool any_turn = false;
    for (auto s : c.beta_shape) {
      any_shaped |= s != TrendShape::constant;
      any_turn |= needs_turning_day(s);
    }
    if (any_shaped && c.beta_initial.empty() && !rd.has(init_key)) rd.fail(init_key, "required for non-constant shapes");
    if (any_turn && c.beta_quadratic_max.empty() && !rd.has("beta_quadratic_max")) {
      rd.fail("beta_quadratic_max", "required for quadratic or linear_plateau shapes");
    }
  }

  // availability
  if (rd.has("tau_values")) {
    if (auto tv = rd.per_category<double>("tau_values", c.days)) c.tau_values = *tv;
    c.tau_shape = AvailabilityShape::explicit_values;
    for (const char* k : {"tau_shape", "tau_mean", "tau_initial", "tau_quadratic_max"}) {
      if (rd.has(k)) rd.fail(k, "conflicts with tau_values");
    }
  } else {
    if (auto s = rd.scalar<std::string>("tau_shape")) {
      try {
        c.tau_shape = parse_availability_shape(*s);
        if (c.tau_shape == AvailabilityShape::explicit_values) rd.fail("tau_shape", "explicit needs tau_values");
      } catch (const ValidationError& e) {
        rd.fail("tau_shape", e.what());
      }
    }
    if (auto t = rd.scalar<double>("tau_mean")) c.tau_mean = *t;
    c.tau_initial = c.tau_mean;
    if (auto t = rd.scalar<double>("tau_initial")) c.tau_initial = *t;
    if (auto t = rd.scalar<int>("tau_quadratic_max")) c.tau_quadratic_max = *t;
    if (c.tau_shape != AvailabilityShape::constant && !rd.has("tau_initial")) {
      rd.fail("tau_initial", "required for non-constant availability");
    }
    if ((c.tau_shape == AvailabilityShape::quadratic || c.tau_shape == AvailabilityShape::linear_plateau) &&
        !rd.has("tau_quadratic_max")) {
      rd.fail("tau_quadratic_max", "required for this availability shape");
    }
  }

  if (auto b = rd.scalar<std::string>("baseline_shape")) {
    try {
      c.baseline_shape = parse_trend_shape(*b);
    } catch (const ValidationError& e) {
      rd.fail("baseline_shape", e.what());
    }
  }
  if (auto b = rd.scalar<int>("baseline_turning_day")) c.baseline_turning_day = *b;

  if (auto s = rd.scalar<double>("sigma")) c.sigma = *s;
  if (!(c.sigma > 0.0)) v.push_back({"sigma must be > 0", 0, 0});
  if (auto p = rd.scalar<double>("pow")) c.pow = *p;
  if (auto a = rd.scalar<double>("sigLev")) c.sigLev = *a;
  if (!(c.pow > 0.0 && c.pow < 1.0)) v.push_back({"pow must lie in (0, 1)", 0, 0});
  if (!(c.sigLev > 0.0 && c.sigLev < 1.0)) v.push_back({"sigLev must lie in (0, 1)", 0, 0});

  if (!v.empty()) throw ValidationError(std::move(v));
  return c;
}

// Canonical document: every field explicit, per-category fields as arrays.
inline json to_json(const StudyConfig& c) {
  json j;
  j["days"] = c.days;
  j["occ_per_day"] = c.occ_per_day;
  j["category_counts"] = c.category_counts;
  j["adding_days"] = c.adding_days;
  if (c.prob) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < c.prob->rows(); ++r) {
      json row = json::array();
      for (Eigen::Index k = 0; k < c.prob->cols(); ++k) row.push_back((*c.prob)(r, k));
      rows.push_back(std::move(row));
    }
    j["prob"] = std::move(rows);
  } else {
    j["prob"] = "uniform";
  }
  j["beta_shape"] = detail::shape_list(c.beta_shape);
  const bool precision = c.method == SizingMethod::precision;
  j[precision ? "precision_mean" : "beta_mean"] = c.beta_mean;
  if (!c.beta_initial.empty()) j[precision ? "precision_initial" : "beta_initial"] = c.beta_initial;
  if (!c.beta_quadratic_max.empty()) j["beta_quadratic_max"] = c.beta_quadratic_max;
  j["effect_units"] = c.raw_effects ? "raw" : "standardized";
  if (c.tau_shape == AvailabilityShape::explicit_values) {
    j["tau_values"] = c.tau_values;
  } else {
    j["tau_shape"] = to_string(c.tau_shape);
    j["tau_mean"] = c.tau_mean;
    j["tau_initial"] = c.tau_initial;
    if (c.tau_shape == AvailabilityShape::quadratic || c.tau_shape == AvailabilityShape::linear_plateau) {
      j["tau_quadratic_max"] = c.tau_quadratic_max;
    }
  }
  if (c.baseline_shape) {
    j["baseline_shape"] = to_string(*c.baseline_shape);
    if (*c.baseline_shape == TrendShape::linear_plateau) j["baseline_turning_day"] = c.baseline_turning_day;
  }
  j["sigma"] = c.sigma;
  j["pow"] = c.pow;
  j["sigLev"] = c.sigLev;
  j["method"] = to_string(c.method);
  j["test"] = display_label(c.test);
  j["result"] = to_string(c.result);
  if (c.SS) j["SS"] = *c.SS;
  return j;
}

inline BaselineBasis resolve_baseline(const StudyConfig& c) {
  const TrendShape shape = c.baseline_shape ? *c.baseline_shape
                                            : (c.beta_shape.empty() ? TrendShape::constant : c.beta_shape.front());
  switch (shape) {
    case TrendShape::constant: return BaselineBasis::polynomial(1);
    case TrendShape::linear: return BaselineBasis::polynomial(2);
    case TrendShape::quadratic: return BaselineBasis::polynomial(3);
    case TrendShape::linear_plateau: {
      int turn = c.baseline_turning_day;
      if (turn == 0) turn = c.beta_quadratic_max.empty() ? std::min(28, c.days) : c.beta_quadratic_max.front();
      return BaselineBasis::plateau(turn);
    }
  }
  return BaselineBasis::polynomial(1);
}

inline DesignSpec build_design(const StudyConfig& c) {
  DesignSpec d;
  d.days = c.days;
  d.occ_per_day = c.occ_per_day;
  d.schedule = {c.category_counts, c.adding_days};
  if (c.prob) d.randomization.probs = *c.prob;
  else d.randomization = build_uniform_plan(d.schedule, c.days);
  if (c.tau_shape == AvailabilityShape::explicit_values) {
    d.availability = AvailabilityProfile::from_values(c.tau_values);
  } else {
    d.availability =
        AvailabilityProfile::shaped(c.tau_shape, c.tau_mean, c.tau_initial, c.tau_quadratic_max, c.days);
  }
  d.baseline = resolve_baseline(c);
  d.q = d.baseline.dimension();
  return d;
}

inline std::vector<TrendSpec> build_trends(const StudyConfig& c) {
  const auto adds = CategorySchedule{c.category_counts, c.adding_days}.category_adding_days();
  const double scale = c.raw_effects ? 1.0 / c.sigma : 1.0;
  std::vector<TrendSpec> out;
  for (std::size_t m = 0; m < adds.size(); ++m) {
    TrendSpec t;
    t.shape = c.beta_shape[m];
    t.average = scale * c.beta_mean[m];
    if (t.shape != TrendShape::constant && !c.beta_initial.empty()) t.initial = scale * c.beta_initial[m];
    if (needs_turning_day(t.shape) && !c.beta_quadratic_max.empty()) t.turning_day = c.beta_quadratic_max[m];
    t.adding_day = adds[m];
    out.push_back(t);
  }
  return out;
}

inline SizingRequest build_request(const StudyConfig& c) {
  SizingRequest r;
  r.design = build_design(c);
  r.trends = build_trends(c);
  r.method = c.method;
  r.stat = c.test;
  r.alpha = c.sigLev;
  r.target = c.pow;
  return r;
}

// Percent without trailing zeros: 0.8 -> "80", 0.975 -> "97.5".
inline std::string format_percent(double fraction) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", std::round(fraction * 1e8) / 1e6);
  return buf;
}

inline std::string format_level(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

inline std::string size_sentence(const StudyConfig& c, long n) {
  if (c.method == SizingMethod::power) {
    return "The required sample size is " + std::to_string(n) + " to attain " + format_percent(c.pow) +
           "% power when the significance level is " + format_level(c.sigLev) + ".";
  }
  return "The required sample size is " + std::to_string(n) + " to attain " +
         format_percent(1.0 - c.sigLev) + "% coverage probability when the significance level is " +
         format_level(c.sigLev) + ".";
}

inline std::string evaluation_sentence(const StudyConfig& c, long n, double value) {
  const std::string pct = std::to_string(std::lround(100.0 * value));
  const std::string what = c.method == SizingMethod::power ? "power" : "coverage probability";
  return "The sample size " + std::to_string(n) + " gives " + pct + "% " + what +
         " when the significance level is " + format_level(c.sigLev);
}

inline json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(r, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json evaluation_json(const Evaluation& e, SizingMethod method) {
  json j;
  j["n"] = e.n;
  j[method == SizingMethod::power ? "power" : "coverage"] = e.value;
  j["df1"] = e.df1;
  j["df2"] = e.df2;
  j["critical_value"] = e.critical_value;
  if (method == SizingMethod::power) j["ncp"] = e.ncp;
  else j["bound"] = e.bound;
  return j;
}

inline json sizing_result_json(const StudyConfig& c, const SizingResult& r) {
  json j;
  j["n"] = r.n;
  const bool power = r.method == SizingMethod::power;
  j[power ? "achieved_power" : "achieved_coverage"] = r.at_n.value;
  j["at_n"] = evaluation_json(r.at_n, r.method);
  j["at_n_minus_1"] = r.at_n_minus_1 ? evaluation_json(*r.at_n_minus_1, r.method) : json(nullptr);
  j["min_n"] = r.min_n;
  j["method"] = to_string(r.method);
  j["test"] = display_label(r.stat);
  j["alpha"] = r.alpha;
  j["nominal"] = r.nominal;
  j["q"] = r.q;
  j["sum_p"] = r.sum_p;
  j["quadratic_form"] = r.quadratic_form;
  json coeffs = json::array();
  for (const auto& v : r.coefficients) coeffs.push_back(std::vector<double>(v.data(), v.data() + v.size()));
  j["coefficients"] = std::move(coeffs);
  j["sigma_beta_inverse"] = matrix_json(r.lambda / (c.raw_effects ? c.sigma * c.sigma : 1.0));
  j["sentence"] = size_sentence(c, r.n);
  j["config"] = to_json(c);
  return j;
}

inline json run_size(const StudyConfig& c) { return sizing_result_json(c, solve_sample_size(build_request(c))); }

inline json run_evaluate(const StudyConfig& c, long n) {
  const SizingProblem p = prepare(build_request(c));
  const Evaluation e = p.evaluate(n);
  json j = evaluation_json(e, c.method);
  j["method"] = to_string(c.method);
  j["test"] = display_label(c.test);
  j["alpha"] = c.sigLev;
  j["quadratic_form"] = p.form;
  j["sentence"] = evaluation_sentence(c, n, e.value);
  j["config"] = to_json(c);
  return j;
}

// Dispatches on the config's result choice.
inline json run_study_config(const StudyConfig& c) {
  if (c.result == ResultChoice::sample_size) return run_size(c);
  return run_evaluate(c, *c.SS);
}

// ---- simulation scenarios ----

struct ScenarioDocument {
  std::string scenario_id;
  StudyConfig truth;
  ErrorModel error;
  std::vector<double> alpha_coeffs;
  std::uint64_t seed = 20240101;
  int replicates = 1000;
  StudyConfig working;
  std::optional<long> n;
  unsigned threads = 0;
};

inline ScenarioDocument parse_scenario(const json& doc) {
  if (!doc.is_object()) throw ValidationError("scenario must be a JSON object");
  std::vector<Violation> v;
  for (const auto& [key, _] : doc.items()) {
    static const std::vector<std::string> known = {"scenario_id", "truth", "working", "N", "threads"};
    if (std::find(known.begin(), known.end(), key) == known.end()) v.push_back({key + ": unknown key", 0, 0});
  }
  ScenarioDocument s;
  s.scenario_id = doc.value("scenario_id", std::string("scenario"));
  if (!doc.contains("truth") || !doc.at("truth").is_object()) v.push_back({"truth: required object", 0, 0});
  if (!doc.contains("working") || !doc.at("working").is_object()) v.push_back({"working: required object", 0, 0});
  if (!v.empty()) throw ValidationError(std::move(v));

  json truth = doc.at("truth");
  const json sim_keys = {"error", "alpha_coeffs", "seed", "replicates"};
  json truth_study = truth;
  for (const auto& k : sim_keys) truth_study.erase(k.get<std::string>());
  // truth effects are always effect sizes; reuse the power-mode reader
  truth_study["method"] = "power";
  truth_study.erase("result");
  truth_study.erase("SS");
  try {
    s.truth = parse_study(truth_study, "truth.");
  } catch (const ValidationError& e) {
    v.insert(v.end(), e.violations().begin(), e.violations().end());
  }
  try {
    s.working = parse_study(doc.at("working"), "working.");
  } catch (const ValidationError& e) {
    v.insert(v.end(), e.violations().begin(), e.violations().end());
  }

  if (truth.contains("error")) {
    const json& e = truth.at("error");
    if (!e.is_object()) {
      v.push_back({"truth.error: expected an object", 0, 0});
    } else {
      try {
        s.error.kind = parse_error_kind(e.value("kind", std::string("iid_normal")));
      } catch (const ValidationError& x) {
        v.push_back({std::string("truth.error.kind: ") + x.what(), 0, 0});
      }
      s.error.sigma = e.value("sigma", s.truth.sigma);
      s.error.rho = e.value("rho", 0.0);
      s.error.phi = e.value("phi", 0.0);
      s.error.variance_initial = e.value("variance_initial", s.error.sigma * s.error.sigma);
    }
  } else {
    s.error.sigma = s.truth.sigma;
  }
  if (truth.contains("alpha_coeffs")) {
    try {
      s.alpha_coeffs = truth.at("alpha_coeffs").get<std::vector<double>>();
    } catch (const json::exception&) {
      v.push_back({"truth.alpha_coeffs: expected an array of numbers", 0, 0});
    }
  }
  if (truth.contains("seed")) {
    if (truth.at("seed").is_number_unsigned()) s.seed = truth.at("seed").get<std::uint64_t>();
    else v.push_back({"truth.seed: expected a non-negative integer", 0, 0});
  }
  if (truth.contains("replicates")) {
    if (truth.at("replicates").is_number_integer()) s.replicates = truth.at("replicates").get<int>();
    else v.push_back({"truth.replicates: expected an integer", 0, 0});
  }
  if (doc.contains("N") && !doc.at("N").is_null()) {
    if (doc.at("N").is_number_integer()) s.n = doc.at("N").get<long>();
    else v.push_back({"N: expected an integer", 0, 0});
  }
  if (doc.contains("threads")) {
    if (doc.at("threads").is_number_unsigned()) s.threads = doc.at("threads").get<unsigned>();
    else v.push_back({"threads: expected a non-negative integer", 0, 0});
  }
  if (!v.empty()) throw ValidationError(std::move(v));
  if (s.truth.days != s.working.days || s.truth.occ_per_day != s.working.occ_per_day) {
    throw ValidationError("truth and working designs must share days and occ_per_day");
  }
  return s;
}

inline json to_json(const ScenarioDocument& s) {
  json truth = to_json(s.truth);
  truth.erase("method");
  truth.erase("result");
  truth.erase("test");
  truth.erase("pow");
  truth.erase("sigLev");
  json err;
  err["kind"] = to_string(s.error.kind);
  err["sigma"] = s.error.sigma;
  if (s.error.kind == ErrorKind::exchangeable) err["rho"] = s.error.rho;
  if (s.error.kind == ErrorKind::ar1) err["phi"] = s.error.phi;
  if (s.error.kind == ErrorKind::heteroscedastic_linear) err["variance_initial"] = s.error.variance_initial;
  truth["error"] = std::move(err);
  if (!s.alpha_coeffs.empty()) truth["alpha_coeffs"] = s.alpha_coeffs;
  truth["seed"] = s.seed;
  truth["replicates"] = s.replicates;
  json j;
  j["scenario_id"] = s.scenario_id;
  j["truth"] = std::move(truth);
  j["working"] = to_json(s.working);
  if (s.n) j["N"] = *s.n;
  if (s.threads) j["threads"] = s.threads;
  return j;
}

inline ScenarioConfig build_scenario(const ScenarioDocument& s) {
  ScenarioConfig sc;
  sc.scenario_id = s.scenario_id;
  sc.truth.design = build_design(s.truth);
  sc.truth.trends = build_trends(s.truth);
  if (!s.alpha_coeffs.empty()) {
    sc.truth.alpha_coeffs = Eigen::Map<const Eigen::VectorXd>(s.alpha_coeffs.data(),
                                                              static_cast<Eigen::Index>(s.alpha_coeffs.size()));
  }
  sc.truth.error = s.error;
  sc.truth.seed = s.seed;
  sc.truth.replicates = s.replicates;
  sc.working = build_request(s.working);
  sc.n = s.n;
  sc.threads = s.threads;
  return sc;
}

inline json mc_result_json(const McResult& r) {
  json j;
  j["scenario_id"] = r.scenario_id;
  j["method"] = to_string(r.method);
  j["stat"] = to_string(r.stat);
  j["n"] = r.n;
  j["replicates"] = r.replicates;
  j["hits"] = r.hits;
  j["failures"] = r.failures;
  j["fraction"] = r.fraction;
  j["se"] = r.se;
  if (r.method == SizingMethod::precision) j["precision_form"] = r.precision_form;
  return j;
}

inline std::string csv_header() { return "scenario_id,stat,N,replicates,fraction,se,failures"; }

inline std::string csv_row(const McResult& r) {
  char buf[128];
  std::snprintf(buf, sizeof buf, ",%ld,%d,%.6f,%.6f,%d", r.n, r.replicates, r.fraction, r.se, r.failures);
  return r.scenario_id + "," + to_string(r.stat) + buf;
}

}  // namespace fleximrt
