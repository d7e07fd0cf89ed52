// fleximrt: sample size, power, coverage and Monte-Carlo studies for
// flexible micro-randomized trials.

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fleximrt/config.hpp"
#include "fleximrt/service.hpp"

namespace {

using fleximrt::json;

constexpr int kExitValidation = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitRuntime = 1;

struct StudyInput {
  std::string config_path;
  std::map<std::string, std::string> flags;
  std::string format = "text";
};

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw fleximrt::ValidationError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw fleximrt::ValidationError(path + ": malformed JSON: " + e.what());
  }
}

// "0.1" -> number, "3,1" -> array, anything unparseable -> string
json flag_value(const std::string& text) {
  std::string t = text;
  if (t.find(',') != std::string::npos && t.front() != '[' && t.front() != '"') t = "[" + t + "]";
  try {
    return json::parse(t);
  } catch (const json::parse_error&) {
    return text;
  }
}

json assemble(const StudyInput& in) {
  json doc = in.config_path.empty() ? json::object() : read_json_file(in.config_path);
  std::vector<fleximrt::Violation> conflicts;
  for (const auto& [key, value] : in.flags) {
    if (doc.contains(key)) {
      conflicts.push_back({"--" + key + " conflicts with the config file", 0, 0});
      continue;
    }
    doc[key] = flag_value(value);
  }
  if (!conflicts.empty()) throw fleximrt::ValidationError(std::move(conflicts));
  return doc;
}

void add_study_options(CLI::App* cmd, StudyInput& in) {
  cmd->add_option("-c,--config", in.config_path, "JSON study configuration");
  cmd->add_option("-f,--format", in.format, "text or json")->check(CLI::IsMember({"text", "json"}));
  for (const auto& key : fleximrt::detail::known_study_keys()) {
    cmd->add_option_function<std::string>(
        "--" + key, [&in, key](const std::string& v) { in.flags[key] = v; }, "config key " + key);
  }
}

void print_violations(const fleximrt::ValidationError& e) {
  std::cerr << "invalid configuration:\n";
  for (const auto& v : e.violations()) std::cerr << "  - " << v.describe() << "\n";
}

template <class Fn>
int run_guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const fleximrt::ValidationError& e) {
    print_violations(e);
    return kExitValidation;
  } catch (const fleximrt::InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const fleximrt::SingularError& e) {
    std::cerr << "singular design: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int emit(const json& result, const std::string& format) {
  if (format == "json") std::cout << result.dump(2) << "\n";
  else std::cout << result.at("sentence").get<std::string>() << "\n";
  return 0;
}

int cmd_size(const StudyInput& in) {
  return run_guarded([&] {
    json doc = assemble(in);
    doc["result"] = "choice_sample_size";
    doc.erase("SS");
    return emit(fleximrt::run_size(fleximrt::parse_study(doc)), in.format);
  });
}

int cmd_evaluate(const StudyInput& in, long ss, fleximrt::ResultChoice choice) {
  return run_guarded([&] {
    json doc = assemble(in);
    doc["result"] = fleximrt::to_string(choice);
    if (ss > 0) doc["SS"] = ss;
    if (choice == fleximrt::ResultChoice::coverage_probability && !doc.contains("method")) {
      doc["method"] = "precision";
    }
    const auto cfg = fleximrt::parse_study(doc);
    return emit(fleximrt::run_evaluate(cfg, *cfg.SS), in.format);
  });
}

int cmd_validate(const StudyInput& in) {
  return run_guarded([&] {
    const auto cfg = fleximrt::parse_study(assemble(in));
    fleximrt::require_valid(fleximrt::build_design(cfg));
    const auto req = fleximrt::build_request(cfg);
    fleximrt::prepare(req);
    if (in.format == "json") std::cout << fleximrt::to_json(cfg).dump(2) << "\n";
    else std::cout << "valid\n";
    return 0;
  });
}

int cmd_simulate(const std::vector<std::string>& scenarios, const std::string& out_path, unsigned threads,
                 long n_override, const std::string& format) {
  return run_guarded([&] {
    std::ostringstream out;
    json all = json::array();
    if (format == "csv") out << fleximrt::csv_header() << "\n";
    for (const auto& path : scenarios) {
      auto doc = fleximrt::parse_scenario(read_json_file(path));
      auto sc = fleximrt::build_scenario(doc);
      if (threads) sc.threads = threads;
      if (n_override > 0) sc.n = n_override;
      const auto r = fleximrt::run_study(sc);
      if (format == "csv") out << fleximrt::csv_row(r) << "\n";
      else all.push_back(fleximrt::mc_result_json(r));
    }
    if (format == "json") out << all.dump(2) << "\n";
    if (out_path.empty()) {
      std::cout << out.str();
    } else {
      std::ofstream f(out_path);
      if (!f) throw std::runtime_error("cannot write " + out_path);
      f << out.str();
    }
    return 0;
  });
}

int cmd_serve(const std::string& host, int port, unsigned max_threads) {
  httplib::Server server;
  fleximrt::register_routes(server, {max_threads});
  std::cerr << "listening on " << host << ":" << port << "\n";
  if (!server.listen(host, port)) {
    std::cerr << "error: cannot listen on " << host << ":" << port << "\n";
    return kExitRuntime;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sample size and power for flexible micro-randomized trials"};
  app.require_subcommand(1);

  StudyInput size_in, power_in, coverage_in, validate_in;
  long power_ss = 0, coverage_ss = 0;

  auto* size = app.add_subcommand("size", "Smallest N reaching the target power or coverage");
  add_study_options(size, size_in);

  auto* power = app.add_subcommand("power", "Formulated power at a given N");
  add_study_options(power, power_in);
  power->add_option("-n,--ss", power_ss, "sample size (overrides SS)");

  auto* coverage = app.add_subcommand("coverage", "Formulated coverage probability at a given N");
  add_study_options(coverage, coverage_in);
  coverage->add_option("-n,--ss", coverage_ss, "sample size (overrides SS)");

  auto* validate = app.add_subcommand("validate", "Check a configuration and list every violation");
  add_study_options(validate, validate_in);

  std::vector<std::string> scenarios;
  std::string out_path, sim_format = "csv";
  unsigned sim_threads = 0;
  long sim_n = 0;
  auto* simulate = app.add_subcommand("simulate", "Monte-Carlo power or coverage for scenario files");
  simulate->add_option("scenarios", scenarios, "scenario JSON files")->required();
  simulate->add_option("-o,--out", out_path, "write results here instead of stdout");
  simulate->add_option("-t,--threads", sim_threads, "replicate worker threads");
  simulate->add_option("-n,--ss", sim_n, "override N for every scenario");
  simulate->add_option("-f,--format", sim_format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  std::string host = "127.0.0.1";
  int port = fleximrt::default_port();
  unsigned max_threads = 0;
  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  serve->add_option("--host", host, "bind address");
  serve->add_option("-p,--port", port, "port (default $FLEXIMRT_PORT or 8080)");
  serve->add_option("--max-sim-threads", max_threads, "cap on simulation threads per request");

  CLI11_PARSE(app, argc, argv);

  if (*size) return cmd_size(size_in);
  if (*power) return cmd_evaluate(power_in, power_ss, fleximrt::ResultChoice::power);
  if (*coverage) return cmd_evaluate(coverage_in, coverage_ss, fleximrt::ResultChoice::coverage_probability);
  if (*validate) return cmd_validate(validate_in);
  if (*simulate) return cmd_simulate(scenarios, out_path, sim_threads, sim_n, sim_format);
  if (*serve) return cmd_serve(host, port, max_threads);
  return 0;
}
