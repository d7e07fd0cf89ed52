#pragma once

// Stateless HTTP front end over the config layer. Handlers are plain
// functions from request body to (status, JSON) so the CLI and tests can call
// them without a socket.

#include <algorithm>
#include <string>
#include <thread>

// Eigen before httplib: <resolv.h> defines a _res macro that breaks Eigen.
#include "config.hpp"
#include "errors.hpp"

#include <httplib.h>
#include <json.hpp>

namespace fleximrt {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr int kDefaultPort = 8080;

struct Reply {
  int status = 200;
  json body;
};

inline json error_body(const std::string& code, const std::vector<Violation>& violations) {
  json v = json::array();
  for (const auto& x : violations) {
    json e;
    e["message"] = x.message;
    if (x.day > 0) e["day"] = x.day;
    if (x.category > 0) e["category"] = x.category;
    e["text"] = x.describe();
    v.push_back(std::move(e));
  }
  return {{"code", code}, {"violations", std::move(v)}};
}

inline json error_body(const std::string& code, const std::string& message) {
  return error_body(code, std::vector<Violation>{{message, 0, 0}});
}

// Runs fn on the parsed body and maps library errors to status codes.
template <class Fn>
Reply guarded(const std::string& body, Fn&& fn) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error& e) {
    return {400, error_body("malformed_json", e.what())};
  }
  try {
    return {200, fn(doc)};
  } catch (const ValidationError& e) {
    return {422, error_body("validation_error", e.violations())};
  } catch (const InfeasibleError& e) {
    return {422, error_body("infeasible", e.what())};
  } catch (const SingularError& e) {
    return {422, error_body("singular", e.what())};
  } catch (const json::exception& e) {
    return {422, error_body("validation_error", e.what())};
  } catch (const std::exception& e) {
    return {500, error_body("internal_error", e.what())};
  }
}

inline json health_json() {
  return {{"status", "ok"},
          {"service", "fleximrt"},
          {"version", kVersion},
          {"endpoints", {"/api/v1/size", "/api/v1/evaluate", "/api/v1/simulate", "/api/v1/health"}}};
}

inline Reply handle_size(const std::string& body) {
  return guarded(body, [](const json& doc) { return run_size(parse_study(doc)); });
}

// Power or coverage at the SS given in the body.
inline Reply handle_evaluate(const std::string& body) {
  return guarded(body, [](const json& doc) {
    StudyConfig c = parse_study(doc);
    if (!c.SS) throw ValidationError("SS is required for evaluation");
    return run_evaluate(c, *c.SS);
  });
}

inline Reply handle_simulate(const std::string& body, unsigned max_threads) {
  return guarded(body, [max_threads](const json& doc) {
    ScenarioDocument s = parse_scenario(doc);
    ScenarioConfig sc = build_scenario(s);
    if (max_threads > 0) sc.threads = sc.threads ? std::min(sc.threads, max_threads) : max_threads;
    return mc_result_json(run_study(sc));
  });
}

struct ServiceOptions {
  unsigned max_sim_threads = 0;  // 0 = no cap
};

inline void register_routes(httplib::Server& server, ServiceOptions opts = {}) {
  auto send = [](httplib::Response& res, const Reply& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server.Get("/api/v1/health", [send](const httplib::Request&, httplib::Response& res) {
    send(res, {200, health_json()});
  });
  server.Post("/api/v1/size", [send](const httplib::Request& req, httplib::Response& res) {
    send(res, handle_size(req.body));
  });
  server.Post("/api/v1/evaluate", [send](const httplib::Request& req, httplib::Response& res) {
    send(res, handle_evaluate(req.body));
  });
  server.Post("/api/v1/simulate", [send, opts](const httplib::Request& req, httplib::Response& res) {
    send(res, handle_simulate(req.body, opts.max_sim_threads));
  });
}

// FLEXIMRT_PORT, else 8080.
inline int default_port() {
  if (const char* p = std::getenv("FLEXIMRT_PORT")) {
    try {
      const int port = std::stoi(p);
      if (port > 0 && port < 65536) return port;
    } catch (const std::exception&) {
    }
  }
  return kDefaultPort;
}

}  // namespace fleximrt
