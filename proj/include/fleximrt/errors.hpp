#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fleximrt {

// A single invariant breach. Day and category are 1-based; 0 means "not
// tied to a particular day/category".
struct Violation {
  std::string message;
  int day = 0;
  int category = 0;

  std::string describe() const {
    std::string out = message;
    if (day > 0) out += " (day " + std::to_string(day) + ")";
    if (category > 0) out += " (category " + std::to_string(category) + ")";
    return out;
  }
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input does not describe a valid design/request.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<Violation> violations)
      : Error(summarize(violations)), violations_(std::move(violations)) {}
  explicit ValidationError(const std::string& message)
      : ValidationError(std::vector<Violation>{{message, 0, 0}}) {}

  const std::vector<Violation>& violations() const noexcept { return violations_; }

 private:
  static std::string summarize(const std::vector<Violation>& v) {
    if (v.empty()) return "invalid input";
    std::string out = v.front().describe();
    if (v.size() > 1) out += " (+" + std::to_string(v.size() - 1) + " more)";
    return out;
  }

  std::vector<Violation> violations_;
};

// Linear systems or matrices that cannot be inverted reliably.
class SingularError : public Error {
 public:
  using Error::Error;
};

// The sample-size search has no admissible answer (cap exceeded, df
// constraints unsatisfiable).
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// Series or root finding did not converge.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace fleximrt
