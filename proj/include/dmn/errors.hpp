#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace dmn {

// Newton or fixed-point loop failed to reach its tolerance. Carries the
// residual history so callers (and the CLI) can report what happened.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(std::string what, int iterations, std::vector<double> residual_history)
      : std::runtime_error(std::move(what)),
        iterations(iterations),
        residual_history(std::move(residual_history)) {}

  int iterations = 0;
  std::vector<double> residual_history;
};

// File access or schema violation on any of the JSON/CSV/binary interfaces.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dmn
