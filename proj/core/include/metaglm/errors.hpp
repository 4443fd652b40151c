#pragma once

#include <stdexcept>
#include <string>

namespace metaglm {

// Invalid inputs, file/schema problems, inconsistent configuration.
// The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Solver failures and numerical breakdown (non-convergence, separation,
// singular systems, infeasible constraints).  The CLI maps this to exit
// code 3.
class NumericError : public std::runtime_error {
public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace metaglm
