#pragma once

#include <stdexcept>
#include <string>

namespace spikesamp {

// Malformed configuration or input files. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A computation produced a result that cannot be used (degenerate
// prefactors, singular covariances, undefined diagnostics). Exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace spikesamp
