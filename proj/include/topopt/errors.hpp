#pragma once

#include <stdexcept>
#include <string>

namespace topopt {

// Bad user input: config schema, file problems, incompatible options. CLI exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Runtime numerical failure: singular systems, non-bracketing line searches, NaNs. CLI exit code 3.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace topopt
