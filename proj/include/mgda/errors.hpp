#pragma once

#include <stdexcept>
#include <string>

namespace mgda {

// Bad user-supplied configuration (CLI exit code 1).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Violated precondition or inconsistent data (CLI exit code 1).
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input file (CLI exit code 1).
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Failure while running (divergence, missing artifact at runtime; exit code 2).
struct RuntimeFailure : std::runtime_error {
  explicit RuntimeFailure(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mgda
