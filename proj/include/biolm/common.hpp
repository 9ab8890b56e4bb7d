#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace biolm {

// Runtime failure: bad data, numerical divergence, I/O trouble. Maps to exit 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad usage or configuration: missing paths, invalid flag combinations,
// schema violations the operator can fix. Maps to exit 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Parse failure that names its location.
class ParseError : public Error {
 public:
  ParseError(const std::string& file, long line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what) {}
};

inline void warn(const std::string& msg) {
  std::fprintf(stderr, "warning: %s\n", msg.c_str());
}

}  // namespace biolm
