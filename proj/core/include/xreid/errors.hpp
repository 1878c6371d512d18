#pragma once

#include <stdexcept>
#include <string>

namespace xreid {

// Contract/configuration violations: bad shapes, bad config values,
// malformed input files. CLI maps these to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numeric failures at runtime: non-finite values, degenerate inputs the
// math cannot handle. CLI maps these to exit code 2.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// File parse errors carry the 1-based line number of the offending row.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& msg, long line)
      : ValidationError(msg + " (line " + std::to_string(line) + ")"),
        line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

}  // namespace xreid
