#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace malclass {

/// Bad input: malformed files, inconsistent shapes, missing artifacts.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A text format could not be parsed. `line()` is 1-based.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Command-line misuse.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An internal invariant did not hold; always a bug.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace malclass
