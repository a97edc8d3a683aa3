#pragma once

#include <stdexcept>
#include <string>

namespace clarigen {

// Violated precondition or invariant of an operation (exit code 1 at the CLI).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class DimensionError : public ContractError {
 public:
  using ContractError::ContractError;
};

class IndexError : public ContractError {
 public:
  using ContractError::ContractError;
};

// Filesystem or malformed-input failures (exit code 2 at the CLI).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public IoError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : IoError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  explicit ParseError(const std::string& what) : IoError(what), line_(0) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace clarigen
