#pragma once

#include <stdexcept>
#include <string>

namespace ptx {

// Base for all errors raised by the library. Each subclass maps to one CLI exit
// code class (see exit_code_for in harness.hpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller broke a documented precondition (negative dt, negative command, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& where, const std::string& what)
      : Error(where + ": " + what), where_(where) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

// Internal-bug class: the control layer handed the plant more load than power.
class PowerInfeasible : public Error {
 public:
  using Error::Error;
};

// Internal-bug class: an Optimal schedule failed the independent re-check.
class FeasibilityCheckFailed : public Error {
 public:
  using Error::Error;
};

class InsufficientHistory : public Error {
 public:
  using Error::Error;
};

class DuplicateName : public Error {
 public:
  using Error::Error;
};

class UnknownNode : public Error {
 public:
  using Error::Error;
};

class TimeRegression : public Error {
 public:
  using Error::Error;
};

class InvalidSetpoint : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace ptx
