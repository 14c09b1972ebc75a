#pragma once

#include <stdexcept>
#include <string>

namespace wba {

// Base of everything thrown by the library. `is_parse()` separates malformed
// input (exit code 2) from numeric failures (exit code 3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual bool is_parse() const { return false; }
};

class ParseError : public Error {
 public:
  ParseError(const std::string& field, const std::string& what)
      : Error(field + ": " + what), field_(field) {}
  const std::string& field() const { return field_; }
  bool is_parse() const override { return true; }

 private:
  std::string field_;
};

class DimensionError : public Error {
 public:
  using Error::Error;
  bool is_parse() const override { return true; }
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class DegenerateWindow : public Error {
 public:
  using Error::Error;
};

class PrecisionExhausted : public Error {
 public:
  using Error::Error;
};

class SupportMismatch : public Error {
 public:
  using Error::Error;
};

class TailBoundUnavailable : public Error {
 public:
  using Error::Error;
};

class QuadratureBudgetExceeded : public Error {
 public:
  using Error::Error;
};

class BudgetDegenerate : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

}  // namespace wba
