#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ugflow {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

class InvalidInput : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "invalid_input"; }
};

class ParseError : public InvalidInput {
 public:
  ParseError(std::size_t line, const std::string& what)
      : InvalidInput("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }
  const char* kind() const noexcept override { return "parse"; }

 private:
  std::size_t line_;
};

class CapacityError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "capacity"; }
};

// Step size fell below the floor while integrating.
class StiffnessError : public Error {
 public:
  StiffnessError(double t, double max_log_a, const std::string& what)
      : Error(what), t_(t), max_log_a_(max_log_a) {}
  double time() const noexcept { return t_; }
  double max_log_a() const noexcept { return max_log_a_; }
  const char* kind() const noexcept override { return "stiffness"; }

 private:
  double t_;
  double max_log_a_;
};

class NumericalOverflow : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "numerical_overflow"; }
};

}  // namespace ugflow
