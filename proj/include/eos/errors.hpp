#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace eos {

/// Violated precondition of a public operation (dimension mismatch, bad shape, ...).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A ratio metric (RP, Dir) requested at a point where it is 0/0.
class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed input file. Carries the byte offset where parsing stopped.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Power iteration ran out of budget. `last_estimate()` is the final Rayleigh quotient.
class NotConverged : public std::runtime_error {
 public:
  NotConverged(const std::string& what, double last_estimate)
      : std::runtime_error(what), last_(last_estimate) {}
  double last_estimate() const noexcept { return last_; }

 private:
  double last_;
};

/// Config text could not be parsed or is missing a field. `line()` is 0 when unknown.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace eos
