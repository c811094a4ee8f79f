#pragma once

#include <stdexcept>
#include <string>

namespace wavebench {

/// Caller passed an argument outside an operation's contract.
class RejectedInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A query fell outside the valid domain of a field or trajectory.
class DomainError : public std::out_of_range {
 public:
  DomainError(const std::string& what, double lo, double hi)
      : std::out_of_range(what), lo_(lo), hi_(hi) {}

  double lo() const { return lo_; }
  double hi() const { return hi_; }

 private:
  double lo_;
  double hi_;
};

/// Malformed input file. Row/column are 1-based; 0 means "not applicable".
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t row = 0, std::size_t column = 0)
      : std::runtime_error(Decorate(what, row, column)), row_(row), column_(column) {}

  std::size_t row() const { return row_; }
  std::size_t column() const { return column_; }

 private:
  static std::string Decorate(const std::string& what, std::size_t row, std::size_t column) {
    if (row == 0) return what;
    std::string out = what + " (row " + std::to_string(row);
    if (column != 0) out += ", column " + std::to_string(column);
    return out + ")";
  }

  std::size_t row_;
  std::size_t column_;
};

/// Too few samples to form velocities and accelerations.
class DegenerateTrajectory : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incomplete rate table, bad config key, and similar setup problems.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The smoothing QP did not reach a certified optimum.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace wavebench
