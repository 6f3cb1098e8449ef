#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ssfr {

// Bad shapes, out-of-range options, malformed configuration.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Structurally wrong input files (row counts, missing sections).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A cell that is not a finite number.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& file, std::size_t row, std::size_t col, const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(row) + ":" + std::to_string(col) + ": " + what),
        row_(row), col_(col) {}
  std::size_t row() const noexcept { return row_; }
  std::size_t col() const noexcept { return col_; }

 private:
  std::size_t row_;
  std::size_t col_;
};

// Data that makes a statistic undefined (zero scale, zero-energy curve, constant array).
class DegenerateData : public std::runtime_error {
 public:
  explicit DegenerateData(const std::string& what, long row = -1)
      : std::runtime_error(what), row_(row) {}
  // Offending curve, or -1 when the problem is not tied to one row.
  long row() const noexcept { return row_; }

 private:
  long row_;
};

// A dense intermediate would exceed the configured memory budget.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite risk during optimization.
class TrainingFailure : public std::runtime_error {
 public:
  TrainingFailure(const std::string& what, int last_finite_epoch)
      : std::runtime_error(what), last_finite_epoch_(last_finite_epoch) {}
  int last_finite_epoch() const noexcept { return last_finite_epoch_; }

 private:
  int last_finite_epoch_;
};

// Unreadable, corrupt or incompatible checkpoint.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Misuse of an API whose preconditions the caller controls (stale caches, layout mismatch).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ssfr
