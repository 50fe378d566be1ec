#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace kfgrad {

// Base for every error the library raises. Each subclass maps to one CLI exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Raised for any non-finite value encountered where a finite one is required
// (user input, diverging optimizer iterates).
class NumericalError : public Error {
 public:
  using Error::Error;
};

// A Cholesky pivot was not strictly positive. `pivot` is the 0-based diagonal
// index; `step` is the 1-based filter step when the failure happened inside a
// filter run.
class NotPositiveDefinite : public NumericalError {
 public:
  explicit NotPositiveDefinite(std::size_t pivot, std::optional<std::size_t> step = std::nullopt,
                               std::string what = "matrix");

  std::size_t pivot() const noexcept { return pivot_; }
  std::optional<std::size_t> step() const noexcept { return step_; }
  const std::string& subject() const noexcept { return subject_; }

  NotPositiveDefinite at_step(std::size_t step, std::string what) const {
    return NotPositiveDefinite(pivot_, step, std::move(what));
  }

 private:
  std::size_t pivot_;
  std::optional<std::size_t> step_;
  std::string subject_;
};

inline NotPositiveDefinite::NotPositiveDefinite(std::size_t pivot, std::optional<std::size_t> step,
                                                std::string what)
    : NumericalError(what + " not positive definite at pivot " + std::to_string(pivot) +
                     (step ? " (filter step " + std::to_string(*step) + ")" : std::string())),
      pivot_(pivot),
      step_(step),
      subject_(std::move(what)) {}

}  // namespace kfgrad
