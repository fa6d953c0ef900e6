#pragma once

#include <stdexcept>
#include <string>

namespace nst {

/// Invalid user-facing configuration: bad shapes, unknown names, bad taps.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Weight or image file that cannot be read or does not validate.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A documented precondition of an operation was violated by the caller.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Broken internal invariant (a graph-builder or tape bug, not user input).
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// The optimization produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int epoch, const std::string& what)
      : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

/// A run exceeded its wall-clock budget and was stopped.
class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nst
