#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace bsr {

/// Invalid user input: bad dimensions, non-finite data, out-of-range options.
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// Numeric failure inside a kernel (e.g. a factorization that should have
/// succeeded did not).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Iterative solver produced a cost increase beyond the allowed slack.
/// Carries the cost trace observed up to the failure.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::vector<double> trace)
      : std::runtime_error(what), cost_trace(std::move(trace)) {}

  std::vector<double> cost_trace;
};

/// Problem too large for an exhaustive routine.
class SizeError : public std::invalid_argument {
 public:
  explicit SizeError(const std::string& what) : std::invalid_argument(what) {}
};

/// File system / format errors from dataset and report I/O.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace bsr
