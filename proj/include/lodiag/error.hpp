#pragma once

#include <stdexcept>
#include <string>

namespace lodiag {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed arguments: wrong dimensions, non-finite entries, out-of-range
/// ranks, non-positive diagonals.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

/// The two Markowitz constraints cannot hold simultaneously.
class InfeasibleConstraints : public Error {
 public:
  using Error::Error;
};

/// Return series with zero sample standard deviation.
class DegenerateReturns : public Error {
 public:
  using Error::Error;
};

class SingularSampleCovariance : public Error {
 public:
  using Error::Error;
};

/// Unreadable or malformed CSV input.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace lodiag
