#pragma once

#include <stdexcept>
#include <string>

namespace tubelab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument: dimension mismatch, out-of-range parameter, etc.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Work would exceed a fixed enumeration or size budget.
class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

/// A grid is too coarse to resolve the tubes it is asked to integrate.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

}  // namespace tubelab
