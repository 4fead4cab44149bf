#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace metapop {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A quantity is undefined for the given arguments (log of a zero rate,
// division by zero inside an expression, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// A rate kernel evaluated outside [0, bound_C] or to a non-finite value.
class RateBoundError : public Error {
 public:
  using Error::Error;
};

// Numerical integration left its admissible region.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace metapop
