#pragma once

#include <stdexcept>
#include <string>

namespace rskpca {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments, malformed files, violated preconditions.
class InputError : public Error {
 public:
  using Error::Error;
};

// Requested rank exceeds the numerically nonzero spectrum.
class RankDeficiencyError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// Eigengap too small to define a D-dimensional eigenspace.
class DegenerateGapError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InputError(message);
}

}  // namespace detail
}  // namespace rskpca
