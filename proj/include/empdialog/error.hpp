#pragma once

#include <stdexcept>
#include <string>

namespace empdialog {

/// Bad input supplied by the user (malformed files, invalid config, bad flags).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An internal invariant was violated; indicates a bug rather than bad input.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace empdialog
