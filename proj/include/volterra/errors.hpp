#pragma once

#include <stdexcept>

namespace volterra {

/// Malformed or inconsistent user input (plans, datasets, configs, arguments).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure could not produce a trustworthy result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace volterra
