#pragma once

#include <stdexcept>
#include <string>

namespace medsel {

// Input violates a documented precondition: shapes, non-finite data, bad config.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numerical routine could not produce a trustworthy answer
// (rank deficiency, non-convergence, ill-conditioning).
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace medsel
