#pragma once

#include <stdexcept>
#include <string>

namespace eer {

/// Raised when operand shapes do not conform; the message carries both shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a computation produces NaN/Inf or an iteration fails to settle.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace eer
