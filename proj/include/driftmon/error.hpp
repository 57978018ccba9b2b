#pragma once

#include <stdexcept>
#include <string>

namespace driftmon {

// Input violates an operation's precondition (too few points, bad dims, ...).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed file or manifest.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Lambda denominator would be zero or negative: K >= number of pixels.
class DegenerateDofError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace driftmon
