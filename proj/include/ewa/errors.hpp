#pragma once

#include <stdexcept>
#include <string>

namespace ewa {

// Malformed input: wrong shape, negative shrinkage, bad config key.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Parameters outside the region where a bound is defined (temperature too low,
// nu outside its admissible set, absolute-continuity violations).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace ewa
