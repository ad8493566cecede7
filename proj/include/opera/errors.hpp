#pragma once

#include <stdexcept>
#include <string>

namespace opera {

// Malformed arguments: bad ids, negative tolerances, shape mismatches.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An operation that needs a tabular environment received a continuous one.
class UnsupportedInstance : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A class is not closed under the operator a DEF or discriminator needs.
class CompletenessViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// No hypothesis satisfies the confidence constraints.
class InfeasibleSet : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An instance constructor could not produce a valid instance.
class ConstructionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace opera
