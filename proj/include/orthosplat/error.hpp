#pragma once

#include <stdexcept>
#include <string>

namespace orthosplat {

/// Argument outside an operation's domain.
class InvalidInput : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Caller broke a documented precondition (unsorted fragments, overlapping cells, ...).
class ContractViolation : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

/// A file parsed but does not carry the expected structure.
class SchemaError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace orthosplat
