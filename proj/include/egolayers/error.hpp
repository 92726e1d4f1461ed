#pragma once

#include <stdexcept>
#include <string>

namespace egolayers {

/// Caller passed a value outside an operation's contract.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input file header cannot be mapped onto the requested schema.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sample value outside a family's support (e.g. x <= 0 for a log-normal).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Sample carries no spread, so scale parameters are undefined.
class DegenerateSampleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A test or fit cannot be formed on the given data (too few points, bins, candidates).
class InapplicableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace egolayers
