#pragma once

#include <stdexcept>
#include <string>

namespace handguide {

/// Malformed input document (JSON, PLY, STL, line-delimited streams).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Well-formed input that breaks a model invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operation cannot proceed on the given data (empty clouds, bad indices).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace handguide
