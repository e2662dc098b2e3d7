#pragma once

#include <stdexcept>
#include <string>

namespace taskprint {

// Base for all validation/user-input failures. The CLI maps anything deriving
// from Error to exit code 2; exceptions outside this hierarchy are internal
// errors (exit 1).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public Error {  // malformed manifest, header or container
 public:
  using Error::Error;
};

class ShapeError : public Error {  // dimension mismatch
 public:
  using Error::Error;
};

class LabelError : public Error {  // label out of range, missing class, ...
 public:
  using Error::Error;
};

class DataError : public Error {  // non-finite or corrupt payload
 public:
  using Error::Error;
};

class ArgumentError : public Error {  // bad arguments / violated precondition
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class VersionError : public Error {  // schema version mismatch
 public:
  using Error::Error;
};

class NumericError : public Error {  // non-finite intermediate result
 public:
  using Error::Error;
};

}  // namespace taskprint
