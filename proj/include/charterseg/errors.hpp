#pragma once

#include <stdexcept>
#include <string>

namespace charterseg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Input file does not match the expected column layout.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// A cell or document could not be parsed. Carries the location in the message.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain of a function (empty input, non-positive denominator).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid run configuration or parameter combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A subsample filter or rescaling step was left with no rows.
class EmptySubsampleError : public Error {
 public:
  using Error::Error;
};

/// Too few rows to fit a model with the requested leaf size.
class EmptyModelError : public Error {
 public:
  using Error::Error;
};

/// Regressor or variable without variance.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Panel invariant violated (duplicate bank-year key).
class UniquenessError : public Error {
 public:
  using Error::Error;
};

}  // namespace charterseg
