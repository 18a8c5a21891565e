#ifndef LOWLIGHT_ERRORS_HPP
#define LOWLIGHT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace lowlight {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents do not agree. The message names the offending axis.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A parameter block (ISP, noise, filter, config) is invalid.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Input value outside the domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A function produced a non-finite value.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Dataset or label problems.
class DataError : public Error {
 public:
  using Error::Error;
};

/// API misuse, e.g. reusing a consumed backward cache.
class UsageError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unknown keys in a JSON config.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace lowlight

#endif  // LOWLIGHT_ERRORS_HPP
