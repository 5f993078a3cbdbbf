#pragma once

#include <stdexcept>
#include <string>

namespace stac {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: length mismatch, value outside its declared range.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Exact-integer or enumeration limits would be exceeded.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// The detector produced a value that no transmitted pattern can generate.
class DetectionError : public Error {
 public:
  using Error::Error;
};

class ConflictError : public Error {
 public:
  using Error::Error;
};

class ConfigurationError : public Error {
 public:
  using Error::Error;
};

class ScheduleError : public Error {
 public:
  using Error::Error;
};

class RoutingError : public Error {
 public:
  using Error::Error;
};

}  // namespace stac
