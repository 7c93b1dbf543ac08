#pragma once

#include <stdexcept>
#include <string>

namespace urbanmap {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
  using Error::Error;
};

class RangeError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class DimensionError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

/// Raised when a set of tiles fails to cover every output pixel.
class CoverageError : public Error {
public:
  CoverageError(const std::string& what, long x, long y) : Error(what), x_(x), y_(y) {}
  long x() const noexcept { return x_; }
  long y() const noexcept { return y_; }

private:
  long x_;
  long y_;
};

class UndefinedMetricError : public Error {
public:
  using Error::Error;
};

}  // namespace urbanmap
