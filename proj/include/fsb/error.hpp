#pragma once

#include <stdexcept>
#include <string>

namespace fsb {

// Base for every error the library raises. Subclasses map onto the error
// kinds named in module contracts so callers (and the CLI exit-code table)
// can dispatch on them.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ProjectionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace fsb
