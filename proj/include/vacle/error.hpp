#pragma once

#include <stdexcept>
#include <string>

namespace vacle {

/// Base of every exception thrown by the core library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters, dimensions or configuration keys.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Unreadable or malformed input files.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed to meet its tolerance or bracket.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace vacle
