#pragma once

#include <stdexcept>
#include <string>

namespace scripta {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or truncated image data.
class DecodeError : public Error {
 public:
  using Error::Error;
};

class UnsupportedFormatError : public Error {
 public:
  using Error::Error;
};

/// Binary file whose magic, version or layout does not match.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Text input (CSV, flag values) that cannot be parsed.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Inputs produced under incompatible configurations (digest mismatch, class list mismatch).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Violated precondition on an argument (dimensions, ranges, empty sets).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace scripta
