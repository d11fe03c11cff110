#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rasr {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input data. Carries the 1-based line number when the source is
/// line-delimited.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& msg, std::size_t line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class EncodingError : public Error {
 public:
  using Error::Error;
};

class MixedTalkError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class ZeroNormError : public Error {
 public:
  using Error::Error;
};

/// Transient failure talking to a remote service; callers may retry.
class RemoteUnavailable : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class CorruptStoreError : public Error {
 public:
  using Error::Error;
};

class MissingTranscriptError : public Error {
 public:
  using Error::Error;
};

class BudgetTooSmall : public Error {
 public:
  using Error::Error;
};

class NonFiniteLoss : public Error {
 public:
  using Error::Error;
};

class EmptyReferenceError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace rasr
