#pragma once

#include <stdexcept>
#include <string>

namespace scaledrift {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TooFewPoints : public Error {
 public:
  using Error::Error;
};

class DegenerateGeometry : public Error {
 public:
  using Error::Error;
};

class InvalidObservation : public Error {
 public:
  using Error::Error;
};

class LengthMismatch : public Error {
 public:
  using Error::Error;
};

class EmptyOverlap : public Error {
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

/// Malformed input text. Carries the offending file and 1-based line.
class ParseError : public Error {
 public:
  ParseError(std::string file, std::size_t line, const std::string& reason)
      : Error(file + ":" + std::to_string(line) + ": " + reason),
        file_(std::move(file)),
        line_(line) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

}  // namespace scaledrift
