#pragma once

#include <stdexcept>
#include <string>

namespace tlkit {

// Every library failure derives from Error so callers (the CLI in particular)
// can map a whole family onto one exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInputError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what), file_(file), line_(line) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

/// k exceeds the number of distinct points, or a split has too few items.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an API contract, e.g. a backward pass fed a stale cache.
class ContractError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

/// The clock could not resolve the measured interval.
class ResolutionError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace tlkit
