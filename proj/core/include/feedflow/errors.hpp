#pragma once

#include <stdexcept>
#include <string>

namespace feedflow {

// Base of every error the library throws on purpose. The CLI maps the
// subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (trace files, CSV rows, checkpoints).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  explicit ParseError(const std::string& what) : Error(what) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_ = 0;
};

// Well-formed input that violates a type invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// An operation was asked of a state that cannot perform it (terminal
// session, root of a decision tree, ...).
class StateError : public Error {
 public:
  using Error::Error;
};

class InvalidActionError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace feedflow
