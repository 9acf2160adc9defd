#pragma once

#include <stdexcept>
#include <string>

namespace zoomstack {

// Bad arguments, shapes, or file contents. CLI exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Image dimensions that do not satisfy a divisibility or shape requirement.
class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ParseError : public ValidationError {
 public:
  ParseError(int line, const std::string& what)
      : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

// Denoiser backend failures. CLI exit code 2.
class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or unexpected bytes on the denoiser wire.
class ProtocolError : public BackendError {
 public:
  using BackendError::BackendError;
};

// A structural invariant was violated at runtime. CLI exit code 3.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace zoomstack
