#pragma once

#include <stdexcept>
#include <string>

namespace gridsleuth {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class InvalidArgumentError : public Error {
  using Error::Error;
};

// Raised by the text readers (feeder files, allocation files, stream files,
// scenario configs) with a 1-based position of the offending token, and by
// the binary replay reader with a byte offset instead.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line, int column)
      : Error(what + " at line " + std::to_string(line) + ", column " +
              std::to_string(column)),
        line_(line),
        column_(column) {}
  ParseError(const std::string& what, unsigned long long byte_offset)
      : Error(what + " at byte offset " + std::to_string(byte_offset)),
        byte_offset_(byte_offset) {}
  int line() const { return line_; }
  int column() const { return column_; }
  unsigned long long byte_offset() const { return byte_offset_; }

 private:
  int line_ = 0;
  int column_ = 0;
  unsigned long long byte_offset_ = 0;
};

// Network model is structurally inconsistent (dangling bus, phase mismatch,
// duplicate ids, missing slack, ...).
class ModelError : public Error {
  using Error::Error;
};

// A matrix operation required by admittance assembly failed (e.g. a line
// impedance block is singular).
class AssemblyError : public Error {
  using Error::Error;
};

class SolverError : public Error {
 public:
  SolverError(const std::string& what, double residual = 0.0)
      : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

// Power flow diverged (voltage collapse or mismatch blow-up).
class DivergenceError : public SolverError {
  using SolverError::SolverError;
};

// Equality constraints of an optimization problem cannot be satisfied.
class InfeasibleError : public Error {
  using Error::Error;
};

// Not enough samples to perform the requested estimate.
class InsufficientDataError : public Error {
  using Error::Error;
};

}  // namespace gridsleuth
