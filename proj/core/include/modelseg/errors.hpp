#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace modelseg {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid caller-supplied argument (bad size, unsupported norm, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Malformed input file. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Structurally parsed input that violates a data invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class DegenerateGeometryError : public Error {
 public:
  DegenerateGeometryError(const std::string& message, std::size_t triangle);
  std::size_t triangle() const { return triangle_; }

 private:
  std::size_t triangle_;
};

// Parameter outside the domain of a pose or projection.
class DomainError : public Error {
 public:
  using Error::Error;
};

class ProjectionError : public Error {
 public:
  using Error::Error;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

// Pearson correlation with a zero-variance operand.
class DegenerateCorrelationError : public Error {
 public:
  using Error::Error;
};

class NumericalInstabilityError : public Error {
 public:
  NumericalInstabilityError(const std::string& message, int iteration);
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

// Failure of one pipeline stage; the message starts with "[stage] ".
class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& message);
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace modelseg
