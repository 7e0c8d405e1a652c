// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <stdexcept>
#include <string>

namespace stanvi {

struct SourceLoc {
  int line = 0;
  int column = 0;

  bool operator==(const SourceLoc&) const = default;
};

/// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class CompileErrorKind {
  UnterminatedComment,
  IllegalCharacter,
  SyntaxError,
  UnsupportedConstruct,
  TypeMismatch,
  UndefinedIdentifier,
  DuplicateDeclaration,
  IllegalAssignment,
  IllegalSampling,
  ShapeMismatch,
  NonScalarTarget,
};

const char* to_string(CompileErrorKind kind);

/// Lexing, parsing and type-checking failures. Always carries a location.
class CompileError : public Error {
 public:
  CompileError(CompileErrorKind kind, SourceLoc loc, const std::string& detail);

  CompileErrorKind kind() const { return kind_; }
  SourceLoc loc() const { return loc_; }
  const std::string& detail() const { return detail_; }

 private:
  CompileErrorKind kind_;
  SourceLoc loc_;
  std::string detail_;
};

/// A NaN appeared in a value, gradient or draw. The harness reports it as a
/// runtime error rather than a bad fit.
class NaNDetected : public Error {
 public:
  using Error::Error;
};

/// Distribution parameter outside its domain, e.g. a non-positive scale.
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

/// Inverse transform called on a value outside the constraint's support.
class OutOfSupport : public Error {
 public:
  using Error::Error;
};

/// Data file does not match the model's data block.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Data that is well-formed JSON but disagrees with the data block: missing
/// names, wrong dimensions, non-integers for int, violated constraints.
class SchemaMismatch : public DataError {
 public:
  using DataError::DataError;
};

/// Runtime evaluation failure that is neither NaN nor a data problem (index
/// out of range, size mismatch between runtime shapes, ...).
class EvalError : public Error {
 public:
  using Error::Error;
};

class UnsupportedDimension : public Error {
 public:
  using Error::Error;
};

class HessianNotPD : public Error {
 public:
  using Error::Error;
};

/// Operation not available for this guide kind or dimension.
class Unsupported : public Error {
 public:
  using Error::Error;
};

class NonConvergence : public Error {
 public:
  using Error::Error;
};

/// Sample tables that cannot be compared.
class MissingParameter : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace stanvi
