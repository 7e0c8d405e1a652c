// Apache License, Version 2.0, refer to LICENSE.txt

#include "stanvi/error.hpp"

namespace stanvi {

const char* to_string(CompileErrorKind kind) {
  switch (kind) {
    case CompileErrorKind::UnterminatedComment: return "UnterminatedComment";
    case CompileErrorKind::IllegalCharacter: return "IllegalCharacter";
    case CompileErrorKind::SyntaxError: return "SyntaxError";
    case CompileErrorKind::UnsupportedConstruct: return "UnsupportedConstruct";
    case CompileErrorKind::TypeMismatch: return "TypeMismatch";
    case CompileErrorKind::UndefinedIdentifier: return "UndefinedIdentifier";
    case CompileErrorKind::DuplicateDeclaration: return "DuplicateDeclaration";
    case CompileErrorKind::IllegalAssignment: return "IllegalAssignment";
    case CompileErrorKind::IllegalSampling: return "IllegalSampling";
    case CompileErrorKind::ShapeMismatch: return "ShapeMismatch";
    case CompileErrorKind::NonScalarTarget: return "NonScalarTarget";
  }
  return "?";
}

CompileError::CompileError(CompileErrorKind kind, SourceLoc loc, const std::string& detail)
    : Error(std::to_string(loc.line) + ":" + std::to_string(loc.column) + ": " +
            to_string(kind) + ": " + detail),
      kind_(kind),
      loc_(loc),
      detail_(detail) {}

}  // namespace stanvi
