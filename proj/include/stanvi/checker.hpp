// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "stanvi/ast.hpp"

namespace stanvi {

enum class Origin {
  Data,
  TransformedData,
  Parameter,
  TransformedParameter,
  GeneratedQuantity,
  Local,
  LoopVariable,
};

const char* to_string(Origin origin);

struct Symbol {
  std::string name;
  ExprType type;
  Origin origin;
  BlockKind block;
  SourceLoc loc;
};

/// A program whose every expression carries its type and every identifier
/// its symbol slot. symbols[i] describes slot i.
struct TypedProgram {
  Program program;
  std::vector<Symbol> symbols;

  /// Slots of top-level declarations of one origin, in declaration order.
  std::vector<int> slots_of(Origin origin) const;
};

/// Resolves names against Stan's block scoping and types every expression,
/// applying int -> real promotion where a real is expected.
///
/// Throws CompileError: TypeMismatch, UndefinedIdentifier,
/// IllegalAssignment, IllegalSampling, ShapeMismatch, UnsupportedConstruct
/// (unknown functions and distributions), NonScalarTarget.
TypedProgram check(Program ast);

/// tokenize + parse + check.
TypedProgram check_source(std::string_view source);

}  // namespace stanvi
