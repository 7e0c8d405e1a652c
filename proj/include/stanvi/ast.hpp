// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "stanvi/error.hpp"

namespace stanvi {

enum class BaseType { Int, Real, Vector, RowVector, Matrix };

/// Static type of an expression. Sizes are runtime properties and live in
/// declarations, not here.
struct ExprType {
  BaseType base = BaseType::Real;
  bool array = false;

  bool operator==(const ExprType&) const = default;

  bool is_int() const { return base == BaseType::Int && !array; }
  bool is_real() const { return base == BaseType::Real && !array; }
  bool is_scalar() const { return !array && (base == BaseType::Int || base == BaseType::Real); }
  bool is_container() const { return !is_scalar(); }
};

std::string to_string(BaseType base);
std::string to_string(ExprType type);

enum class ExprKind { IntLiteral, RealLiteral, Variable, Unary, Binary, Call, Index };

/// Expression node. `args` holds the operands (Unary, Binary), the call
/// arguments (Call) or the indexed expression followed by its indices (Index).
struct Expr {
  ExprKind kind = ExprKind::IntLiteral;
  SourceLoc loc;
  std::string text;  // literal spelling, identifier, operator or function name
  std::int64_t int_value = 0;
  double real_value = 0.0;
  std::vector<Expr> args;
  bool conditional_bar = false;  // call written as f(y | a, b)

  // Filled in by check().
  ExprType type;
  int slot = -1;      // Variable: symbol slot
  int function = -1;  // Call: resolved function id, see functions.hpp
};

enum class ConstraintKind { None, Lower, Upper, LowerUpper, Simplex, Ordered };

struct Constraint {
  ConstraintKind kind = ConstraintKind::None;
  std::optional<Expr> lower;
  std::optional<Expr> upper;
};

/// `simplex[K]` and `ordered[K]` are stored as vectors carrying that
/// constraint.
struct VarDecl {
  std::string name;
  BaseType base = BaseType::Real;
  std::vector<Expr> sizes;  // one for vector-like types, two for matrix
  std::optional<Expr> array_size;
  Constraint constraint;
  std::optional<Expr> init;
  int slot = -1;

  ExprType type() const { return {base, array_size.has_value()}; }
};

struct Stmt;

struct DeclStmt {
  VarDecl decl;
};

struct AssignStmt {
  Expr lhs;
  std::string op;  // "=", "+=", "-=", "*=", "/="
  Expr rhs;
};

struct TildeStmt {
  Expr lhs;
  std::string distribution;
  std::vector<Expr> args;
  int function = -1;
};

struct TargetStmt {
  Expr value;
};

struct IfStmt {
  Expr condition;
  std::vector<Stmt> then_branch;  // exactly one statement
  std::vector<Stmt> else_branch;  // zero or one statement
};

struct ForStmt {
  std::string variable;
  Expr lower;
  Expr upper;
  std::vector<Stmt> body;  // exactly one statement
  int slot = -1;
};

struct BlockStmt {
  std::vector<Stmt> body;
};

struct EmptyStmt {};

struct Stmt {
  SourceLoc loc;
  std::variant<DeclStmt, AssignStmt, TildeStmt, TargetStmt, IfStmt, ForStmt,
               BlockStmt, EmptyStmt>
      node;
};

enum class BlockKind {
  Functions,
  Data,
  TransformedData,
  Parameters,
  TransformedParameters,
  Model,
  GeneratedQuantities,
};

const char* to_string(BlockKind kind);

struct ProgramBlock {
  BlockKind kind;
  SourceLoc loc;
  std::vector<Stmt> body;
};

struct Program {
  std::vector<ProgramBlock> blocks;  // canonical order, each kind at most once

  const ProgramBlock* find(BlockKind kind) const;
  ProgramBlock* find(BlockKind kind);
};

/// Equality of syntax only: source locations and checker annotations are
/// ignored, literals compare by value.
bool structurally_equal(const Expr& a, const Expr& b);
bool structurally_equal(const Stmt& a, const Stmt& b);
bool structurally_equal(const Program& a, const Program& b);

/// Canonical Stan source for a program. parse(tokenize(print(p))) is
/// structurally equal to p.
std::string print(const Program& program);
std::string print(const Expr& expr);

}  // namespace stanvi
