// Apache License, Version 2.0, refer to LICENSE.txt

#include "stanvi/ast.hpp"

#include <cstdio>
#include <sstream>

namespace stanvi {

std::string to_string(BaseType base) {
  switch (base) {
    case BaseType::Int: return "int";
    case BaseType::Real: return "real";
    case BaseType::Vector: return "vector";
    case BaseType::RowVector: return "row_vector";
    case BaseType::Matrix: return "matrix";
  }
  return "?";
}

std::string to_string(ExprType type) {
  return type.array ? "array[] " + to_string(type.base) : to_string(type.base);
}

const char* to_string(BlockKind kind) {
  switch (kind) {
    case BlockKind::Functions: return "functions";
    case BlockKind::Data: return "data";
    case BlockKind::TransformedData: return "transformed data";
    case BlockKind::Parameters: return "parameters";
    case BlockKind::TransformedParameters: return "transformed parameters";
    case BlockKind::Model: return "model";
    case BlockKind::GeneratedQuantities: return "generated quantities";
  }
  return "?";
}

const ProgramBlock* Program::find(BlockKind kind) const {
  for (const ProgramBlock& b : blocks) {
    if (b.kind == kind) return &b;
  }
  return nullptr;
}

ProgramBlock* Program::find(BlockKind kind) {
  for (ProgramBlock& b : blocks) {
    if (b.kind == kind) return &b;
  }
  return nullptr;
}

// ---- structural equality -------------------------------------------------------

namespace {

template <class T, class Eq>
bool all_equal(const std::vector<T>& a, const std::vector<T>& b, Eq eq) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!eq(a[i], b[i])) return false;
  }
  return true;
}

bool opt_equal(const std::optional<Expr>& a, const std::optional<Expr>& b) {
  if (a.has_value() != b.has_value()) return false;
  return !a || structurally_equal(*a, *b);
}

bool exprs_equal(const std::vector<Expr>& a, const std::vector<Expr>& b) {
  return all_equal(a, b, [](const Expr& x, const Expr& y) { return structurally_equal(x, y); });
}

bool stmts_equal(const std::vector<Stmt>& a, const std::vector<Stmt>& b) {
  return all_equal(a, b, [](const Stmt& x, const Stmt& y) { return structurally_equal(x, y); });
}

bool decl_equal(const VarDecl& a, const VarDecl& b) {
  return a.name == b.name && a.base == b.base && exprs_equal(a.sizes, b.sizes) &&
         opt_equal(a.array_size, b.array_size) && a.constraint.kind == b.constraint.kind &&
         opt_equal(a.constraint.lower, b.constraint.lower) &&
         opt_equal(a.constraint.upper, b.constraint.upper) && opt_equal(a.init, b.init);
}

}  // namespace

bool structurally_equal(const Expr& a, const Expr& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case ExprKind::IntLiteral: return a.int_value == b.int_value;
    case ExprKind::RealLiteral: return a.real_value == b.real_value;
    case ExprKind::Index: return exprs_equal(a.args, b.args);
    case ExprKind::Call:
      if (a.conditional_bar != b.conditional_bar) return false;
      [[fallthrough]];
    default: return a.text == b.text && exprs_equal(a.args, b.args);
  }
}

bool structurally_equal(const Stmt& a, const Stmt& b) {
  if (a.node.index() != b.node.index()) return false;
  return std::visit(
      [&](const auto& x) -> bool {
        using T = std::decay_t<decltype(x)>;
        const T& y = std::get<T>(b.node);
        if constexpr (std::is_same_v<T, DeclStmt>) {
          return decl_equal(x.decl, y.decl);
        } else if constexpr (std::is_same_v<T, AssignStmt>) {
          return x.op == y.op && structurally_equal(x.lhs, y.lhs) &&
                 structurally_equal(x.rhs, y.rhs);
        } else if constexpr (std::is_same_v<T, TildeStmt>) {
          return x.distribution == y.distribution && structurally_equal(x.lhs, y.lhs) &&
                 exprs_equal(x.args, y.args);
        } else if constexpr (std::is_same_v<T, TargetStmt>) {
          return structurally_equal(x.value, y.value);
        } else if constexpr (std::is_same_v<T, IfStmt>) {
          return structurally_equal(x.condition, y.condition) &&
                 stmts_equal(x.then_branch, y.then_branch) &&
                 stmts_equal(x.else_branch, y.else_branch);
        } else if constexpr (std::is_same_v<T, ForStmt>) {
          return x.variable == y.variable && structurally_equal(x.lower, y.lower) &&
                 structurally_equal(x.upper, y.upper) && stmts_equal(x.body, y.body);
        } else if constexpr (std::is_same_v<T, BlockStmt>) {
          return stmts_equal(x.body, y.body);
        } else {
          return true;
        }
      },
      a.node);
}

bool structurally_equal(const Program& a, const Program& b) {
  return all_equal(a.blocks, b.blocks, [](const ProgramBlock& x, const ProgramBlock& y) {
    return x.kind == y.kind && stmts_equal(x.body, y.body);
  });
}

// ---- printer ---------------------------------------------------------------------

namespace {

// Binding strength, higher binds tighter. Mirrors the parser's levels.
constexpr int kPrecOr = 1;
constexpr int kPrecAnd = 2;
constexpr int kPrecEquality = 3;
constexpr int kPrecCompare = 4;
constexpr int kPrecAdd = 5;
constexpr int kPrecMul = 6;
constexpr int kPrecUnary = 7;
constexpr int kPrecPow = 8;
constexpr int kPrecPostfix = 9;

int binary_prec(const std::string& op) {
  if (op == "||") return kPrecOr;
  if (op == "&&") return kPrecAnd;
  if (op == "==" || op == "!=") return kPrecEquality;
  if (op == "<" || op == "<=" || op == ">" || op == ">=") return kPrecCompare;
  if (op == "+" || op == "-") return kPrecAdd;
  if (op == "^") return kPrecPow;
  return kPrecMul;
}

int prec(const Expr& e) {
  switch (e.kind) {
    case ExprKind::Binary: return binary_prec(e.text);
    case ExprKind::Unary: return kPrecUnary;
    default: return kPrecPostfix;
  }
}

std::string real_text(const Expr& e) {
  if (!e.text.empty()) return e.text;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", e.real_value);
  std::string s = buf;
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

void emit(std::ostream& out, const Expr& e);

/// Prints `e`, parenthesised when it binds looser than `min_prec`.
void emit_at(std::ostream& out, const Expr& e, int min_prec) {
  if (prec(e) < min_prec) {
    out << '(';
    emit(out, e);
    out << ')';
  } else {
    emit(out, e);
  }
}

void emit(std::ostream& out, const Expr& e) {
  switch (e.kind) {
    case ExprKind::IntLiteral:
      if (!e.text.empty()) {
        out << e.text;
      } else {
        out << e.int_value;
      }
      return;
    case ExprKind::RealLiteral: out << real_text(e); return;
    case ExprKind::Variable: out << e.text; return;
    case ExprKind::Unary:
      out << e.text;
      emit_at(out, e.args[0], kPrecUnary);
      return;
    case ExprKind::Binary: {
      const int p = binary_prec(e.text);
      if (p == kPrecPow) {
        emit_at(out, e.args[0], kPrecPostfix);
        out << '^';
        emit_at(out, e.args[1], kPrecUnary);
        return;
      }
      emit_at(out, e.args[0], p);
      out << ' ' << e.text << ' ';
      emit_at(out, e.args[1], p + 1);
      return;
    }
    case ExprKind::Call:
      out << e.text << '(';
      for (std::size_t i = 0; i < e.args.size(); ++i) {
        if (i > 0) out << (i == 1 && e.conditional_bar ? " | " : ", ");
        emit(out, e.args[i]);
      }
      out << ')';
      return;
    case ExprKind::Index:
      emit_at(out, e.args[0], kPrecPostfix);
      out << '[';
      for (std::size_t i = 1; i < e.args.size(); ++i) {
        if (i > 1) out << ", ";
        emit(out, e.args[i]);
      }
      out << ']';
      return;
  }
}

void emit_decl(std::ostream& out, const VarDecl& d) {
  if (d.array_size) {
    out << "array[";
    emit(out, *d.array_size);
    out << "] ";
  }
  const Constraint& c = d.constraint;
  if (c.kind == ConstraintKind::Simplex || c.kind == ConstraintKind::Ordered) {
    out << (c.kind == ConstraintKind::Simplex ? "simplex" : "ordered");
  } else {
    out << to_string(d.base);
    if (c.kind != ConstraintKind::None) {
      out << '<';
      if (c.lower) {
        out << "lower=";
        emit_at(out, *c.lower, kPrecAdd);
      }
      if (c.upper) {
        out << (c.lower ? ", " : "") << "upper=";
        emit_at(out, *c.upper, kPrecAdd);
      }
      out << '>';
    }
  }
  if (!d.sizes.empty()) {
    out << '[';
    for (std::size_t i = 0; i < d.sizes.size(); ++i) {
      if (i > 0) out << ", ";
      emit(out, d.sizes[i]);
    }
    out << ']';
  }
  out << ' ' << d.name;
  if (d.init) {
    out << " = ";
    emit(out, *d.init);
  }
  out << ';';
}

void emit_stmt(std::ostream& out, const Stmt& s, int depth);

void emit_body(std::ostream& out, const std::vector<Stmt>& body, int depth) {
  for (const Stmt& s : body) emit_stmt(out, s, depth);
}

void emit_stmt(std::ostream& out, const Stmt& s, int depth) {
  const std::string indent(2 * depth, ' ');
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, DeclStmt>) {
          out << indent;
          emit_decl(out, n.decl);
          out << '\n';
        } else if constexpr (std::is_same_v<T, AssignStmt>) {
          out << indent;
          emit(out, n.lhs);
          out << ' ' << n.op << ' ';
          emit(out, n.rhs);
          out << ";\n";
        } else if constexpr (std::is_same_v<T, TildeStmt>) {
          out << indent;
          emit(out, n.lhs);
          out << " ~ " << n.distribution << '(';
          for (std::size_t i = 0; i < n.args.size(); ++i) {
            if (i > 0) out << ", ";
            emit(out, n.args[i]);
          }
          out << ");\n";
        } else if constexpr (std::is_same_v<T, TargetStmt>) {
          out << indent << "target += ";
          emit(out, n.value);
          out << ";\n";
        } else if constexpr (std::is_same_v<T, IfStmt>) {
          out << indent << "if (";
          emit(out, n.condition);
          out << ")\n";
          emit_body(out, n.then_branch, depth + 1);
          if (!n.else_branch.empty()) {
            out << indent << "else\n";
            emit_body(out, n.else_branch, depth + 1);
          }
        } else if constexpr (std::is_same_v<T, ForStmt>) {
          out << indent << "for (" << n.variable << " in ";
          emit(out, n.lower);
          out << ':';
          emit(out, n.upper);
          out << ")\n";
          emit_body(out, n.body, depth + 1);
        } else if constexpr (std::is_same_v<T, BlockStmt>) {
          out << indent << "{\n";
          emit_body(out, n.body, depth + 1);
          out << indent << "}\n";
        } else {
          out << indent << ";\n";
        }
      },
      s.node);
}

}  // namespace

std::string print(const Expr& expr) {
  std::ostringstream out;
  emit(out, expr);
  return out.str();
}

std::string print(const Program& program) {
  std::ostringstream out;
  for (const ProgramBlock& block : program.blocks) {
    out << to_string(block.kind) << " {\n";
    emit_body(out, block.body, 1);
    out << "}\n";
  }
  return out.str();
}

}  // namespace stanvi
