// Apache License, Version 2.0, refer to LICENSE.txt

#include "stanvi/checker.hpp"

#include <map>
#include <optional>

#include "stanvi/functions.hpp"
#include "stanvi/parser.hpp"

namespace stanvi {

namespace {

const ExprType kInt{BaseType::Int, false};
const ExprType kReal{BaseType::Real, false};
const ExprType kVector{BaseType::Vector, false};
const ExprType kRowVector{BaseType::RowVector, false};
const ExprType kMatrix{BaseType::Matrix, false};
const ExprType kIntArray{BaseType::Int, true};
const ExprType kRealArray{BaseType::Real, true};

bool is_numeric_scalar(ExprType t) { return t.is_scalar(); }

/// Real-valued container a distribution can be vectorised over.
bool is_real_sequence(ExprType t) {
  if (t.array) return t.base == BaseType::Int || t.base == BaseType::Real;
  return t.base == BaseType::Vector || t.base == BaseType::RowVector ||
         t.base == BaseType::Matrix;
}

/// Value of type `from` may be stored in a slot of type `to`.
bool assignable(ExprType to, ExprType from) {
  if (to == from) return true;
  if (to.array != from.array) return false;
  return to.base == BaseType::Real && from.base == BaseType::Int;
}

class Checker {
 public:
  TypedProgram run(Program ast) {
    TypedProgram typed;
    typed.program = std::move(ast);
    symbols_ = &typed.symbols;
    scopes_.emplace_back();
    for (ProgramBlock& block : typed.program.blocks) {
      block_ = block.kind;
      const bool decl_only =
          block.kind == BlockKind::Data || block.kind == BlockKind::Parameters;
      const bool has_own_scope = block.kind == BlockKind::Model;
      if (has_own_scope) scopes_.emplace_back();
      for (Stmt& stmt : block.body) {
        if (decl_only && !std::holds_alternative<DeclStmt>(stmt.node)) {
          throw CompileError(CompileErrorKind::SyntaxError, stmt.loc,
                             std::string("only declarations are allowed in the ") +
                                 to_string(block.kind) + " block");
        }
        statement(stmt, /*top_level=*/true);
      }
      if (has_own_scope) scopes_.pop_back();
    }
    return typed;
  }

 private:
  // ---- symbols ---------------------------------------------------------------

  Origin top_level_origin() const {
    switch (block_) {
      case BlockKind::Data: return Origin::Data;
      case BlockKind::TransformedData: return Origin::TransformedData;
      case BlockKind::Parameters: return Origin::Parameter;
      case BlockKind::TransformedParameters: return Origin::TransformedParameter;
      case BlockKind::GeneratedQuantities: return Origin::GeneratedQuantity;
      default: return Origin::Local;
    }
  }

  int declare(const std::string& name, ExprType type, Origin origin, SourceLoc loc) {
    for (const auto& scope : scopes_) {
      if (scope.count(name)) {
        throw CompileError(CompileErrorKind::DuplicateDeclaration, loc,
                           "'" + name + "' is already declared");
      }
    }
    if (resolve_function(name)) {
      throw CompileError(CompileErrorKind::DuplicateDeclaration, loc,
                         "'" + name + "' shadows a built-in function");
    }
    const int slot = static_cast<int>(symbols_->size());
    symbols_->push_back(Symbol{name, type, origin, block_, loc});
    scopes_.back()[name] = slot;
    return slot;
  }

  std::optional<int> lookup(const std::string& name) const {
    for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
      auto found = it->find(name);
      if (found != it->end()) return found->second;
    }
    return std::nullopt;
  }

  const Symbol& symbol(int slot) const { return (*symbols_)[slot]; }

  // ---- statements -------------------------------------------------------------

  void statement(Stmt& stmt, bool top_level) {
    std::visit(
        [&](auto& node) {
          using T = std::decay_t<decltype(node)>;
          if constexpr (std::is_same_v<T, DeclStmt>) {
            declaration(node.decl, stmt.loc, top_level);
          } else if constexpr (std::is_same_v<T, AssignStmt>) {
            assignment(node, stmt.loc);
          } else if constexpr (std::is_same_v<T, TildeStmt>) {
            tilde(node, stmt.loc);
          } else if constexpr (std::is_same_v<T, TargetStmt>) {
            target(node, stmt.loc);
          } else if constexpr (std::is_same_v<T, IfStmt>) {
            const ExprType c = expr(node.condition);
            if (!is_numeric_scalar(c)) {
              throw CompileError(CompileErrorKind::TypeMismatch, node.condition.loc,
                                 "condition must be int or real, found " + to_string(c));
            }
            nested(node.then_branch);
            nested(node.else_branch);
          } else if constexpr (std::is_same_v<T, ForStmt>) {
            for (Expr* bound : {&node.lower, &node.upper}) {
              if (expr(*bound) != kInt) {
                throw CompileError(CompileErrorKind::TypeMismatch, bound->loc,
                                   "loop bounds must be int, found " + to_string(bound->type));
              }
            }
            scopes_.emplace_back();
            node.slot = declare(node.variable, kInt, Origin::LoopVariable, stmt.loc);
            for (Stmt& s : node.body) statement(s, false);
            scopes_.pop_back();
          } else if constexpr (std::is_same_v<T, BlockStmt>) {
            nested(node.body);
          }
        },
        stmt.node);
  }

  void nested(std::vector<Stmt>& body) {
    scopes_.emplace_back();
    for (Stmt& s : body) statement(s, false);
    scopes_.pop_back();
  }

  /// Size and bound expressions of block-level variables may only use data.
  void require_data_only(const Expr& e) const {
    if (e.kind == ExprKind::Variable) {
      const Origin o = symbol(e.slot).origin;
      if (o != Origin::Data && o != Origin::TransformedData) {
        throw CompileError(CompileErrorKind::TypeMismatch, e.loc,
                           "'" + e.text + "' is not data; sizes and bounds of block "
                           "variables may only use data and transformed data");
      }
    }
    for (const Expr& a : e.args) require_data_only(a);
  }

  void declaration(VarDecl& decl, SourceLoc loc, bool top_level) {
    const bool block_variable = top_level && block_ != BlockKind::Model;
    const Origin origin = block_variable ? top_level_origin() : Origin::Local;

    for (Expr& size : decl.sizes) {
      if (expr(size) != kInt) {
        throw CompileError(CompileErrorKind::TypeMismatch, size.loc,
                           "size must be int, found " + to_string(size.type));
      }
      if (block_variable) require_data_only(size);
    }
    if (decl.array_size) {
      if (expr(*decl.array_size) != kInt) {
        throw CompileError(CompileErrorKind::TypeMismatch, decl.array_size->loc,
                           "array size must be int, found " + to_string(decl.array_size->type));
      }
      if (block_variable) require_data_only(*decl.array_size);
    }
    if (decl.constraint.kind != ConstraintKind::None && !block_variable) {
      throw CompileError(CompileErrorKind::TypeMismatch, loc,
                         "local variable '" + decl.name + "' cannot be constrained");
    }
    for (std::optional<Expr>* bound : {&decl.constraint.lower, &decl.constraint.upper}) {
      if (!*bound) continue;
      const ExprType t = expr(**bound);
      if (!is_numeric_scalar(t)) {
        throw CompileError(CompileErrorKind::TypeMismatch, (*bound)->loc,
                           "bound must be int or real, found " + to_string(t));
      }
      require_data_only(**bound);
    }
    if (origin == Origin::Parameter && decl.base == BaseType::Int) {
      throw CompileError(CompileErrorKind::TypeMismatch, loc,
                         "parameter '" + decl.name + "' cannot be an integer");
    }
    if (decl.init) {
      if (origin == Origin::Data || origin == Origin::Parameter) {
        throw CompileError(CompileErrorKind::IllegalAssignment, decl.init->loc,
                           "'" + decl.name + "' cannot be initialised in the " +
                               std::string(to_string(block_)) + " block");
      }
      const ExprType t = expr(*decl.init);
      if (!assignable(decl.type(), t)) {
        throw CompileError(CompileErrorKind::TypeMismatch, decl.init->loc,
                           "cannot initialise " + to_string(decl.type()) + " '" + decl.name +
                               "' with " + to_string(t));
      }
    }
    decl.slot = declare(decl.name, decl.type(), origin, loc);
  }

  void assignment(AssignStmt& node, SourceLoc loc) {
    const ExprType lhs = expr(node.lhs);
    const Expr* root = &node.lhs;
    while (root->kind == ExprKind::Index) root = &root->args[0];
    if (root->kind != ExprKind::Variable) {
      throw CompileError(CompileErrorKind::IllegalAssignment, loc,
                         "left-hand side of an assignment must be a variable");
    }
    const Symbol& sym = symbol(root->slot);
    const bool allowed =
        sym.origin == Origin::Local ||
        (sym.origin == Origin::TransformedData && block_ == BlockKind::TransformedData) ||
        (sym.origin == Origin::TransformedParameter &&
         block_ == BlockKind::TransformedParameters) ||
        (sym.origin == Origin::GeneratedQuantity && block_ == BlockKind::GeneratedQuantities);
    if (!allowed) {
      throw CompileError(CompileErrorKind::IllegalAssignment, loc,
                         "cannot assign to " + std::string(to_string(sym.origin)) + " '" +
                             sym.name + "' in the " + to_string(block_) + " block");
    }
    for (const Expr* e = &node.lhs; e->kind == ExprKind::Index; e = &e->args[0]) {
      for (std::size_t i = 1; i < e->args.size(); ++i) {
        if (e->args[i].type != kInt) {
          throw CompileError(CompileErrorKind::UnsupportedConstruct, e->args[i].loc,
                             "multi-indexing on the left of an assignment");
        }
      }
    }
    ExprType rhs = expr(node.rhs);
    if (node.op != "=") {
      const std::string op(1, node.op[0]);
      rhs = binary_type(op, lhs, rhs, loc);
    }
    if (!assignable(lhs, rhs)) {
      throw CompileError(CompileErrorKind::TypeMismatch, loc,
                         "cannot assign " + to_string(rhs) + " to " + to_string(lhs));
    }
  }

  void tilde(TildeStmt& node, SourceLoc loc) {
    if (block_ != BlockKind::Model) {
      throw CompileError(CompileErrorKind::IllegalSampling, loc,
                         "sampling statements are only allowed in the model block");
    }
    const auto dist = find_distribution(node.distribution);
    if (!dist) {
      throw CompileError(CompileErrorKind::UnsupportedConstruct, loc,
                         "distribution '" + node.distribution + "' is not supported");
    }
    const Expr* root = &node.lhs;
    while (root->kind == ExprKind::Index) root = &root->args[0];
    expr(node.lhs);
    if (root->kind != ExprKind::Variable) {
      throw CompileError(CompileErrorKind::IllegalSampling, loc,
                         "left-hand side of '~' must be a variable");
    }
    const Origin o = symbol(root->slot).origin;
    if (o != Origin::Data && o != Origin::TransformedData && o != Origin::Parameter &&
        o != Origin::TransformedParameter) {
      throw CompileError(CompileErrorKind::IllegalSampling, loc,
                         "'" + root->text + "' is a " + to_string(o) +
                             "; only data, parameters and transformed parameters can "
                             "appear left of '~'");
    }
    for (Expr& a : node.args) expr(a);
    node.function = FunctionRef{CallForm::LogDensity, static_cast<int>(*dist)}.encode();
    distribution_args(*dist, node.lhs, node.args, loc);
  }

  void distribution_args(DistKind dist, const Expr& outcome, const std::vector<Expr>& params,
                         SourceLoc loc) const {
    const DistInfo& d = info(dist);
    if (static_cast<int>(params.size()) != d.num_params) {
      throw CompileError(CompileErrorKind::TypeMismatch, loc,
                         std::string(d.name) + " takes " + std::to_string(d.num_params) +
                             " parameter(s), found " + std::to_string(params.size()));
    }
    const ExprType y = outcome.type;
    if (d.discrete) {
      if (y.base != BaseType::Int) {
        throw CompileError(CompileErrorKind::TypeMismatch, outcome.loc,
                           std::string(d.name) + " needs an int or int array outcome, found " +
                               to_string(y));
      }
    } else if (!is_numeric_scalar(y) && !is_real_sequence(y)) {
      throw CompileError(CompileErrorKind::TypeMismatch, outcome.loc,
                         std::string(d.name) + " cannot be applied to " + to_string(y));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      const ExprType p = params[i].type;
      if (d.vector_param) {
        if (p != kVector) {
          throw CompileError(CompileErrorKind::TypeMismatch, params[i].loc,
                             std::string(d.name) + " needs a vector of probabilities, found " +
                                 to_string(p));
        }
        continue;
      }
      if ((d.int_params >> i) & 1u) {
        if (p.base != BaseType::Int) {
          throw CompileError(CompileErrorKind::TypeMismatch, params[i].loc,
                             std::string(d.name) + " parameter " + std::to_string(i + 1) +
                                 " must be int, found " + to_string(p));
        }
        continue;
      }
      if (!is_numeric_scalar(p) && !is_real_sequence(p)) {
        throw CompileError(CompileErrorKind::TypeMismatch, params[i].loc,
                           std::string(d.name) + " parameter " + std::to_string(i + 1) +
                               " cannot be " + to_string(p));
      }
    }
  }

  void target(TargetStmt& node, SourceLoc loc) {
    if (block_ != BlockKind::Model) {
      throw CompileError(CompileErrorKind::IllegalSampling, loc,
                         "target += is only allowed in the model block");
    }
    const ExprType t = expr(node.value);
    if (t.base == BaseType::Matrix) {
      throw CompileError(CompileErrorKind::NonScalarTarget, node.value.loc,
                         "target += needs a scalar or a vector-like value, found " +
                             to_string(t));
    }
  }

  // ---- expressions ------------------------------------------------------------

  ExprType expr(Expr& e) {
    e.type = infer(e);
    return e.type;
  }

  ExprType infer(Expr& e) {
    switch (e.kind) {
      case ExprKind::IntLiteral: return kInt;
      case ExprKind::RealLiteral: return kReal;
      case ExprKind::Variable: {
        const auto slot = lookup(e.text);
        if (!slot) {
          throw CompileError(CompileErrorKind::UndefinedIdentifier, e.loc,
                             "'" + e.text + "' is not declared");
        }
        e.slot = *slot;
        return symbol(*slot).type;
      }
      case ExprKind::Unary: {
        const ExprType a = expr(e.args[0]);
        if (e.text == "!") {
          if (!is_numeric_scalar(a)) {
            throw CompileError(CompileErrorKind::TypeMismatch, e.loc,
                               "'!' needs an int or real, found " + to_string(a));
          }
          return kInt;
        }
        if (a.array) {
          throw CompileError(CompileErrorKind::TypeMismatch, e.loc,
                             "unary '" + e.text + "' cannot be applied to " + to_string(a));
        }
        return a;
      }
      case ExprKind::Binary: {
        const ExprType a = expr(e.args[0]);
        const ExprType b = expr(e.args[1]);
        return binary_type(e.text, a, b, e.loc);
      }
      case ExprKind::Index: return index_type(e);
      case ExprKind::Call: return call_type(e);
    }
    return kReal;
  }

  ExprType binary_type(const std::string& op, ExprType a, ExprType b, SourceLoc loc) const {
    auto mismatch = [&](CompileErrorKind kind) -> ExprType {
      throw CompileError(kind, loc,
                         "operator '" + op + "' cannot combine " + to_string(a) + " and " +
                             to_string(b));
    };
    const bool scalars = a.is_scalar() && b.is_scalar();
    if (op == "&&" || op == "||" || op == "<" || op == "<=" || op == ">" || op == ">=" ||
        op == "==" || op == "!=") {
      if (!scalars) return mismatch(CompileErrorKind::TypeMismatch);
      return kInt;
    }
    if (op == "\\") {
      throw CompileError(CompileErrorKind::UnsupportedConstruct, loc,
                         "matrix left division '\\'");
    }
    if (op == "%") {
      if (a != kInt || b != kInt) return mismatch(CompileErrorKind::TypeMismatch);
      return kInt;
    }
    if (op == "^") {
      if (!scalars) return mismatch(CompileErrorKind::TypeMismatch);
      return kReal;
    }
    if (a.array || b.array) return mismatch(CompileErrorKind::TypeMismatch);
    if (scalars) {
      return (a == kInt && b == kInt && op != ".*" && op != "./") ? kInt : kReal;
    }
    if (op == "+" || op == "-" || op == ".*" || op == "./") {
      if (a.is_scalar()) return b;
      if (b.is_scalar()) return a;
      if (a == b) return a;
      return mismatch(CompileErrorKind::ShapeMismatch);
    }
    if (op == "/") {
      if (b.is_scalar()) return a;
      return mismatch(CompileErrorKind::ShapeMismatch);
    }
    if (op == "*") {
      if (a.is_scalar()) return b;
      if (b.is_scalar()) return a;
      if (a == kMatrix && b == kVector) return kVector;
      if (a == kRowVector && b == kMatrix) return kRowVector;
      if (a == kRowVector && b == kVector) return kReal;
      if (a == kVector && b == kRowVector) return kMatrix;
      if (a == kMatrix && b == kMatrix) return kMatrix;
      return mismatch(CompileErrorKind::ShapeMismatch);
    }
    return mismatch(CompileErrorKind::TypeMismatch);
  }

  ExprType index_type(Expr& e) {
    ExprType t = expr(e.args[0]);
    const std::size_t n = e.args.size() - 1;
    for (std::size_t i = 1; i <= n; ++i) {
      const ExprType idx = expr(e.args[i]);
      if (idx == kIntArray) {
        const bool sequence = (t.array && !(t.base == BaseType::Matrix)) ||
                              t == kVector || t == kRowVector;
        if (n != 1 || !sequence ||
            (t.array && t.base != BaseType::Int && t.base != BaseType::Real &&
             t.base != BaseType::Vector)) {
          throw CompileError(CompileErrorKind::UnsupportedConstruct, e.args[i].loc,
                             "multi-indexing of " + to_string(t));
        }
        continue;  // same type, selected elements
      }
      if (idx != kInt) {
        throw CompileError(CompileErrorKind::TypeMismatch, e.args[i].loc,
                           "index must be int, found " + to_string(idx));
      }
      if (t.array) {
        t.array = false;
      } else if (t.base == BaseType::Vector || t.base == BaseType::RowVector) {
        t = kReal;
      } else if (t.base == BaseType::Matrix) {
        t = kRowVector;
      } else {
        throw CompileError(CompileErrorKind::TypeMismatch, e.loc,
                           "too many indexes for " + to_string(e.args[0].type));
      }
    }
    return t;
  }

  ExprType call_type(Expr& e) {
    const auto ref = resolve_function(e.text);
    if (!ref) {
      throw CompileError(CompileErrorKind::UnsupportedConstruct, e.loc,
                         "function '" + e.text + "' is not supported");
    }
    e.function = ref->encode();
    std::vector<ExprType> args;
    for (Expr& a : e.args) args.push_back(expr(a));

    if (ref->form == CallForm::LogDensity) {
      if (e.args.empty()) {
        throw CompileError(CompileErrorKind::TypeMismatch, e.loc,
                           e.text + " needs an outcome argument");
      }
      const std::vector<Expr> params(e.args.begin() + 1, e.args.end());
      distribution_args(ref->distribution(), e.args[0], params, e.loc);
      return kReal;
    }
    if (ref->form == CallForm::Rng) {
      if (block_ != BlockKind::GeneratedQuantities) {
        throw CompileError(CompileErrorKind::UnsupportedConstruct, e.loc,
                           e.text + " outside generated quantities");
      }
      const DistInfo& d = info(ref->distribution());
      if (static_cast<int>(args.size()) != d.num_params) {
        throw CompileError(CompileErrorKind::TypeMismatch, e.loc,
                           e.text + " takes " + std::to_string(d.num_params) +
                               " argument(s), found " + std::to_string(args.size()));
      }
      for (std::size_t i = 0; i < args.size(); ++i) {
        const bool ok = d.vector_param ? args[i] == kVector : is_numeric_scalar(args[i]);
        if (!ok) {
          throw CompileError(CompileErrorKind::TypeMismatch, e.args[i].loc,
                             e.text + " argument " + std::to_string(i + 1) + " cannot be " +
                                 to_string(args[i]));
        }
      }
      return d.discrete ? kInt : kReal;
    }

    const Builtin fn = ref->builtin();
    auto arity = [&](std::size_t n) {
      if (args.size() != n) {
        throw CompileError(CompileErrorKind::TypeMismatch, e.loc,
                           e.text + " takes " + std::to_string(n) + " argument(s), found " +
                               std::to_string(args.size()));
      }
    };
    auto bad = [&](std::size_t i) -> ExprType {
      throw CompileError(CompileErrorKind::TypeMismatch, e.args[i].loc,
                         e.text + " cannot be applied to " + to_string(args[i]));
    };
    if (is_elementwise(fn)) {
      arity(1);
      const ExprType a = args[0];
      if (fn == Builtin::Abs && a.base == BaseType::Int) return a;
      if (a.base == BaseType::Int) return {BaseType::Real, a.array};
      return a;
    }
    switch (fn) {
      case Builtin::Pow:
        arity(2);
        if (!is_numeric_scalar(args[0])) return bad(0);
        if (!is_numeric_scalar(args[1])) return bad(1);
        return kReal;
      case Builtin::DotProduct:
        arity(2);
        for (std::size_t i = 0; i < 2; ++i) {
          if (!(args[i] == kVector || args[i] == kRowVector || args[i] == kRealArray)) {
            return bad(i);
          }
        }
        return kReal;
      case Builtin::Sum:
        arity(1);
        if (args[0] == kIntArray || args[0] == kInt) return kInt;
        if (args[0].array && args[0].base != BaseType::Real) return bad(0);
        return kReal;
      case Builtin::Mean:
        arity(1);
        if (!is_real_sequence(args[0])) return bad(0);
        return kReal;
      case Builtin::RepVector:
        arity(2);
        if (!is_numeric_scalar(args[0])) return bad(0);
        if (args[1] != kInt) return bad(1);
        return kVector;
      case Builtin::LogSumExp:
        if (args.size() == 1) {
          if (!is_real_sequence(args[0])) return bad(0);
          return kReal;
        }
        arity(2);
        if (!is_numeric_scalar(args[0])) return bad(0);
        if (!is_numeric_scalar(args[1])) return bad(1);
        return kReal;
      case Builtin::LogMix:
        arity(3);
        for (std::size_t i = 0; i < 3; ++i) {
          if (!is_numeric_scalar(args[i])) return bad(i);
        }
        return kReal;
      default:
        return kReal;
    }
  }

  std::vector<Symbol>* symbols_ = nullptr;
  std::vector<std::map<std::string, int>> scopes_;
  BlockKind block_ = BlockKind::Data;
};

}  // namespace

const char* to_string(Origin origin) {
  switch (origin) {
    case Origin::Data: return "data";
    case Origin::TransformedData: return "transformed data";
    case Origin::Parameter: return "parameter";
    case Origin::TransformedParameter: return "transformed parameter";
    case Origin::GeneratedQuantity: return "generated quantity";
    case Origin::Local: return "local variable";
    case Origin::LoopVariable: return "loop variable";
  }
  return "?";
}

std::vector<int> TypedProgram::slots_of(Origin origin) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (symbols[i].origin == origin) out.push_back(static_cast<int>(i));
  }
  return out;
}

TypedProgram check(Program ast) { return Checker().run(std::move(ast)); }

TypedProgram check_source(std::string_view source) { return check(parse_source(source)); }

}  // namespace stanvi
