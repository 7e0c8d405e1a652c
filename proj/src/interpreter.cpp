// Apache License, Version 2.0, refer to LICENSE.txt

#include "interpreter.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "stanvi/distributions.hpp"
#include "stanvi/error.hpp"
#include "stanvi/functions.hpp"

namespace stanvi::detail {

using ad::Var;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

[[noreturn]] void fail(SourceLoc loc, const std::string& what) {
  throw EvalError(std::to_string(loc.line) + ":" + std::to_string(loc.column) + ": " + what);
}

std::string describe(const Shape& s) {
  std::string out = to_string(s.type.base);
  switch (s.type.base) {
    case BaseType::Vector: out += "[" + std::to_string(s.rows) + "]"; break;
    case BaseType::RowVector: out += "[" + std::to_string(s.cols) + "]"; break;
    case BaseType::Matrix:
      out += "[" + std::to_string(s.rows) + ", " + std::to_string(s.cols) + "]";
      break;
    default: break;
  }
  if (s.type.array) out = "array[" + std::to_string(s.length) + "] " + out;
  return out;
}

bool truthy(const Value& v) { return v.is_int() ? v.ints[0] != 0 : v.reals[0].value() != 0.0; }

Shape element_shape(const Shape& s) {
  Shape e = s;
  e.type.array = false;
  e.length = 0;
  return e;
}

/// Position of one element selected by a single integer index.
struct Location {
  Shape shape;
  int offset = 0;
};

Location narrow(const Location& at, std::int64_t i, SourceLoc loc) {
  const Shape& s = at.shape;
  auto check = [&](std::int64_t n) {
    if (i < 1 || i > n) {
      fail(loc, "index " + std::to_string(i) + " out of range for " + describe(s));
    }
  };
  if (s.type.array) {
    check(s.length);
    return {element_shape(s), at.offset + static_cast<int>(i - 1) * s.element_size()};
  }
  switch (s.type.base) {
    case BaseType::Vector:
      check(s.rows);
      return {scalar_shape(BaseType::Real), at.offset + static_cast<int>(i - 1)};
    case BaseType::RowVector:
      check(s.cols);
      return {scalar_shape(BaseType::Real), at.offset + static_cast<int>(i - 1)};
    case BaseType::Matrix: {
      check(s.rows);
      Shape row{{BaseType::RowVector, false}, 0, 1, s.cols};
      return {row, at.offset + static_cast<int>(i - 1) * s.cols};
    }
    default: fail(loc, "cannot index a scalar");
  }
}

Value slice(const Value& v, const Location& at) {
  Value out = Value::make(at.shape);
  const int n = at.shape.size();
  if (v.is_int()) {
    std::copy_n(v.ints.begin() + at.offset, n, out.ints.begin());
  } else {
    std::copy_n(v.reals.begin() + at.offset, n, out.reals.begin());
  }
  return out;
}


/// Writes `v` into `target` at `at`, promoting int to real.
void store(Value& target, const Location& at, const Value& v, SourceLoc loc) {
  const Shape& want = at.shape;
  const bool same_kind = want.type.array == v.shape.type.array &&
                         (want.type.base == v.shape.type.base ||
                          (want.type.base == BaseType::Real && v.shape.type.base == BaseType::Int));
  if (!same_kind || want.length != v.shape.length || want.rows != v.shape.rows ||
      want.cols != v.shape.cols) {
    fail(loc, "cannot assign " + describe(v.shape) + " to " + describe(want));
  }
  const int n = want.size();
  if (target.is_int()) {
    std::copy_n(v.ints.begin(), n, target.ints.begin() + at.offset);
  } else {
    for (int i = 0; i < n; ++i) target.reals[at.offset + i] = v.real(i);
  }
}

Var apply_real(char op, const Var& a, const Var& b) {
  switch (op) {
    case '+': return a + b;
    case '-': return a - b;
    case '*': return a * b;
    case '/': return a / b;
    case '^': return ad::pow(a, b);
  }
  return Var(kNaN);
}

std::int64_t apply_int(const std::string& op, std::int64_t a, std::int64_t b, SourceLoc loc) {
  if (op == "+") return a + b;
  if (op == "-") return a - b;
  if (op == "*") return a * b;
  if (op == "/" || op == "%") {
    if (b == 0) fail(loc, "integer division by zero");
    return op == "/" ? a / b : a % b;
  }
  fail(loc, "operator '" + op + "' on int");
}

bool same_dims(const Shape& a, const Shape& b) {
  return a.type.base == b.type.base && a.rows == b.rows && a.cols == b.cols;
}

bool is_comparison(const std::string& op) {
  return op == "<" || op == "<=" || op == ">" || op == ">=" || op == "==" || op == "!=";
}

Value binary(const std::string& op, const Value& a, const Value& b, SourceLoc loc) {
  const bool sa = a.shape.type.is_scalar();
  const bool sb = b.shape.type.is_scalar();
  if (is_comparison(op)) {
    const double x = a.real(0).value();
    const double y = b.real(0).value();
    bool r = false;
    if (op == "<") r = x < y;
    if (op == "<=") r = x <= y;
    if (op == ">") r = x > y;
    if (op == ">=") r = x >= y;
    if (op == "==") r = x == y;
    if (op == "!=") r = x != y;
    return Value::of_int(r ? 1 : 0);
  }
  if (sa && sb) {
    if (a.is_int() && b.is_int() && op != "^" && op != ".*" && op != "./") {
      return Value::of_int(apply_int(op, a.ints[0], b.ints[0], loc));
    }
    const char c = op.size() == 2 ? op[1] : op[0];  // ".*" acts as "*" on scalars
    return Value::of_real(apply_real(c, a.real(0), b.real(0)));
  }
  const char c = op.size() == 2 ? op[1] : op[0];
  if (op == "+" || op == "-" || op == ".*" || op == "./" || (op == "/" && sb) ||
      (op == "*" && (sa || sb))) {
    if (!sa && !sb && !same_dims(a.shape, b.shape)) {
      fail(loc, "operator '" + op + "' on " + describe(a.shape) + " and " + describe(b.shape));
    }
    const Value& shape_src = sa ? b : a;
    Shape s = shape_src.shape;
    s.type.base = s.type.base == BaseType::Int ? BaseType::Real : s.type.base;
    Value out = Value::make(s);
    const int n = out.size();
    for (int i = 0; i < n; ++i) {
      out.reals[i] = apply_real(c, a.real(sa ? 0 : i), b.real(sb ? 0 : i));
    }
    return out;
  }
  if (op != "*") fail(loc, "operator '" + op + "' on " + describe(a.shape) + " and " +
                               describe(b.shape));
  // Linear algebra products. A is m x k, B is k x n, both row-major.
  const int m = a.shape.rows, k = a.shape.cols, n = b.shape.cols;
  if (k != b.shape.rows) {
    fail(loc, "product of " + describe(a.shape) + " and " + describe(b.shape) +
                  " has mismatched inner dimensions");
  }
  const BaseType ta = a.shape.type.base, tb = b.shape.type.base;
  Shape s;
  if (ta == BaseType::RowVector && tb == BaseType::Vector) {
    s = scalar_shape(BaseType::Real);
  } else if (ta == BaseType::Matrix && tb == BaseType::Vector) {
    s = {{BaseType::Vector, false}, 0, m, 1};
  } else if (ta == BaseType::RowVector && tb == BaseType::Matrix) {
    s = {{BaseType::RowVector, false}, 0, 1, n};
  } else {
    s = {{BaseType::Matrix, false}, 0, m, n};
  }
  Value out = Value::make(s);
  std::vector<Var> row(k), col(k);
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) row[p] = a.reals[i * k + p];
    for (int j = 0; j < n; ++j) {
      for (int p = 0; p < k; ++p) col[p] = b.reals[p * n + j];
      out.reals[i * n + j] = ad::dot(row, col);
    }
  }
  return out;
}

Value map_real(const Value& a, Var (*f)(const Var&)) {
  Shape s = a.shape;
  s.type.base = s.type.base == BaseType::Int ? BaseType::Real : s.type.base;
  Value out = Value::make(s);
  for (int i = 0; i < a.size(); ++i) out.reals[i] = f(a.real(i));
  return out;
}

Var log1m(const Var& x) { return ad::log1p(-x); }

}  // namespace

// ---- Value -------------------------------------------------------------------------

Shape scalar_shape(BaseType base) { return Shape{{base, false}, 0, 1, 1}; }

Value Value::make(const Shape& shape) {
  Value v;
  v.shape = shape;
  if (v.is_int()) {
    v.ints.assign(shape.size(), 0);
  } else {
    v.reals.assign(shape.size(), Var(kNaN));
  }
  return v;
}

Value Value::of_int(std::int64_t i) {
  Value v;
  v.shape = scalar_shape(BaseType::Int);
  v.ints.push_back(i);
  return v;
}

Value Value::of_real(const Var& x) {
  Value v;
  v.shape = scalar_shape(BaseType::Real);
  v.reals.push_back(x);
  return v;
}

// ---- Evaluator ---------------------------------------------------------------------

Evaluator::Evaluator(const TypedProgram& program, const ModelState* state, Rng* rng)
    : program_(program), state_(state), rng_(rng), env_(program.symbols.size()) {}

const Value& Evaluator::get(int slot) const {
  if (state_ != nullptr) {
    const Origin o = program_.symbols[slot].origin;
    if (o == Origin::Data || o == Origin::TransformedData) return state_->fixed[slot];
  }
  return env_[slot];
}

Var Evaluator::target() const { return ad::sum(terms_); }

void Evaluator::run(const ProgramBlock& block) {
  for (const Stmt& s : block.body) exec(s);
}

std::int64_t Evaluator::as_int(const Expr& e) {
  const Value v = eval(e);
  if (!v.is_int() || !v.shape.type.is_scalar()) fail(e.loc, "expected an int");
  return v.ints[0];
}

Shape Evaluator::shape_of(const VarDecl& decl) {
  Shape s;
  s.type = decl.type();
  auto size = [&](const Expr& e) {
    const std::int64_t n = as_int(e);
    if (n < 0) fail(e.loc, "negative size " + std::to_string(n) + " for '" + decl.name + "'");
    return static_cast<int>(n);
  };
  if (decl.array_size) s.length = size(*decl.array_size);
  switch (decl.base) {
    case BaseType::Vector: s.rows = size(decl.sizes[0]); break;
    case BaseType::RowVector: s.cols = size(decl.sizes[0]); break;
    case BaseType::Matrix:
      s.rows = size(decl.sizes[0]);
      s.cols = size(decl.sizes[1]);
      break;
    default: break;
  }
  return s;
}

ConstraintSpec Evaluator::constraint_of(const VarDecl& decl) {
  const Constraint& c = decl.constraint;
  auto bound = [&](const Expr& e) { return eval(e).real(0).value(); };
  switch (c.kind) {
    case ConstraintKind::None: return ConstraintSpec::none();
    case ConstraintKind::Lower: return ConstraintSpec::lower_bound(bound(*c.lower));
    case ConstraintKind::Upper: return ConstraintSpec::upper_bound(bound(*c.upper));
    case ConstraintKind::LowerUpper: {
      const double lo = bound(*c.lower), hi = bound(*c.upper);
      if (!(lo < hi)) {
        fail(c.lower->loc, "empty interval [" + std::to_string(lo) + ", " +
                               std::to_string(hi) + "] for '" + decl.name + "'");
      }
      return ConstraintSpec::interval(lo, hi);
    }
    case ConstraintKind::Simplex: return ConstraintSpec::simplex();
    case ConstraintKind::Ordered: return ConstraintSpec::ordered();
  }
  return ConstraintSpec::none();
}

void Evaluator::declare(const VarDecl& decl) {
  const Symbol& sym = program_.symbols[decl.slot];
  const bool block_level = sym.origin != Origin::Local;
  Shape shape = block_level && state_ != nullptr ? state_->shapes[decl.slot] : shape_of(decl);
  Value v = Value::make(shape);
  if (decl.init) store(v, {shape, 0}, eval(*decl.init), decl.init->loc);
  env_[decl.slot] = std::move(v);
}

void Evaluator::assign(const AssignStmt& stmt) {
  std::vector<const Expr*> chain;
  const Expr* root = &stmt.lhs;
  while (root->kind == ExprKind::Index) {
    chain.push_back(root);
    root = &root->args[0];
  }
  Value& target = env_[root->slot];
  Location at{target.shape, 0};
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
    for (std::size_t i = 1; i < (*it)->args.size(); ++i) {
      at = narrow(at, as_int((*it)->args[i]), (*it)->args[i].loc);
    }
  }
  Value rhs = eval(stmt.rhs);
  if (stmt.op != "=") {
    const Value current = slice(target, at);
    rhs = binary(std::string(1, stmt.op[0]), current, rhs, stmt.lhs.loc);
  }
  store(target, at, rhs, stmt.lhs.loc);
}

void Evaluator::exec(const Stmt& stmt) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, DeclStmt>) {
          declare(n.decl);
        } else if constexpr (std::is_same_v<T, AssignStmt>) {
          assign(n);
        } else if constexpr (std::is_same_v<T, TildeStmt>) {
          const Value y = eval(n.lhs);
          std::vector<Value> params;
          params.reserve(n.args.size());
          for (const Expr& a : n.args) params.push_back(eval(a));
          const FunctionRef ref = FunctionRef::decode(n.function);
          terms_.push_back(log_density(ref.distribution(), y, params, stmt.loc));
        } else if constexpr (std::is_same_v<T, TargetStmt>) {
          const Value v = eval(n.value);
          if (v.size() == 1) {
            terms_.push_back(v.real(0));
          } else {
            std::vector<Var> xs(v.size());
            for (int i = 0; i < v.size(); ++i) xs[i] = v.real(i);
            terms_.push_back(ad::sum(xs));
          }
        } else if constexpr (std::is_same_v<T, IfStmt>) {
          if (truthy(eval(n.condition))) {
            for (const Stmt& s : n.then_branch) exec(s);
          } else {
            for (const Stmt& s : n.else_branch) exec(s);
          }
        } else if constexpr (std::is_same_v<T, ForStmt>) {
          const std::int64_t lo = as_int(n.lower);
          const std::int64_t hi = as_int(n.upper);
          for (std::int64_t i = lo; i <= hi; ++i) {
            env_[n.slot] = Value::of_int(i);
            for (const Stmt& s : n.body) exec(s);
          }
        } else if constexpr (std::is_same_v<T, BlockStmt>) {
          for (const Stmt& s : n.body) exec(s);
        }
      },
      stmt.node);
}

Value Evaluator::eval(const Expr& e) {
  switch (e.kind) {
    case ExprKind::IntLiteral: return Value::of_int(e.int_value);
    case ExprKind::RealLiteral: return Value::of_real(Var(e.real_value));
    case ExprKind::Variable: {
      const Value& v = get(e.slot);
      if (v.reals.empty() && v.ints.empty() && v.size() != 0) {
        fail(e.loc, "'" + e.text + "' used before its declaration ran");
      }
      return v;
    }
    case ExprKind::Unary: {
      const Value a = eval(e.args[0]);
      if (e.text == "!") return Value::of_int(truthy(a) ? 0 : 1);
      if (e.text == "+") return a;
      if (a.is_int()) return Value::of_int(-a.ints[0]);
      Value out = a;
      for (Var& x : out.reals) x = -x;
      return out;
    }
    case ExprKind::Binary: {
      if (e.text == "&&" || e.text == "||") {
        const bool lhs = truthy(eval(e.args[0]));
        if (e.text == "&&" && !lhs) return Value::of_int(0);
        if (e.text == "||" && lhs) return Value::of_int(1);
        return Value::of_int(truthy(eval(e.args[1])) ? 1 : 0);
      }
      const Value a = eval(e.args[0]);
      const Value b = eval(e.args[1]);
      Value out = binary(e.text, a, b, e.loc);
      if (branches_ != nullptr && is_comparison(e.text) && !(a.is_int() && b.is_int())) {
        if (!branches_->replay) {
          branches_->outcomes.push_back(static_cast<char>(out.ints[0]));
        } else if (branches_->next < branches_->outcomes.size()) {
          out.ints[0] = branches_->outcomes[branches_->next++];
        } else {
          fail(e.loc, "comparison not seen when the branches were recorded");
        }
      }
      return out;
    }
    case ExprKind::Index: return index(e);
    case ExprKind::Call: return call(e);
  }
  fail(e.loc, "unknown expression");
}

Value Evaluator::index(const Expr& e) {
  Value v = eval(e.args[0]);
  for (std::size_t i = 1; i < e.args.size(); ++i) {
    const Value idx = eval(e.args[i]);
    if (idx.shape.type.is_scalar()) {
      v = slice(v, narrow({v.shape, 0}, idx.ints[0], e.args[i].loc));
      continue;
    }
    // multi-index: keep the container kind, select elements in order
    Shape s = v.shape;
    const int n = idx.size();
    if (s.type.array) {
      s.length = n;
    } else if (s.type.base == BaseType::Vector) {
      s.rows = n;
    } else {
      s.cols = n;
    }
    Value out = Value::make(s);
    for (int k = 0; k < n; ++k) {
      const Location at = narrow({v.shape, 0}, idx.ints[k], e.args[i].loc);
      const int w = at.shape.size();
      for (int j = 0; j < w; ++j) {
        if (v.is_int()) {
          out.ints[k * w + j] = v.ints[at.offset + j];
        } else {
          out.reals[k * w + j] = v.reals[at.offset + j];
        }
      }
    }
    v = std::move(out);
  }
  return v;
}

Var Evaluator::log_density(DistKind kind, const Value& y, const std::vector<Value>& params,
                           SourceLoc loc) const {
  const DistInfo& d = info(kind);
  if (d.vector_param) {
    const Value& theta = params[0];
    std::vector<Var> terms;
    for (int i = 0; i < y.size(); ++i) {
      terms.push_back(categorical_log_prob(y.ints[i], theta.reals));
    }
    return ad::sum(terms);
  }
  int n = y.shape.type.is_scalar() ? 1 : y.size();
  bool all_scalar = y.shape.type.is_scalar();
  for (const Value& p : params) {
    if (p.shape.type.is_scalar()) continue;
    if (all_scalar) {
      n = p.size();
      all_scalar = false;
    } else if (p.size() != n) {
      fail(loc, std::string(d.name) + ": argument sizes disagree (" + std::to_string(n) +
                    " vs " + std::to_string(p.size()) + ")");
    }
  }
  if (!y.shape.type.is_scalar() && y.size() != n) {
    fail(loc, std::string(d.name) + ": argument sizes disagree (" + std::to_string(y.size()) +
                  " vs " + std::to_string(n) + ")");
  }
  std::vector<Var> terms(n);
  std::vector<Var> p(params.size());
  for (int i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < params.size(); ++k) {
      p[k] = params[k].real(params[k].shape.type.is_scalar() ? 0 : i);
    }
    const int yi = y.shape.type.is_scalar() ? 0 : i;
    if (d.discrete) {
      terms[i] = log_prob(kind, y.ints[yi], p);
    } else {
      terms[i] = log_prob(kind, y.real(yi), p);
    }
  }
  return n == 1 ? terms[0] : ad::sum(terms);
}

Value Evaluator::call(const Expr& e) {
  const FunctionRef ref = FunctionRef::decode(e.function);
  std::vector<Value> args;
  args.reserve(e.args.size());
  for (const Expr& a : e.args) args.push_back(eval(a));

  if (ref.form == CallForm::LogDensity) {
    const std::vector<Value> params(args.begin() + 1, args.end());
    return Value::of_real(log_density(ref.distribution(), args[0], params, e.loc));
  }
  if (ref.form == CallForm::Rng) {
    if (rng_ == nullptr) fail(e.loc, e.text + " needs a random number generator");
    if (ref.distribution() == DistKind::Categorical) {
      return Value::of_int(sample_categorical(ad::values(args[0].reals), *rng_));
    }
    std::vector<double> p(args.size());
    for (std::size_t i = 0; i < args.size(); ++i) p[i] = args[i].real(0).value();
    const double draw = sample(ref.distribution(), p, *rng_);
    if (info(ref.distribution()).discrete) return Value::of_int(static_cast<std::int64_t>(draw));
    return Value::of_real(Var(draw));
  }

  auto flat = [](const Value& v) {
    std::vector<Var> xs(v.size());
    for (int i = 0; i < v.size(); ++i) xs[i] = v.real(i);
    return xs;
  };
  switch (ref.builtin()) {
    case Builtin::Exp: return map_real(args[0], [](const Var& x) { return ad::exp(x); });
    case Builtin::Log: return map_real(args[0], [](const Var& x) { return ad::log(x); });
    case Builtin::Log1p: return map_real(args[0], [](const Var& x) { return ad::log1p(x); });
    case Builtin::Sqrt: return map_real(args[0], [](const Var& x) { return ad::sqrt(x); });
    case Builtin::Square: return map_real(args[0], [](const Var& x) { return ad::square(x); });
    case Builtin::InvLogit:
      return map_real(args[0], [](const Var& x) { return ad::inv_logit(x); });
    case Builtin::Logit: return map_real(args[0], [](const Var& x) { return ad::logit(x); });
    case Builtin::Abs:
      if (args[0].is_int()) {
        Value out = args[0];
        for (auto& i : out.ints) i = i < 0 ? -i : i;
        return out;
      }
      return map_real(args[0], [](const Var& x) { return ad::abs(x); });
    case Builtin::Pow: return Value::of_real(ad::pow(args[0].real(0), args[1].real(0)));
    case Builtin::DotProduct: {
      if (args[0].size() != args[1].size()) {
        fail(e.loc, "dot_product of sizes " + std::to_string(args[0].size()) + " and " +
                        std::to_string(args[1].size()));
      }
      return Value::of_real(ad::dot(flat(args[0]), flat(args[1])));
    }
    case Builtin::Sum: {
      if (args[0].is_int()) {
        std::int64_t s = 0;
        for (auto i : args[0].ints) s += i;
        return Value::of_int(s);
      }
      return Value::of_real(ad::sum(args[0].reals));
    }
    case Builtin::Mean: {
      if (args[0].size() == 0) fail(e.loc, "mean of an empty container");
      return Value::of_real(ad::sum(flat(args[0])) / static_cast<double>(args[0].size()));
    }
    case Builtin::RepVector: {
      const std::int64_t n = args[1].ints[0];
      if (n < 0) fail(e.loc, "rep_vector with negative size");
      Value out = Value::make({{BaseType::Vector, false}, 0, static_cast<int>(n), 1});
      std::fill(out.reals.begin(), out.reals.end(), args[0].real(0));
      return out;
    }
    case Builtin::LogSumExp:
      if (args.size() == 2) return Value::of_real(ad::log_sum_exp(args[0].real(0), args[1].real(0)));
      return Value::of_real(ad::log_sum_exp(flat(args[0])));
    case Builtin::LogMix: {
      const Var theta = args[0].real(0);
      return Value::of_real(ad::log_sum_exp(ad::log(theta) + args[1].real(0),
                                            log1m(theta) + args[2].real(0)));
    }
  }
  fail(e.loc, "unknown function " + e.text);
}

}  // namespace stanvi::detail
