// Apache License, Version 2.0, refer to LICENSE.txt

// Tree-walking evaluator shared by log_joint, generated quantities and data
// binding. Internal to the library.

#pragma once

#include <cstdint>
#include <vector>

#include "stanvi/autodiff.hpp"
#include "stanvi/checker.hpp"
#include "stanvi/distributions.hpp"
#include "stanvi/model.hpp"
#include "stanvi/rng.hpp"

namespace stanvi::detail {

struct Value {
  Shape shape;
  std::vector<std::int64_t> ints;  // int-based values
  std::vector<ad::Var> reals;      // everything else

  bool is_int() const { return shape.type.base == BaseType::Int; }
  int size() const { return shape.size(); }
  ad::Var real(int i) const {
    return is_int() ? ad::Var(static_cast<double>(ints[i])) : reals[i];
  }

  static Value make(const Shape& shape);
  static Value of_int(std::int64_t v);
  static Value of_real(const ad::Var& v);
};

Shape scalar_shape(BaseType base);

}  // namespace stanvi::detail

namespace stanvi {

/// Values fixed at bind time: data, transformed data and the shapes and
/// constraints of every block-level variable.
struct ModelState {
  std::vector<detail::Value> fixed;  // by slot; data and transformed data
  std::vector<Shape> shapes;         // by slot; block-level variables
  std::vector<ConstraintSpec> constraints;
  std::vector<int> tp_slots;
  std::vector<int> gq_slots;
};

}  // namespace stanvi

namespace stanvi::detail {

/// Outcomes of comparisons between real values, in evaluation order. In
/// replay mode the recorded outcomes override the computed ones.
struct BranchTrace {
  std::vector<char> outcomes;
  bool replay = false;
  std::size_t next = 0;
};

class Evaluator {
 public:
  /// `state` may be null while binding data; `rng` is needed only by
  /// generated quantities.
  Evaluator(const TypedProgram& program, const ModelState* state, Rng* rng);

  void run(const ProgramBlock& block);
  void exec(const Stmt& stmt);
  Value eval(const Expr& expr);

  Shape shape_of(const VarDecl& decl);
  ConstraintSpec constraint_of(const VarDecl& decl);

  const Value& get(int slot) const;
  void set(int slot, Value v) { env_[slot] = std::move(v); }

  /// Sum of every sampling statement and target increment so far.
  ad::Var target() const;
  void add_term(const ad::Var& t) { terms_.push_back(t); }

  void set_branch_trace(BranchTrace* trace) { branches_ = trace; }

 private:
  void declare(const VarDecl& decl);
  void assign(const AssignStmt& stmt);
  Value call(const Expr& e);
  Value index(const Expr& e);
  ad::Var log_density(DistKind kind, const Value& y, const std::vector<Value>& params,
                      SourceLoc loc) const;
  std::int64_t as_int(const Expr& e);

  const TypedProgram& program_;
  const ModelState* state_;
  Rng* rng_;
  std::vector<Value> env_;
  std::vector<ad::Var> terms_;
  BranchTrace* branches_ = nullptr;
};

}  // namespace stanvi::detail
