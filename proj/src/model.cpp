// Apache License, Version 2.0, refer to LICENSE.txt

#include "stanvi/model.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "interpreter.hpp"
#include "stanvi/error.hpp"
#include "stanvi/parser.hpp"

namespace stanvi {

using detail::Evaluator;
using detail::Value;

namespace {

std::vector<std::size_t> expected_dims(const Shape& s) {
  std::vector<std::size_t> dims;
  if (s.type.array) dims.push_back(s.length);
  switch (s.type.base) {
    case BaseType::Vector: dims.push_back(s.rows); break;
    case BaseType::RowVector: dims.push_back(s.cols); break;
    case BaseType::Matrix:
      dims.push_back(s.rows);
      dims.push_back(s.cols);
      break;
    default: break;
  }
  return dims;
}

std::string dims_text(const std::vector<std::size_t>& dims) {
  std::string out = "(";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i > 0) out += ", ";
    out += std::to_string(dims[i]);
  }
  return out + ")";
}

/// JSON cannot spell the inner extent of an empty array, so [] matches any
/// shape whose leading extent is 0.
bool dims_match(const std::vector<std::size_t>& want, const std::vector<std::size_t>& got) {
  if (want == got) return true;
  if (want.empty() || got.empty() || want[0] != 0 || got[0] != 0) return false;
  for (std::size_t i = 1; i < got.size(); ++i) {
    if (i >= want.size() || (got[i] != want[i] && got[i] != 0)) return false;
  }
  return true;
}

bool satisfies(const ConstraintSpec& spec, const Value& v, int block) {
  if (spec.kind == TransformKind::Identity) return true;
  std::vector<double> xs(v.size());
  for (int i = 0; i < v.size(); ++i) xs[i] = v.real(i).value();
  if (spec.kind == TransformKind::Simplex || spec.kind == TransformKind::Ordered) {
    if (block <= 0) return true;
    for (std::size_t start = 0; start < xs.size(); start += block) {
      if (!spec.contains(std::span<const double>(xs).subspan(start, block))) return false;
    }
    return true;
  }
  return spec.contains(xs);
}

void check_nan(const std::vector<NamedValue>& values) {
  for (const NamedValue& nv : values) {
    for (double x : nv.values) {
      if (std::isnan(x)) throw NaNDetected("generated quantity '" + nv.name + "' is NaN");
    }
  }
}

}  // namespace

std::vector<std::string> flat_names(const std::string& name, const Shape& shape) {
  std::vector<std::string> out;
  const std::vector<std::size_t> dims = expected_dims(shape);
  if (dims.empty()) return {name};
  std::vector<std::size_t> idx(dims.size(), 0);
  const int total = shape.size();
  for (int k = 0; k < total; ++k) {
    std::string s = name;
    for (std::size_t i : idx) s += "." + std::to_string(i + 1);
    out.push_back(std::move(s));
    for (int d = static_cast<int>(dims.size()) - 1; d >= 0; --d) {
      if (++idx[d] < dims[d]) break;
      idx[d] = 0;
    }
  }
  return out;
}

// ---- GenerativeModel ------------------------------------------------------------

GenerativeModel::GenerativeModel(TypedProgram program)
    : program_(std::make_shared<const TypedProgram>(std::move(program))) {
  if (program_->program.find(BlockKind::Functions) != nullptr) {
    throw CompileError(CompileErrorKind::UnsupportedConstruct,
                       program_->program.find(BlockKind::Functions)->loc,
                       "user-defined functions");
  }
}

GenerativeModel compile(TypedProgram program) { return GenerativeModel(std::move(program)); }

GenerativeModel compile_source(std::string_view source) {
  return compile(check_source(source));
}

GenerativeModel compile_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return compile_source(ss.str());
}

std::vector<Symbol> GenerativeModel::data_schema() const {
  std::vector<Symbol> out;
  for (int slot : program_->slots_of(Origin::Data)) out.push_back(program_->symbols[slot]);
  return out;
}

BoundModel GenerativeModel::bind(const DataBindings& data) const {
  const TypedProgram& tp = *program_;
  auto state = std::make_shared<ModelState>();
  state->shapes.resize(tp.symbols.size());
  state->constraints.resize(tp.symbols.size());
  Evaluator ev(tp, nullptr, nullptr);

  auto decls = [&](BlockKind kind) {
    std::vector<const VarDecl*> out;
    if (const ProgramBlock* b = tp.program.find(kind)) {
      for (const Stmt& s : b->body) {
        if (const auto* d = std::get_if<DeclStmt>(&s.node)) out.push_back(&d->decl);
      }
    }
    return out;
  };

  try {
    for (const VarDecl* decl : decls(BlockKind::Data)) {
      const Shape shape = ev.shape_of(*decl);
      const ConstraintSpec spec = ev.constraint_of(*decl);
      const auto found = data.find(decl->name);
      if (found == data.end()) throw SchemaMismatch("data: missing variable '" + decl->name + "'");
      const DataValue& dv = found->second;
      const auto want = expected_dims(shape);
      if (!dims_match(want, dv.dims)) {
        throw SchemaMismatch("data: '" + decl->name + "' has dimensions " + dims_text(dv.dims) +
                             ", declaration needs " + dims_text(want));
      }
      Value v = Value::make(shape);
      if (v.is_int()) {
        if (!dv.integral) {
          throw SchemaMismatch("data: '" + decl->name + "' is declared int but holds reals");
        }
        for (int i = 0; i < v.size(); ++i) v.ints[i] = static_cast<std::int64_t>(dv.values[i]);
      } else {
        for (int i = 0; i < v.size(); ++i) v.reals[i] = ad::Var(dv.values[i]);
      }
      if (!satisfies(spec, v, shape.rows)) {
        throw SchemaMismatch("data: '" + decl->name + "' violates its constraint " +
                             to_string(spec));
      }
      state->shapes[decl->slot] = shape;
      state->constraints[decl->slot] = spec;
      ev.set(decl->slot, std::move(v));
    }

    if (const ProgramBlock* td = tp.program.find(BlockKind::TransformedData)) {
      ev.run(*td);
      for (const VarDecl* decl : decls(BlockKind::TransformedData)) {
        const ConstraintSpec spec = ev.constraint_of(*decl);
        if (!satisfies(spec, ev.get(decl->slot), ev.get(decl->slot).shape.rows)) {
          throw DataError("transformed data '" + decl->name + "' violates its constraint " +
                          to_string(spec));
        }
        state->shapes[decl->slot] = ev.get(decl->slot).shape;
        state->constraints[decl->slot] = spec;
      }
    }
  } catch (const EvalError& e) {
    throw SchemaMismatch(std::string("data: ") + e.what());
  }

  BoundModel bound;
  bound.program_ = program_;
  int offset = 0;
  for (const VarDecl* decl : decls(BlockKind::Parameters)) {
    const Shape shape = ev.shape_of(*decl);
    const ConstraintSpec spec = ev.constraint_of(*decl);
    const bool blockwise =
        spec.kind == TransformKind::Simplex || spec.kind == TransformKind::Ordered;
    const int block = blockwise ? shape.rows : 1;
    const int blocks = blockwise ? (shape.type.array ? shape.length : 1) : shape.size();
    Transform t(spec, block, blocks);
    const int length = t.unconstrained_size();
    bound.layout_.entries.push_back({decl->name, decl->slot, shape, spec, t, offset, length});
    offset += length;
    state->shapes[decl->slot] = shape;
    state->constraints[decl->slot] = spec;
  }
  bound.layout_.dim = offset;

  for (BlockKind kind : {BlockKind::TransformedParameters, BlockKind::GeneratedQuantities}) {
    for (const VarDecl* decl : decls(kind)) {
      state->shapes[decl->slot] = ev.shape_of(*decl);
      state->constraints[decl->slot] = ev.constraint_of(*decl);
      (kind == BlockKind::TransformedParameters ? state->tp_slots : state->gq_slots)
          .push_back(decl->slot);
    }
  }

  // keep only what later evaluations read
  state->fixed.resize(tp.symbols.size());
  for (std::size_t slot = 0; slot < tp.symbols.size(); ++slot) {
    const Origin o = tp.symbols[slot].origin;
    if (o == Origin::Data || o == Origin::TransformedData) state->fixed[slot] = ev.get(slot);
  }
  bound.state_ = std::move(state);
  return bound;
}

// ---- BoundModel ------------------------------------------------------------------

ad::Var BoundModel::log_joint(std::span<const ad::Var> u) const {
  return log_joint(u, nullptr);
}

ad::Var BoundModel::log_joint(std::span<const ad::Var> u, detail::BranchTrace* branches) const {
  if (static_cast<int>(u.size()) != layout_.dim) {
    throw EvalError("log_joint: expected " + std::to_string(layout_.dim) +
                    " unconstrained values, got " + std::to_string(u.size()));
  }
  const TypedProgram& tp = *program_;
  Evaluator ev(tp, state_.get(), nullptr);
  ev.set_branch_trace(branches);
  try {
    for (const LayoutEntry& e : layout_.entries) {
      Value v = Value::make(e.shape);
      ev.add_term(e.transform.forward(u.subspan(e.offset, e.length), v.reals));
      ev.set(e.slot, std::move(v));
    }
    if (const ProgramBlock* b = tp.program.find(BlockKind::TransformedParameters)) {
      ev.run(*b);
      for (int slot : state_->tp_slots) {
        const Value& v = ev.get(slot);
        if (!satisfies(state_->constraints[slot], v, v.shape.rows)) {
          return ad::Var(-std::numeric_limits<double>::infinity());
        }
      }
    }
    if (const ProgramBlock* b = tp.program.find(BlockKind::Model)) ev.run(*b);
  } catch (const InvalidParameter& e) {
    throw NaNDetected(std::string("log_joint: ") + e.what());
  }
  const ad::Var result = ev.target();
  if (std::isnan(result.value())) throw NaNDetected("log_joint is NaN");
  return result;
}

double BoundModel::log_joint(std::span<const double> u) const {
  const std::vector<ad::Var> x = ad::constants(u);
  return log_joint(std::span<const ad::Var>(x)).value();
}

ad::ScalarFunction BoundModel::log_joint_function() const {
  return [self = *this](std::span<const ad::Var> u) { return self.log_joint(u); };
}

ad::ScalarFunction BoundModel::pinned_log_joint_function(std::span<const double> at) const {
  detail::BranchTrace recorded;
  const std::vector<ad::Var> x = ad::constants(at);
  log_joint(x, &recorded);
  recorded.replay = true;
  return [self = *this, recorded](std::span<const ad::Var> u) {
    detail::BranchTrace trace = recorded;
    return self.log_joint(u, &trace);
  };
}

std::vector<double> BoundModel::constrain(std::span<const double> u) const {
  std::vector<double> out;
  for (const LayoutEntry& e : layout_.entries) {
    const auto f = e.transform.forward(u.subspan(e.offset, e.length));
    out.insert(out.end(), f.value.begin(), f.value.end());
  }
  return out;
}

std::vector<double> BoundModel::unconstrain(std::span<const double> x) const {
  std::vector<double> out;
  std::size_t pos = 0;
  for (const LayoutEntry& e : layout_.entries) {
    const int n = e.shape.size();
    if (pos + n > x.size()) throw EvalError("unconstrain: too few values");
    const auto u = e.transform.inverse(x.subspan(pos, n));
    out.insert(out.end(), u.begin(), u.end());
    pos += n;
  }
  return out;
}

std::vector<std::string> BoundModel::parameter_names() const {
  std::vector<std::string> out;
  for (const LayoutEntry& e : layout_.entries) {
    for (auto& n : flat_names(e.name, e.shape)) out.push_back(std::move(n));
  }
  return out;
}

std::vector<std::string> BoundModel::generated_quantity_names() const {
  std::vector<std::string> out;
  for (int slot : state_->gq_slots) {
    for (auto& n : flat_names(program_->symbols[slot].name, state_->shapes[slot])) {
      out.push_back(std::move(n));
    }
  }
  return out;
}

std::vector<std::string> BoundModel::column_names() const {
  std::vector<std::string> out = parameter_names();
  for (const auto* slots : {&state_->tp_slots, &state_->gq_slots}) {
    for (int slot : *slots) {
      for (auto& n : flat_names(program_->symbols[slot].name, state_->shapes[slot])) {
        out.push_back(std::move(n));
      }
    }
  }
  return out;
}

std::vector<NamedValue> BoundModel::run_generated_quantities(std::span<const double> constrained,
                                                             Rng& rng) const {
  const TypedProgram& tp = *program_;
  Evaluator ev(tp, state_.get(), &rng);
  std::size_t pos = 0;
  for (const LayoutEntry& e : layout_.entries) {
    Value v = Value::make(e.shape);
    if (pos + v.reals.size() > constrained.size()) {
      throw EvalError("generated quantities: draw shorter than the parameter layout");
    }
    for (auto& x : v.reals) x = ad::Var(constrained[pos++]);
    ev.set(e.slot, std::move(v));
  }
  try {
    if (const ProgramBlock* b = tp.program.find(BlockKind::TransformedParameters)) ev.run(*b);
    if (const ProgramBlock* b = tp.program.find(BlockKind::GeneratedQuantities)) ev.run(*b);
  } catch (const InvalidParameter& e) {
    throw NaNDetected(std::string("generated quantities: ") + e.what());
  }
  std::vector<NamedValue> out;
  for (const auto* slots : {&state_->tp_slots, &state_->gq_slots}) {
    for (int slot : *slots) {
      const Value& v = ev.get(slot);
      NamedValue nv{tp.symbols[slot].name, v.shape, {}};
      for (int i = 0; i < v.size(); ++i) nv.values.push_back(v.real(i).value());
      if (!satisfies(state_->constraints[slot], v, v.shape.rows)) {
        throw EvalError("'" + nv.name + "' violates its constraint " +
                        to_string(state_->constraints[slot]));
      }
      out.push_back(std::move(nv));
    }
  }
  check_nan(out);
  return out;
}

std::vector<double> BoundModel::output_row(std::span<const double> u, Rng& rng) const {
  std::vector<double> row = constrain(u);
  const auto extra = run_generated_quantities(row, rng);
  for (const NamedValue& nv : extra) row.insert(row.end(), nv.values.begin(), nv.values.end());
  return row;
}

}  // namespace stanvi
