// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stanvi/autodiff.hpp"
#include "stanvi/checker.hpp"
#include "stanvi/data.hpp"
#include "stanvi/rng.hpp"
#include "stanvi/transforms.hpp"

namespace stanvi {

/// Runtime shape of a declared variable. Elements of arrays are stored one
/// after another, each element row-major.
struct Shape {
  ExprType type;
  int length = 0;  // array length, arrays only
  int rows = 1;    // vector: n x 1, row_vector: 1 x n, matrix: m x n
  int cols = 1;

  int element_size() const { return rows * cols; }
  int size() const { return (type.array ? length : 1) * element_size(); }
  bool operator==(const Shape&) const = default;
};

/// Column names of a flattened variable: "x", "v.1", "m.1.2", "a.3.1", ...
std::vector<std::string> flat_names(const std::string& name, const Shape& shape);

struct LayoutEntry {
  std::string name;
  int slot;
  Shape shape;
  ConstraintSpec constraint;
  Transform transform;
  int offset;  // into the unconstrained vector
  int length;
};

struct ParamLayout {
  std::vector<LayoutEntry> entries;
  int dim = 0;
};

/// A generated quantity (or transformed parameter) value.
struct NamedValue {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

class BoundModel;

/// A checked program ready to receive data. Sizes of parameters may depend
/// on data, so the parameter layout lives on the BoundModel.
class GenerativeModel {
 public:
  explicit GenerativeModel(TypedProgram program);

  const TypedProgram& program() const { return *program_; }

  /// Data block declarations in order.
  std::vector<Symbol> data_schema() const;

  /// Validates and ingests data, runs transformed data and fixes the layout.
  /// Throws SchemaMismatch.
  BoundModel bind(const DataBindings& data) const;

 private:
  std::shared_ptr<const TypedProgram> program_;
};

/// tokenize + parse + check + lowering.
GenerativeModel compile(TypedProgram program);
GenerativeModel compile_source(std::string_view source);
GenerativeModel compile_file(const std::filesystem::path& path);

struct ModelState;
namespace detail {
struct BranchTrace;
}

/// A model with data. Immutable and safe to evaluate from several threads.
class BoundModel {
 public:
  const ParamLayout& layout() const { return layout_; }
  int dim() const { return layout_.dim; }
  const TypedProgram& program() const { return *program_; }

  /// Unconstrained log joint: every statement's contribution plus the log
  /// Jacobian of each parameter transform. -inf when an observation lies
  /// outside its distribution's support or a transformed parameter violates
  /// its declared constraint.
  ///
  /// Throws NaNDetected (NaN result or an out-of-domain distribution
  /// parameter), EvalError.
  ad::Var log_joint(std::span<const ad::Var> u) const;
  double log_joint(std::span<const double> u) const;
  ad::ScalarFunction log_joint_function() const;

  /// log_joint with every comparison between real values pinned to its
  /// outcome at `at`, so that derivatives near `at` follow the branch taken
  /// there (used for the Laplace Hessian at a point on a branch boundary).
  ad::ScalarFunction pinned_log_joint_function(std::span<const double> at) const;

  /// Unconstrained -> constrained parameters, flattened in layout order.
  std::vector<double> constrain(std::span<const double> u) const;
  /// Throws OutOfSupport.
  std::vector<double> unconstrain(std::span<const double> x) const;

  /// Parameter columns, then transformed parameters, then generated
  /// quantities.
  std::vector<std::string> column_names() const;
  std::vector<std::string> parameter_names() const;
  std::vector<std::string> generated_quantity_names() const;

  /// Transformed parameters and generated quantities at a constrained
  /// parameter draw. Throws NaNDetected.
  std::vector<NamedValue> run_generated_quantities(std::span<const double> constrained,
                                                   Rng& rng) const;

  /// One output row for column_names(): constrain(u) followed by the
  /// flattened transformed parameters and generated quantities.
  std::vector<double> output_row(std::span<const double> u, Rng& rng) const;

 private:
  friend class GenerativeModel;
  BoundModel() = default;

  ad::Var log_joint(std::span<const ad::Var> u, detail::BranchTrace* branches) const;

  std::shared_ptr<const TypedProgram> program_;
  std::shared_ptr<const ModelState> state_;
  ParamLayout layout_;
};

}  // namespace stanvi
