// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <optional>
#include <string_view>

#include "stanvi/distributions.hpp"

namespace stanvi {

/// Non-distribution functions callable from Stan code.
enum class Builtin {
  Exp,
  Log,
  Log1p,
  Sqrt,
  Square,
  Pow,
  Abs,
  InvLogit,
  Logit,
  DotProduct,
  Sum,
  Mean,
  RepVector,
  LogSumExp,
  LogMix,
};

std::optional<Builtin> find_builtin(std::string_view name);
std::string_view name(Builtin fn);

/// Element-wise unary maths (exp, log, ...): applies to scalars and every
/// container type.
bool is_elementwise(Builtin fn);

/// Expr::function encodes either a builtin or a distribution call form.
enum class CallForm { Builtin, LogDensity, Rng };

struct FunctionRef {
  CallForm form;
  int id;  // Builtin or DistKind value

  int encode() const { return static_cast<int>(form) * 100 + id; }
  static FunctionRef decode(int code) {
    return {static_cast<CallForm>(code / 100), code % 100};
  }
  Builtin builtin() const { return static_cast<Builtin>(id); }
  DistKind distribution() const { return static_cast<DistKind>(id); }
};

/// Resolves "exp", "normal_lpdf", "poisson_lpmf", "normal_rng", ...
std::optional<FunctionRef> resolve_function(std::string_view name);

}  // namespace stanvi
