// Apache License, Version 2.0, refer to LICENSE.txt

#include "stanvi/functions.hpp"

#include <array>
#include <string>
#include <utility>

namespace stanvi {

namespace {

constexpr std::array<std::pair<std::string_view, Builtin>, 16> kBuiltins = {{
    {"exp", Builtin::Exp},
    {"log", Builtin::Log},
    {"log1p", Builtin::Log1p},
    {"sqrt", Builtin::Sqrt},
    {"square", Builtin::Square},
    {"pow", Builtin::Pow},
    {"abs", Builtin::Abs},
    {"fabs", Builtin::Abs},
    {"inv_logit", Builtin::InvLogit},
    {"logit", Builtin::Logit},
    {"dot_product", Builtin::DotProduct},
    {"sum", Builtin::Sum},
    {"mean", Builtin::Mean},
    {"rep_vector", Builtin::RepVector},
    {"log_sum_exp", Builtin::LogSumExp},
    {"log_mix", Builtin::LogMix},
}};

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() > suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

std::optional<Builtin> find_builtin(std::string_view name) {
  for (const auto& [n, fn] : kBuiltins) {
    if (n == name) return fn;
  }
  return std::nullopt;
}

std::string_view name(Builtin fn) {
  for (const auto& [n, f] : kBuiltins) {
    if (f == fn) return n;
  }
  return "?";
}

bool is_elementwise(Builtin fn) {
  switch (fn) {
    case Builtin::Exp:
    case Builtin::Log:
    case Builtin::Log1p:
    case Builtin::Sqrt:
    case Builtin::Square:
    case Builtin::Abs:
    case Builtin::InvLogit:
    case Builtin::Logit:
      return true;
    default:
      return false;
  }
}

std::optional<FunctionRef> resolve_function(std::string_view fname) {
  if (auto b = find_builtin(fname)) {
    return FunctionRef{CallForm::Builtin, static_cast<int>(*b)};
  }
  for (std::string_view suffix : {"_lpdf", "_lpmf", "_rng"}) {
    if (!ends_with(fname, suffix)) continue;
    const auto dist = find_distribution(fname.substr(0, fname.size() - suffix.size()));
    if (!dist) return std::nullopt;
    const bool discrete = info(*dist).discrete;
    if (suffix == "_rng") return FunctionRef{CallForm::Rng, static_cast<int>(*dist)};
    if ((suffix == "_lpmf") != discrete) return std::nullopt;
    return FunctionRef{CallForm::LogDensity, static_cast<int>(*dist)};
  }
  return std::nullopt;
}

}  // namespace stanvi
