// Apache License, Version 2.0, refer to LICENSE.txt

#include "stanvi/data.hpp"

#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "stanvi/error.hpp"

namespace stanvi {

namespace {

using nlohmann::json;

double special_number(const std::string& s, const std::string& name) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (s == "NaN") return std::numeric_limits<double>::quiet_NaN();
  if (s == "Inf" || s == "Infinity" || s == "+Inf" || s == "+Infinity") return inf;
  if (s == "-Inf" || s == "-Infinity") return -inf;
  throw ParseError("data '" + name + "': unexpected string \"" + s + "\"");
}

void flatten(const json& j, std::size_t depth, DataValue& out, const std::string& name) {
  if (j.is_array()) {
    if (depth == out.dims.size() && out.values.empty()) {
      out.dims.push_back(j.size());
    } else if (depth > out.dims.size() || out.dims[depth] != j.size()) {
      throw ParseError("data '" + name + "': ragged nested array");
    }
    for (const json& e : j) flatten(e, depth + 1, out, name);
    return;
  }
  if (depth != out.dims.size()) {
    throw ParseError("data '" + name + "': ragged nested array");
  }
  if (j.is_number_integer()) {
    out.values.push_back(static_cast<double>(j.get<std::int64_t>()));
  } else if (j.is_number()) {
    out.values.push_back(j.get<double>());
    out.integral = false;
  } else if (j.is_string()) {
    out.values.push_back(special_number(j.get<std::string>(), name));
    out.integral = false;
  } else {
    throw ParseError("data '" + name + "': expected a number or an array, found " +
                     std::string(j.type_name()));
  }
}

}  // namespace

DataBindings parse_data(std::string_view text) {
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("data: ") + e.what());
  }
  if (!root.is_object()) throw ParseError("data: top level must be a JSON object");
  DataBindings out;
  for (const auto& [name, value] : root.items()) {
    DataValue v;
    flatten(value, 0, v, name);
    out.emplace(name, std::move(v));
  }
  return out;
}

DataBindings load_data(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open data file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_data(ss.str());
}

}  // namespace stanvi
