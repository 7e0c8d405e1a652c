// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace stanvi {

/// One entry of a Stan JSON data file, flattened row-major. A scalar has no
/// dims; [1, 2, 3] has dims {3}; [[1, 2], [3, 4], [5, 6]] has dims {3, 2}.
struct DataValue {
  std::vector<std::size_t> dims;
  std::vector<double> values;
  bool integral = true;  // every number was written as a JSON integer
};

using DataBindings = std::map<std::string, DataValue, std::less<>>;

/// Parses Stan-style JSON data (docs/data-format.md). The strings "NaN",
/// "Inf", "Infinity", "-Inf" and "-Infinity" stand for non-finite reals.
///
/// Throws ParseError for malformed JSON, non-rectangular nesting or values
/// that are neither numbers nor arrays.
DataBindings parse_data(std::string_view json);
DataBindings load_data(const std::filesystem::path& path);

}  // namespace stanvi
