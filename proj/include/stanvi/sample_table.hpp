// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace stanvi {

/// Draws by flattened column name (`theta`, `beta.1`, `m.1.2`).
struct SampleTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  /// Free-form key=value metadata, written as `# key=value` lines.
  std::map<std::string, std::string> metadata;

  int num_rows() const { return static_cast<int>(rows.size()); }
  std::optional<int> index_of(const std::string& column) const;
  /// Throws MissingParameter.
  std::vector<double> column(const std::string& name) const;
  bool has_nan() const;
};

void write_csv(const SampleTable& table, std::ostream& out);
void write_csv(const SampleTable& table, const std::filesystem::path& path);

/// Throws ParseError on malformed input or ragged rows.
SampleTable read_csv(std::istream& in);
SampleTable read_csv(const std::filesystem::path& path);

}  // namespace stanvi
