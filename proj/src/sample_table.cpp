// Apache License, Version 2.0, refer to LICENSE.txt

#include "stanvi/sample_table.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "stanvi/error.hpp"

namespace stanvi {

namespace {

std::string format(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream s(line);
  while (std::getline(s, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& text, int line_no) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    throw ParseError("samples line " + std::to_string(line_no) + ": bad number '" + text + "'");
  }
  return v;
}

}  // namespace

std::optional<int> SampleTable::index_of(const std::string& column) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == column) return static_cast<int>(i);
  }
  return std::nullopt;
}

std::vector<double> SampleTable::column(const std::string& name) const {
  const auto at = index_of(name);
  if (!at) throw MissingParameter("no column '" + name + "'");
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[*at]);
  return out;
}

bool SampleTable::has_nan() const {
  for (const auto& r : rows) {
    for (double v : r) {
      if (std::isnan(v)) return true;
    }
  }
  return false;
}

void write_csv(const SampleTable& table, std::ostream& out) {
  for (const auto& [key, value] : table.metadata) out << "# " << key << '=' << value << '\n';
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    if (i > 0) out << ',';
    out << table.columns[i];
  }
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out << ',';
      out << format(row[i]);
    }
    out << '\n';
  }
}

void write_csv(const SampleTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_csv(table, out);
}

SampleTable read_csv(std::istream& in) {
  SampleTable table;
  std::string line;
  int line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq != std::string::npos) {
        std::string key = line.substr(1, eq - 1);
        key.erase(0, key.find_first_not_of(' '));
        table.metadata[key] = line.substr(eq + 1);
      }
      continue;
    }
    const auto fields = split(line);
    if (!header) {
      for (const auto& f : fields) {
        if (f.empty()) throw ParseError("samples header: empty column name");
      }
      table.columns = fields;
      header = true;
      continue;
    }
    if (fields.size() != table.columns.size()) {
      throw ParseError("samples line " + std::to_string(line_no) + ": expected " +
                       std::to_string(table.columns.size()) + " fields, found " +
                       std::to_string(fields.size()));
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) row.push_back(parse_number(f, line_no));
    table.rows.push_back(std::move(row));
  }
  if (!header) throw ParseError("samples: missing header line");
  return table;
}

SampleTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  return read_csv(in);
}

}  // namespace stanvi
