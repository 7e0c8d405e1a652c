// Apache License, Version 2.0, refer to LICENSE.txt

#include "stanvi/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>
#include <tomlplusplus/toml.hpp>

#include "stanvi/data.hpp"
#include "stanvi/model.hpp"

namespace stanvi {

namespace fs = std::filesystem;

namespace {

std::string format_full(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string format_cell(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

std::string parameter_of(const std::string& column) { return column.substr(0, column.find('.')); }

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Write then rename, so a killed run never leaves a half-written artifact.
void write_file(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write " + tmp.string());
    out << text;
    if (!out) throw Error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

// FNV-1a, 64 bit
std::string fingerprint_of(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

std::string_view to_string(ReportStatus status) {
  switch (status) {
    case ReportStatus::Success: return "success";
    case ReportStatus::Mismatch: return "mismatch";
    case ReportStatus::Error: return "error";
  }
  return "?";
}

std::optional<ReportStatus> parse_report_status(std::string_view text) {
  for (ReportStatus s : {ReportStatus::Success, ReportStatus::Mismatch, ReportStatus::Error}) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

ReportStatus classify(double max_err) {
  return max_err < kSuccessThreshold ? ReportStatus::Success : ReportStatus::Mismatch;
}

ColumnStats column_stats(const SampleTable& table, int column) {
  const std::size_t n = table.rows.size();
  ColumnStats s;
  if (n == 0) {
    s.mean = s.stddev = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  double sum = 0.0;
  for (const auto& r : table.rows) sum += r[column];
  s.mean = sum / static_cast<double>(n);
  if (n < 2) {
    s.stddev = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  double ss = 0.0;
  for (const auto& r : table.rows) ss += (r[column] - s.mean) * (r[column] - s.mean);
  s.stddev = std::sqrt(ss / static_cast<double>(n - 1));
  return s;
}

ErrorReport error_report(std::string message) {
  ErrorReport r;
  r.status = ReportStatus::Error;
  r.error = std::move(message);
  return r;
}

ErrorReport relative_error(const SampleTable& samples, const SampleTable& reference,
                           const std::vector<std::string>& generated) {
  if (reference.has_nan()) throw ParseError("reference samples contain NaN");
  if (reference.num_rows() < 2) throw ParseError("reference needs at least two draws");

  ErrorReport report;
  for (const auto& c : reference.columns) {
    if (samples.index_of(c)) continue;
    if (!contains(generated, c)) throw MissingParameter("samples lack column '" + c + "'");
    report.warnings.push_back("generated quantity '" + c + "' missing from samples, ignored");
  }
  for (const auto& c : samples.columns) {
    if (reference.index_of(c)) continue;
    if (!contains(generated, c)) throw MissingParameter("reference lacks column '" + c + "'");
    report.warnings.push_back("generated quantity '" + c + "' missing from reference, ignored");
  }

  if (samples.num_rows() == 0) {
    report.status = ReportStatus::Error;
    report.error = "no samples";
    return report;
  }
  if (samples.has_nan()) {
    report.status = ReportStatus::Error;
    report.error = "samples contain NaN";
    return report;
  }

  std::map<std::string, int> counts;
  for (const auto& c : reference.columns) ++counts[parameter_of(c)];
  std::map<std::string, int> seen;
  double max_err = 0.0;
  for (std::size_t j = 0; j < reference.columns.size(); ++j) {
    const std::string& c = reference.columns[j];
    const auto at = samples.index_of(c);
    if (!at) continue;
    const std::string param = parameter_of(c);
    const int component = ++seen[param];
    const ColumnStats ref = column_stats(reference, static_cast<int>(j));
    if (!(ref.stddev > 0.0)) {
      report.excluded.push_back(c);
      continue;
    }
    const ColumnStats x = column_stats(samples, *at);
    const double err = std::abs(ref.mean - x.mean) / ref.stddev;
    report.entries.push_back({c, param, counts[param] == 1 && c == param ? 0 : component, err});
    max_err = std::max(max_err, err);
  }
  if (report.entries.empty()) {
    throw ZeroReferenceStddev("no column with a positive reference stddev");
  }
  report.max_err = max_err;
  report.status = classify(max_err);
  return report;
}

BenchmarkTable summarize(const std::vector<ErrorReport>& reports) {
  BenchmarkTable t;
  for (const auto& r : reports) {
    if (!contains(t.models, r.model)) t.models.push_back(r.model);
    if (!contains(t.guides, r.guide)) t.guides.push_back(r.guide);
    t.cells[{r.model, r.guide}] = r;
  }
  std::sort(t.models.begin(), t.models.end());
  const auto rank = [](const std::string& g) {
    const auto k = parse_guide_kind(g);
    if (!k) return static_cast<std::ptrdiff_t>(kAllGuideKinds.size());
    return std::find(kAllGuideKinds.begin(), kAllGuideKinds.end(), *k) - kAllGuideKinds.begin();
  };
  std::stable_sort(t.guides.begin(), t.guides.end(),
                   [&](const std::string& a, const std::string& b) { return rank(a) < rank(b); });
  for (const auto& g : t.guides) {
    BenchmarkTable::Footer f;
    double sum = 0.0;
    int numeric = 0;
    for (const auto& m : t.models) {
      const auto it = t.cells.find({m, g});
      if (it == t.cells.end()) continue;
      switch (it->second.status) {
        case ReportStatus::Success: ++f.successes; break;
        case ReportStatus::Mismatch: ++f.mismatches; break;
        case ReportStatus::Error: ++f.errors; continue;
      }
      sum += it->second.max_err;
      ++numeric;
    }
    if (numeric > 0) f.average = sum / numeric;
    t.footer.push_back(f);
  }
  return t;
}

std::string to_markdown(const BenchmarkTable& t) {
  std::ostringstream out;
  out << "| Model |";
  for (const auto& g : t.guides) out << ' ' << g << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < t.guides.size(); ++i) out << "---:|";
  out << '\n';
  for (const auto& m : t.models) {
    out << "| " << m << " |";
    for (const auto& g : t.guides) {
      const auto it = t.cells.find({m, g});
      if (it == t.cells.end()) {
        out << "  |";
      } else if (it->second.status == ReportStatus::Error) {
        out << " ✗ |";
      } else {
        out << ' ' << format_cell(it->second.max_err) << " |";
      }
    }
    out << '\n';
  }
  const auto row = [&](const char* name, auto cell) {
    out << "| **" << name << "** |";
    for (const auto& f : t.footer) out << ' ' << cell(f) << " |";
    out << '\n';
  };
  row("Average", [](const BenchmarkTable::Footer& f) {
    return f.average ? format_cell(*f.average) : std::string("—");
  });
  row("Successes", [](const BenchmarkTable::Footer& f) { return std::to_string(f.successes); });
  row("Mismatches", [](const BenchmarkTable::Footer& f) { return std::to_string(f.mismatches); });
  row("Errors", [](const BenchmarkTable::Footer& f) { return std::to_string(f.errors); });
  out << "\nMaximum relative error per model; success below 0.3, ✗ marks a runtime error (NaN).\n"
         "Average is taken over non-error cells only.\n";
  return out.str();
}

std::string to_csv(const BenchmarkTable& t) {
  std::ostringstream out;
  out << "# average=mean of max_err over non-error cells\nmodel";
  for (const auto& g : t.guides) out << ',' << g;
  out << '\n';
  for (const auto& m : t.models) {
    out << m;
    for (const auto& g : t.guides) {
      out << ',';
      const auto it = t.cells.find({m, g});
      if (it == t.cells.end()) continue;
      out << (it->second.status == ReportStatus::Error ? std::string("error")
                                                       : format_full(it->second.max_err));
    }
    out << '\n';
  }
  out << "Average";
  for (const auto& f : t.footer) out << ',' << (f.average ? format_full(*f.average) : "—");
  out << "\nSuccesses";
  for (const auto& f : t.footer) out << ',' << f.successes;
  out << "\nMismatches";
  for (const auto& f : t.footer) out << ',' << f.mismatches;
  out << "\nErrors";
  for (const auto& f : t.footer) out << ',' << f.errors;
  out << '\n';
  return out.str();
}

Bimodality bimodality_diagnostic(const SampleTable& samples, const std::string& param, double cut,
                                 std::pair<double, double> modes) {
  if (!(modes.first < cut && cut < modes.second)) {
    throw std::invalid_argument("bimodality: cut must lie between the modes");
  }
  const std::vector<double> x = samples.column(param);
  if (x.empty()) throw std::invalid_argument("bimodality: empty sample table");
  const auto low = std::count_if(x.begin(), x.end(), [&](double v) { return v < cut; });
  const double n = static_cast<double>(x.size());
  return {static_cast<double>(low) / n, static_cast<double>(x.size() - low) / n};
}

Histogram histogram(const std::vector<double>& values, double lo, double hi, int bins) {
  if (!(lo < hi) || bins < 1) throw std::invalid_argument("histogram: bad range");
  Histogram h{lo, hi, std::vector<int>(bins, 0)};
  const double width = (hi - lo) / bins;
  for (double v : values) {
    if (std::isnan(v)) continue;
    const double k = std::floor((v - lo) / width);
    const int i = static_cast<int>(std::clamp(k, 0.0, static_cast<double>(bins - 1)));
    ++h.counts[i];
  }
  return h;
}

std::string to_csv(const Histogram& h) {
  std::ostringstream out;
  out << "bin_lo,bin_hi,count\n";
  const int bins = static_cast<int>(h.counts.size());
  const double width = (h.hi - h.lo) / bins;
  for (int i = 0; i < bins; ++i) {
    out << format_full(h.lo + i * width) << ',' << format_full(h.lo + (i + 1) * width) << ','
        << h.counts[i] << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------- reports

std::string report_to_json(const ErrorReport& r) {
  const auto num = [](double v) -> nlohmann::ordered_json {
    if (std::isfinite(v)) return v;
    return format_full(v);
  };
  nlohmann::ordered_json j;
  j["model"] = r.model;
  j["guide"] = r.guide;
  j["fingerprint"] = r.fingerprint;
  j["status"] = std::string(to_string(r.status));
  j["max_err"] = num(r.max_err);
  j["entries"] = nlohmann::ordered_json::array();
  for (const auto& e : r.entries) {
    j["entries"].push_back(
        {{"column", e.column}, {"parameter", e.parameter}, {"component", e.component},
         {"err", num(e.err)}});
  }
  j["excluded"] = r.excluded;
  j["warnings"] = r.warnings;
  j["error"] = r.error;
  if (r.bimodality) {
    j["bimodality"] = {{"weight_low", r.bimodality->weight_low},
                       {"weight_high", r.bimodality->weight_high}};
  }
  return j.dump(1) + "\n";
}

ErrorReport report_from_json(const std::string& text) {
  const auto num = [](const nlohmann::json& v) {
    if (v.is_string()) {
      const std::string s = v.get<std::string>();
      if (s == "inf") return std::numeric_limits<double>::infinity();
      if (s == "-inf") return -std::numeric_limits<double>::infinity();
      return std::numeric_limits<double>::quiet_NaN();
    }
    return v.get<double>();
  };
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    ErrorReport r;
    r.model = j.at("model").get<std::string>();
    r.guide = j.at("guide").get<std::string>();
    r.fingerprint = j.at("fingerprint").get<std::string>();
    const auto status = parse_report_status(j.at("status").get<std::string>());
    if (!status) throw ParseError("report: unknown status");
    r.status = *status;
    r.max_err = num(j.at("max_err"));
    for (const auto& e : j.at("entries")) {
      r.entries.push_back({e.at("column").get<std::string>(), e.at("parameter").get<std::string>(),
                           e.at("component").get<int>(), num(e.at("err"))});
    }
    r.excluded = j.at("excluded").get<std::vector<std::string>>();
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    r.error = j.at("error").get<std::string>();
    if (j.contains("bimodality")) {
      const auto& b = j["bimodality"];
      r.bimodality = Bimodality{b.at("weight_low").get<double>(), b.at("weight_high").get<double>()};
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
}

std::string report_to_csv(const ErrorReport& r) {
  std::ostringstream out;
  out << "# model=" << r.model << "\n# guide=" << r.guide << "\n# status=" << to_string(r.status)
      << '\n';
  if (r.status != ReportStatus::Error) out << "# max_err=" << format_full(r.max_err) << '\n';
  if (!r.error.empty()) out << "# error=" << r.error << '\n';
  for (const auto& c : r.excluded) out << "# excluded=" << c << " (zero reference stddev)\n";
  for (const auto& w : r.warnings) out << "# warning=" << w << '\n';
  out << "column,parameter,component,err\n";
  for (const auto& e : r.entries) {
    out << e.column << ',' << e.parameter << ',' << e.component << ',' << format_full(e.err)
        << '\n';
  }
  return out.str();
}

std::vector<ErrorReport> load_reports(const fs::path& results) {
  if (!fs::is_directory(results)) throw ParseError("no results directory " + results.string());
  std::vector<fs::path> files;
  for (const auto& m : fs::directory_iterator(results)) {
    if (!m.is_directory()) continue;
    for (const auto& g : fs::directory_iterator(m.path())) {
      const fs::path p = g.path() / "report.json";
      if (fs::is_regular_file(p)) files.push_back(p);
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<ErrorReport> out;
  for (const auto& p : files) out.push_back(report_from_json(read_file(p)));
  return out;
}

// ---------------------------------------------------------------- suites

namespace {

void check_keys(const toml::table& t, std::initializer_list<std::string_view> allowed,
                const std::string& where) {
  for (const auto& [key, value] : t) {
    if (std::find(allowed.begin(), allowed.end(), key.str()) == allowed.end()) {
      throw ParseError("suite: unknown key '" + std::string(key.str()) + "' in " + where);
    }
  }
}

template <typename T>
std::optional<T> get(const toml::table& t, std::string_view key, const std::string& where) {
  const toml::node* n = t.get(key);
  if (!n) return std::nullopt;
  if constexpr (std::is_same_v<T, double>) {
    if (auto v = n->value<double>()) return *v;
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (auto v = n->value<std::string>()) return *v;
  } else {
    if (auto v = n->value<std::int64_t>()) {
      const bool narrow = !std::is_same_v<T, std::uint64_t>;
      if (*v < 0 || (narrow && *v > std::numeric_limits<int>::max())) {
        throw ParseError("suite: '" + std::string(key) + "' out of range in " + where);
      }
      return static_cast<T>(*v);
    }
  }
  throw ParseError("suite: '" + std::string(key) + "' has the wrong type in " + where);
}

std::vector<int> get_ints(const toml::table& t, std::string_view key, const std::string& where) {
  const toml::array* a = t.get_as<toml::array>(key);
  if (!a) throw ParseError("suite: '" + std::string(key) + "' must be an array in " + where);
  std::vector<int> out;
  for (const auto& e : *a) {
    const auto v = e.value<std::int64_t>();
    if (!v) throw ParseError("suite: '" + std::string(key) + "' must hold integers");
    out.push_back(static_cast<int>(*v));
  }
  return out;
}

void read_run_tables(const toml::table& root, SVIConfig& svi, GuideConfig& guide) {
  if (const toml::table* t = root.get_as<toml::table>("svi")) {
    const std::string w = "[svi]";
    check_keys(*t, {"num_steps", "num_samples", "step_size", "num_particles", "seed"}, w);
    svi.num_steps = get<int>(*t, "num_steps", w).value_or(svi.num_steps);
    svi.num_samples = get<int>(*t, "num_samples", w).value_or(svi.num_samples);
    svi.step_size = get<double>(*t, "step_size", w).value_or(svi.step_size);
    svi.num_particles = get<int>(*t, "num_particles", w).value_or(svi.num_particles);
    svi.seed = get<std::uint64_t>(*t, "seed", w).value_or(svi.seed);
    if (!(svi.step_size > 0.0) || !std::isfinite(svi.step_size)) {
      throw ParseError("[svi] step_size must be positive");
    }
    if (svi.num_particles < 1) throw ParseError("[svi] num_particles must be >= 1");
  }
  if (const toml::table* t = root.get_as<toml::table>("guide")) {
    const std::string w = "[guide]";
    check_keys(*t,
               {"init_scale", "init_loc_jitter", "rank", "iaf_num_flows", "iaf_hidden",
                "iaf_gate_bias", "bnaf_num_flows", "bnaf_block_factors"},
               w);
    GuideConfig& g = guide;
    g.init_scale = get<double>(*t, "init_scale", w).value_or(g.init_scale);
    g.init_loc_jitter = get<double>(*t, "init_loc_jitter", w).value_or(g.init_loc_jitter);
    g.rank = get<int>(*t, "rank", w).value_or(g.rank);
    g.iaf_num_flows = get<int>(*t, "iaf_num_flows", w).value_or(g.iaf_num_flows);
    if (t->contains("iaf_hidden")) g.iaf_hidden = get_ints(*t, "iaf_hidden", w);
    g.iaf_gate_bias = get<double>(*t, "iaf_gate_bias", w).value_or(g.iaf_gate_bias);
    g.bnaf_num_flows = get<int>(*t, "bnaf_num_flows", w).value_or(g.bnaf_num_flows);
    if (t->contains("bnaf_block_factors")) {
      g.bnaf_block_factors = get_ints(*t, "bnaf_block_factors", w);
    }
  }
  try {
    guide.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("suite [guide]: ") + e.what());
  }

}

}  // namespace

Suite load_suite(const fs::path& manifest) {
  toml::table root;
  try {
    root = toml::parse_file(manifest.string());
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "suite " << manifest.string() << ":" << e.source().begin.line << ": "
        << e.description();
    throw ParseError(msg.str());
  }
  const fs::path base = manifest.parent_path();
  const auto resolve = [&](const std::string& p) { return p.empty() ? fs::path() : base / p; };
  check_keys(root, {"results", "guides", "svi", "guide", "models"}, "the manifest");

  Suite s;
  s.results = resolve(get<std::string>(root, "results", "the manifest").value_or("results"));
  if (const toml::node* n = root.get("guides")) {
    const toml::array* a = n->as_array();
    if (!a) throw ParseError("suite: 'guides' must be an array");
    for (const auto& e : *a) {
      const auto name = e.value<std::string>();
      const auto kind = name ? parse_guide_kind(*name) : std::nullopt;
      if (!kind) throw ParseError("suite: unknown guide '" + name.value_or("?") + "'");
      s.guides.push_back(*kind);
    }
  } else {
    s.guides.assign(kAllGuideKinds.begin(), kAllGuideKinds.end());
  }

  read_run_tables(root, s.svi, s.guide);

  const toml::array* models = root.get_as<toml::array>("models");
  if (!models || models->empty()) throw ParseError("suite: no [[models]] entries");
  std::set<std::string> names;
  for (const auto& node : *models) {
    const toml::table* t = node.as_table();
    if (!t) throw ParseError("suite: [[models]] entries must be tables");
    const std::string w = "[[models]]";
    check_keys(*t, {"name", "model", "data", "reference", "num_steps", "seed", "bimodality"}, w);
    SuiteModel m;
    m.name = get<std::string>(*t, "name", w).value_or("");
    const auto model = get<std::string>(*t, "model", w);
    const auto reference = get<std::string>(*t, "reference", w);
    if (m.name.empty() || !model || !reference) {
      throw ParseError("suite: every model needs name, model and reference");
    }
    if (m.name.find_first_of("/\\,") != std::string::npos || m.name == "." || m.name == "..") {
      throw ParseError("suite: bad model name '" + m.name + "'");
    }
    if (!names.insert(m.name).second) throw ParseError("suite: duplicate model '" + m.name + "'");
    m.model = resolve(*model);
    m.data = resolve(get<std::string>(*t, "data", w).value_or(""));
    m.reference = resolve(*reference);
    m.num_steps = get<int>(*t, "num_steps", w);
    m.seed = get<std::uint64_t>(*t, "seed", w);
    if (const toml::table* b = t->get_as<toml::table>("bimodality")) {
      check_keys(*b, {"param", "cut", "modes"}, "bimodality");
      SuiteModel::BimodalitySpec spec;
      spec.param = get<std::string>(*b, "param", "bimodality").value_or("");
      spec.cut = get<double>(*b, "cut", "bimodality").value_or(0.0);
      const toml::array* modes = b->get_as<toml::array>("modes");
      if (spec.param.empty() || !modes || modes->size() != 2) {
        throw ParseError("suite: bimodality needs param, cut and two modes");
      }
      const auto lo = (*modes)[0].value<double>();
      const auto hi = (*modes)[1].value<double>();
      if (!lo || !hi || !(*lo < spec.cut && spec.cut < *hi)) {
        throw ParseError("suite: bimodality cut must lie between the modes");
      }
      spec.modes = {*lo, *hi};
      m.bimodality = spec;
    }
    s.models.push_back(std::move(m));
  }
  return s;
}

void load_run_config(const fs::path& path, SVIConfig& svi, GuideConfig& guide) {
  toml::table root;
  try {
    root = toml::parse_file(path.string());
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config " << path.string() << ":" << e.source().begin.line << ": " << e.description();
    throw ParseError(msg.str());
  }
  check_keys(root, {"svi", "guide"}, "the config");
  read_run_tables(root, svi, guide);
}

// ---------------------------------------------------------------- benchmark

namespace {

struct PreparedModel {
  std::optional<BoundModel> bound;
  std::string failure;
  SampleTable reference;
  std::vector<std::string> generated;
  std::string inputs;  // file contents that feed the fingerprint
};

struct Cell {
  const SuiteModel* model;
  const PreparedModel* prepared;
  GuideKind guide;
  SVIConfig svi;
  std::string fingerprint;
  fs::path dir;
};

std::string config_text(const SVIConfig& c, const GuideConfig& g, GuideKind kind) {
  std::ostringstream out;
  out << "guide=" << to_string(kind) << "\nnum_steps=" << c.num_steps
      << "\nnum_samples=" << c.num_samples << "\nstep_size=" << format_full(c.step_size)
      << "\nnum_particles=" << c.num_particles << "\nseed=" << c.seed
      << "\ninit_scale=" << format_full(g.init_scale)
      << "\ninit_loc_jitter=" << format_full(g.init_loc_jitter) << "\nrank=" << g.rank
      << "\niaf_num_flows=" << g.iaf_num_flows << "\niaf_hidden=";
  for (int h : g.iaf_hidden) out << h << ' ';
  out << "\niaf_gate_bias=" << format_full(g.iaf_gate_bias)
      << "\nbnaf_num_flows=" << g.bnaf_num_flows << "\nbnaf_block_factors=";
  for (int b : g.bnaf_block_factors) out << b << ' ';
  out << '\n';
  return out.str();
}

std::string loss_csv(const std::vector<LossPoint>& trace) {
  std::ostringstream out;
  out << "step,loss\n";
  for (const auto& p : trace) out << p.step << ',' << format_full(p.loss) << '\n';
  return out.str();
}

ErrorReport run_cell(const Cell& cell, const GuideConfig& guide_config) {
  const PreparedModel& pm = *cell.prepared;
  if (!pm.bound) return error_report(pm.failure);
  const SVIResult result = run(*pm.bound, synthesize(cell.guide, *pm.bound, guide_config), cell.svi);
  write_file(cell.dir / "loss.csv", loss_csv(result.loss_trace));
  if (result.status != SVIStatus::Ok) {
    std::ostringstream msg;
    msg << "nan_error";
    if (result.error_step >= 0) msg << " at step " << result.error_step;
    msg << ": " << result.error;
    return error_report(msg.str());
  }
  std::ostringstream samples;
  write_csv(result.samples, samples);
  write_file(cell.dir / "samples.csv", samples.str());
  ErrorReport report = relative_error(result.samples, pm.reference, pm.generated);
  if (const auto& b = cell.model->bimodality) {
    report.bimodality = bimodality_diagnostic(result.samples, b->param, b->cut, b->modes);
    std::ostringstream out;
    out << "param,cut,weight_low,weight_high\n"
        << b->param << ',' << format_full(b->cut) << ',' << format_full(report.bimodality->weight_low)
        << ',' << format_full(report.bimodality->weight_high) << '\n';
    write_file(cell.dir / "bimodality.csv", out.str());
    const double span = b->modes.second - b->modes.first;
    write_file(cell.dir / "histogram.csv",
               to_csv(histogram(result.samples.column(b->param), b->modes.first - span / 2,
                                b->modes.second + span / 2, 80)));
  }
  return report;
}

}  // namespace

BenchmarkOutcome run_benchmark(const Suite& suite, const BenchmarkOptions& options) {
  const fs::path results = options.results.value_or(suite.results);
  fs::create_directories(results);

  std::vector<PreparedModel> prepared(suite.models.size());
  for (std::size_t i = 0; i < suite.models.size(); ++i) {
    const SuiteModel& m = suite.models[i];
    PreparedModel& p = prepared[i];
    // A missing reference is a manifest problem, not a cell failure.
    p.reference = read_csv(m.reference);
    p.inputs = read_file(m.reference);
    try {
      const std::string source = read_file(m.model);
      const std::string data = m.data.empty() ? std::string("{}") : read_file(m.data);
      p.inputs += source + data;
      p.bound = compile_source(source).bind(parse_data(data));
      p.generated = p.bound->generated_quantity_names();
    } catch (const Error& e) {
      p.failure = e.what();
    }
  }

  std::vector<Cell> cells;
  for (std::size_t i = 0; i < suite.models.size(); ++i) {
    const SuiteModel& m = suite.models[i];
    for (GuideKind g : suite.guides) {
      Cell c{&m, &prepared[i], g, suite.svi, "", results / m.name / std::string(to_string(g))};
      if (m.num_steps) c.svi.num_steps = *m.num_steps;
      if (m.seed) c.svi.seed = *m.seed;
      std::string bim;
      if (m.bimodality) {
        bim = "bimodality=" + m.bimodality->param + ' ' + format_full(m.bimodality->cut) + ' ' +
              format_full(m.bimodality->modes.first) + ' ' +
              format_full(m.bimodality->modes.second) + '\n';
      }
      c.fingerprint = fingerprint_of(prepared[i].inputs + '\0' +
                                     config_text(c.svi, suite.guide, g) + bim);
      cells.push_back(std::move(c));
    }
  }

  std::vector<ErrorReport> reports(cells.size());
  std::vector<char> done(cells.size(), 0);
  int reused = 0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const fs::path p = cells[i].dir / "report.json";
    if (!fs::is_regular_file(p)) continue;
    try {
      ErrorReport r = report_from_json(read_file(p));
      if (r.fingerprint != cells[i].fingerprint) continue;
      reports[i] = std::move(r);
      done[i] = 1;
      ++reused;
    } catch (const ParseError&) {
      // stale or damaged, recompute
    }
  }

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      if (done[i]) continue;
      const Cell& c = cells[i];
      fs::create_directories(c.dir);
      ErrorReport r;
      try {
        r = run_cell(c, suite.guide);
      } catch (const std::exception& e) {
        r = error_report(e.what());
      }
      r.model = c.model->name;
      r.guide = std::string(to_string(c.guide));
      r.fingerprint = c.fingerprint;
      write_file(c.dir / "report.csv", report_to_csv(r));
      write_file(c.dir / "report.json", report_to_json(r));
      reports[i] = std::move(r);
    }
  };
  const int jobs = std::max(1, options.jobs);
  {
    std::vector<std::jthread> pool;
    for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
  }

  BenchmarkOutcome out;
  out.table = summarize(reports);
  out.reused = reused;
  out.computed = static_cast<int>(cells.size()) - reused;
  write_file(results / "summary.md", to_markdown(out.table));
  write_file(results / "summary.csv", to_csv(out.table));
  return out;
}

}  // namespace stanvi
