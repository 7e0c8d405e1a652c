// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stanvi/error.hpp"
#include "stanvi/guides.hpp"
#include "stanvi/sample_table.hpp"
#include "stanvi/svi.hpp"

namespace stanvi {

/// Every compared component has a zero reference stddev.
class ZeroReferenceStddev : public Error {
 public:
  using Error::Error;
};

inline constexpr double kSuccessThreshold = 0.3;

enum class ReportStatus { Success, Mismatch, Error };

std::string_view to_string(ReportStatus status);
std::optional<ReportStatus> parse_report_status(std::string_view text);

struct Bimodality {
  double weight_low = 0.0;   // fraction of draws < cut
  double weight_high = 0.0;  // fraction of draws >= cut
};

struct ComponentError {
  std::string column;     // "beta.2"
  std::string parameter;  // "beta"
  int component = 0;      // 1-based position within the parameter, 0 for scalars
  double err = 0.0;
};

struct ErrorReport {
  std::string model;
  std::string guide;
  std::string fingerprint;
  ReportStatus status = ReportStatus::Error;
  double max_err = 0.0;  // meaningless when status is Error
  std::vector<ComponentError> entries;
  std::vector<std::string> excluded;  // zero reference stddev
  std::vector<std::string> warnings;
  std::string error;  // set when status is Error
  std::optional<Bimodality> bimodality;
};

/// Status from a maximum error: Success below 0.3, Mismatch otherwise.
ReportStatus classify(double max_err);

struct ColumnStats {
  double mean = 0.0;
  double stddev = 0.0;  // n - 1 denominator
};

/// Plain left-to-right sums over the rows.
ColumnStats column_stats(const SampleTable& table, int column);

/// err = |mean(ref) - mean(x)| / stddev(ref) per column, aggregated by max.
/// Columns listed in `generated` are compared only when both tables have
/// them; otherwise a warning is recorded. Any other column present in only
/// one table raises MissingParameter. A NaN anywhere in `samples` gives an
/// Error report. Reference columns with zero stddev are excluded; when all
/// are, ZeroReferenceStddev is thrown.
ErrorReport relative_error(const SampleTable& samples, const SampleTable& reference,
                           const std::vector<std::string>& generated = {});

/// Report for a run that failed before producing samples.
ErrorReport error_report(std::string message);

struct BenchmarkTable {
  std::vector<std::string> models;  // rows, sorted by name
  std::vector<std::string> guides;  // columns
  std::map<std::pair<std::string, std::string>, ErrorReport> cells;

  struct Footer {
    std::optional<double> average;  // over non-error cells
    int successes = 0;
    int mismatches = 0;
    int errors = 0;
  };
  std::vector<Footer> footer;  // per guide
};

/// Guides are ordered as in kAllGuideKinds when they name a guide kind.
BenchmarkTable summarize(const std::vector<ErrorReport>& reports);

std::string to_markdown(const BenchmarkTable& table);
std::string to_csv(const BenchmarkTable& table);

/// Throws MissingParameter, std::invalid_argument for an empty table or a
/// cut outside (modes.first, modes.second).
Bimodality bimodality_diagnostic(const SampleTable& samples, const std::string& param, double cut,
                                 std::pair<double, double> modes);

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<int> counts;  // out-of-range draws go to the end bins
};

Histogram histogram(const std::vector<double>& values, double lo, double hi, int bins);
std::string to_csv(const Histogram& h);

struct SuiteModel {
  std::string name;
  std::filesystem::path model;
  std::filesystem::path data;  // empty: no data
  std::filesystem::path reference;
  std::optional<int> num_steps;
  std::optional<std::uint64_t> seed;
  struct BimodalitySpec {
    std::string param;
    double cut = 0.0;
    std::pair<double, double> modes;
  };
  std::optional<BimodalitySpec> bimodality;
};

struct Suite {
  std::vector<SuiteModel> models;
  std::vector<GuideKind> guides;  // default: all eight
  SVIConfig svi;
  GuideConfig guide;
  std::filesystem::path results;
};

/// Paths in the manifest are relative to its directory. Throws ParseError.
Suite load_suite(const std::filesystem::path& manifest);

/// Reads the optional [svi] and [guide] tables of a TOML file (the same
/// tables as in a suite manifest) over the given defaults. Throws ParseError.
void load_run_config(const std::filesystem::path& path, SVIConfig& svi, GuideConfig& guide);

struct BenchmarkOptions {
  int jobs = 1;
  std::optional<std::filesystem::path> results;  // overrides the manifest
};

struct BenchmarkOutcome {
  BenchmarkTable table;
  int computed = 0;  // cells run
  int reused = 0;    // cells skipped by fingerprint
};

/// Runs every (model, guide) cell not already present in the results
/// directory with the same fingerprint and writes the artifacts:
///   <results>/<model>/<guide>/{samples.csv,loss.csv,report.json,report.csv}
///   <results>/<model>/<guide>/{bimodality.csv,histogram.csv} when configured
///   <results>/summary.{md,csv}
BenchmarkOutcome run_benchmark(const Suite& suite, const BenchmarkOptions& options = {});

/// Collects <results>/*/*/report.json. Throws ParseError.
std::vector<ErrorReport> load_reports(const std::filesystem::path& results);

std::string report_to_json(const ErrorReport& report);
ErrorReport report_from_json(const std::string& text);
std::string report_to_csv(const ErrorReport& report);

}  // namespace stanvi
