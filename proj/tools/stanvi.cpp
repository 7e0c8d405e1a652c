// Apache License, Version 2.0, refer to LICENSE.txt
//
// Command line front end of the stanvi library.

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11/CLI11.hpp>

#include "stanvi/ast.hpp"
#include "stanvi/data.hpp"
#include "stanvi/error.hpp"
#include "stanvi/harness.hpp"
#include "stanvi/model.hpp"
#include "stanvi/svi.hpp"

namespace {

namespace fs = std::filesystem;
using namespace stanvi;

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kCompile = 2;
constexpr int kNan = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t default_seed() {
  const char* env = std::getenv("STANVI_SEED");
  if (!env || !*env) return 0;
  std::uint64_t seed = 0;
  const char* end = env + std::char_traits<char>::length(env);
  const auto res = std::from_chars(env, end, seed);
  if (res.ec != std::errc() || res.ptr != end) {
    throw UsageError(std::string("STANVI_SEED is not an unsigned integer: ") + env);
  }
  return seed;
}

DataBindings read_data(const std::string& path) {
  return path.empty() ? DataBindings{} : load_data(path);
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path);
  out << text;
}

int cmd_compile(const std::string& model_path, const std::string& data_path) {
  const GenerativeModel model = compile_file(model_path);
  const TypedProgram& tp = model.program();
  std::cout << "// canonical program\n" << print(tp.program) << "\n// symbols\n";
  for (std::size_t i = 0; i < tp.symbols.size(); ++i) {
    const Symbol& s = tp.symbols[i];
    std::cout << "//   " << i << ' ' << s.name << " : " << to_string(s.type) << " ("
              << to_string(s.origin) << ")\n";
  }
  if (!data_path.empty() || model.data_schema().empty()) {
    const BoundModel bound = model.bind(read_data(data_path));
    std::cout << "// layout, unconstrained dimension " << bound.dim() << '\n';
    for (const LayoutEntry& e : bound.layout().entries) {
      std::cout << "//   " << e.name << " [" << e.offset << ", " << e.offset + e.length << ") "
                << to_string(e.constraint) << '\n';
    }
    std::cout << "// columns";
    for (const auto& c : bound.column_names()) std::cout << ' ' << c;
    std::cout << '\n';
  } else {
    std::cout << "// layout needs --data\n";
  }
  return kOk;
}

struct InferArgs {
  std::string model;
  std::string data;
  std::string guide = "diagonal-normal";
  std::string config;
  std::string out;
  std::string loss_out;
  std::optional<int> num_steps;
  std::optional<int> num_samples;
  std::optional<double> step_size;
  std::optional<int> num_particles;
  std::optional<std::uint64_t> seed;
  std::optional<int> rank;
  std::optional<int> iaf_num_flows;
  std::optional<int> bnaf_num_flows;
  std::optional<double> init_scale;
};

int cmd_infer(const InferArgs& a) {
  const auto kind = parse_guide_kind(a.guide);
  if (!kind) throw UsageError("unknown guide '" + a.guide + "'");
  SVIConfig svi;
  GuideConfig gc;
  svi.seed = default_seed();
  if (!a.config.empty()) load_run_config(a.config, svi, gc);
  if (a.num_steps) svi.num_steps = *a.num_steps;
  if (a.num_samples) svi.num_samples = *a.num_samples;
  if (a.step_size) svi.step_size = *a.step_size;
  if (a.num_particles) svi.num_particles = *a.num_particles;
  if (a.seed) svi.seed = *a.seed;
  if (a.rank) gc.rank = *a.rank;
  if (a.iaf_num_flows) gc.iaf_num_flows = *a.iaf_num_flows;
  if (a.bnaf_num_flows) gc.bnaf_num_flows = *a.bnaf_num_flows;
  if (a.init_scale) gc.init_scale = *a.init_scale;
  try {
    gc.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  const BoundModel model = compile_file(a.model).bind(read_data(a.data));
  const SVIResult r = run(model, synthesize(*kind, model, gc), svi);
  if (!a.loss_out.empty()) {
    std::ostringstream loss;
    loss.precision(17);
    loss << "step,loss\n";
    for (const auto& p : r.loss_trace) loss << p.step << ',' << p.loss << '\n';
    emit(a.loss_out, loss.str());
  }
  if (r.status != SVIStatus::Ok) {
    std::cerr << "stanvi: nan_error";
    if (r.error_step >= 0) std::cerr << " at step " << r.error_step;
    std::cerr << ": " << r.error << '\n';
    return kNan;
  }
  std::ostringstream out;
  write_csv(r.samples, out);
  emit(a.out, out.str());
  return kOk;
}

int cmd_eval(const std::string& samples, const std::string& reference, const std::string& out,
             const std::string& model_path, const std::string& data_path) {
  std::vector<std::string> generated;
  if (!model_path.empty()) {
    generated = compile_file(model_path).bind(read_data(data_path)).generated_quantity_names();
  }
  const ErrorReport r = relative_error(read_csv(fs::path(samples)), read_csv(fs::path(reference)),
                                       generated);
  for (const auto& w : r.warnings) std::cerr << "stanvi: warning: " << w << '\n';
  for (const auto& c : r.excluded) {
    std::cerr << "stanvi: warning: " << c << " excluded (zero reference stddev)\n";
  }
  emit(out, report_to_csv(r));
  if (!out.empty() && out != "-") {
    std::cout << to_string(r.status);
    if (r.status != ReportStatus::Error) std::cout << " max_err=" << r.max_err;
    std::cout << '\n';
  }
  return kOk;
}

int cmd_bench(const std::string& suite_path, int jobs, const std::string& results) {
  const Suite suite = load_suite(suite_path);
  BenchmarkOptions options;
  options.jobs = jobs > 0 ? jobs : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (!results.empty()) options.results = results;
  const BenchmarkOutcome outcome = run_benchmark(suite, options);
  std::cerr << "stanvi: " << outcome.computed << " cells run, " << outcome.reused
            << " reused\n";
  std::cout << to_markdown(outcome.table);
  return kOk;
}

int cmd_report(const std::string& results, const std::string& format) {
  const auto reports = load_reports(results);
  if (reports.empty()) throw UsageError("no reports under " + results);
  const BenchmarkTable table = summarize(reports);
  std::cout << (format == "csv" ? to_csv(table) : to_markdown(table));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stanvi: variational inference for Stan models with automatic guides"};
  app.require_subcommand(1);

  std::string model_path, data_path;
  auto* compile = app.add_subcommand("compile", "Check a model and dump its program and layout");
  compile->add_option("model", model_path, "Stan model file")->required()->check(CLI::ExistingFile);
  compile->add_option("--data", data_path, "JSON data, needed for the layout")
      ->check(CLI::ExistingFile);

  InferArgs ia;
  auto* infer = app.add_subcommand("infer", "Run SVI and write posterior draws");
  infer->add_option("model", ia.model, "Stan model file")->required()->check(CLI::ExistingFile);
  infer->add_option("--data", ia.data, "JSON data")->check(CLI::ExistingFile);
  infer->add_option("--guide", ia.guide, "delta, normal, diagonal-normal, multivariate-normal, "
                                         "low-rank, laplace, iaf or bnaf")
      ->capture_default_str();
  infer->add_option("--config", ia.config, "TOML file with [svi] and [guide] tables")
      ->check(CLI::ExistingFile);
  infer->add_option("--num-steps", ia.num_steps, "Adam steps (default 100000)")
      ->check(CLI::NonNegativeNumber);
  infer->add_option("--num-samples", ia.num_samples, "posterior draws (default 10000)")
      ->check(CLI::NonNegativeNumber);
  infer->add_option("--step-size", ia.step_size, "Adam step size (default 0.0005)")
      ->check(CLI::PositiveNumber);
  infer->add_option("--num-particles", ia.num_particles, "ELBO particles (default 1)")
      ->check(CLI::PositiveNumber);
  infer->add_option("--seed", ia.seed, "seed (default $STANVI_SEED or 0)");
  infer->add_option("--rank", ia.rank, "low-rank factor rank");
  infer->add_option("--iaf-num-flows", ia.iaf_num_flows, "IAF flows");
  infer->add_option("--bnaf-num-flows", ia.bnaf_num_flows, "BNAF flows");
  infer->add_option("--init-scale", ia.init_scale, "initial guide scale");
  infer->add_option("--out", ia.out, "samples CSV (default stdout)");
  infer->add_option("--loss-out", ia.loss_out, "loss trace CSV");

  std::string samples, reference, eval_out;
  auto* eval = app.add_subcommand("eval", "Relative error of draws against reference draws");
  eval->add_option("--samples", samples, "samples CSV")->required()->check(CLI::ExistingFile);
  eval->add_option("--reference", reference, "reference CSV")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", eval_out, "report CSV (default stdout)");
  eval->add_option("--model", model_path, "model, to tell generated quantities apart")
      ->check(CLI::ExistingFile);
  eval->add_option("--data", data_path, "data for --model")->check(CLI::ExistingFile);

  std::string suite, results;
  int jobs = 0;
  auto* bench = app.add_subcommand("bench", "Run a benchmark suite");
  bench->add_option("--suite", suite, "suite TOML manifest")->required()->check(CLI::ExistingFile);
  bench->add_option("--jobs", jobs, "parallel cells (default: hardware threads)")
      ->check(CLI::NonNegativeNumber);
  bench->add_option("--results", results, "results directory (overrides the manifest)");

  std::string format = "md";
  auto* report = app.add_subcommand("report", "Summarize a results directory");
  report->add_option("--results", results, "results directory")->required();
  report->add_option("--format", format, "md or csv")
      ->check(CLI::IsMember({"md", "csv"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? kOk : kUsage;
  }

  try {
    if (*compile) return cmd_compile(model_path, data_path);
    if (*infer) return cmd_infer(ia);
    if (*eval) return cmd_eval(samples, reference, eval_out, model_path, data_path);
    if (*bench) return cmd_bench(suite, jobs, results);
    if (*report) return cmd_report(results, format);
  } catch (const CompileError& e) {
    std::cerr << "stanvi: " << e.what() << '\n';
    return kCompile;
  } catch (const std::exception& e) {
    std::cerr << "stanvi: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
