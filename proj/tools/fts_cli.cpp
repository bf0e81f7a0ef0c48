// fts: generate synthetic cohorts, run A/B target-variable simulations and
// serve the HTTP API.

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <pthread.h>

#include <CLI11.hpp>

#include "fts/cohort.hpp"
#include "fts/engine.hpp"
#include "fts/error.hpp"
#include "fts/report.hpp"
#include "fts/report_schema.hpp"
#include "fts/service.hpp"

namespace {

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

LogLevel log_level() {
  const char* env = std::getenv("FTS_LOG_LEVEL");
  const std::string v = env ? env : "info";
  if (v == "error") return LogLevel::error;
  if (v == "warn") return LogLevel::warn;
  if (v == "debug") return LogLevel::debug;
  return LogLevel::info;
}

void log(LogLevel level, const std::string& msg) {
  static const LogLevel threshold = log_level();
  if (level > threshold) return;
  static constexpr const char* names[] = {"error", "warn", "info", "debug"};
  std::cerr << "[" << names[static_cast<int>(level)] << "] " << msg << '\n';
}

int exit_code(fts::ErrorCode code) {
  using fts::ErrorCode;
  switch (code) {
    case ErrorCode::missing_column: return 10;
    case ErrorCode::malformed_row: return 11;
    case ErrorCode::non_finite_score: return 12;
    case ErrorCode::duplicate_candidate_id: return 13;
    case ErrorCode::empty_cohort: return 14;
    case ErrorCode::invalid_spec: return 20;
    case ErrorCode::invalid_config: return 21;
    case ErrorCode::invalid_weights: return 22;
    case ErrorCode::domain_error: return 30;
    case ErrorCode::single_class_dataset: return 31;
    case ErrorCode::missing_id: return 32;
    case ErrorCode::unknown_attribute: return 33;
    case ErrorCode::cohort_mismatch: return 34;
    case ErrorCode::io_error: return 40;
    case ErrorCode::port_in_use: return 50;
    default: return 60;
  }
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw fts::Error(fts::ErrorCode::io_error, "cannot write " + path, path);
  f << bytes;
  if (!f) throw fts::Error(fts::ErrorCode::io_error, "write failed for " + path, path);
}

struct GenerateOptions {
  std::size_t size = 2000;
  std::uint64_t seed = 0;
  std::string spec_path;
  std::string out;
};

void cmd_generate(const GenerateOptions& o, bool size_given) {
  fts::SyntheticSpec spec = o.spec_path.empty()
                                ? fts::default_synthetic_spec(o.size)
                                : fts::synthetic_spec_from_json(fts::Json::parse(fts::read_text_file(o.spec_path)));
  if (size_given) spec.size = o.size;
  const fts::Cohort cohort = fts::generate_synthetic_cohort(spec, o.seed);
  write_file(o.out, fts::serialize_cohort_csv(cohort));
  log(LogLevel::info, "wrote " + std::to_string(cohort.size()) + " candidates to " + o.out);
}

struct RunOptions {
  std::string cohort;
  std::string directions;
  std::string weights_a;
  std::string weights_b;
  std::uint64_t seed = 0;
  std::string out;
  std::string policy_file;
  std::string train_file;
  bool concurrent = false;
};

fts::TestDirectionConfig directions_from(const std::string& path) {
  return path.empty() ? fts::TestDirectionConfig{} : fts::TestDirectionConfig::load(path);
}

void print_summary(std::ostream& os, const fts::SimulationResult& r) {
  char line[256];
  std::snprintf(line, sizeof line, "%-16s %-20s %8s %8s %8s\n", "attribute", "group", "sel_A", "sel_B", "delta");
  os << line;
  const auto& rep = r.report;
  for (fts::Attribute a : fts::kAllAttributes) {
    const auto k = fts::index_of(a);
    for (std::size_t g = 0; g < rep.a.population_groups[k].size(); ++g) {
      const auto& ga = rep.a.population_groups[k][g];
      const auto& gb = rep.b.population_groups[k][g];
      const double d = *rep.deltas.groups[k][g].selection_rate;
      std::snprintf(line, sizeof line, "%-16s %-20s %8.3f %8.3f %8.3f\n",
                    std::string(fts::name_of(a)).c_str(), ga.group.c_str(), ga.selection_rate,
                    gb.selection_rate, d == 0.0 ? 0.0 : d);
      os << line;
    }
  }
  auto fmt_rate = [](const fts::Rate& v) {
    char buf[32];
    if (!v) return std::string("n/a");
    std::snprintf(buf, sizeof buf, "%.3f", *v == 0.0 ? 0.0 : *v);
    return std::string(buf);
  };
  os << "accuracy (held-out): A " << fmt_rate(rep.a.accuracy) << "  B " << fmt_rate(rep.b.accuracy)
     << "  delta " << fmt_rate(rep.deltas.accuracy) << '\n';
}

void cmd_run(const RunOptions& o) {
  fts::SessionConfig config;
  config.cohort = std::make_shared<const fts::Cohort>(fts::load_cohort(o.cohort, directions_from(o.directions)));
  try {
    config.weights_a = fts::WeightVector::parse(o.weights_a);
  } catch (const fts::Error& e) {
    throw e.with_context("--weights-a");
  }
  try {
    config.weights_b = fts::WeightVector::parse(o.weights_b);
  } catch (const fts::Error& e) {
    throw e.with_context("--weights-b");
  }
  config.master_seed = o.seed;
  if (!o.policy_file.empty())
    fts::apply_overrides(config.policy, fts::parse_key_values(fts::read_text_file(o.policy_file)));
  if (!o.train_file.empty())
    fts::apply_overrides(config.train, fts::parse_key_values(fts::read_text_file(o.train_file)));

  auto progress = [](std::string_view stage) { log(LogLevel::debug, std::string(stage)); };
  const auto result = fts::run_simulation(
      config, o.concurrent ? fts::Execution::concurrent : fts::Execution::sequential, progress);
  for (const auto& w : result.warnings) log(LogLevel::warn, w);
  log(LogLevel::info, "simulation finished in " + std::to_string(result.elapsed_ms) + " ms");

  const std::string doc = fts::serialize_result(result);
  if (o.out.empty() || o.out == "-") {
    std::cout << doc;
    print_summary(std::cerr, result);
  } else {
    write_file(o.out, doc);
    print_summary(std::cout, result);
  }
}

struct ServeOptions {
  std::vector<std::string> cohorts;
  std::string directions;
  bool builtins = true;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string static_dir;
  std::size_t workers = 0;
  int shutdown_timeout_s = 30;
};

int cmd_serve(const ServeOptions& o) {
  std::map<std::string, fts::CohortPtr> cohorts;
  if (o.builtins) cohorts = fts::builtin_cohorts();
  const auto directions = directions_from(o.directions);
  for (const auto& path : o.cohorts) {
    const std::string name = std::filesystem::path(path).stem().string();
    cohorts[name] = std::make_shared<const fts::Cohort>(fts::load_cohort(path, directions));
    log(LogLevel::info, "loaded cohort " + name + " from " + path);
  }

  // Signals are consumed by a dedicated thread; every other thread inherits
  // the blocked mask.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  fts::ServiceOptions options;
  options.static_dir = o.static_dir;
  if (o.workers > 0) options.workers = o.workers;
  fts::Service service(std::move(cohorts), options);
  const int port = service.bind(o.host, o.port);
  log(LogLevel::info, "listening on http://" + o.host + ":" + std::to_string(port));
  std::cerr.flush();

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    log(LogLevel::info, "signal " + std::to_string(sig) + " received, shutting down");
    if (!service.stop(std::chrono::seconds(o.shutdown_timeout_s))) {
      log(LogLevel::warn, "in-flight sessions did not finish in time");
      std::_Exit(0);
    }
  });
  service.listen();
  waiter.join();
  log(LogLevel::info, "stopped");
  return 0;
}

// Config files carry bare `flag=value` keys; they belong to whichever
// subcommand is being run.
class FlatConfig : public CLI::ConfigINI {
 public:
  explicit FlatConfig(std::string section) : section_(std::move(section)) {}

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    auto items = CLI::ConfigINI::from_config(input);
    for (auto& item : items)
      if (item.parents.empty()) item.parents.push_back(section_);
    return items;
  }

 private:
  std::string section_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Target-variable definition simulator"};
  app.require_subcommand(1);
  app.fallthrough();  // --config may also follow the subcommand name
  app.set_config("--config", "", "Flat key=value file with the same keys as the flags");

  GenerateOptions gen;
  auto* generate = app.add_subcommand("generate", "Write a synthetic cohort file");
  auto* size_opt = generate->add_option("--size", gen.size, "Number of candidates (>= 10)");
  generate->add_option("--seed", gen.seed, "Generator seed");
  generate->add_option("--spec", gen.spec_path, "JSON disparity spec (fractions, shifts, noise_scale)");
  generate->add_option("--out", gen.out, "Output cohort file")->required();

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Run an A/B simulation and write the result document");
  run_cmd->add_option("--cohort", run.cohort, "Cohort file")->required();
  run_cmd->add_option("--directions", run.directions, "Test direction config (test=higher|lower)");
  // Config files split unquoted comma lists into separate values; join them back.
  run_cmd->add_option("--weights-a", run.weights_a, "Five comma-separated weights for model A")
      ->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::Join)
      ->required();
  run_cmd->add_option("--weights-b", run.weights_b, "Five comma-separated weights for model B")
      ->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::Join)
      ->required();
  run_cmd->add_option("--seed", run.seed, "Master seed");
  run_cmd->add_option("--out", run.out, "Result document path ('-' for standard output)");
  run_cmd->add_option("--policy-file", run.policy_file, "Labeling policy overrides (key=value)");
  run_cmd->add_option("--train-file", run.train_file, "Training overrides (key=value)");
  run_cmd->add_flag("--concurrent", run.concurrent, "Run the A and B pipelines on two threads");

  ServeOptions serve;
  auto* serve_cmd = app.add_subcommand("serve", "Start the HTTP service");
  serve_cmd->add_option("--cohort", serve.cohorts, "Cohort files to preload (named by file stem)");
  serve_cmd->add_option("--directions", serve.directions, "Test direction config for preloaded cohorts");
  serve_cmd->add_flag("!--no-builtins", serve.builtins, "Do not offer the built-in synthetic cohorts");
  serve_cmd->add_option("--host", serve.host, "Bind address");
  serve_cmd->add_option("--port", serve.port, "Port (0 picks a free one)");
  serve_cmd->add_option("--static-dir", serve.static_dir, "Directory of UI assets served at /");
  serve_cmd->add_option("--workers", serve.workers, "Simulation worker threads (default: cores)");
  serve_cmd->add_option("--shutdown-timeout", serve.shutdown_timeout_s, "Seconds to wait for in-flight runs");

  auto* schema_cmd = app.add_subcommand("schema", "Print the result document JSON Schema");

  for (int i = 1; i < argc; ++i) {
    if (auto* sub = app.get_subcommand_no_throw(argv[i])) {
      app.config_formatter(std::make_shared<FlatConfig>(sub->get_name()));
      break;
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*generate) cmd_generate(gen, size_opt->count() > 0);
    if (*run_cmd) cmd_run(run);
    if (*serve_cmd) return cmd_serve(serve);
    if (*schema_cmd) std::cout << fts::kReportSchema;
  } catch (const fts::Error& e) {
    fts::Json j = fts::error_json(e);
    std::cerr << j.dump() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << fts::Json{{"error", {{"code", "Internal"}, {"message", e.what()}}}}.dump() << '\n';
    return 1;
  }
  return 0;
}
