// dfi-sim: run mini-IR programs through the enforcement pipeline.
// Exit status: 0 clean, 2 violations detected, 1 error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "dfisim/dfisim.hpp"

namespace {

constexpr int kExitClean = 0;
constexpr int kExitError = 1;
constexpr int kExitViolations = 2;

dfisim::Program load(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw dfisim::ConfigError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return dfisim::parse_program(ss.str());
}

struct RunOptions {
  std::uint32_t buffer = 2048;
  std::string opts = "ABCE";
  bool no_compress = false;
  bool opt_d_ungated = false;
  std::string report = "json";
  std::uint64_t seed = 0;

  dfisim::PipelineConfig config() const {
    dfisim::PipelineConfig cfg;
    cfg.buffer_bytes = buffer;
    cfg.opts = dfisim::OptSet::parse(opts);
    cfg.compression = !no_compress;
    cfg.opt_d_ungated = opt_d_ungated;
    cfg.seed = seed;
    return cfg;
  }
};

int cmd_run(const std::string& file, const RunOptions& o) {
  const auto format = dfisim::parse_report_format(o.report);
  const auto result = dfisim::run_pipeline(load(file), o.config());
  std::cout << dfisim::emit_report(result.report, format);
  return result.report.violations.empty() ? kExitClean : kExitViolations;
}

int cmd_diff(const std::string& file, const RunOptions& o) {
  const auto program = load(file);
  const auto cfg = o.config();
  const auto pipe = dfisim::run_pipeline(program, cfg);
  const auto ref = dfisim::run_reference(program, cfg);
  for (const auto& v : pipe.report.violations)
    std::cout << "pipeline  " << dfisim::format_violation(v) << '\n';
  for (const auto& v : ref.report.violations)
    std::cout << "reference " << dfisim::format_violation(v) << '\n';
  const bool verdicts = dfisim::verdict_multiset(pipe.report.violations) ==
                        dfisim::verdict_multiset(ref.report.violations);
  const bool rdt = pipe.rdt == ref.rdt;
  std::cout << "verdicts " << (verdicts ? "equal" : "DIFFER") << ", final RDT "
            << (rdt ? "equal" : "DIFFERS") << '\n';
  if (!verdicts || !rdt)
    return kExitError;
  return ref.report.violations.empty() ? kExitClean : kExitViolations;
}

int cmd_corpus(const std::string& kind_name, std::size_t count, std::uint64_t seed, const std::string& emit,
               const RunOptions& o) {
  const auto kind = dfisim::parse_scenario_kind(kind_name);
  const auto cfg = o.config();
  if (!emit.empty())
    std::filesystem::create_directories(emit);
  bool any = false;
  std::size_t index = 0;
  for (const auto& s : dfisim::gen_corpus(kind, count, seed)) {
    const auto attack = dfisim::run_pipeline(s.program, cfg);
    const auto clean = dfisim::run_pipeline(s.clean_twin, cfg);
    const auto ref = dfisim::run_reference(s.program, cfg);
    const bool eq = dfisim::equivalent(attack, ref);
    any = any || !attack.report.violations.empty() || !clean.report.violations.empty();
    std::cout << s.name << '[' << index << "] violations=" << attack.report.violations.size()
              << " clean_twin=" << clean.report.violations.size()
              << " packets=" << attack.report.metrics.packets_generated
              << " wire_bytes=" << attack.report.metrics.wire_bytes
              << " reference=" << (eq ? "equal" : "DIFFERS") << '\n';
    if (!emit.empty()) {
      std::ofstream(std::filesystem::path(emit) / (s.name + "_" + std::to_string(index)))
          << dfisim::print_program(s.program);
    }
    if (!eq)
      return kExitError;
    ++index;
  }
  return any ? kExitViolations : kExitClean;
}

void add_run_options(CLI::App* cmd, RunOptions& o) {
  cmd->add_option("--buffer", o.buffer, "transmission buffer size in bytes");
  cmd->add_option("--opts", o.opts, "enabled optimizations, e.g. ABCE or none");
  cmd->add_flag("--no-compress", o.no_compress, "send every packet uncompressed");
  cmd->add_flag("--opt-d-paper-mode", o.opt_d_ungated, "apply rule D without the staleness gate");
  cmd->add_option("--seed", o.seed, "seed recorded in the configuration");
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"hardware-assisted data-flow integrity simulator"};
  app.require_subcommand(1);

  RunOptions opts;
  std::string file;
  auto* run = app.add_subcommand("run", "instrument, execute and check a program");
  run->add_option("file", file, "mini-IR source")->required();
  add_run_options(run, opts);
  run->add_option("--report", opts.report, "json or table");

  auto* diff = app.add_subcommand("diff", "compare the pipeline against the inline reference checker");
  diff->add_option("file", file, "mini-IR source")->required();
  add_run_options(diff, opts);

  std::string kind;
  std::size_t count = 10;
  std::uint64_t seed = 0;
  std::string emit;
  auto* corpus = app.add_subcommand("corpus", "generate and run a scenario corpus");
  corpus->add_option("--kind", kind, "ret_overwrite, heap_overflow, over_read or random")->required();
  corpus->add_option("--count", count, "number of programs");
  corpus->add_option("--seed", seed, "corpus seed");
  corpus->add_option("--emit", emit, "directory to write the generated programs to");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitClean : kExitError;
  }

  try {
    if (*run)
      return cmd_run(file, opts);
    if (*diff)
      return cmd_diff(file, opts);
    return cmd_corpus(kind, count, seed, emit, opts);
  } catch (const dfisim::ParseError& e) {
    std::cerr << file << ": " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
  }
  return kExitError;
}
