#pragma once

// End-to-end runs. run_pipeline instruments the program and drives
// interpreter -> collector -> FIFO -> checker in deterministic lockstep:
// the checker drains the FIFO after every flush and whenever the producer
// finds it full. run_reference interprets the original program and checks
// every access inline, with no buffering, pruning or compression.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <tuple>
#include <vector>

#include "dfisim/checker.hpp"
#include "dfisim/collector.hpp"
#include "dfisim/fifo.hpp"
#include "dfisim/instrument.hpp"
#include "dfisim/interpreter.hpp"
#include "dfisim/mir.hpp"
#include "dfisim/rda.hpp"
#include "dfisim/violation.hpp"

namespace dfisim {

struct PipelineConfig {
  std::uint32_t buffer_bytes = 2048;
  OptSet opts = kDefaultOpts;
  bool compression = true;
  bool opt_d_ungated = false;
  bool detect_double_dfi_store = false;
  std::size_t fifo_capacity = kDefaultFifoCapacity;
  std::uint64_t seed = 0;
  std::uint64_t step_limit = kDefaultStepLimit;
  InstrumentationConfig instrumentation{};
};

struct Metrics {
  std::uint64_t packets_generated = 0;
  PruneCounts pruned{};
  std::uint64_t records_emitted = 0;
  std::uint64_t wire_bytes = 0;
  std::uint64_t baseline_bytes = 0;
  double compression_ratio = 0.0;
  std::uint64_t producer_stalls = 0;
  std::uint64_t max_latency_packets = 0;

  bool operator==(const Metrics&) const = default;
};

struct Report {
  std::vector<Violation> violations;
  Metrics metrics;

  std::size_t count(ViolationKind k) const {
    return static_cast<std::size_t>(std::count_if(
        violations.begin(), violations.end(), [k](const Violation& v) { return v.kind == k; }));
  }
  bool operator==(const Report&) const = default;
};

struct RunResult {
  Report report;
  Rdt rdt;
  ExitReason exit = ExitReason::Normal;
};

/// Verdicts sorted by (kind, load, found, addr); latency is not compared.
inline std::vector<std::tuple<int, std::uint16_t, std::uint16_t, std::uint32_t>>
verdict_multiset(const std::vector<Violation>& vs) {
  std::vector<std::tuple<int, std::uint16_t, std::uint16_t, std::uint32_t>> keys;
  for (const auto& v : vs)
    keys.push_back(v.verdict_key());
  std::sort(keys.begin(), keys.end());
  return keys;
}

inline bool equivalent(const RunResult& a, const RunResult& b) {
  return verdict_multiset(a.report.violations) == verdict_multiset(b.report.violations) &&
         a.rdt == b.rdt;
}

inline void require_uninstrumented(const Program& program) {
  if (program.is_instrumented())
    throw ConfigError("expected an uninstrumented program");
}

inline RunResult run_pipeline(const Program& program, const RdsMap& rds,
                              const PipelineConfig& cfg = {}) {
  require_uninstrumented(program);
  const Program instrumented = instrument(program, rds, cfg.instrumentation);

  FifoMemory fifo(cfg.fifo_capacity);
  Checker checker(rds, program.memory_bytes);
  std::uint64_t stalls = 0;
  Collector* collector_ptr = nullptr;

  CollectorConfig ccfg;
  ccfg.buffer_bytes = cfg.buffer_bytes;
  ccfg.opts = cfg.opts;
  ccfg.compression = cfg.compression;
  ccfg.opt_d_gate = !cfg.opt_d_ungated;
  ccfg.detect_double_dfi_store = cfg.detect_double_dfi_store;
  ccfg.instrumentation = cfg.instrumentation;

  Collector collector(ccfg, [&](const Record& r) {
    while (!fifo.push(r)) {
      ++stalls;
      checker.consume(fifo, collector_ptr->generated());
    }
  });
  collector_ptr = &collector;

  struct LockstepSink {
    Collector& collector;
    Checker& checker;
    FifoMemory& fifo;
    std::uint64_t seen_flushes = 0;

    void drain_if_flushed() {
      if (collector.metrics().flushes != seen_flushes) {
        seen_flushes = collector.metrics().flushes;
        checker.consume(fifo, collector.generated());
      }
    }
    void on_load(const Instruction&, std::uint32_t addr) { collector.observe_load(addr); }
    void on_store(const Instruction&, std::uint32_t addr, std::uint32_t value) {
      collector.observe_store(addr, value);
      drain_if_flushed();
    }
    void on_libcall(const Instruction&, const LibraryAccess&) {}
  } sink{collector, checker, fifo};

  const auto exec = interpret(instrumented, sink, cfg.step_limit * 4);
  collector.finish();
  while (!checker.consume(fifo, collector.generated())) {
  }

  RunResult out{{}, checker.rdt(), exec.exit};
  auto& vs = out.report.violations;
  vs = collector.violations();
  vs.insert(vs.end(), checker.violations().begin(), checker.violations().end());

  const auto& cm = collector.metrics();
  auto& m = out.report.metrics;
  m.packets_generated = cm.packets_generated;
  m.pruned = cm.pruned;
  m.records_emitted = cm.records_emitted;
  m.wire_bytes = cm.wire_bytes;
  m.baseline_bytes = cm.baseline_bytes;
  m.compression_ratio =
      cm.baseline_bytes ? static_cast<double>(cm.wire_bytes) / static_cast<double>(cm.baseline_bytes) : 0.0;
  m.producer_stalls = stalls;
  m.max_latency_packets = checker.max_latency();
  return out;
}

inline RunResult run_pipeline(const Program& program, const PipelineConfig& cfg = {}) {
  return run_pipeline(program, compute_rds(program), cfg);
}

namespace pipeline_detail {

/// Inline checker over the uninstrumented program.
class ReferenceSink {
public:
  ReferenceSink(const Program& p, const RdsMap& rds)
      : p_(p), rds_(rds), rdt_(p.memory_bytes), composite_(composite_return_id(p.max_static_id)) {
    for (const auto& f : p.functions)
      has_ret_.push_back(std::any_of(f.body.begin(), f.body.end(),
                                     [](const Instruction& i) { return i.op == Opcode::Ret; }));
    const auto entry = *p.function_index(p.entry);
    if (has_ret_[entry])
      rdt_.set(p.memory_bytes - 4, composite_);
  }

  void on_store(const Instruction& ins, std::uint32_t addr, std::uint32_t) {
    if (in_fifo_window(addr)) {
      violations_.push_back({ViolationKind::FifoAccessViolation, {}, {}, addr, 0});
      return;
    }
    if (ins.op == Opcode::Store) {
      rdt_.set(addr, *ins.id);
    } else if (ins.op == Opcode::Call) {
      if (has_ret_[*p_.function_index(ins.name)])
        rdt_.set(addr, composite_);
    }
  }

  void on_load(const Instruction& ins, std::uint32_t addr) {
    if (ins.op == Opcode::Load)
      check(*ins.id, addr);
    else if (ins.op == Opcode::Ret)
      check(composite_, addr);
  }

  void on_libcall(const Instruction& ins, const LibraryAccess& acc) {
    const auto words = acc.len_words();
    if (acc.load_addr)
      for (std::uint64_t i = 0; i < words; ++i)
        check(*ins.id, *acc.load_addr + 4 * static_cast<std::uint32_t>(i));
    if (acc.store_addr)
      for (std::uint64_t i = 0; i < words; ++i)
        rdt_.set(*acc.store_addr + 4 * static_cast<std::uint32_t>(i), *ins.id);
  }

  const Rdt& rdt() const { return rdt_; }
  const std::vector<Violation>& violations() const { return violations_; }

private:
  const Program& p_;
  const RdsMap& rds_;
  Rdt rdt_;
  InstructionId composite_;
  std::vector<bool> has_ret_;
  std::vector<Violation> violations_;

  void check(InstructionId load, std::uint32_t addr) {
    const auto found = rdt_.get(addr);
    const bool ok = load > rds_.max_static_id ? found == load : rds_.allows(load, found);
    if (!ok)
      violations_.push_back({ViolationKind::DfiCheckFailure, load, found, addr, 0});
  }
};

} // namespace pipeline_detail

/// The same check against a caller-supplied RDS, e.g. a weakened one.
inline RunResult run_reference(const Program& program, const RdsMap& rds,
                               const PipelineConfig& cfg = {}) {
  require_uninstrumented(program);
  pipeline_detail::ReferenceSink sink(program, rds);
  const auto exec = interpret(program, sink, cfg.step_limit);
  RunResult out{{}, sink.rdt(), exec.exit};
  out.report.violations = sink.violations();
  return out;
}

inline RunResult run_reference(const Program& program, const PipelineConfig& cfg = {}) {
  return run_reference(program, compute_rds(program), cfg);
}

} // namespace dfisim
