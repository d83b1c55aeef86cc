#pragma once

// Word-granular interpreter standing in for the main processor. Every memory
// access is forwarded to a sink in program order:
//
//   sink.on_load(ins, addr)              load, ret pop, library word read
//   sink.on_store(ins, addr, value)      store, call push, library word write
//   sink.on_libcall(ins, LibraryAccess)  before the words of a library call
//
// The stack grows down from the top of memory; call pushes a return token
// and ret pops one. A token that is not one of ours means the return address
// was overwritten; execution then stops with ExitReason::ControlHijack.

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "dfisim/error.hpp"
#include "dfisim/mir.hpp"

namespace dfisim {

inline constexpr std::uint32_t kReturnTokenBase = 0x7E00'0000;
inline constexpr std::uint32_t kHaltToken = 0x7EFF'FFFF;
inline constexpr std::uint64_t kDefaultStepLimit = 5'000'000;

struct LibraryAccess {
  std::optional<std::uint32_t> load_addr;
  std::optional<std::uint32_t> store_addr;
  std::uint64_t len_bytes = 0;

  std::uint64_t len_words() const { return (len_bytes + 3) / 4; }
};

enum class ExitReason { Normal, ControlHijack };

struct ExecutionResult {
  ExitReason exit = ExitReason::Normal;
  std::uint64_t steps = 0;
  std::vector<std::uint32_t> registers;
  std::vector<std::uint32_t> memory; // one entry per word
};

struct NullSink {
  void on_load(const Instruction&, std::uint32_t) {}
  void on_store(const Instruction&, std::uint32_t, std::uint32_t) {}
  void on_libcall(const Instruction&, const LibraryAccess&) {}
};

inline bool in_fifo_window(std::uint32_t addr) {
  return addr >= kFifoBase && addr - kFifoBase < kFifoWindowBytes;
}

/// Library effect of a call: which operand is read, which is written.
inline LibraryAccess library_access(const Instruction& ins,
                                    const std::vector<std::uint64_t>& args) {
  LibraryAccess acc;
  if (ins.name == "memcpy" || ins.name == "memmove") {
    acc.store_addr = static_cast<std::uint32_t>(args[0]);
    acc.load_addr = static_cast<std::uint32_t>(args[1]);
    acc.len_bytes = args[2];
  } else if (ins.name == "memset") {
    acc.store_addr = static_cast<std::uint32_t>(args[0]);
    acc.len_bytes = args[2];
  } else if (ins.name == "memread") {
    acc.load_addr = static_cast<std::uint32_t>(args[0]);
    acc.len_bytes = args[1];
  }
  return acc;
}

template <class Sink> class Interpreter {
public:
  Interpreter(const Program& program, Sink& sink, std::uint64_t step_limit = kDefaultStepLimit)
      : p_(program), sink_(sink), step_limit_(step_limit) {
    if (p_.memory_bytes % 4 != 0 || p_.memory_bytes < 8)
      throw ConfigError("memory size must be a multiple of 4 and at least 8 bytes");
    for (std::uint32_t f = 0; f < p_.functions.size(); ++f)
      for (std::uint32_t i = 0; i < p_.functions[f].body.size(); ++i)
        if (p_.functions[f].body[i].op == Opcode::Call) {
          ordinal_of_.emplace(site_key(f, i + 1), static_cast<std::uint32_t>(call_sites_.size()));
          call_sites_.push_back({f, i + 1});
        }
  }

  ExecutionResult run() {
    regs_.assign(p_.registers.size(), 0);
    mem_.assign(p_.memory_bytes / 4, 0);
    mutated_ = false;
    const auto entry = p_.function_index(p_.entry);
    if (!entry)
      throw ConfigError("entry function '" + p_.entry + "' not found");

    // loader: push the halt token; not an observable program access
    regs_[kStackPointer] = p_.memory_bytes - 4;
    mem_[regs_[kStackPointer] / 4] = kHaltToken;

    std::uint32_t fn = *entry;
    std::uint32_t pc = 0;
    std::uint64_t steps = 0;
    std::int64_t cmp_lhs = 0, cmp_rhs = 0;
    ExitReason exit = ExitReason::Normal;

    while (true) {
      const auto& body = p_.functions[fn].body;
      if (pc >= body.size())
        break; // only the entry function can fall off its end
      if (++steps > step_limit_)
        throw ExecutionError("step limit exceeded");
      const Instruction& ins = body[pc];
      ++pc;
      switch (ins.op) {
      case Opcode::Label:
        if (p_.mutation && !mutated_ && ins.name == p_.mutation->at_label)
          apply_mutation();
        break;
      case Opcode::FifoAlloc:
      case Opcode::RdsLoad: break;
      case Opcode::Store: {
        const auto addr = eval(ins.b);
        const auto value = eval(ins.a);
        store_word(ins, addr, value);
        break;
      }
      case Opcode::Load: {
        const auto addr = eval(ins.b);
        regs_[ins.a.index] = load_word(ins, addr);
        break;
      }
      case Opcode::LibCall: run_library(ins); break;
      case Opcode::Cmp:
        cmp_lhs = static_cast<std::int32_t>(eval(ins.a));
        cmp_rhs = static_cast<std::int32_t>(eval(ins.b));
        break;
      case Opcode::Jmp: pc = ins.target; break;
      case Opcode::Jne:
        if (cmp_lhs != cmp_rhs)
          pc = ins.target;
        break;
      case Opcode::Jeq:
        if (cmp_lhs == cmp_rhs)
          pc = ins.target;
        break;
      case Opcode::Jlt:
        if (cmp_lhs < cmp_rhs)
          pc = ins.target;
        break;
      case Opcode::Jge:
        if (cmp_lhs >= cmp_rhs)
          pc = ins.target;
        break;
      case Opcode::Add: regs_[ins.a.index] = eval(ins.b) + eval(ins.c); break;
      case Opcode::Sub: regs_[ins.a.index] = eval(ins.b) - eval(ins.c); break;
      case Opcode::Mul: regs_[ins.a.index] = eval(ins.b) * eval(ins.c); break;
      case Opcode::Mov: regs_[ins.a.index] = eval(ins.b); break;
      case Opcode::Call: {
        const auto ordinal = call_ordinal(fn, pc);
        regs_[kStackPointer] -= 4;
        store_word(ins, regs_[kStackPointer], kReturnTokenBase + ordinal);
        fn = *p_.function_index(ins.name);
        pc = 0;
        break;
      }
      case Opcode::Ret: {
        const auto token = load_word(ins, regs_[kStackPointer]);
        regs_[kStackPointer] += 4;
        if (token == kHaltToken)
          return finish(steps, exit);
        if (token < kReturnTokenBase || token - kReturnTokenBase >= call_sites_.size()) {
          exit = ExitReason::ControlHijack;
          return finish(steps, exit);
        }
        const auto& site = call_sites_[token - kReturnTokenBase];
        fn = site.function;
        pc = site.resume;
        break;
      }
      }
    }
    return finish(steps, exit);
  }

private:
  struct CallSite {
    std::uint32_t function;
    std::uint32_t resume;
  };

  const Program& p_;
  Sink& sink_;
  std::uint64_t step_limit_;
  std::vector<std::uint32_t> regs_;
  std::vector<std::uint32_t> mem_;
  std::vector<CallSite> call_sites_;
  std::unordered_map<std::uint64_t, std::uint32_t> ordinal_of_;
  bool mutated_ = false;

  ExecutionResult finish(std::uint64_t steps, ExitReason exit) {
    return {exit, steps, std::move(regs_), std::move(mem_)};
  }

  static std::uint64_t site_key(std::uint32_t fn, std::uint32_t resume) {
    return (std::uint64_t{fn} << 32) | resume;
  }

  // Return tokens number call sites in textual order, so they survive
  // instrumentation unchanged.
  std::uint32_t call_ordinal(std::uint32_t fn, std::uint32_t resume) const {
    return ordinal_of_.at(site_key(fn, resume));
  }

  void apply_mutation() {
    mutated_ = true;
    const auto* sym = p_.find_symbol(p_.mutation->symbol);
    if (!sym || sym->words == 0)
      throw ExecutionError("mutation target '" + p_.mutation->symbol + "' is not in memory");
    mem_[sym->address / 4] = p_.mutation->value;
  }

  std::uint32_t eval(const Operand& o) const {
    switch (o.kind) {
    case Operand::Kind::Imm: return static_cast<std::uint32_t>(o.imm);
    case Operand::Kind::Reg: return regs_[o.index];
    case Operand::Kind::Sym: return p_.symbols[o.index].address;
    case Operand::Kind::None: break;
    }
    return 0;
  }

  std::uint64_t eval_wide(const Operand& o) const {
    if (o.kind == Operand::Kind::Imm)
      return static_cast<std::uint64_t>(o.imm);
    return eval(o);
  }

  void check_address(std::uint32_t addr) const {
    if (addr % 4 != 0)
      throw ExecutionError("unaligned access at " + std::to_string(addr));
    if (addr >= p_.memory_bytes)
      throw ExecutionError("access outside memory at " + std::to_string(addr));
  }

  void store_word(const Instruction& ins, std::uint32_t addr, std::uint32_t value) {
    if (in_fifo_window(addr)) {
      // the FIFO is not part of data memory; the collector judges the access
      sink_.on_store(ins, addr, value);
      return;
    }
    check_address(addr);
    sink_.on_store(ins, addr, value);
    mem_[addr / 4] = value;
  }

  std::uint32_t load_word(const Instruction& ins, std::uint32_t addr) {
    check_address(addr);
    sink_.on_load(ins, addr);
    return mem_[addr / 4];
  }

  void run_library(const Instruction& ins) {
    std::vector<std::uint64_t> args;
    for (const auto& a : ins.args)
      args.push_back(eval_wide(a));
    const auto acc = library_access(ins, args);
    const auto words = acc.len_words();
    if (acc.load_addr)
      check_range(*acc.load_addr, words);
    if (acc.store_addr)
      check_range(*acc.store_addr, words);
    sink_.on_libcall(ins, acc);
    if (ins.name == "memset") {
      const auto value = static_cast<std::uint32_t>(args[1]);
      for (std::uint64_t i = 0; i < words; ++i)
        store_word(ins, *acc.store_addr + 4 * static_cast<std::uint32_t>(i), value);
    } else if (ins.name == "memcpy") {
      for (std::uint64_t i = 0; i < words; ++i) {
        const auto off = 4 * static_cast<std::uint32_t>(i);
        const auto v = load_word(ins, *acc.load_addr + off);
        store_word(ins, *acc.store_addr + off, v);
      }
    } else if (ins.name == "memmove") {
      std::vector<std::uint32_t> tmp;
      for (std::uint64_t i = 0; i < words; ++i)
        tmp.push_back(load_word(ins, *acc.load_addr + 4 * static_cast<std::uint32_t>(i)));
      for (std::uint64_t i = 0; i < words; ++i)
        store_word(ins, *acc.store_addr + 4 * static_cast<std::uint32_t>(i), tmp[i]);
    } else if (ins.name == "memread") {
      for (std::uint64_t i = 0; i < words; ++i)
        load_word(ins, *acc.load_addr + 4 * static_cast<std::uint32_t>(i));
    }
  }

  void check_range(std::uint32_t addr, std::uint64_t words) const {
    if (words == 0)
      return;
    check_address(addr);
    if (addr + 4 * words > p_.memory_bytes)
      throw ExecutionError("library range outside memory at " + std::to_string(addr));
  }
};

template <class Sink>
ExecutionResult interpret(const Program& program, Sink& sink,
                          std::uint64_t step_limit = kDefaultStepLimit) {
  return Interpreter<Sink>(program, sink, step_limit).run();
}

inline ExecutionResult interpret(const Program& program) {
  NullSink sink;
  return interpret(program, sink);
}

} // namespace dfisim
