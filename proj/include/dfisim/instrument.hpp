#pragma once

// Instrumentation pass. Adds the channel prologue to the entry function,
// a DFI store after every ordinary load/store, the library sequence before
// every library call, and return protection around functions that return:
//
//   fifo_alloc
//   rds_load
//   store 0x0DF1D0D0 dfi_global
//   store 0x0DF1F1F0 packet_mem_addr
//   store <return info, call side> dfi_global     function entry
//   store sp dfi_global
//   ...
//   store x1 addr1 // identifier: 12
//   store 0x0000000C dfi_global
//   ...
//   store <return info, return side> dfi_global   before every ret
//   store sp dfi_global
//   ret

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "dfisim/error.hpp"
#include "dfisim/info_word.hpp"
#include "dfisim/mir.hpp"
#include "dfisim/rda.hpp"

namespace dfisim {

/// Header, operand addresses and length words of a library call, in order.
struct LibrarySequence {
  std::uint32_t header = 0;
  std::vector<Operand> operands; // load addr?, store addr?, len low, len high?
};

/// Builds the sequence from the call's static operands. The length is 64-bit
/// only for literal lengths of 2^32 bytes or more.
inline LibrarySequence emit_library_sequence(const Instruction& call) {
  const bool memread = call.name == "memread";
  const bool memset = call.name == "memset";
  const bool has_load = !memset;
  const bool has_store = !memread;
  const Operand& len = memread ? call.args[1] : call.args[2];
  const bool len64 = len.kind == Operand::Kind::Imm && static_cast<std::uint64_t>(len.imm) >> 32;
  LibrarySequence seq;
  seq.header = encode_library_header(*call.id, has_load, has_store, len64);
  if (has_load)
    seq.operands.push_back(memread ? call.args[0] : call.args[1]);
  if (has_store)
    seq.operands.push_back(call.args[0]);
  if (len.kind == Operand::Kind::Imm) {
    const auto bytes = static_cast<std::uint64_t>(len.imm);
    seq.operands.push_back(Operand::immediate(static_cast<std::int64_t>(bytes & 0xFFFF'FFFF)));
    if (len64)
      seq.operands.push_back(Operand::immediate(static_cast<std::int64_t>(bytes >> 32)));
  } else {
    seq.operands.push_back(len);
  }
  return seq;
}

namespace instr_detail {

inline bool has_ret(const Function& f) {
  for (const auto& ins : f.body)
    if (ins.op == Opcode::Ret)
      return true;
  return false;
}

/// Adds dfi_global after the last data object and packet_mem_addr at the
/// FIFO base, keeping the table sorted. Returns old index -> new index.
inline std::vector<std::uint32_t> add_channel_symbols(Program& p) {
  if (p.find_symbol(kDfiGlobal))
    throw ConfigError("program already declares dfi_global");
  std::uint32_t end = kDataBase;
  for (const auto& s : p.symbols)
    if (s.words > 0 && s.end() <= p.memory_bytes)
      end = std::max(end, s.end());
  if (end + 4 > p.stack_base())
    throw ConfigError("no room for dfi_global below the stack");
  std::vector<std::pair<Symbol, std::optional<std::uint32_t>>> all;
  for (std::uint32_t i = 0; i < p.symbols.size(); ++i)
    all.push_back({p.symbols[i], i});
  all.push_back({Symbol{std::string(kDfiGlobal), end, 1}, std::nullopt});
  if (!p.find_symbol(kPacketMemAddr))
    all.push_back({Symbol{std::string(kPacketMemAddr), kFifoBase, 0}, std::nullopt});
  std::stable_sort(all.begin(), all.end(),
                   [](const auto& x, const auto& y) { return x.first.address < y.first.address; });
  std::vector<std::uint32_t> remap(p.symbols.size());
  p.symbols.clear();
  for (std::uint32_t i = 0; i < all.size(); ++i) {
    if (all[i].second)
      remap[*all[i].second] = i;
    p.symbols.push_back(all[i].first);
  }
  return remap;
}

inline std::uint32_t symbol_index(const Program& p, std::string_view name) {
  for (std::uint32_t i = 0; i < p.symbols.size(); ++i)
    if (p.symbols[i].name == name)
      return i;
  throw ConfigError("missing symbol " + std::string(name));
}

} // namespace instr_detail

/// Rejects programs that are already instrumented.
inline Program instrument(Program program, const RdsMap& rds,
                          const InstrumentationConfig& cfg = {}) {
  using namespace instr_detail;
  if (program.is_instrumented() || program.find_symbol(kDfiGlobal))
    throw ConfigError("program is already instrumented");
  if (cfg.dfi_dummy == cfg.packet_dummy)
    throw ConfigError("dfi_dummy and packet_dummy must differ");
  if (rds.max_static_id != program.max_static_id)
    throw ConfigError("RDS was computed for a different program");

  const auto remap = add_channel_symbols(program);
  auto fix = [&](Operand& o) {
    if (o.kind == Operand::Kind::Sym)
      o.index = remap[o.index];
  };
  for (auto& f : program.functions)
    for (auto& ins : f.body) {
      fix(ins.a);
      fix(ins.b);
      fix(ins.c);
      for (auto& a : ins.args)
        fix(a);
    }

  const auto dfi_global = Operand::sym(symbol_index(program, kDfiGlobal));
  const auto packet_mem = Operand::sym(symbol_index(program, kPacketMemAddr));
  const InstructionId return_base{std::uint32_t{program.max_static_id.value} + 1};
  const bool any_ret = std::any_of(program.functions.begin(), program.functions.end(),
                                   [](const Function& f) { return has_ret(f); });
  std::uint32_t call_side = 0, return_side = 0;
  if (any_ret) {
    if (std::uint32_t{return_base.value} != std::uint32_t{program.max_static_id.value} + 1)
      throw ConfigError("return identifier overflow");
    call_side = encode_return_info(return_base, cfg.thread_id, false);
    return_side = encode_return_info(return_base, cfg.thread_id, true);
  }

  auto channel = [&](Operand value) {
    Instruction s;
    s.op = Opcode::Store;
    s.a = value;
    s.b = dfi_global;
    return s;
  };
  auto imm = [](std::uint32_t v) { return Operand::immediate(v); };
  const auto sp = Operand::reg(kStackPointer);

  for (auto& f : program.functions) {
    std::vector<Instruction> out;
    out.reserve(f.body.size() * 2 + 8);
    if (f.name == program.entry) {
      out.push_back(Instruction{Opcode::FifoAlloc, {}, {}, {}, {}, {}, {}, 0});
      out.push_back(Instruction{Opcode::RdsLoad, {}, {}, {}, {}, {}, {}, 0});
      out.push_back(channel(imm(cfg.dfi_dummy)));
      Instruction pk;
      pk.op = Opcode::Store;
      pk.a = imm(cfg.packet_dummy);
      pk.b = packet_mem;
      out.push_back(pk);
    }
    const bool protect = has_ret(f);
    if (protect) {
      out.push_back(channel(imm(call_side)));
      out.push_back(channel(sp));
    }
    for (auto& ins : f.body) {
      switch (ins.op) {
      case Opcode::Store:
        out.push_back(ins);
        out.push_back(channel(imm(encode_basic_info(AccessType::Store, *ins.id))));
        break;
      case Opcode::Load:
        out.push_back(ins);
        out.push_back(channel(imm(encode_basic_info(AccessType::Load, *ins.id))));
        break;
      case Opcode::LibCall: {
        const auto seq = emit_library_sequence(ins);
        out.push_back(channel(imm(seq.header)));
        for (const auto& o : seq.operands)
          out.push_back(channel(o));
        out.push_back(ins);
        break;
      }
      case Opcode::Ret:
        out.push_back(channel(imm(return_side)));
        out.push_back(channel(sp));
        out.push_back(ins);
        break;
      default: out.push_back(ins); break;
      }
    }
    std::unordered_map<std::string, std::uint32_t> labels;
    for (std::uint32_t i = 0; i < out.size(); ++i)
      if (out[i].op == Opcode::Label)
        labels.emplace(out[i].name, i);
    for (auto& ins : out)
      if (is_branch(ins.op))
        ins.target = labels.at(ins.name);
    f.body = std::move(out);
  }
  return program;
}

} // namespace dfisim
