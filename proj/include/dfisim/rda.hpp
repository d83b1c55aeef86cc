#pragma once

// May-reaching-definitions analysis over the mini-IR.
//
// Registers are tracked as Const(value) | Ptr(set of memory objects) | Top.
// Pointer arithmetic on a Ptr stays inside its objects. Memory is a sparse
// word map over a default set: a Const address gives a strong update, a Ptr
// a weak update over its objects, Top a weak update everywhere. Calls are
// inlined up to kInlineDepth; deeper calls havoc memory with every store id
// the callee can reach. A call into a function that contains ret defines
// the return slot with the composite return identifier.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dfisim/cfg.hpp"
#include "dfisim/error.hpp"
#include "dfisim/mir.hpp"

namespace dfisim {

inline constexpr int kInlineDepth = 4;

/// Sorted set of instruction identifiers.
class IdSet {
public:
  IdSet() = default;
  IdSet(std::initializer_list<std::uint16_t> ids) : ids_(ids) { normalize(); }

  bool contains(InstructionId id) const {
    return std::binary_search(ids_.begin(), ids_.end(), id.value);
  }
  void insert(InstructionId id) {
    auto it = std::lower_bound(ids_.begin(), ids_.end(), id.value);
    if (it == ids_.end() || *it != id.value)
      ids_.insert(it, id.value);
  }
  /// Returns whether anything was added.
  bool merge(const IdSet& other) {
    if (other.ids_.empty())
      return false;
    std::vector<std::uint16_t> out;
    out.reserve(ids_.size() + other.ids_.size());
    std::set_union(ids_.begin(), ids_.end(), other.ids_.begin(), other.ids_.end(),
                   std::back_inserter(out));
    const bool grew = out.size() != ids_.size();
    ids_ = std::move(out);
    return grew;
  }
  bool includes(const IdSet& other) const {
    return std::includes(ids_.begin(), ids_.end(), other.ids_.begin(), other.ids_.end());
  }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  const std::vector<std::uint16_t>& values() const { return ids_; }
  auto begin() const { return ids_.begin(); }
  auto end() const { return ids_.end(); }

  bool operator==(const IdSet&) const = default;

private:
  void normalize() {
    std::sort(ids_.begin(), ids_.end());
    ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
  }
  std::vector<std::uint16_t> ids_;
};

/// Identifier under which the return-address slot is defined and checked:
/// one past the largest static id, offset by the thread.
inline InstructionId composite_return_id(InstructionId max_static_id, std::uint32_t thread_id = 0) {
  const std::uint32_t v = std::uint32_t{max_static_id.value} + 1 + thread_id;
  if (v > kMaxIdentifier)
    throw ConfigError("return identifier overflow");
  return InstructionId{v};
}

struct RdsMap {
  std::map<InstructionId, IdSet> entries;
  InstructionId max_static_id;

  const IdSet* find(InstructionId load) const {
    auto it = entries.find(load);
    return it == entries.end() ? nullptr : &it->second;
  }
  bool allows(InstructionId load, InstructionId writer) const {
    const auto* s = find(load);
    return s && s->contains(writer);
  }
  bool operator==(const RdsMap&) const = default;
};

/// One line per load: `loadId: {id, id, ...}`, ascending.
inline std::string dump_rds(const RdsMap& rds) {
  std::ostringstream os;
  for (const auto& [load, set] : rds.entries) {
    os << load.value << ": {";
    bool first = true;
    for (auto id : set) {
      os << (first ? "" : ", ") << id;
      first = false;
    }
    os << "}\n";
  }
  return os.str();
}

namespace rda_detail {

struct AbsVal {
  enum class Kind { Const, Ptr, Top };
  Kind kind = Kind::Const;
  std::uint32_t value = 0;          // Const
  std::vector<std::uint32_t> objs;  // Ptr: sorted object indices

  static AbsVal constant(std::uint32_t v) { return {Kind::Const, v, {}}; }
  static AbsVal top() { return {Kind::Top, 0, {}}; }
  static AbsVal pointer(std::vector<std::uint32_t> o) {
    std::sort(o.begin(), o.end());
    o.erase(std::unique(o.begin(), o.end()), o.end());
    return {Kind::Ptr, 0, std::move(o)};
  }
  bool operator==(const AbsVal&) const = default;
};

struct MemState {
  IdSet base;                            // definitions of words not in `words`
  std::map<std::uint32_t, IdSet> words;  // word index -> definitions

  const IdSet& defs(std::uint32_t w) const {
    auto it = words.find(w);
    return it == words.end() ? base : it->second;
  }
  bool operator==(const MemState&) const = default;
};

struct State {
  std::vector<AbsVal> regs;
  MemState mem;
  bool operator==(const State&) const = default;
};

class Analyzer {
public:
  Analyzer(const Program& p, RdsMap& out)
      : p_(p), out_(out), objs_(memory_objects(p)), composite_(composite_return_id(p.max_static_id)) {
    for (std::uint32_t f = 0; f < p_.functions.size(); ++f) {
      cfgs_.push_back(build_cfg(p_.functions[f]));
      bool has_ret = false;
      for (const auto& ins : p_.functions[f].body)
        has_ret = has_ret || ins.op == Opcode::Ret;
      has_ret_.push_back(has_ret);
    }
  }

  void run() {
    const auto entry = *p_.function_index(p_.entry);
    State s;
    s.regs.assign(p_.registers.size(), AbsVal::constant(0));
    const std::uint32_t sp = p_.memory_bytes - 4;
    s.regs[kStackPointer] = AbsVal::constant(sp);
    if (has_ret_[entry])
      s.mem.words[sp / 4] = IdSet{composite_.value};
    analyze_function(entry, std::move(s), 0);
  }

private:
  const Program& p_;
  RdsMap& out_;
  std::vector<MemoryObject> objs_;
  std::vector<Cfg> cfgs_;
  std::vector<bool> has_ret_;
  InstructionId composite_;

  std::optional<std::uint32_t> object_of(std::uint32_t addr) const {
    for (std::uint32_t i = 0; i < objs_.size(); ++i)
      if (objs_[i].contains(addr))
        return i;
    return std::nullopt;
  }

  // ---- lattice ------------------------------------------------------------

  AbsVal join(const AbsVal& a, const AbsVal& b) const {
    using K = AbsVal::Kind;
    if (a == b)
      return a;
    if (a.kind == K::Top || b.kind == K::Top)
      return AbsVal::top();
    std::vector<std::uint32_t> objs;
    for (const AbsVal* v : {&a, &b}) {
      if (v->kind == K::Const) {
        auto o = object_of(v->value);
        if (!o)
          return AbsVal::top();
        objs.push_back(*o);
      } else {
        objs.insert(objs.end(), v->objs.begin(), v->objs.end());
      }
    }
    return AbsVal::pointer(std::move(objs));
  }

  static void join_mem(MemState& into, const MemState& from) {
    // words present only on one side take the other side's default
    for (auto& [w, set] : into.words)
      if (!from.words.contains(w))
        set.merge(from.base);
    for (const auto& [w, set] : from.words) {
      auto it = into.words.find(w);
      if (it == into.words.end()) {
        IdSet s = into.base;
        s.merge(set);
        into.words.emplace(w, std::move(s));
      } else {
        it->second.merge(set);
      }
    }
    into.base.merge(from.base);
  }

  State join_state(const State& a, const State& b) const {
    State r = a;
    for (std::size_t i = 0; i < r.regs.size(); ++i)
      r.regs[i] = join(a.regs[i], b.regs[i]);
    join_mem(r.mem, b.mem);
    return r;
  }

  // ---- evaluation -----------------------------------------------------------

  AbsVal eval(const State& s, const Operand& o) const {
    switch (o.kind) {
    case Operand::Kind::Imm: return AbsVal::constant(static_cast<std::uint32_t>(o.imm));
    case Operand::Kind::Reg: return s.regs[o.index];
    case Operand::Kind::Sym: return AbsVal::constant(p_.symbols[o.index].address);
    case Operand::Kind::None: break;
    }
    return AbsVal::top();
  }

  AbsVal arith(Opcode op, const AbsVal& x, const AbsVal& y) const {
    using K = AbsVal::Kind;
    if (x.kind == K::Const && y.kind == K::Const) {
      switch (op) {
      case Opcode::Add: return AbsVal::constant(x.value + y.value);
      case Opcode::Sub: return AbsVal::constant(x.value - y.value);
      case Opcode::Mul: return AbsVal::constant(x.value * y.value);
      default: return AbsVal::top();
      }
    }
    if (op == Opcode::Mul)
      return AbsVal::top();
    // address +/- offset stays within the objects the address points into
    auto as_ptr = [&](const AbsVal& v) -> std::optional<AbsVal> {
      if (v.kind == K::Ptr)
        return v;
      if (v.kind == K::Const)
        if (auto o = object_of(v.value))
          return AbsVal::pointer({*o});
      return std::nullopt;
    };
    auto is_offset = [&](const AbsVal& v) {
      return v.kind == K::Top || (v.kind == K::Const && !object_of(v.value));
    };
    if (auto p = as_ptr(x); p && is_offset(y))
      return *p;
    if (op == Opcode::Add)
      if (auto p = as_ptr(y); p && is_offset(x))
        return *p;
    return AbsVal::top();
  }

  // ---- memory effects -------------------------------------------------------

  void weak_word(MemState& m, std::uint32_t w, InstructionId id) const {
    auto it = m.words.find(w);
    if (it == m.words.end()) {
      IdSet s = m.base;
      s.insert(id);
      m.words.emplace(w, std::move(s));
    } else {
      it->second.insert(id);
    }
  }

  void weak_everywhere(MemState& m, const IdSet& ids) const {
    m.base.merge(ids);
    for (auto& [w, set] : m.words)
      set.merge(ids);
  }

  void weak_object(MemState& m, std::uint32_t obj, InstructionId id) const {
    for (std::uint32_t a = objs_[obj].begin; a < objs_[obj].end; a += 4)
      weak_word(m, a / 4, id);
  }

  void store(State& s, const AbsVal& addr, InstructionId id) const {
    using K = AbsVal::Kind;
    if (addr.kind == K::Const) {
      s.mem.words[addr.value / 4] = IdSet{id.value};
    } else if (addr.kind == K::Ptr) {
      for (auto o : addr.objs)
        weak_object(s.mem, o, id);
    } else {
      IdSet one{id.value};
      weak_everywhere(s.mem, one);
    }
  }

  IdSet all_defs(const MemState& m) const {
    IdSet r = m.base;
    for (const auto& [w, set] : m.words)
      r.merge(set);
    return r;
  }

  IdSet object_defs(const MemState& m, std::uint32_t begin, std::uint32_t end) const {
    IdSet r;
    bool gap = false;
    for (std::uint32_t a = begin; a < end; a += 4) {
      auto it = m.words.find(a / 4);
      if (it == m.words.end())
        gap = true;
      else
        r.merge(it->second);
    }
    if (gap)
      r.merge(m.base);
    return r;
  }

  IdSet read_defs(const State& s, const AbsVal& addr) const {
    using K = AbsVal::Kind;
    if (addr.kind == K::Const)
      return s.mem.defs(addr.value / 4);
    if (addr.kind == K::Ptr) {
      IdSet r;
      for (auto o : addr.objs)
        r.merge(object_defs(s.mem, objs_[o].begin, objs_[o].end));
      return r;
    }
    return all_defs(s.mem);
  }

  // Library range [addr, addr + len): exact when both are known, to the end
  // of the object when only the address is known, whole objects otherwise.
  struct Range {
    enum class Kind { Empty, Exact, Weak, Everywhere } kind = Kind::Empty;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> spans; // byte [begin, end)
  };

  Range library_range(const AbsVal& addr, const AbsVal& len, std::uint64_t wide_len) const {
    using K = AbsVal::Kind;
    Range r;
    const bool len_known = len.kind == K::Const;
    if (len_known && wide_len == 0)
      return r;
    if (addr.kind == K::Const) {
      if (len_known) {
        const std::uint64_t end = addr.value + 4 * ((wide_len + 3) / 4);
        r.kind = Range::Kind::Exact;
        r.spans.push_back({addr.value, static_cast<std::uint32_t>(std::min<std::uint64_t>(end, p_.memory_bytes))});
        return r;
      }
      if (auto o = object_of(addr.value)) {
        r.kind = Range::Kind::Weak;
        r.spans.push_back({addr.value, objs_[*o].end});
        return r;
      }
      r.kind = Range::Kind::Everywhere;
      return r;
    }
    if (addr.kind == K::Ptr) {
      r.kind = Range::Kind::Weak;
      for (auto o : addr.objs)
        r.spans.push_back({objs_[o].begin, objs_[o].end});
      return r;
    }
    r.kind = Range::Kind::Everywhere;
    return r;
  }

  IdSet range_defs(const State& s, const Range& r) const {
    if (r.kind == Range::Kind::Everywhere)
      return all_defs(s.mem);
    IdSet out;
    for (auto [b, e] : r.spans)
      out.merge(object_defs(s.mem, b, e));
    return out;
  }

  void range_store(State& s, const Range& r, InstructionId id) const {
    switch (r.kind) {
    case Range::Kind::Empty: break;
    case Range::Kind::Exact:
      for (auto [b, e] : r.spans)
        for (std::uint32_t a = b; a < e; a += 4)
          s.mem.words[a / 4] = IdSet{id.value};
      break;
    case Range::Kind::Weak:
      for (auto [b, e] : r.spans)
        for (std::uint32_t a = b; a < e; a += 4)
          weak_word(s.mem, a / 4, id);
      break;
    case Range::Kind::Everywhere: weak_everywhere(s.mem, IdSet{id.value}); break;
    }
  }

  void record(InstructionId load, const IdSet& defs) { out_.entries[load].merge(defs); }

  // ---- calls ----------------------------------------------------------------

  void reachable_functions(std::uint32_t f, std::vector<bool>& seen) const {
    if (seen[f])
      return;
    seen[f] = true;
    for (const auto& ins : p_.functions[f].body)
      if (ins.op == Opcode::Call)
        reachable_functions(*p_.function_index(ins.name), seen);
  }

  IdSet universal_writers() const {
    IdSet all{composite_.value};
    for (const auto& fn : p_.functions)
      for (const auto& ins : fn.body)
        if (ins.id && (ins.op == Opcode::Store || ins.op == Opcode::LibCall))
          all.insert(*ins.id);
    return all;
  }

  void havoc_call(State& s, std::uint32_t callee) {
    std::vector<bool> seen(p_.functions.size(), false);
    reachable_functions(callee, seen);
    IdSet writers;
    for (std::uint32_t f = 0; f < seen.size(); ++f) {
      if (!seen[f])
        continue;
      if (has_ret_[f])
        writers.insert(composite_);
      for (const auto& ins : p_.functions[f].body) {
        if (ins.op == Opcode::Store || (ins.op == Opcode::LibCall && ins.name != "memread"))
          writers.insert(*ins.id);
        if (ins.op == Opcode::Load || (ins.op == Opcode::LibCall && ins.name != "memset"))
          record(*ins.id, universal_writers());
      }
    }
    weak_everywhere(s.mem, writers);
    for (std::size_t r = 0; r < s.regs.size(); ++r)
      if (r != kStackPointer)
        s.regs[r] = AbsVal::top();
  }

  void call(State& s, const Instruction& ins, int depth) {
    const auto callee = *p_.function_index(ins.name);
    s.regs[kStackPointer] = arith(Opcode::Sub, s.regs[kStackPointer], AbsVal::constant(4));
    if (has_ret_[callee])
      store(s, s.regs[kStackPointer], composite_);
    if (depth + 1 > kInlineDepth) {
      havoc_call(s, callee);
      s.regs[kStackPointer] = arith(Opcode::Add, s.regs[kStackPointer], AbsVal::constant(4));
      return;
    }
    auto out = analyze_function(callee, s, depth + 1);
    unreachable_ = !out;
    if (out)
      s = std::move(*out);
  }

  bool unreachable_ = false;

  // ---- transfer -------------------------------------------------------------

  void transfer(State& s, const Instruction& ins, int depth) {
    switch (ins.op) {
    case Opcode::Store:
      if (ins.id)
        store(s, eval(s, ins.b), *ins.id);
      break;
    case Opcode::Load:
      record(*ins.id, read_defs(s, eval(s, ins.b)));
      s.regs[ins.a.index] = AbsVal::top();
      break;
    case Opcode::LibCall: library(s, ins); break;
    case Opcode::Add:
    case Opcode::Sub:
    case Opcode::Mul: s.regs[ins.a.index] = arith(ins.op, eval(s, ins.b), eval(s, ins.c)); break;
    case Opcode::Mov: s.regs[ins.a.index] = eval(s, ins.b); break;
    case Opcode::Call: call(s, ins, depth); break;
    case Opcode::Ret:
      s.regs[kStackPointer] = arith(Opcode::Add, s.regs[kStackPointer], AbsVal::constant(4));
      break;
    default: break;
    }
  }

  void library(State& s, const Instruction& ins) {
    auto wide = [](const Operand& o) {
      return o.kind == Operand::Kind::Imm ? static_cast<std::uint64_t>(o.imm) : 0;
    };
    const bool memset = ins.name == "memset";
    const bool memread = ins.name == "memread";
    const Operand& len_op = memread ? ins.args[1] : ins.args[2];
    const AbsVal len = eval(s, len_op);
    const std::uint64_t len_value =
        len_op.kind == Operand::Kind::Imm ? wide(len_op) : (len.kind == AbsVal::Kind::Const ? len.value : 0);
    if (!memset) {
      const Operand& src = memread ? ins.args[0] : ins.args[1];
      record(*ins.id, range_defs(s, library_range(eval(s, src), len, len_value)));
    }
    if (!memread)
      range_store(s, library_range(eval(s, ins.args[0]), len, len_value), *ins.id);
  }

  /// Joined state after the function returns (or falls off its end);
  /// nullopt when no exit is reachable.
  std::optional<State> analyze_function(std::uint32_t f, State entry, int depth) {
    const auto& fn = p_.functions[f];
    const auto& cfg = cfgs_[f];
    if (cfg.empty())
      return entry;
    std::vector<std::optional<State>> in(cfg.blocks.size());
    in[Cfg::entry] = std::move(entry);
    std::set<std::uint32_t> work{Cfg::entry};
    std::optional<State> exit;
    while (!work.empty()) {
      const auto b = *work.begin();
      work.erase(work.begin());
      State s = *in[b];
      bool dead = false;
      for (auto i = cfg.blocks[b].begin; i < cfg.blocks[b].end; ++i) {
        unreachable_ = false;
        transfer(s, fn.body[i], depth);
        if (unreachable_) {
          dead = true;
          break;
        }
      }
      if (dead)
        continue;
      if (cfg.blocks[b].is_exit)
        exit = exit ? join_state(*exit, s) : s;
      for (auto succ : cfg.blocks[b].successors) {
        if (!in[succ]) {
          in[succ] = s;
          work.insert(succ);
        } else {
          State joined = join_state(*in[succ], s);
          if (!(joined == *in[succ])) {
            in[succ] = std::move(joined);
            work.insert(succ);
          }
        }
      }
    }
    return exit;
  }
};

} // namespace rda_detail

/// RDS of every load and every loading library call. Sound for executions
/// that stay inside the objects their pointers were derived from.
inline RdsMap compute_rds(const Program& program) {
  RdsMap rds;
  rds.max_static_id = program.max_static_id;
  for (const auto& fn : program.functions)
    for (const auto& ins : fn.body) {
      if (!ins.id)
        continue;
      if (ins.op == Opcode::Load ||
          (ins.op == Opcode::LibCall && (ins.name == "memcpy" || ins.name == "memmove" ||
                                         ins.name == "memread")))
        rds.entries.try_emplace(*ins.id);
    }
  rda_detail::Analyzer(program, rds).run();
  return rds;
}

/// Re-runs the analysis seeded with `rds`; true when nothing changes.
inline bool verify_fixpoint(const Program& program, const RdsMap& rds) {
  RdsMap seeded = rds;
  rda_detail::Analyzer(program, seeded).run();
  return seeded == rds;
}

} // namespace dfisim
