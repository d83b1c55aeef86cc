#include <gtest/gtest.h>

#include <map>
#include <optional>
#include <random>
#include <set>

#include "dfisim/cfg.hpp"
#include "dfisim/interpreter.hpp"
#include "dfisim/rda.hpp"
#include "dfisim/scenario.hpp"

using namespace dfisim;

namespace {

constexpr const char* kBranchJoin = R"(store x1 addr1
store x2 addr2
cmp x1 x2
jne label
store x2 addr1
load x3 addr1
label:
load x4 addr1
)";

/// Reaching definitions by enumerating every path of a loop-free program.
/// Branch conditions are ignored, so both successors are always explored;
/// library calls read their whole source range before writing.
class PathOracle {
public:
  explicit PathOracle(const Program& p) : p_(p) {}

  std::map<std::uint16_t, std::set<std::uint16_t>> run() {
    // unreachable loads keep an empty set
    for (const auto& f : p_.functions)
      for (const auto& ins : f.body)
        if (ins.op == Opcode::Load || (ins.op == Opcode::LibCall && ins.name != "memset"))
          out_[ins.id->value];
    State s;
    s.regs.assign(p_.registers.size(), std::nullopt);
    s.fn = *p_.function_index(p_.entry);
    walk(std::move(s));
    return out_;
  }

private:
  struct State {
    std::vector<std::optional<std::uint32_t>> regs;
    std::map<std::uint32_t, std::uint16_t> writer;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> stack;
    std::uint32_t fn = 0;
    std::uint32_t pc = 0;
  };

  const Program& p_;
  std::map<std::uint16_t, std::set<std::uint16_t>> out_;

  std::optional<std::uint32_t> eval(const State& s, const Operand& o) const {
    switch (o.kind) {
    case Operand::Kind::Imm: return static_cast<std::uint32_t>(o.imm);
    case Operand::Kind::Sym: return p_.symbols[o.index].address;
    case Operand::Kind::Reg: return s.regs[o.index];
    case Operand::Kind::None: break;
    }
    return std::nullopt;
  }

  std::uint32_t address(const State& s, const Operand& o) const {
    const auto a = eval(s, o);
    if (!a)
      throw std::logic_error("oracle needs constant addresses");
    return *a;
  }

  void read(State& s, std::uint16_t id, std::uint32_t addr) {
    auto& set = out_[id];
    if (auto it = s.writer.find(addr); it != s.writer.end())
      set.insert(it->second);
  }

  void walk(State s) {
    while (true) {
      const auto& body = p_.functions[s.fn].body;
      if (s.pc >= body.size())
        return;
      const Instruction& ins = body[s.pc++];
      switch (ins.op) {
      case Opcode::Store: s.writer[address(s, ins.b)] = ins.id->value; break;
      case Opcode::Load:
        read(s, ins.id->value, address(s, ins.b));
        s.regs[ins.a.index] = std::nullopt;
        break;
      case Opcode::LibCall: {
        std::vector<std::uint64_t> args;
        for (const auto& a : ins.args)
          args.push_back(eval(s, a).value_or(0)); // unknown only for memset's fill value
        const auto acc = library_access(ins, args);
        if (acc.load_addr)
          for (std::uint64_t w = 0; w < acc.len_words(); ++w)
            read(s, ins.id->value, *acc.load_addr + 4 * static_cast<std::uint32_t>(w));
        if (acc.store_addr)
          for (std::uint64_t w = 0; w < acc.len_words(); ++w)
            s.writer[*acc.store_addr + 4 * static_cast<std::uint32_t>(w)] = ins.id->value;
        break;
      }
      case Opcode::Mov: s.regs[ins.a.index] = eval(s, ins.b); break;
      case Opcode::Add: {
        const auto x = eval(s, ins.b), y = eval(s, ins.c);
        s.regs[ins.a.index] = x && y ? std::optional(*x + *y) : std::nullopt;
        break;
      }
      case Opcode::Sub:
      case Opcode::Mul: s.regs[ins.a.index] = std::nullopt; break;
      case Opcode::Jmp: s.pc = ins.target; break;
      case Opcode::Jne:
      case Opcode::Jeq:
      case Opcode::Jlt:
      case Opcode::Jge: {
        State taken = s;
        taken.pc = ins.target;
        walk(std::move(taken));
        break;
      }
      case Opcode::Call:
        s.stack.emplace_back(s.fn, s.pc);
        s.fn = *p_.function_index(ins.name);
        s.pc = 0;
        break;
      case Opcode::Ret:
        if (s.stack.empty())
          return;
        std::tie(s.fn, s.pc) = s.stack.back();
        s.stack.pop_back();
        break;
      default: break;
      }
    }
  }
};

std::map<std::uint16_t, std::set<std::uint16_t>> as_map(const RdsMap& rds) {
  std::map<std::uint16_t, std::set<std::uint16_t>> m;
  for (const auto& [id, set] : rds.entries)
    m[id.value] = {set.values().begin(), set.values().end()};
  return m;
}

IdSet set_of(const RdsMap& rds, std::uint32_t id) {
  const auto* s = rds.find(InstructionId{id});
  if (!s)
    throw std::out_of_range("no RDS entry for " + std::to_string(id));
  return *s;
}

} // namespace

TEST(Rda, BranchJoinReachingDefinitionSets) {
  const auto rds = compute_rds(parse_program(kBranchJoin));
  EXPECT_EQ(set_of(rds, 6), (IdSet{5}));
  EXPECT_EQ(set_of(rds, 8), (IdSet{1, 5}));
  EXPECT_EQ(dump_rds(rds), "6: {5}\n8: {1, 5}\n");
}

TEST(Rda, BranchJoinControlFlowGraph) {
  const auto p = parse_program(kBranchJoin);
  const auto cfg = build_cfg(p.functions[0]);
  ASSERT_EQ(cfg.blocks.size(), 3u);
  auto succ = cfg.blocks[0].successors;
  std::sort(succ.begin(), succ.end());
  EXPECT_EQ(succ, (std::vector<std::uint32_t>{1, 2}));
  EXPECT_EQ(cfg.blocks[1].successors, (std::vector<std::uint32_t>{2}));
  EXPECT_TRUE(cfg.blocks[2].is_exit);
}

TEST(Rda, EmptyAndLoadFreePrograms) {
  EXPECT_TRUE(compute_rds(parse_program("")).entries.empty());
  EXPECT_TRUE(compute_rds(parse_program("store 1 a\nstore 2 b\n")).entries.empty());
}

TEST(Rda, NeverWrittenWordHasEmptySet) {
  const auto rds = compute_rds(parse_program("load r1 a\n"));
  EXPECT_TRUE(set_of(rds, 1).empty());
}

TEST(Rda, MatchesPathEnumerationOnLoopFreePrograms) {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const auto p = gen_loop_free(seed);
    const auto expected = PathOracle(p).run();
    const auto actual = as_map(compute_rds(p));
    ASSERT_EQ(actual, expected) << "seed " << seed << "\n" << print_program(p);
  }
}

TEST(Rda, OutputIsAFixpoint) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto p = gen_scenario(ScenarioKind::Random, seed).program;
    ASSERT_TRUE(verify_fixpoint(p, compute_rds(p))) << "seed " << seed;
  }
  for (auto k : {ScenarioKind::RetOverwrite, ScenarioKind::HeapOverflow, ScenarioKind::OverRead}) {
    const auto p = gen_scenario(k, 0).program;
    EXPECT_TRUE(verify_fixpoint(p, compute_rds(p)));
  }
}

TEST(Rda, LoopCarriedDefinitionsReach) {
  const auto rds = compute_rds(parse_program(R"(store 0 x
mov r1 0
top:
cmp r1 4
jge out
load r2 x
store r1 x
add r1 r1 1
jmp top
out:
load r3 x
)"));
  // ids: store x = 1, load in loop = 6, store in loop = 7, load after = 11
  EXPECT_EQ(set_of(rds, 6), (IdSet{1, 7}));
  EXPECT_EQ(set_of(rds, 11), (IdSet{1, 7}));
}

TEST(Rda, PointerStoresStayInsideTheirObject) {
  const auto rds = compute_rds(parse_program(R"(.var buf 4
.var flag 1
store 1 flag
load r1 n
mul r2 r1 4
add r2 r2 &buf
store 7 r2
load r3 flag
load r4 buf
)"));
  EXPECT_EQ(set_of(rds, 6), (IdSet{1}));
  EXPECT_EQ(set_of(rds, 7), (IdSet{5}));
}

TEST(Rda, CallsDefineThroughTheCallee) {
  const auto rds = compute_rds(parse_program(R"(.func main
store 1 x
call set
load r1 x
.func set
store 2 x
ret
)"));
  // ids: store 1, call 2, load 3, store 4, ret 5
  EXPECT_EQ(set_of(rds, 3), (IdSet{4}));
}

TEST(Rda, LibraryCallsReadAndWriteRanges) {
  const auto rds = compute_rds(parse_program(R"(.var a 4
.var b 4
libcall memset(&a, 0, 16)
store 5 b
libcall memcpy(&b, &a, 8)
load r1 b
add r2 &b 8
load r3 r2
)"));
  EXPECT_EQ(set_of(rds, 3), (IdSet{1}));
  EXPECT_EQ(set_of(rds, 4), (IdSet{3}));
  EXPECT_EQ(set_of(rds, 6), (IdSet{}));
}

TEST(Rda, BranchGuardedStoresOnlyGrowSets) {
  std::mt19937_64 rng(3);
  for (std::uint64_t seed = 0; seed < 150; ++seed) {
    const auto p = gen_loop_free(seed);
    const auto before = compute_rds(p);
    const auto text = print_program(p);

    // splice "if (...) store" into main at a random instruction boundary
    std::vector<std::string> lines;
    std::size_t start = 0;
    for (std::size_t nl; (nl = text.find('\n', start)) != std::string::npos; start = nl + 1)
      lines.push_back(text.substr(start, nl - start));
    const auto main_at = std::find(lines.begin(), lines.end(), ".func main") - lines.begin();
    auto end_main = static_cast<std::size_t>(main_at) + 1;
    while (end_main < lines.size() && !lines[end_main].starts_with(".func"))
      ++end_main;
    const auto at = static_cast<std::size_t>(main_at) + 1 + rng() % (end_main - main_at);
    const auto id = p.max_static_id.value + 1;
    const std::string target = rng() % 2 ? "sc" + std::to_string(rng() % 3) : "arr1";
    lines.insert(lines.begin() + static_cast<std::ptrdiff_t>(at),
                 {"cmp r1 3", "jne spliced", "store r2 " + target + " // identifier: " + std::to_string(id),
                  "spliced:"});
    std::string spliced;
    for (const auto& l : lines)
      spliced += l + "\n";

    const auto after = compute_rds(parse_program(spliced));
    for (const auto& [load, set] : before.entries) {
      const auto* grown = after.find(load);
      ASSERT_TRUE(grown);
      ASSERT_TRUE(grown->includes(set)) << "seed " << seed << " load " << load.value << "\n" << spliced;
    }
  }
}

TEST(Rda, SoundOnRandomExecutions) {
  // every writer observed at run time must be in the load's set
  struct Observer {
    const RdsMap& rds;
    std::map<std::uint32_t, InstructionId> writer;
    std::size_t misses = 0;
    void on_store(const Instruction& i, std::uint32_t a, std::uint32_t) {
      if (i.op == Opcode::Store)
        writer[a] = *i.id;
    }
    void on_load(const Instruction& i, std::uint32_t a) {
      if (i.op != Opcode::Load)
        return;
      auto it = writer.find(a);
      if (it != writer.end() && !rds.allows(*i.id, it->second))
        ++misses;
    }
    void on_libcall(const Instruction& i, const LibraryAccess& acc) {
      if (acc.load_addr)
        for (std::uint64_t w = 0; w < acc.len_words(); ++w) {
          auto it = writer.find(*acc.load_addr + 4 * static_cast<std::uint32_t>(w));
          if (it != writer.end() && !rds.allows(*i.id, it->second))
            ++misses;
        }
      if (acc.store_addr)
        for (std::uint64_t w = 0; w < acc.len_words(); ++w)
          writer[*acc.store_addr + 4 * static_cast<std::uint32_t>(w)] = *i.id;
    }
  };
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const auto p = gen_scenario(ScenarioKind::Random, seed).program;
    const auto rds = compute_rds(p);
    Observer obs{rds, {}, 0};
    interpret(p, obs);
    ASSERT_EQ(obs.misses, 0u) << "seed " << seed;
  }
}
