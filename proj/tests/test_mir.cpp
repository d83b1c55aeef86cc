#include <gtest/gtest.h>

#include "dfisim/interpreter.hpp"
#include "dfisim/mir.hpp"
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

std::vector<std::uint16_t> ids_of(const Program& p) {
  std::vector<std::uint16_t> out;
  for (const auto& f : p.functions)
    for (const auto& ins : f.body)
      if (ins.id)
        out.push_back(ins.id->value);
  return out;
}

} // namespace

TEST(Parse, BranchJoinLineNumbersBecomeIdentifiers) {
  const auto p = parse_program(kBranchJoin);
  ASSERT_EQ(p.functions.size(), 1u);
  EXPECT_EQ(p.functions[0].body.size(), 8u);
  EXPECT_EQ(ids_of(p), (std::vector<std::uint16_t>{1, 2, 5, 6, 8}));
  EXPECT_EQ(p.max_static_id, InstructionId{8});
  EXPECT_EQ(p.functions[0].body[3].target, 6u);
}

TEST(Parse, EmptyTextIsAValidEmptyProgram) {
  const auto p = parse_program("");
  EXPECT_EQ(p.instruction_count(), 0u);
  EXPECT_EQ(p.max_static_id, InstructionId{0});
  const auto r = interpret(p);
  EXPECT_EQ(r.exit, ExitReason::Normal);
}

TEST(Parse, ExplicitIdentifiersAreKept) {
  const auto p = parse_program("store 1 a // identifier: 12\nload r1 a // id 25\n");
  EXPECT_EQ(ids_of(p), (std::vector<std::uint16_t>{12, 25}));
  EXPECT_EQ(p.max_static_id, InstructionId{25});
}

TEST(Parse, ErrorsCarryLineNumbers) {
  try {
    parse_program("store 1 a\nfrob r1\n");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse_program("x:\nx:\n"), ParseError);
  EXPECT_THROW(parse_program("jmp nowhere\n"), ParseError);
  EXPECT_THROW(parse_program("store 1 a // identifier: 3\nstore 2 a // identifier: 3\n"), Error);
  EXPECT_THROW(parse_program("store 1 a // identifier: 0\n"), Error);
  EXPECT_THROW(parse_program("libcall memcpy(&a, &b)\n"), ParseError);
  EXPECT_THROW(parse_program("call missing\n"), ParseError);
}

TEST(Identifiers, ProgramWithoutMemoryAccessesHasMaxZero) {
  const auto p = parse_program("mov r1 3\nadd r2 r1 4\n");
  EXPECT_EQ(p.max_static_id, InstructionId{0});
  EXPECT_TRUE(ids_of(p).empty());
}

TEST(Identifiers, DeterministicForIdenticalText) {
  const auto text = print_program(gen_scenario(ScenarioKind::Random, 11).program);
  EXPECT_EQ(parse_program(text), parse_program(text));
}

TEST(Identifiers, CallsAndReturnsCarryIds) {
  const auto p = parse_program(".func main\ncall f\n.func f\nstore 1 a\nret\n");
  EXPECT_EQ(ids_of(p), (std::vector<std::uint16_t>{1, 2, 3}));
}

TEST(Identifiers, TooManyMemoryInstructionsIsAnError) {
  std::string text;
  for (std::uint32_t i = 0; i <= kMaxIdentifier; ++i)
    text += "store 1 a\n";
  EXPECT_THROW(parse_program(text), Error);
}

TEST(Print, RoundTripsGeneratedPrograms) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto p = gen_scenario(ScenarioKind::Random, seed).program;
    const auto again = parse_program(print_program(p));
    ASSERT_EQ(again, p) << "seed " << seed << "\n" << print_program(p);
  }
  for (auto k : {ScenarioKind::RetOverwrite, ScenarioKind::HeapOverflow, ScenarioKind::OverRead}) {
    const auto p = gen_scenario(k, 3).program;
    EXPECT_EQ(parse_program(print_program(p)), p) << scenario_name(k);
  }
}

TEST(Symbols, DeclaredVariablesAreLaidOutFromDataBase) {
  const auto p = parse_program(".var buf 4\n.var x 1\nstore 1 x\nstore 2 y\n");
  EXPECT_EQ(p.find_symbol("buf")->address, kDataBase);
  EXPECT_EQ(p.find_symbol("x")->address, kDataBase + 16);
  EXPECT_EQ(p.find_symbol("y")->address, kDataBase + 20);
}

TEST(Interpret, BranchJoinEqualOperandsFallThrough) {
  struct Trace {
    std::vector<std::uint16_t> ids;
    void on_load(const Instruction& i, std::uint32_t) { ids.push_back(i.id->value); }
    void on_store(const Instruction& i, std::uint32_t, std::uint32_t) { ids.push_back(i.id->value); }
    void on_libcall(const Instruction&, const LibraryAccess&) {}
  } trace;
  interpret(parse_program(kBranchJoin), trace);
  EXPECT_EQ(trace.ids, (std::vector<std::uint16_t>{1, 2, 5, 6, 8}));
}

TEST(Interpret, SameProgramSameResult) {
  const auto p = gen_scenario(ScenarioKind::Random, 5).program;
  const auto a = interpret(p);
  const auto b = interpret(p);
  EXPECT_EQ(a.memory, b.memory);
  EXPECT_EQ(a.steps, b.steps);
}

TEST(Interpret, GeneratedProgramsRunCleanly) {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto p = gen_scenario(ScenarioKind::Random, seed).program;
    ASSERT_LE(p.instruction_count(), kMaxRandomInstructions);
    ASSERT_NO_THROW({
      const auto r = interpret(p);
      ASSERT_EQ(r.exit, ExitReason::Normal);
    }) << "seed " << seed;
  }
}

TEST(Interpret, OutOfBoundsAccessIsAnError) {
  EXPECT_THROW(interpret(parse_program(".mem 512\n.stack 16\nstore 1 4096\n")), ExecutionError);
  EXPECT_THROW(interpret(parse_program("store 1 2\n")), ExecutionError);
}

TEST(Interpret, StepLimitStopsRunawayLoops) {
  const auto p = parse_program("top:\njmp top\n");
  NullSink sink;
  EXPECT_THROW(interpret(p, sink, 1000), ExecutionError);
}

TEST(Interpret, OverwrittenReturnTokenHijacksControl) {
  const auto s = gen_scenario(ScenarioKind::RetOverwrite, 1);
  EXPECT_EQ(interpret(s.program).exit, ExitReason::ControlHijack);
  EXPECT_EQ(interpret(s.clean_twin).exit, ExitReason::Normal);
}
