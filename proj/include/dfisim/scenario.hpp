#pragma once

// Program generators: attack scenarios with clean twins, the random corpus
// used by the equivalence oracle, and the strided locality examples. Every
// generator emits mini-IR text and parses it, so the parser is exercised on
// the same inputs the pipeline runs.

#include <algorithm>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dfisim/error.hpp"
#include "dfisim/mir.hpp"

namespace dfisim {

inline constexpr std::size_t kMaxRandomInstructions = 200;

enum class ScenarioKind { RetOverwrite, HeapOverflow, OverRead, Random };

inline std::string_view scenario_name(ScenarioKind k) {
  switch (k) {
  case ScenarioKind::RetOverwrite: return "ret_overwrite";
  case ScenarioKind::HeapOverflow: return "heap_overflow";
  case ScenarioKind::OverRead: return "over_read";
  case ScenarioKind::Random: return "random";
  }
  return "?";
}

inline ScenarioKind parse_scenario_kind(std::string_view s) {
  for (auto k : {ScenarioKind::RetOverwrite, ScenarioKind::HeapOverflow, ScenarioKind::OverRead,
                 ScenarioKind::Random})
    if (scenario_name(k) == s)
      return k;
  throw ConfigError("unknown scenario kind '" + std::string(s) + "'");
}

struct Expectation {
  bool attack_detected = false;
  bool clean = true;
};

/// `program` carries the attack mutation when there is one; `clean_twin`
/// is the same program without it.
struct Scenario {
  std::string name;
  Program program;
  Program clean_twin;
  Expectation expected;

  bool has_attack() const { return program.mutation.has_value(); }
};

namespace scenario_detail {

class Emitter {
public:
  template <class... Ts> Emitter& line(const Ts&... parts) {
    ((os_ << parts), ...);
    os_ << '\n';
    if (counts_)
      ++instructions_;
    return *this;
  }
  /// Directives and labels do not count against the instruction budget.
  template <class... Ts> Emitter& raw(const Ts&... parts) {
    counts_ = false;
    line(parts...);
    counts_ = true;
    return *this;
  }
  std::size_t instructions() const { return instructions_; }
  std::string str() const { return os_.str(); }

private:
  std::ostringstream os_;
  std::size_t instructions_ = 0;
  bool counts_ = true;
};

/// Attack twin and clean twin differ only in the mutation.
inline Scenario twins(std::string name, const std::string& text, Mutation m) {
  Scenario s;
  s.name = std::move(name);
  s.clean_twin = parse_program(text);
  s.program = s.clean_twin;
  s.program.mutation = std::move(m);
  s.expected = {true, true};
  return s;
}

// A copy loop walks a stack buffer of `words` words; the request count comes
// from memory and the attacker raises it by one, reaching the return slot.
inline Scenario ret_overwrite(std::mt19937_64& rng) {
  const std::uint32_t words = 2 + static_cast<std::uint32_t>(rng() % 7);
  Emitter e;
  e.raw(".mem 4096").raw(".stack 512").raw(".var req_n 1").raw(".var sink 1");
  e.raw(".func main");
  e.line("store ", words, " req_n");
  e.raw("input:");
  e.line("call vuln");
  e.line("load r1 sink");
  e.raw(".func vuln");
  e.line("sub sp sp ", 4 * words);
  e.line("load r1 req_n");
  e.line("mov r9 0");
  e.raw("copy:");
  e.line("cmp r9 r1");
  e.line("jge done");
  e.line("mul r8 r9 4");
  e.line("add r8 r8 sp");
  e.line("store 0x41414141 r8");
  e.line("add r9 r9 1");
  e.line("jmp copy");
  e.raw("done:");
  e.line("load r2 sp");
  e.line("store r2 sink");
  e.line("add sp sp ", 4 * words);
  e.line("ret");
  return twins("ret_overwrite", e.str(), {"input", "req_n", words + 1});
}

// Two size-class pools sit back to back. The buffer is carved from the end
// of pool0 with size req_len + 16; a negative req_len under-allocates to
// zero bytes, so the fixed 8-word write lands on the session object in pool1.
inline Scenario heap_overflow(std::mt19937_64& rng) {
  const std::uint32_t token = 0x5E550000u | static_cast<std::uint32_t>(rng() & 0xFFFF);
  Emitter e;
  e.raw(".mem 4096").raw(".stack 512");
  e.raw(".var req_len 1").raw(".var pool0 16").raw(".var pool1 8");
  e.line("store 16 req_len");
  e.line("store ", token, " pool1");
  e.raw("input:");
  e.line("load r1 req_len");
  e.line("add r1 r1 16");
  e.line("mov r7 &pool0");
  e.line("sub r7 r7 r1");
  e.line("add r7 r7 64");
  e.line("mov r9 0");
  e.raw("fill:");
  e.line("cmp r9 8");
  e.line("jge filled");
  e.line("mul r8 r9 4");
  e.line("add r8 r8 r7");
  e.line("store 0x58585858 r8");
  e.line("add r9 r9 1");
  e.line("jmp fill");
  e.raw("filled:");
  e.line("load r2 pool1");
  e.line("cmp r2 ", token);
  e.line("jne reject");
  e.line("load r3 r7");
  e.raw("reject:");
  return twins("heap_overflow", e.str(), {"input", "req_len", 0xFFFFFFF0u});
}

// The reply copies `claimed` bytes of an 8-word payload; the secret that
// follows the payload leaks when the claim exceeds 32.
inline Scenario over_read(std::mt19937_64& rng) {
  const std::uint32_t extra = 4 * (1 + static_cast<std::uint32_t>(rng() % 4));
  Emitter e;
  e.raw(".mem 4096").raw(".stack 512");
  e.raw(".var claimed 1").raw(".var payload 8").raw(".var secret 4").raw(".var reply 12");
  e.line("libcall memset(&secret, 0x5A, 16)");
  e.line("libcall memset(&payload, 0x41, 32)");
  e.line("store 32 claimed");
  e.raw("input:");
  e.line("load r1 claimed");
  e.line("libcall memcpy(&reply, &payload, r1)");
  e.line("libcall memread(&reply, r1)");
  return twins("over_read", e.str(), {"input", "claimed", 32 + extra});
}

/// Branchy store/load soup. Loops are bounded by their counters, pointers
/// stay inside their arrays, and every word is written before it is read.
class RandomProgram {
public:
  explicit RandomProgram(std::mt19937_64& rng, std::size_t budget) : rng_(rng), budget_(budget) {}

  std::string generate() {
    const int arrays = 2 + pick(3);
    for (int i = 0; i < arrays; ++i)
      widths_.push_back(4 + pick(13));
    const int helpers = pick(3);
    const bool main_returns = pick(10) < 3;

    e_.raw(".mem 4096").raw(".stack 512");
    for (int i = 0; i < arrays; ++i)
      e_.raw(".var arr", i, " ", widths_[i]);
    for (int i = 0; i < kScalars; ++i)
      e_.raw(".var sc", i, " 1");

    e_.raw(".func main");
    for (int i = 0; i < arrays; ++i)
      e_.line("libcall memset(&arr", i, ", ", pick(256), ", ", 4 * widths_[i], ")");
    for (int i = 0; i < kScalars; ++i)
      e_.line("store ", pick(100), " sc", i);
    for (int r = 1; r <= 6; ++r)
      e_.line("mov r", r, " ", pick(64));
    helpers_ = helpers;
    caller_ = -1;
    block(0, budget_ - 12 * static_cast<std::size_t>(helpers));
    if (main_returns)
      e_.line("ret");

    for (int h = 0; h < helpers; ++h) {
      e_.raw(".func helper", h);
      caller_ = h;
      const bool frame = pick(2) == 0;
      if (frame) {
        e_.line("sub sp sp 8");
        e_.line("store r", 1 + pick(6), " sp");
      }
      for (int n = 1 + pick(4); n > 0; --n)
        simple();
      if (frame) {
        e_.line("load r", 1 + pick(6), " sp");
        e_.line("add sp sp 8");
      }
      e_.line("ret");
    }
    return e_.str();
  }

private:
  static constexpr int kScalars = 4;
  std::mt19937_64& rng_;
  std::size_t budget_;
  Emitter e_;
  std::vector<int> widths_;
  int helpers_ = 0;
  int caller_ = -1; // -1 is main; helpers call only higher-numbered helpers
  int labels_ = 0;

  int pick(int n) { return static_cast<int>(rng_() % static_cast<std::uint64_t>(n)); }
  std::string reg() { return "r" + std::to_string(1 + pick(6)); }
  std::string value() { return pick(3) == 0 ? std::to_string(pick(1000)) : reg(); }
  std::string label(std::string_view stem) { return std::string(stem) + std::to_string(labels_++); }

  void block(int depth, std::size_t limit) {
    const int stmts = 1 + pick(depth == 0 ? 40 : 5);
    for (int i = 0; i < stmts && e_.instructions() + 16 < limit; ++i) {
      const int k = pick(10);
      if (k < 6 || depth >= 2)
        simple();
      else if (k < 8)
        branch(depth, limit);
      else if (depth == 0 || (depth == 1 && pick(2) == 0))
        loop(depth, limit);
      else
        simple();
    }
  }

  void simple() {
    const int arr = pick(static_cast<int>(widths_.size()));
    const int w = widths_[arr];
    switch (pick(9)) {
    case 0: e_.line("store ", value(), " sc", pick(kScalars)); break;
    case 1: e_.line("load ", reg(), " sc", pick(kScalars)); break;
    case 2:
      e_.line("add r7 &arr", arr, " ", 4 * pick(w));
      e_.line("store ", value(), " r7");
      break;
    case 3:
      e_.line("add r7 &arr", arr, " ", 4 * pick(w));
      e_.line("load ", reg(), " r7");
      break;
    case 4: {
      static constexpr std::string_view ops[] = {"add", "sub", "mul"};
      e_.line(ops[pick(3)], " ", reg(), " ", reg(), " ", value());
      break;
    }
    case 5: {
      const int src = pick(static_cast<int>(widths_.size()));
      const int n = 1 + pick(std::min(w, widths_[src]));
      const int off = pick(w - n + 1);
      e_.line("add r7 &arr", arr, " ", 4 * off);
      e_.line("libcall ", pick(2) ? "memcpy" : "memmove", "(r7, &arr", src, ", ", 4 * n, ")");
      break;
    }
    case 6: e_.line("libcall memset(&arr", arr, ", ", pick(256), ", ", 4 * (1 + pick(w)), ")"); break;
    case 7: e_.line("libcall memread(&arr", arr, ", ", 4 * (1 + pick(w)), ")"); break;
    case 8:
      if (caller_ + 1 < helpers_)
        e_.line("call helper", caller_ + 1 + pick(helpers_ - caller_ - 1));
      else
        e_.line("load ", reg(), " sc", pick(kScalars));
      break;
    }
  }

  void branch(int depth, std::size_t limit) {
    const auto other = label("else");
    const auto end = label("end");
    static constexpr std::string_view jumps[] = {"jne", "jeq", "jlt", "jge"};
    e_.line("cmp ", reg(), " ", value());
    e_.line(jumps[pick(4)], " ", other);
    block(depth + 1, limit);
    e_.line("jmp ", end);
    e_.raw(other, ":");
    block(depth + 1, limit);
    e_.raw(end, ":");
  }

  // Outer loops count in r9, inner ones in r10; element addresses go through r8.
  void loop(int depth, std::size_t limit) {
    const auto counter = depth == 0 ? "r9" : "r10";
    const int arr = pick(static_cast<int>(widths_.size()));
    const int trip = 1 + pick(widths_[arr]);
    const auto head = label("loop");
    const auto exit = label("exit");
    e_.line("mov ", counter, " 0");
    e_.raw(head, ":");
    e_.line("cmp ", counter, " ", trip);
    e_.line("jge ", exit);
    e_.line("mul r8 ", counter, " 4");
    e_.line("add r8 r8 &arr", arr);
    if (pick(2))
      e_.line("store ", value(), " r8");
    else
      e_.line("load ", reg(), " r8");
    block(depth + 1, limit);
    e_.line("add ", counter, " ", counter, " 1");
    e_.line("jmp ", head);
    e_.raw(exit, ":");
  }
};

} // namespace scenario_detail

/// Deterministic in (kind, seed). Random programs stay within 200 instructions.
inline Scenario gen_scenario(ScenarioKind kind, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  switch (kind) {
  case ScenarioKind::RetOverwrite: return scenario_detail::ret_overwrite(rng);
  case ScenarioKind::HeapOverflow: return scenario_detail::heap_overflow(rng);
  case ScenarioKind::OverRead: return scenario_detail::over_read(rng);
  case ScenarioKind::Random: break;
  }
  Scenario s;
  s.name = "random";
  do
    s.program = parse_program(scenario_detail::RandomProgram(rng, kMaxRandomInstructions).generate());
  while (s.program.instruction_count() > kMaxRandomInstructions);
  s.clean_twin = s.program;
  s.expected = {false, true};
  return s;
}

inline std::vector<Scenario> gen_corpus(ScenarioKind kind, std::size_t count, std::uint64_t seed) {
  std::vector<Scenario> out;
  out.reserve(count);
  std::mt19937_64 seeds(seed);
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(gen_scenario(kind, seeds()));
  return out;
}

/// aa[i] = i over `n` words: one store per iteration, stride 4.
inline Program stride_fill(std::uint32_t n = 1024) {
  scenario_detail::Emitter e;
  e.raw(".mem ", std::max<std::uint32_t>(4096, 4 * n + 2048)).raw(".var aa ", n);
  e.line("mov r1 0");
  e.raw("loop:");
  e.line("cmp r1 ", n);
  e.line("jge done");
  e.line("mul r2 r1 4");
  e.line("add r2 r2 &aa");
  e.line("store r1 r2");
  e.line("add r1 r1 1");
  e.line("jmp loop");
  e.raw("done:");
  return parse_program(e.str());
}

/// bb[j][i] = i + j over an n x n matrix, column-major walk. With
/// `counters_in_memory` the loop counters live in memory as an unoptimized
/// compiler would keep them, so every iteration also loads and stores i and j.
inline Program matrix_walk(std::uint32_t n = 64, bool counters_in_memory = true) {
  scenario_detail::Emitter e;
  e.raw(".mem ", std::max<std::uint32_t>(4096, 4 * n * n + 2048)).raw(".var bb ", n * n);
  if (counters_in_memory) {
    e.raw(".var i 1").raw(".var j 1");
    e.line("store 0 i");
    e.raw("outer:");
    e.line("load r1 i");
    e.line("cmp r1 ", n);
    e.line("jge done");
    e.line("store 0 j");
    e.raw("inner:");
    e.line("load r2 j");
    e.line("cmp r2 ", n);
    e.line("jge next");
    e.line("load r1 i");
    e.line("add r3 r1 r2");
    e.line("mul r4 r2 ", 4 * n);
    e.line("mul r5 r1 4");
    e.line("add r4 r4 r5");
    e.line("add r4 r4 &bb");
    e.line("store r3 r4");
    e.line("add r2 r2 1");
    e.line("store r2 j");
    e.line("jmp inner");
    e.raw("next:");
    e.line("load r1 i");
    e.line("add r1 r1 1");
    e.line("store r1 i");
    e.line("jmp outer");
    e.raw("done:");
  } else {
    e.line("mov r1 0");
    e.raw("outer:");
    e.line("cmp r1 ", n);
    e.line("jge done");
    e.line("mov r2 0");
    e.raw("inner:");
    e.line("cmp r2 ", n);
    e.line("jge next");
    e.line("add r3 r1 r2");
    e.line("mul r4 r2 ", 4 * n);
    e.line("mul r5 r1 4");
    e.line("add r4 r4 r5");
    e.line("add r4 r4 &bb");
    e.line("store r3 r4");
    e.line("add r2 r2 1");
    e.line("jmp inner");
    e.raw("next:");
    e.line("add r1 r1 1");
    e.line("jmp outer");
    e.raw("done:");
  }
  return parse_program(e.str());
}

/// Loop-free programs over scalars and constant array elements, with calls
/// into loop-free helpers: every path is feasible for enumeration, and every
/// address is a compile-time constant.
inline Program gen_loop_free(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); };
  scenario_detail::Emitter e;
  const int helpers = pick(3);
  e.raw(".mem 4096").raw(".stack 256").raw(".var sc0 1").raw(".var sc1 1").raw(".var sc2 1");
  e.raw(".var arr0 6").raw(".var arr1 6");
  int labels = 0;
  auto access = [&](int caller) {
    const auto r = "r" + std::to_string(1 + pick(4));
    switch (pick(7)) {
    case 0:
    case 1: e.line("store ", r, " sc", pick(3)); break;
    case 2: e.line("load ", r, " sc", pick(3)); break;
    case 3:
      e.line("add r7 &arr", pick(2), " ", 4 * pick(6));
      e.line(pick(2) ? "store " : "load ", r, " r7");
      break;
    case 4: {
      const int n = 1 + pick(3);
      e.line("add r7 &arr", pick(2), " ", 4 * pick(7 - n));
      e.line("libcall ", pick(2) ? "memcpy" : "memset", "(r7, ", pick(2) ? "&arr1" : "&arr0", ", ", 4 * n,
             ")");
      break;
    }
    case 5: e.line("libcall memread(&arr", pick(2), ", ", 4 * (1 + pick(6)), ")"); break;
    case 6:
      if (caller + 1 < helpers)
        e.line("call helper", caller + 1 + pick(helpers - caller - 1));
      else
        e.line("load ", r, " sc", pick(3));
      break;
    }
  };
  auto body = [&](int caller, int stmts, int ifs) {
    for (int i = 0; i < stmts; ++i) {
      if (ifs > 0 && pick(4) == 0) {
        --ifs;
        const auto other = "l" + std::to_string(labels++);
        e.line("cmp r", 1 + pick(4), " ", pick(8));
        e.line("jne ", other);
        for (int k = 1 + pick(3); k > 0; --k)
          access(caller);
        e.raw(other, ":");
      } else {
        access(caller);
      }
    }
  };
  e.raw(".func main");
  for (int r = 1; r <= 4; ++r)
    e.line("mov r", r, " ", pick(8));
  body(-1, 6 + pick(20), 6);
  for (int h = 0; h < helpers; ++h) {
    e.raw(".func helper", h);
    body(h, 1 + pick(5), 2);
    e.line("ret");
  }
  return parse_program(e.str());
}

} // namespace dfisim
