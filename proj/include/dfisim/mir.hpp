#pragma once

// Mini intermediate representation: a small load/store pseudo-assembly
// with functions, labels, library calls and an explicit stack pointer.
//
//   .mem 65536            size of simulated data memory (bytes)
//   .stack 1024           bytes reserved at the top of memory for the stack
//   .entry main           entry function (default: main)
//   .var buf 8            global object of 8 words
//   .mutate lbl sym val   attack injection: silent write of val to sym the
//                         first time lbl is reached
//   .func name            starts a function body
//
//   store <val> <addr>    load <reg> <addr>     libcall name(<val>, ...)
//   cmp <val> <val>       jmp/jne/jeq/jlt/jge <label>
//   call <func>           ret                   add/sub/mul <reg> <val> <val>
//   mov <reg> <val>       <label>:              fifo_alloc / rds_load
//
// Operands are literals (decimal or 0x hex), registers (a letter followed by
// digits, or sp), `&sym` (address of a global) or, in address position, a
// bare global name. `// identifier: N` pins the identifier of an instruction.

#include <algorithm>
#include <charconv>
#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dfisim/error.hpp"

namespace dfisim {

/// 16-bit identifier of a memory-access instruction. 0 means "never written".
struct InstructionId {
  std::uint16_t value = 0;

  constexpr InstructionId() = default;
  constexpr explicit InstructionId(std::uint32_t v)
      : value(static_cast<std::uint16_t>(v)) {}

  constexpr auto operator<=>(const InstructionId&) const = default;
};

inline constexpr InstructionId kNeverWritten{0};
inline constexpr std::uint32_t kMaxIdentifier = 0xFFFF;

inline constexpr std::uint32_t kDefaultMemoryBytes = 64 * 1024;
inline constexpr std::uint32_t kDefaultStackBytes = 1024;
/// First byte handed out by the global allocator.
inline constexpr std::uint32_t kDataBase = 0x100;
/// Address window of the packet FIFO (PIM-side memory, outside data memory).
inline constexpr std::uint32_t kFifoBase = 0x4000'0000;
inline constexpr std::uint32_t kFifoWindowBytes = 1u << 20;

inline constexpr std::string_view kDfiGlobal = "dfi_global";
inline constexpr std::string_view kPacketMemAddr = "packet_mem_addr";
inline constexpr std::uint32_t kStackPointer = 0; // register index of sp

enum class Opcode {
  Store,
  Load,
  LibCall,
  Cmp,
  Jmp,
  Jne,
  Jeq,
  Jlt,
  Jge,
  Call,
  Ret,
  Add,
  Sub,
  Mul,
  Mov,
  Label,
  FifoAlloc, // instrumentation marker: FIFO allocation
  RdsLoad,   // instrumentation marker: RDS handoff to the checker
};

inline constexpr bool is_branch(Opcode op) {
  return op == Opcode::Jmp || op == Opcode::Jne || op == Opcode::Jeq ||
         op == Opcode::Jlt || op == Opcode::Jge;
}

inline constexpr bool is_conditional_branch(Opcode op) {
  return is_branch(op) && op != Opcode::Jmp;
}

inline constexpr bool is_alu(Opcode op) {
  return op == Opcode::Add || op == Opcode::Sub || op == Opcode::Mul ||
         op == Opcode::Mov;
}

inline constexpr bool carries_id(Opcode op) {
  return op == Opcode::Store || op == Opcode::Load || op == Opcode::LibCall ||
         op == Opcode::Call || op == Opcode::Ret;
}

struct Operand {
  enum class Kind { None, Imm, Reg, Sym };

  Kind kind = Kind::None;
  std::int64_t imm = 0;   // Imm
  std::uint32_t index = 0; // Reg: register index, Sym: symbol index

  static Operand immediate(std::int64_t v) { return {Kind::Imm, v, 0}; }
  static Operand reg(std::uint32_t r) { return {Kind::Reg, 0, r}; }
  static Operand sym(std::uint32_t s) { return {Kind::Sym, 0, s}; }

  bool operator==(const Operand&) const = default;
};

struct Instruction {
  Opcode op = Opcode::Label;
  std::optional<InstructionId> id;
  Operand a; // store: value, load/alu: dst, cmp: lhs
  Operand b; // store/load: address, alu/cmp: first source / rhs
  Operand c; // alu: second source
  std::vector<Operand> args; // libcall arguments
  std::string name;          // label, branch target, callee, library name
  std::uint32_t target = 0;  // resolved branch target (instruction index)

  bool operator==(const Instruction&) const = default;
};

struct Function {
  std::string name;
  std::vector<Instruction> body;

  bool operator==(const Function&) const = default;
};

struct Symbol {
  std::string name;
  std::uint32_t address = 0;
  std::uint32_t words = 0;

  std::uint32_t end() const { return address + 4 * words; }
  bool contains(std::uint32_t addr) const {
    return addr >= address && addr < end();
  }
  bool operator==(const Symbol&) const = default;
};

/// Attack injection applied by the interpreter.
struct Mutation {
  std::string at_label;
  std::string symbol;
  std::uint32_t value = 0;

  bool operator==(const Mutation&) const = default;
};

struct Program {
  std::uint32_t memory_bytes = kDefaultMemoryBytes;
  std::uint32_t stack_bytes = kDefaultStackBytes;
  std::string entry = "main";
  std::vector<Function> functions;
  std::vector<Symbol> symbols;      // sorted by address
  std::vector<std::string> registers; // registers[0] == "sp"
  std::optional<Mutation> mutation;
  InstructionId max_static_id{};

  bool operator==(const Program&) const = default;

  const Function* find_function(std::string_view fn) const {
    for (const auto& f : functions)
      if (f.name == fn)
        return &f;
    return nullptr;
  }
  std::optional<std::uint32_t> function_index(std::string_view fn) const {
    for (std::uint32_t i = 0; i < functions.size(); ++i)
      if (functions[i].name == fn)
        return i;
    return std::nullopt;
  }
  const Symbol* find_symbol(std::string_view s) const {
    for (const auto& sym : symbols)
      if (sym.name == s)
        return &sym;
    return nullptr;
  }
  std::uint32_t stack_base() const { return memory_bytes - stack_bytes; }

  /// Global object (or the stack region) containing addr, if any.
  std::optional<std::uint32_t> object_of(std::uint32_t addr) const;

  bool is_instrumented() const {
    for (const auto& f : functions)
      for (const auto& ins : f.body)
        if (ins.op == Opcode::FifoAlloc || ins.op == Opcode::RdsLoad)
          return true;
    return false;
  }

  std::size_t instruction_count() const {
    std::size_t n = 0;
    for (const auto& f : functions)
      n += f.body.size();
    return n;
  }
};

/// Memory objects tracked by the analysis: every global in data memory plus
/// one pseudo-object for the stack region.
struct MemoryObject {
  std::string name;
  std::uint32_t begin = 0;
  std::uint32_t end = 0; // exclusive

  std::uint32_t words() const { return (end - begin) / 4; }
  bool contains(std::uint32_t addr) const { return addr >= begin && addr < end; }
};

inline std::vector<MemoryObject> memory_objects(const Program& p) {
  std::vector<MemoryObject> objs;
  for (const auto& s : p.symbols)
    if (s.words > 0 && s.end() <= p.memory_bytes)
      objs.push_back({s.name, s.address, s.end()});
  if (p.stack_bytes > 0)
    objs.push_back({"<stack>", p.stack_base(), p.memory_bytes});
  return objs;
}

inline std::optional<std::uint32_t> Program::object_of(std::uint32_t addr) const {
  const auto objs = memory_objects(*this);
  for (std::uint32_t i = 0; i < objs.size(); ++i)
    if (objs[i].contains(addr))
      return i;
  return std::nullopt;
}

inline std::string_view opcode_name(Opcode op) {
  switch (op) {
  case Opcode::Store: return "store";
  case Opcode::Load: return "load";
  case Opcode::LibCall: return "libcall";
  case Opcode::Cmp: return "cmp";
  case Opcode::Jmp: return "jmp";
  case Opcode::Jne: return "jne";
  case Opcode::Jeq: return "jeq";
  case Opcode::Jlt: return "jlt";
  case Opcode::Jge: return "jge";
  case Opcode::Call: return "call";
  case Opcode::Ret: return "ret";
  case Opcode::Add: return "add";
  case Opcode::Sub: return "sub";
  case Opcode::Mul: return "mul";
  case Opcode::Mov: return "mov";
  case Opcode::Label: return "label";
  case Opcode::FifoAlloc: return "fifo_alloc";
  case Opcode::RdsLoad: return "rds_load";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Identifier assignment

/// A store into dfi_global or packet_mem_addr: part of the instrumentation
/// channel, never an identified program access.
inline bool is_channel_store(const Program& p, const Instruction& ins) {
  if (ins.op != Opcode::Store || ins.b.kind != Operand::Kind::Sym)
    return false;
  const auto& name = p.symbols.at(ins.b.index).name;
  return name == kDfiGlobal || name == kPacketMemAddr;
}

/// Gives every id-bearing instruction without an identifier the 1-based
/// position of that instruction in the program text (labels count, so the
/// ids of a listing match its line numbers). Existing ids are kept.
inline Program assign_identifiers(Program program) {
  std::uint32_t position = 0;
  std::uint32_t max_id = 0;
  std::vector<bool> seen(kMaxIdentifier + 1, false);
  for (auto& f : program.functions) {
    for (auto& ins : f.body) {
      ++position;
      if (!carries_id(ins.op) || is_channel_store(program, ins)) {
        ins.id.reset();
        continue;
      }
      if (!ins.id) {
        if (position > kMaxIdentifier)
          throw ConfigError("more than 65535 instructions: identifier space exhausted");
        ins.id = InstructionId{position};
      }
      const auto v = ins.id->value;
      if (v == 0)
        throw ConfigError("identifier 0 is reserved");
      if (seen[v])
        throw ConfigError("duplicate identifier " + std::to_string(v) + " in function " + f.name);
      seen[v] = true;
      max_id = std::max<std::uint32_t>(max_id, v);
    }
  }
  program.max_static_id = InstructionId{max_id};
  return program;
}

// ---------------------------------------------------------------------------
// Parser

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t'))
      ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t')
      ++j;
    if (j > i)
      out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline bool is_ident_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
inline bool is_ident_char(char c) {
  return is_ident_start(c) || (c >= '0' && c <= '9') || c == '.';
}
inline bool is_identifier(std::string_view s) {
  if (s.empty() || !is_ident_start(s[0]))
    return false;
  return std::all_of(s.begin(), s.end(), is_ident_char);
}

inline bool is_register_name(std::string_view s) {
  if (s == "sp")
    return true;
  if (s.size() < 2 || s[0] < 'a' || s[0] > 'z')
    return false;
  return std::all_of(s.begin() + 1, s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

inline std::optional<std::int64_t> parse_integer(std::string_view s) {
  bool neg = false;
  if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
    neg = s[0] == '-';
    s.remove_prefix(1);
  }
  if (s.empty())
    return std::nullopt;
  int base = 10;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    base = 16;
    s.remove_prefix(2);
  }
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    return std::nullopt;
  if (v > static_cast<std::uint64_t>(INT64_MAX))
    return std::nullopt;
  const auto sv = static_cast<std::int64_t>(v);
  return neg ? -sv : sv;
}

class Parser {
public:
  Program parse(std::string_view text) {
    program_.registers.push_back("sp");
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      auto nl = text.find('\n', pos);
      if (nl == std::string_view::npos)
        nl = text.size();
      ++line_no;
      parse_line(line_no, text.substr(pos, nl - pos));
      pos = nl + 1;
    }
    finish();
    return assign_identifiers(std::move(program_));
  }

private:
  Program program_;
  Function* current_ = nullptr;
  std::vector<std::size_t> function_first_line_;
  std::vector<std::string> symbol_names_; // first-use order of undeclared names
  std::vector<std::pair<std::string, std::uint32_t>> declared_;
  std::unordered_map<std::string, std::uint32_t> symbol_index_;
  std::unordered_map<std::string, std::uint32_t> register_index_{{"sp", 0}};
  // (function index, label name) -> (instruction index, source line)
  std::vector<std::map<std::string, std::uint32_t>> labels_;
  struct BranchFixup {
    std::size_t function;
    std::size_t instruction;
    std::size_t line;
  };
  std::vector<BranchFixup> branch_fixups_;
  std::vector<std::pair<std::string, std::size_t>> call_fixups_;
  bool saw_entry_directive_ = false;
  std::size_t mutate_line_ = 0;

  Function& current(std::size_t line) {
    (void)line;
    if (!current_) {
      program_.functions.push_back({"main", {}});
      labels_.emplace_back();
      function_first_line_.push_back(line);
      current_ = &program_.functions.back();
    }
    return *current_;
  }

  std::uint32_t symbol(const std::string& name) {
    auto it = symbol_index_.find(name);
    if (it != symbol_index_.end())
      return it->second;
    const auto idx = static_cast<std::uint32_t>(symbol_names_.size());
    symbol_names_.push_back(name);
    symbol_index_.emplace(name, idx);
    return idx;
  }

  std::uint32_t reg(std::string_view name) {
    auto it = register_index_.find(std::string(name));
    if (it != register_index_.end())
      return it->second;
    const auto idx = static_cast<std::uint32_t>(program_.registers.size());
    program_.registers.emplace_back(name);
    register_index_.emplace(std::string(name), idx);
    return idx;
  }

  Operand value_operand(std::size_t line, std::string_view tok) {
    if (auto v = parse_integer(tok))
      return Operand::immediate(*v);
    if (!tok.empty() && tok[0] == '&') {
      auto name = tok.substr(1);
      if (!is_identifier(name) || is_register_name(name))
        throw ParseError(line, "bad symbol reference '" + std::string(tok) + "'");
      return Operand::sym(symbol(std::string(name)));
    }
    if (is_register_name(tok))
      return Operand::reg(reg(tok));
    throw ParseError(line, "expected literal, register or &symbol, got '" + std::string(tok) + "'");
  }

  Operand address_operand(std::size_t line, std::string_view tok) {
    if (!tok.empty() && tok[0] != '&' && is_identifier(tok) && !is_register_name(tok))
      return Operand::sym(symbol(std::string(tok)));
    return value_operand(line, tok);
  }

  Operand dest_register(std::size_t line, std::string_view tok, bool allow_sp) {
    if (!is_register_name(tok))
      throw ParseError(line, "expected register, got '" + std::string(tok) + "'");
    if (tok == "sp" && !allow_sp)
      throw ParseError(line, "sp cannot be a load destination");
    return Operand::reg(reg(tok));
  }

  static std::optional<InstructionId> identifier_comment(std::size_t line, std::string_view comment) {
    // accepts "identifier: N", "identifier N", "id: N", "id N"
    auto words = split_ws(comment);
    for (std::size_t i = 0; i < words.size(); ++i) {
      std::string_view w = words[i];
      if (w.ends_with(':'))
        w.remove_suffix(1);
      if (w != "identifier" && w != "id")
        continue;
      std::string_view num;
      if (i + 1 < words.size())
        num = words[i + 1];
      if (num == ":" && i + 2 < words.size())
        num = words[i + 2];
      while (!num.empty() && (num.back() == ',' || num.back() == ';'))
        num.remove_suffix(1);
      auto v = parse_integer(num);
      if (!v)
        continue;
      if (*v <= 0 || *v > kMaxIdentifier)
        throw ParseError(line, "identifier out of range: " + std::string(num));
      return InstructionId{static_cast<std::uint32_t>(*v)};
    }
    return std::nullopt;
  }

  void expect_arity(std::size_t line, const std::vector<std::string_view>& toks, std::size_t n) {
    if (toks.size() != n + 1)
      throw ParseError(line, "'" + std::string(toks[0]) + "' expects " + std::to_string(n) +
                                 " operand(s), got " + std::to_string(toks.size() - 1));
  }

  static std::uint32_t directive_number(std::size_t line, std::string_view tok) {
    auto v = parse_integer(tok);
    if (!v || *v < 0 || *v > UINT32_MAX)
      throw ParseError(line, "bad number '" + std::string(tok) + "'");
    return static_cast<std::uint32_t>(*v);
  }

  void parse_directive(std::size_t line, const std::vector<std::string_view>& toks) {
    const auto d = toks[0];
    if (d == ".mem") {
      expect_arity(line, toks, 1);
      program_.memory_bytes = directive_number(line, toks[1]);
      if (program_.memory_bytes % 4 != 0 || program_.memory_bytes == 0)
        throw ParseError(line, "memory size must be a positive multiple of 4");
    } else if (d == ".stack") {
      expect_arity(line, toks, 1);
      program_.stack_bytes = directive_number(line, toks[1]);
      if (program_.stack_bytes % 4 != 0)
        throw ParseError(line, "stack size must be a multiple of 4");
    } else if (d == ".entry") {
      expect_arity(line, toks, 1);
      program_.entry = std::string(toks[1]);
      saw_entry_directive_ = true;
    } else if (d == ".var") {
      expect_arity(line, toks, 2);
      if (!is_identifier(toks[1]) || is_register_name(toks[1]) || toks[1] == kPacketMemAddr)
        throw ParseError(line, "bad variable name '" + std::string(toks[1]) + "'");
      std::string name(toks[1]);
      for (const auto& [n, w] : declared_)
        if (n == name)
          throw ParseError(line, "duplicate variable '" + name + "'");
      const auto words = directive_number(line, toks[2]);
      if (words == 0)
        throw ParseError(line, "variable '" + name + "' needs at least one word");
      declared_.emplace_back(name, words);
      symbol(name);
    } else if (d == ".func") {
      expect_arity(line, toks, 1);
      if (!is_identifier(toks[1]))
        throw ParseError(line, "bad function name");
      for (const auto& f : program_.functions)
        if (f.name == toks[1])
          throw ParseError(line, "duplicate function '" + std::string(toks[1]) + "'");
      program_.functions.push_back({std::string(toks[1]), {}});
      labels_.emplace_back();
      function_first_line_.push_back(line);
      current_ = &program_.functions.back();
    } else if (d == ".mutate") {
      expect_arity(line, toks, 3);
      auto v = parse_integer(toks[3]);
      if (!v)
        throw ParseError(line, "bad mutation value");
      program_.mutation = Mutation{std::string(toks[1]), std::string(toks[2]),
                                   static_cast<std::uint32_t>(*v)};
      symbol(std::string(toks[2]));
      mutate_line_ = line;
    } else {
      throw ParseError(line, "unknown directive '" + std::string(d) + "'");
    }
  }

  void parse_line(std::size_t line, std::string_view raw) {
    std::string_view comment;
    if (auto c = raw.find("//"); c != std::string_view::npos) {
      comment = raw.substr(c + 2);
      raw = raw.substr(0, c);
    }
    raw = trim(raw);
    if (raw.empty())
      return;
    if (raw[0] == '.') {
      parse_directive(line, split_ws(raw));
      return;
    }
    // label
    if (raw.back() == ':') {
      auto name = trim(raw.substr(0, raw.size() - 1));
      if (!is_identifier(name))
        throw ParseError(line, "bad label '" + std::string(name) + "'");
      auto& fn = current(line);
      auto& labels = labels_[program_.functions.size() - 1];
      if (!labels.emplace(std::string(name), static_cast<std::uint32_t>(fn.body.size())).second)
        throw ParseError(line, "duplicate label '" + std::string(name) + "'");
      Instruction ins;
      ins.op = Opcode::Label;
      ins.name = std::string(name);
      fn.body.push_back(std::move(ins));
      return;
    }

    Instruction ins;
    std::vector<std::string_view> toks;
    std::string_view mnemonic;
    {
      auto sp = raw.find_first_of(" \t");
      mnemonic = raw.substr(0, sp);
    }
    if (mnemonic == "libcall") {
      ins.op = Opcode::LibCall;
      auto rest = trim(raw.substr(7));
      auto open = rest.find('(');
      auto close = rest.rfind(')');
      if (open == std::string_view::npos || close == std::string_view::npos || close < open ||
          trim(rest.substr(close + 1)).size() != 0)
        throw ParseError(line, "libcall expects name(arg, ...)");
      auto lib = trim(rest.substr(0, open));
      if (!is_identifier(lib))
        throw ParseError(line, "bad library function name");
      ins.name = std::string(lib);
      auto inner = trim(rest.substr(open + 1, close - open - 1));
      while (!inner.empty()) {
        auto comma = inner.find(',');
        auto arg = trim(inner.substr(0, comma));
        if (arg.empty())
          throw ParseError(line, "empty libcall argument");
        ins.args.push_back(value_operand(line, arg));
        if (comma == std::string_view::npos)
          break;
        inner = trim(inner.substr(comma + 1));
        if (inner.empty())
          throw ParseError(line, "trailing comma in libcall");
      }
      check_library_arity(line, ins);
    } else {
      toks = split_ws(raw);
      const auto m = toks[0];
      if (m == "store") {
        expect_arity(line, toks, 2);
        ins.op = Opcode::Store;
        ins.a = value_operand(line, toks[1]);
        ins.b = address_operand(line, toks[2]);
      } else if (m == "load") {
        expect_arity(line, toks, 2);
        ins.op = Opcode::Load;
        ins.a = dest_register(line, toks[1], false);
        ins.b = address_operand(line, toks[2]);
      } else if (m == "cmp") {
        expect_arity(line, toks, 2);
        ins.op = Opcode::Cmp;
        ins.a = value_operand(line, toks[1]);
        ins.b = value_operand(line, toks[2]);
      } else if (m == "jmp" || m == "jne" || m == "jeq" || m == "jlt" || m == "jge") {
        expect_arity(line, toks, 1);
        ins.op = m == "jmp" ? Opcode::Jmp
                 : m == "jne" ? Opcode::Jne
                 : m == "jeq" ? Opcode::Jeq
                 : m == "jlt" ? Opcode::Jlt
                              : Opcode::Jge;
        if (!is_identifier(toks[1]))
          throw ParseError(line, "bad label '" + std::string(toks[1]) + "'");
        ins.name = std::string(toks[1]);
      } else if (m == "call") {
        expect_arity(line, toks, 1);
        ins.op = Opcode::Call;
        ins.name = std::string(toks[1]);
        call_fixups_.emplace_back(ins.name, line);
      } else if (m == "ret") {
        expect_arity(line, toks, 0);
        ins.op = Opcode::Ret;
      } else if (m == "add" || m == "sub" || m == "mul") {
        expect_arity(line, toks, 3);
        ins.op = m == "add" ? Opcode::Add : m == "sub" ? Opcode::Sub : Opcode::Mul;
        ins.a = dest_register(line, toks[1], true);
        ins.b = value_operand(line, toks[2]);
        ins.c = value_operand(line, toks[3]);
      } else if (m == "mov") {
        expect_arity(line, toks, 2);
        ins.op = Opcode::Mov;
        ins.a = dest_register(line, toks[1], true);
        ins.b = value_operand(line, toks[2]);
      } else if (m == "fifo_alloc" || m == "rds_load") {
        expect_arity(line, toks, 0);
        ins.op = m == "fifo_alloc" ? Opcode::FifoAlloc : Opcode::RdsLoad;
      } else {
        throw ParseError(line, "unknown instruction '" + std::string(m) + "'");
      }
    }
    if (carries_id(ins.op))
      ins.id = identifier_comment(line, comment);
    auto& fn = current(line);
    fn.body.push_back(std::move(ins));
    if (is_branch(fn.body.back().op))
      branch_fixups_.push_back({program_.functions.size() - 1, fn.body.size() - 1, line});
  }

  static void check_library_arity(std::size_t line, const Instruction& ins) {
    std::size_t want = 0;
    if (ins.name == "memcpy" || ins.name == "memmove" || ins.name == "memset")
      want = 3;
    else if (ins.name == "memread")
      want = 2;
    else
      throw ParseError(line, "unsupported library function '" + ins.name + "'");
    if (ins.args.size() != want)
      throw ParseError(line, ins.name + " expects " + std::to_string(want) + " arguments");
  }

  void finish() {
    if (program_.functions.empty()) {
      program_.functions.push_back({"main", {}});
      labels_.emplace_back();
      function_first_line_.push_back(1);
    }
    if (!saw_entry_directive_ && !program_.find_function(program_.entry))
      program_.entry = program_.functions.front().name;
    if (!program_.find_function(program_.entry))
      throw ParseError(1, "entry function '" + program_.entry + "' not defined");

    for (const auto& fx : branch_fixups_) {
      auto& ins = program_.functions[fx.function].body[fx.instruction];
      const auto& labels = labels_[fx.function];
      auto it = labels.find(ins.name);
      if (it == labels.end())
        throw ParseError(fx.line, "unresolved label '" + ins.name + "'");
      ins.target = it->second;
    }
    for (const auto& [callee, line] : call_fixups_)
      if (!program_.find_function(callee))
        throw ParseError(line, "call to undefined function '" + callee + "'");
    if (program_.mutation) {
      bool found = false;
      for (const auto& labels : labels_)
        found = found || labels.contains(program_.mutation->at_label);
      if (!found)
        throw ParseError(mutate_line_, "mutation label '" + program_.mutation->at_label + "' not found");
    }
    for (std::size_t i = 0; i < program_.functions.size(); ++i) {
      const auto& f = program_.functions[i];
      if (f.name == program_.entry)
        continue;
      if (f.body.empty() || (f.body.back().op != Opcode::Ret && f.body.back().op != Opcode::Jmp))
        throw ParseError(function_first_line_[i], "function '" + f.name + "' must end with ret or jmp");
    }
    if (program_.stack_bytes > program_.memory_bytes)
      throw ParseError(1, "stack larger than memory");

    allocate_symbols();
  }

  void allocate_symbols() {
    std::vector<Symbol> syms(symbol_names_.size());
    std::uint32_t cursor = kDataBase;
    std::vector<bool> placed(symbol_names_.size(), false);
    auto place = [&](std::uint32_t idx, std::uint32_t words) {
      syms[idx] = {symbol_names_[idx], cursor, words};
      cursor += 4 * words;
      placed[idx] = true;
    };
    for (const auto& [name, words] : declared_)
      place(symbol_index_.at(name), words);
    for (std::uint32_t i = 0; i < symbol_names_.size(); ++i) {
      if (placed[i])
        continue;
      if (symbol_names_[i] == kPacketMemAddr) {
        syms[i] = {symbol_names_[i], kFifoBase, 0};
        placed[i] = true;
      } else {
        place(i, 1);
      }
    }
    if (cursor > program_.stack_base())
      throw ParseError(1, "globals (" + std::to_string(cursor) + " bytes) overlap the stack");

    // Canonical order: by address. Remap operand indices accordingly.
    std::vector<std::uint32_t> order(syms.size());
    for (std::uint32_t i = 0; i < order.size(); ++i)
      order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](auto x, auto y) { return syms[x].address < syms[y].address; });
    std::vector<std::uint32_t> remap(syms.size());
    for (std::uint32_t i = 0; i < order.size(); ++i) {
      remap[order[i]] = i;
      program_.symbols.push_back(syms[order[i]]);
    }
    auto fix = [&](Operand& o) {
      if (o.kind == Operand::Kind::Sym)
        o.index = remap[o.index];
    };
    for (auto& f : program_.functions)
      for (auto& ins : f.body) {
        fix(ins.a);
        fix(ins.b);
        fix(ins.c);
        for (auto& arg : ins.args)
          fix(arg);
      }
  }
};

} // namespace detail

/// Parses mini-IR text. Throws ParseError (with line number) on syntax errors,
/// duplicate or unresolved labels.
inline Program parse_program(std::string_view text) {
  return detail::Parser{}.parse(text);
}

// ---------------------------------------------------------------------------
// Printer

namespace detail {

inline std::string hex32(std::uint64_t v) {
  std::ostringstream os;
  os << "0x" << std::uppercase << std::hex;
  os.width(8);
  os.fill('0');
  os << v;
  return os.str();
}

inline std::string format_operand(const Program& p, const Operand& o, bool address_position) {
  switch (o.kind) {
  case Operand::Kind::None: return "";
  case Operand::Kind::Imm:
    if (o.imm >= 0x10000)
      return hex32(static_cast<std::uint64_t>(o.imm));
    return std::to_string(o.imm);
  case Operand::Kind::Reg: return p.registers.at(o.index);
  case Operand::Kind::Sym:
    return (address_position ? "" : "&") + p.symbols.at(o.index).name;
  }
  return "";
}

} // namespace detail

inline std::string format_instruction(const Program& p, const Instruction& ins) {
  using detail::format_operand;
  std::string s;
  switch (ins.op) {
  case Opcode::Label: return ins.name + ":";
  case Opcode::Store:
    s = "store " + format_operand(p, ins.a, false) + " " + format_operand(p, ins.b, true);
    break;
  case Opcode::Load:
    s = "load " + format_operand(p, ins.a, false) + " " + format_operand(p, ins.b, true);
    break;
  case Opcode::LibCall: {
    s = "libcall " + ins.name + "(";
    for (std::size_t i = 0; i < ins.args.size(); ++i)
      s += (i ? ", " : "") + format_operand(p, ins.args[i], false);
    s += ")";
    break;
  }
  case Opcode::Cmp:
    s = "cmp " + format_operand(p, ins.a, false) + " " + format_operand(p, ins.b, false);
    break;
  case Opcode::Jmp:
  case Opcode::Jne:
  case Opcode::Jeq:
  case Opcode::Jlt:
  case Opcode::Jge: s = std::string(opcode_name(ins.op)) + " " + ins.name; break;
  case Opcode::Call: s = "call " + ins.name; break;
  case Opcode::Ret: s = "ret"; break;
  case Opcode::Add:
  case Opcode::Sub:
  case Opcode::Mul:
    s = std::string(opcode_name(ins.op)) + " " + format_operand(p, ins.a, false) + " " +
        format_operand(p, ins.b, false) + " " + format_operand(p, ins.c, false);
    break;
  case Opcode::Mov:
    s = "mov " + format_operand(p, ins.a, false) + " " + format_operand(p, ins.b, false);
    break;
  case Opcode::FifoAlloc:
  case Opcode::RdsLoad: s = std::string(opcode_name(ins.op)); break;
  }
  if (ins.id)
    s += " // identifier: " + std::to_string(ins.id->value);
  return s;
}

/// Canonical text form; parse_program(print_program(p)) == p.
inline std::string print_program(const Program& p) {
  std::ostringstream os;
  os << ".mem " << p.memory_bytes << "\n";
  os << ".stack " << p.stack_bytes << "\n";
  os << ".entry " << p.entry << "\n";
  for (const auto& s : p.symbols)
    if (s.name != kPacketMemAddr)
      os << ".var " << s.name << " " << s.words << "\n";
  if (p.mutation)
    os << ".mutate " << p.mutation->at_label << " " << p.mutation->symbol << " "
       << detail::hex32(p.mutation->value) << "\n";
  for (const auto& f : p.functions) {
    os << ".func " << f.name << "\n";
    for (const auto& ins : f.body)
      os << format_instruction(p, ins) << "\n";
  }
  return os.str();
}

} // namespace dfisim

template <> struct std::hash<dfisim::InstructionId> {
  std::size_t operator()(dfisim::InstructionId id) const noexcept { return id.value; }
};
