#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "dfisim/mir.hpp"

namespace dfisim {

struct BasicBlock {
  std::uint32_t begin = 0; // first instruction index
  std::uint32_t end = 0;   // one past the last
  std::vector<std::uint32_t> successors;
  std::vector<std::uint32_t> predecessors;
  bool is_exit = false; // ends in ret or falls off the function
};

struct Cfg {
  std::vector<BasicBlock> blocks;
  std::vector<std::uint32_t> block_of; // instruction index -> block
  std::vector<std::uint32_t> exits;

  static constexpr std::uint32_t entry = 0;
  bool empty() const { return blocks.empty(); }
};

/// Blocks start at the first instruction, at labels and after branches and
/// returns. A call does not end its block.
inline Cfg build_cfg(const Function& fn) {
  Cfg cfg;
  const auto n = static_cast<std::uint32_t>(fn.body.size());
  if (n == 0)
    return cfg;
  std::vector<bool> leader(n, false);
  leader[0] = true;
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto op = fn.body[i].op;
    if (op == Opcode::Label)
      leader[i] = true;
    if ((is_branch(op) || op == Opcode::Ret) && i + 1 < n)
      leader[i + 1] = true;
  }
  cfg.block_of.assign(n, 0);
  for (std::uint32_t i = 0; i < n; ++i) {
    if (leader[i])
      cfg.blocks.push_back({i, i, {}, {}, false});
    cfg.blocks.back().end = i + 1;
    cfg.block_of[i] = static_cast<std::uint32_t>(cfg.blocks.size() - 1);
  }
  auto link = [&](std::uint32_t from, std::uint32_t to) {
    auto& s = cfg.blocks[from].successors;
    if (std::find(s.begin(), s.end(), to) == s.end()) {
      s.push_back(to);
      cfg.blocks[to].predecessors.push_back(from);
    }
  };
  for (std::uint32_t b = 0; b < cfg.blocks.size(); ++b) {
    const auto& last = fn.body[cfg.blocks[b].end - 1];
    const bool has_next = b + 1 < cfg.blocks.size();
    if (last.op == Opcode::Ret) {
      cfg.blocks[b].is_exit = true;
    } else if (last.op == Opcode::Jmp) {
      link(b, cfg.block_of[last.target]);
    } else if (is_conditional_branch(last.op)) {
      link(b, cfg.block_of[last.target]);
      if (has_next)
        link(b, b + 1);
      else
        cfg.blocks[b].is_exit = true;
    } else if (has_next) {
      link(b, b + 1);
    } else {
      cfg.blocks[b].is_exit = true;
    }
    if (cfg.blocks[b].is_exit)
      cfg.exits.push_back(b);
  }
  return cfg;
}

} // namespace dfisim
