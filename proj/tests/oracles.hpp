#pragma once

// Test oracles shared by the unit tests and the acceptance binary. They are
// written from the definitions, not from the library code they check.

#include <deque>
#include <map>
#include <random>
#include <set>
#include <tuple>

#include "dfisim/fifo.hpp"
#include "dfisim/optimizations.hpp"

namespace oracle {

using namespace dfisim;

inline TaggedPacket S(std::uint16_t id, std::uint32_t addr, std::uint64_t seq = 0) {
  return {BasicPacket{AccessType::Store, InstructionId{id}, addr}, seq};
}
inline TaggedPacket L(std::uint16_t id, std::uint32_t addr, std::uint64_t seq = 0) {
  return {BasicPacket{AccessType::Load, InstructionId{id}, addr}, seq};
}
inline TaggedPacket Lib(std::uint16_t id, std::uint32_t src, std::uint32_t dst, std::uint64_t words) {
  return {LibraryPacket{InstructionId{id}, src, dst, words, false}, 0};
}

inline PacketBuffer numbered(PacketBuffer b) {
  for (std::size_t i = 0; i < b.size(); ++i)
    b[i].seq = i;
  return b;
}

inline PacketBuffer random_buffer(std::mt19937_64& rng) {
  PacketBuffer b;
  const auto n = 1 + rng() % 40;
  const auto addrs = 1 + rng() % 6;
  for (std::size_t i = 0; i < n; ++i) {
    if (rng() % 25 == 0) {
      b.push_back(Lib(static_cast<std::uint16_t>(1 + rng() % 6), 0x100 + 4 * (rng() % addrs),
                      0x100 + 4 * (rng() % addrs), 1 + rng() % 2));
    } else {
      const auto id = static_cast<std::uint16_t>(1 + rng() % 5);
      const auto addr = static_cast<std::uint32_t>(0x100 + 4 * (rng() % addrs));
      b.push_back(rng() % 2 ? S(id, addr) : L(id, addr));
    }
  }
  return numbered(b);
}

/// Synchronous checker over one buffer.
struct Outcome {
  std::multiset<std::tuple<std::uint16_t, std::uint16_t, std::uint32_t>> verdicts;
  std::map<std::uint32_t, std::uint16_t> rdt;
};

inline Outcome check(const PacketBuffer& b, const std::map<std::uint16_t, std::set<std::uint16_t>>& rds,
                     std::map<std::uint32_t, std::uint16_t> rdt) {
  Outcome o;
  auto verify = [&](std::uint16_t load, std::uint32_t addr) {
    const auto found = rdt.count(addr) ? rdt[addr] : 0;
    if (!rds.at(load).count(found))
      o.verdicts.insert({load, found, addr});
  };
  for (const auto& tp : b) {
    if (const auto* p = as_basic(tp)) {
      if (p->type == AccessType::Store)
        rdt[p->addr] = p->id.value;
      else
        verify(p->id.value, p->addr);
    } else if (const auto* lib = as_library(tp)) {
      for (std::uint64_t w = 0; w < lib->len_words; ++w)
        verify(lib->id.value, *lib->load_addr + 4 * static_cast<std::uint32_t>(w));
      for (std::uint64_t w = 0; w < lib->len_words; ++w)
        rdt[*lib->store_addr + 4 * static_cast<std::uint32_t>(w)] = lib->id.value;
    }
  }
  o.rdt = std::move(rdt);
  return o;
}

inline std::map<std::uint16_t, std::set<std::uint16_t>> random_rds(std::mt19937_64& rng) {
  std::map<std::uint16_t, std::set<std::uint16_t>> rds;
  for (std::uint16_t id = 1; id <= 6; ++id)
    for (std::uint16_t w = 0; w <= 6; ++w)
      if (rng() % 2)
        rds[id].insert(w);
  for (std::uint16_t id = 1; id <= 6; ++id)
    rds[id];
  return rds;
}

inline std::map<std::uint32_t, std::uint16_t> random_rdt(std::mt19937_64& rng) {
  std::map<std::uint32_t, std::uint16_t> rdt;
  for (std::uint32_t a = 0; a < 8; ++a)
    rdt[0x100 + 4 * a] = static_cast<std::uint16_t>(rng() % 7);
  return rdt;
}

/// (load id, found id) pairs; the address is dropped because rule D
/// reports a repeated verdict at the earlier pair's address.
inline std::set<std::pair<std::uint16_t, std::uint16_t>> verdict_ids(const Outcome& o) {
  std::set<std::pair<std::uint16_t, std::uint16_t>> s;
  for (const auto& [load, found, addr] : o.verdicts)
    s.insert({load, found});
  return s;
}

/// P1/P2 and Q1/Q2 share (store 3, load 7); the rest are unrelated.
/// Q1 and Q2 sit at positions 4 and 5.
inline PacketBuffer repeated_pair_buffer() {
  return numbered({S(3, 0x100), S(1, 0x200), L(7, 0x100), L(2, 0x200), S(3, 0x180), L(7, 0x180), S(4, 0x300)});
}

/// Every m * 16^e with m <= 15 and e <= 7, both signs, by enumeration.
inline std::set<std::int64_t> float8_values() {
  std::set<std::int64_t> s;
  for (std::int64_t m = 0; m <= 15; ++m)
    for (int e = 0; e <= 7; ++e) {
      s.insert(m << (4 * e));
      s.insert(-(m << (4 * e)));
    }
  return s;
}

/// Random push/pop interleaving against std::deque. Returns the number of
/// operations that disagreed.
inline std::size_t fifo_mismatches(std::size_t capacity, std::size_t ops, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  SpscRing<std::uint64_t> q(capacity);
  std::deque<std::uint64_t> model;
  std::size_t bad = 0;
  for (std::size_t i = 0; i < ops; ++i) {
    if (rng() % 2) {
      const auto v = rng();
      const bool ok = q.push(v);
      bad += ok != (model.size() < capacity - 1);
      if (ok)
        model.push_back(v);
    } else {
      const auto got = q.pop();
      bad += got.has_value() != !model.empty();
      if (got && !model.empty()) {
        bad += *got != model.front();
        model.pop_front();
      }
    }
    bad += q.occupancy() != model.size();
  }
  return bad;
}

} // namespace oracle
