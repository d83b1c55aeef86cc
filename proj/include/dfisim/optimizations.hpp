#pragma once

// Runtime pruning and reordering of the transmission buffer. Library packets
// are barriers: no rule looks across one.
//
// A pair (P1, P2) is two basic packets with the same address and no store
// packet of that address between them.
//   A  store/store, no load of the address between     -> drop P1
//   B  store/store with equal ids                       -> drop P2
//   C  load/load with equal ids                         -> drop P2
//   D  store/load pair (a, b) repeated at a later address -> drop the repeat
//   E  stable sort by address

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dfisim/error.hpp"
#include "dfisim/packet.hpp"

namespace dfisim {

enum class Opt : std::uint8_t { A = 0, B = 1, C = 2, D = 3, E = 4 };

class OptSet {
public:
  constexpr OptSet() = default;
  constexpr OptSet(std::initializer_list<Opt> opts) {
    for (auto o : opts)
      bits_ |= 1u << static_cast<unsigned>(o);
  }

  /// "ABCE", "ce", "" or "none".
  static OptSet parse(std::string_view s) {
    OptSet set;
    if (s == "none")
      return set;
    for (char c : s) {
      const char u = static_cast<char>(c >= 'a' && c <= 'z' ? c - 32 : c);
      if (u < 'A' || u > 'E')
        throw ConfigError(std::string("unknown optimization '") + c + "'");
      set.bits_ |= 1u << (u - 'A');
    }
    return set;
  }

  constexpr bool has(Opt o) const { return bits_ & (1u << static_cast<unsigned>(o)); }
  constexpr void add(Opt o) { bits_ |= 1u << static_cast<unsigned>(o); }
  constexpr OptSet with(Opt o) const {
    OptSet s = *this;
    s.add(o);
    return s;
  }
  constexpr bool empty() const { return bits_ == 0; }

  std::string str() const {
    std::string s;
    for (int i = 0; i < 5; ++i)
      if (bits_ & (1u << i))
        s += static_cast<char>('A' + i);
    return s.empty() ? "none" : s;
  }

  constexpr bool operator==(const OptSet&) const = default;

private:
  std::uint8_t bits_ = 0;
};

inline constexpr OptSet kDefaultOpts{Opt::A, Opt::B, Opt::C, Opt::E};

using PruneCounts = std::array<std::uint64_t, 5>;

namespace opt_detail {

/// Half-open index ranges between library packets.
inline std::vector<std::pair<std::size_t, std::size_t>> segments(const PacketBuffer& buf) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= buf.size(); ++i) {
    if (i == buf.size() || as_library(buf[i])) {
      if (i > start)
        out.push_back({start, i});
      start = i + 1;
    }
  }
  return out;
}

inline PacketBuffer drop(const PacketBuffer& buf, const std::vector<bool>& removed) {
  PacketBuffer out;
  out.reserve(buf.size());
  for (std::size_t i = 0; i < buf.size(); ++i)
    if (!removed[i])
      out.push_back(buf[i]);
  return out;
}

inline bool is_store(const BasicPacket& p) { return p.type == AccessType::Store; }
inline bool is_load(const BasicPacket& p) { return p.type == AccessType::Load; }

inline bool touches(const TaggedPacket& tp, std::uint32_t addr) {
  if (const auto* p = as_basic(tp))
    return p->addr == addr;
  const auto& lib = *as_library(tp);
  auto covers = [&](const std::optional<std::uint32_t>& base) {
    return base && addr >= *base && (addr - *base) / 4 < lib.len_words;
  };
  return covers(lib.load_addr) || covers(lib.store_addr);
}

} // namespace opt_detail

/// A: a store whose next same-address packet is a store is dead.
inline PacketBuffer opt_a(const PacketBuffer& buf) {
  using namespace opt_detail;
  std::vector<bool> removed(buf.size(), false);
  for (auto [b, e] : segments(buf)) {
    std::unordered_map<std::uint32_t, AccessType> next_touch;
    for (std::size_t i = e; i-- > b;) {
      const auto& p = *as_basic(buf[i]);
      if (is_store(p)) {
        auto it = next_touch.find(p.addr);
        if (it != next_touch.end() && it->second == AccessType::Store)
          removed[i] = true;
      }
      next_touch[p.addr] = p.type;
    }
  }
  return drop(buf, removed);
}

/// B: a store repeating the id of the previous store to its address.
inline PacketBuffer opt_b(const PacketBuffer& buf) {
  using namespace opt_detail;
  std::vector<bool> removed(buf.size(), false);
  for (auto [b, e] : segments(buf)) {
    std::unordered_map<std::uint32_t, InstructionId> last_store;
    for (std::size_t i = b; i < e; ++i) {
      const auto& p = *as_basic(buf[i]);
      if (!is_store(p))
        continue;
      auto it = last_store.find(p.addr);
      if (it != last_store.end() && it->second == p.id)
        removed[i] = true;
      last_store[p.addr] = p.id;
    }
  }
  return drop(buf, removed);
}

/// C, as the processing-element grid evaluates it: column i looks down for
/// the nearest later load with the same address and id, is disabled by a
/// store to the address in between, and prunes at most one packet.
inline PacketBuffer opt_c(const PacketBuffer& buf) {
  using namespace opt_detail;
  std::vector<bool> removed(buf.size(), false);
  for (auto [b, e] : segments(buf)) {
    for (std::size_t i = b; i < e; ++i) {
      const auto& pa = *as_basic(buf[i]);
      if (!is_load(pa))
        continue;
      for (std::size_t j = i + 1; j < e; ++j) {
        const auto& pb = *as_basic(buf[j]);
        if (pb.addr != pa.addr)
          continue;
        if (is_store(pb))
          break; // disable: store between the two loads
        if (pb.id == pa.id) {
          removed[j] = true;
          break; // disable: this column already found its packet
        }
      }
    }
  }
  return drop(buf, removed);
}

/// D. With gate, the repeat must be the last two packets touching its
/// address in the buffer, so that no in-buffer check reads the skipped write.
inline PacketBuffer opt_d(const PacketBuffer& buf, bool gate = true) {
  using namespace opt_detail;
  std::vector<bool> removed(buf.size(), false);
  for (auto [b, e] : segments(buf)) {
    // (store id, load id) -> index of the load closing the first such pair
    std::map<std::pair<std::uint16_t, std::uint16_t>, std::size_t> first_pair;
    std::unordered_map<std::uint32_t, std::size_t> last_store;

    for (std::size_t m = b; m < e; ++m) {
      const auto& q2 = *as_basic(buf[m]);
      if (is_store(q2)) {
        last_store[q2.addr] = m;
        continue;
      }
      auto it = last_store.find(q2.addr);
      if (it == last_store.end())
        continue;
      const std::size_t k = it->second;
      if (removed[k])
        continue;
      const auto& q1 = *as_basic(buf[k]);
      const std::pair key{q1.id.value, q2.id.value};
      auto seen = first_pair.find(key);
      if (seen == first_pair.end()) {
        first_pair.emplace(key, m);
        continue;
      }
      if (seen->second >= k)
        continue; // the earlier pair must be complete before Q1
      if (gate) {
        // nothing after Q1 in the whole buffer, library ranges included,
        // may observe addr2 except Q2 itself
        bool observed = false;
        for (std::size_t x = k + 1; x < buf.size() && !observed; ++x)
          observed = x != m && touches(buf[x], q2.addr);
        if (observed)
          continue;
      }
      removed[k] = true;
      removed[m] = true;
    }
  }
  return drop(buf, removed);
}

/// E: stable sort of each library-free segment by address.
inline PacketBuffer opt_e(PacketBuffer buf) {
  for (auto [b, e] : opt_detail::segments(buf))
    std::stable_sort(buf.begin() + static_cast<std::ptrdiff_t>(b),
                     buf.begin() + static_cast<std::ptrdiff_t>(e),
                     [](const TaggedPacket& x, const TaggedPacket& y) {
                       return as_basic(x)->addr < as_basic(y)->addr;
                     });
  return buf;
}

/// Applies the enabled rules in order A, B, C, D, E and tallies removals.
inline PacketBuffer apply_optimizations(PacketBuffer buf, OptSet opts, PruneCounts& pruned,
                                        bool opt_d_gate = true) {
  auto step = [&](Opt o, auto&& fn) {
    if (!opts.has(o))
      return;
    const auto before = buf.size();
    buf = fn(buf);
    pruned[static_cast<std::size_t>(o)] += before - buf.size();
  };
  step(Opt::A, [](const PacketBuffer& b) { return opt_a(b); });
  step(Opt::B, [](const PacketBuffer& b) { return opt_b(b); });
  step(Opt::C, [](const PacketBuffer& b) { return opt_c(b); });
  step(Opt::D, [&](const PacketBuffer& b) { return opt_d(b, opt_d_gate); });
  step(Opt::E, [](const PacketBuffer& b) { return opt_e(b); });
  return buf;
}

} // namespace dfisim
