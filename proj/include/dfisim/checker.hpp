#pragma once

// Memory-side checking program. Keeps the reaching-definition table (one
// 16-bit writer id per word) and checks every load against its RDS. A load
// whose id exceeds max_static_id is a return check and must find exactly
// its own id.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dfisim/error.hpp"
#include "dfisim/fifo.hpp"
#include "dfisim/packet.hpp"
#include "dfisim/rda.hpp"
#include "dfisim/violation.hpp"

namespace dfisim {

class Rdt {
public:
  explicit Rdt(std::uint32_t memory_bytes) : entries_(memory_bytes / 4, kNeverWritten) {
    if (memory_bytes % 4 != 0)
      throw ConfigError("memory size must be a multiple of 4");
  }

  InstructionId get(std::uint32_t addr) const { return entries_.at(index(addr)); }
  void set(std::uint32_t addr, InstructionId id) { entries_.at(index(addr)) = id; }

  std::size_t size() const { return entries_.size(); }
  std::size_t byte_size() const { return entries_.size() * sizeof(std::uint16_t); }
  const std::vector<InstructionId>& entries() const { return entries_; }

  bool operator==(const Rdt&) const = default;

private:
  std::size_t index(std::uint32_t addr) const {
    const std::size_t i = addr >> 2;
    if (i >= entries_.size())
      throw ConfigError("RDT access outside memory at 0x" + to_hex(addr));
    return i;
  }
  static std::string to_hex(std::uint32_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s;
    do {
      s.insert(s.begin(), digits[v & 0xF]);
      v >>= 4;
    } while (v);
    return s;
  }

  std::vector<InstructionId> entries_;
};

class Checker {
public:
  Checker(RdsMap rds, std::uint32_t memory_bytes) : rds_(std::move(rds)), rdt_(memory_bytes) {}

  /// Store: record the writer. Load: check the recorded writer.
  std::optional<Violation> process_basic(AccessType type, InstructionId id, std::uint32_t addr,
                                         std::uint64_t seq = 0) {
    ++packets_processed_;
    decoder_.note({type, id, addr});
    if (type == AccessType::Store) {
      rdt_.set(addr, id);
      return std::nullopt;
    }
    const auto found = rdt_.get(addr);
    if (allowed(id, found))
      return std::nullopt;
    return flag({ViolationKind::DfiCheckFailure, id, found, addr, latency(seq)});
  }

  std::optional<Violation> process_compressed(const CompressedPacket& slot, std::uint64_t seq = 0) {
    const auto p = decoder_.expand(slot);
    if (!p)
      return flag({ViolationKind::MalformedSequence, {}, {}, 0, latency(seq)});
    return process_basic(p->type, p->id, p->addr, seq);
  }

  /// Checks every source word, then writes every destination word.
  std::vector<Violation> process_library(const LibraryPacket& lib, std::uint64_t seq = 0) {
    ++packets_processed_;
    std::vector<Violation> out;
    auto check_range = [&](std::uint32_t base) {
      if (lib.len_words > rdt_.size() || (base >> 2) + lib.len_words > rdt_.size())
        throw ConfigError("library range exceeds memory");
    };
    if (lib.load_addr) {
      check_range(*lib.load_addr);
      for (std::uint64_t i = 0; i < lib.len_words; ++i) {
        const auto addr = *lib.load_addr + 4 * static_cast<std::uint32_t>(i);
        const auto found = rdt_.get(addr);
        if (!allowed(lib.id, found))
          out.push_back(*flag({ViolationKind::DfiCheckFailure, lib.id, found, addr, latency(seq)}));
      }
    }
    if (lib.store_addr) {
      check_range(*lib.store_addr);
      for (std::uint64_t i = 0; i < lib.len_words; ++i)
        rdt_.set(*lib.store_addr + 4 * static_cast<std::uint32_t>(i), lib.id);
    }
    return out;
  }

  /// Pops every available record. Returns true once end-of-stream is read.
  /// `now` is the producer's packet count, used for detection latency.
  bool consume(FifoMemory& fifo, std::uint64_t now) {
    now_ = now;
    while (!finished_) {
      auto r = fifo.pop();
      if (!r)
        return false;
      const auto st = decoder_.feed(
          *r, [&](const BasicPacket& p, std::uint64_t seq) { process_basic(p.type, p.id, p.addr, seq); },
          [&](const LibraryPacket& p, std::uint64_t seq) { process_library(p, seq); });
      if (st == RecordDecoder::Status::EndOfStream)
        finished_ = true;
      else if (st == RecordDecoder::Status::Malformed)
        flag({ViolationKind::MalformedSequence, {}, {}, 0, latency(r->seq[0])});
    }
    return true;
  }

  const Rdt& rdt() const { return rdt_; }
  const RdsMap& rds() const { return rds_; }
  const std::vector<Violation>& violations() const { return violations_; }
  std::uint64_t packets_processed() const { return packets_processed_; }
  std::uint64_t max_latency() const { return max_latency_; }
  bool finished() const { return finished_; }
  const Reference& reference() const { return decoder_.reference(); }

private:
  RdsMap rds_;
  Rdt rdt_;
  RecordDecoder decoder_;
  std::vector<Violation> violations_;
  std::uint64_t packets_processed_ = 0;
  std::uint64_t now_ = 0;
  std::uint64_t max_latency_ = 0;
  bool finished_ = false;

  bool allowed(InstructionId load, InstructionId found) const {
    if (load > rds_.max_static_id)
      return found == load;
    return rds_.allows(load, found);
  }

  // packets generated after the offending one before it was checked
  std::uint64_t latency(std::uint64_t seq) const { return now_ > seq + 1 ? now_ - seq - 1 : 0; }

  std::optional<Violation> flag(Violation v) {
    max_latency_ = std::max(max_latency_, v.packet_index);
    violations_.push_back(v);
    return v;
  }
};

} // namespace dfisim
