#pragma once

// Info-collector model. It watches every executed store (and latches the
// address of every ordinary access), recognizes DFI stores by their target
// address, assembles packets, stages them in the transmission buffer and, at
// flush, prunes, sorts and compresses them into FIFO records.

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "dfisim/error.hpp"
#include "dfisim/info_word.hpp"
#include "dfisim/interpreter.hpp"
#include "dfisim/optimizations.hpp"
#include "dfisim/packet.hpp"
#include "dfisim/violation.hpp"

namespace dfisim {

inline constexpr std::uint32_t kMinBufferBytes = 32; // room for the largest library packet

struct CollectorConfig {
  std::uint32_t buffer_bytes = 2048;
  OptSet opts = kDefaultOpts;
  bool compression = true;
  bool opt_d_gate = true;
  bool detect_double_dfi_store = false;
  InstrumentationConfig instrumentation{};
};

struct CollectorMetrics {
  std::uint64_t packets_generated = 0;
  PruneCounts pruned{};
  std::uint64_t records_emitted = 0;
  std::uint64_t wire_bytes = 0;
  std::uint64_t baseline_bytes = 0;
  std::uint64_t flushes = 0;
};

class Collector {
public:
  using RecordSink = std::function<void(const Record&)>;

  Collector(CollectorConfig cfg, RecordSink sink) : cfg_(cfg), sink_(std::move(sink)) {
    if (cfg_.buffer_bytes < kMinBufferBytes)
      throw ConfigError("transmission buffer must hold at least " + std::to_string(kMinBufferBytes) +
                        " bytes");
  }

  /// Ordinary or DFI load: only the address is latched.
  void observe_load(std::uint32_t addr) {
    last_mem_addr_ = addr;
    after_dfi_store_ = false;
  }

  void observe_store(std::uint32_t addr, std::uint32_t data) {
    // dummy capture: each channel address is set once
    if (!dfi_global_ && data == cfg_.instrumentation.dfi_dummy) {
      dfi_global_ = addr;
      return;
    }
    if (!packet_mem_addr_ && data == cfg_.instrumentation.packet_dummy) {
      packet_mem_addr_ = addr;
      return;
    }
    if (dfi_global_ && addr == *dfi_global_) {
      dfi_store(data);
      return;
    }
    if (pending_) {
      report(ViolationKind::MalformedSequence, addr);
      pending_.reset();
    }
    if (packet_mem_addr_ && addr >= *packet_mem_addr_ && addr - *packet_mem_addr_ < kFifoWindowBytes)
      report(ViolationKind::FifoAccessViolation, addr);
    last_mem_addr_ = addr;
    after_dfi_store_ = false;
  }

  /// Flushes the buffer and appends the end-of-stream record.
  void finish() {
    if (pending_) {
      report(ViolationKind::MalformedSequence, last_mem_addr_.value_or(0));
      pending_.reset();
    }
    flush();
    emit({kEndOfStream, {generated(), 0}});
    metrics_.baseline_bytes += 8;
  }

  void flush() {
    if (buffer_.empty())
      return;
    ++metrics_.flushes;
    auto optimized = apply_optimizations(std::move(buffer_), cfg_.opts, metrics_.pruned, cfg_.opt_d_gate);
    buffer_.clear();
    occupancy_ = 0;
    for (const auto& r : compress_buffer(optimized, reference_, cfg_.compression))
      emit(r);
  }

  const CollectorMetrics& metrics() const { return metrics_; }
  const std::vector<Violation>& violations() const { return violations_; }
  std::uint64_t generated() const { return metrics_.packets_generated; }
  std::uint32_t occupancy() const { return occupancy_; }
  std::optional<std::uint32_t> dfi_global() const { return dfi_global_; }
  std::optional<std::uint32_t> packet_mem_addr() const { return packet_mem_addr_; }

private:
  struct Pending {
    std::optional<LibraryInfo> library;
    std::optional<ReturnInfo> ret;
    std::vector<std::uint32_t> words;
    std::size_t expected = 0;
  };

  CollectorConfig cfg_;
  RecordSink sink_;
  std::optional<std::uint32_t> dfi_global_;
  std::optional<std::uint32_t> packet_mem_addr_;
  std::optional<std::uint32_t> last_mem_addr_;
  std::optional<Pending> pending_;
  bool after_dfi_store_ = false;
  PacketBuffer buffer_;
  std::uint32_t occupancy_ = 0;
  Reference reference_;
  CollectorMetrics metrics_;
  std::vector<Violation> violations_;

  void report(ViolationKind kind, std::uint32_t addr, InstructionId id = {}) {
    violations_.push_back({kind, id, {}, addr, 0});
  }

  void emit(const Record& r) {
    ++metrics_.records_emitted;
    metrics_.wire_bytes += record_wire_bytes(r.bits);
    sink_(r);
  }

  void dfi_store(std::uint32_t data) {
    if (pending_) {
      pending_->words.push_back(data);
      if (pending_->words.size() == pending_->expected)
        complete_sequence();
      after_dfi_store_ = true;
      return;
    }
    const auto info = decode_info(data);
    if (!info) {
      report(ViolationKind::MalformedSequence, *dfi_global_);
      return;
    }
    if (const auto* basic = std::get_if<BasicInfo>(&*info)) {
      if (cfg_.detect_double_dfi_store && after_dfi_store_)
        report(ViolationKind::DoubleDfiStore, last_mem_addr_.value_or(0), basic->id);
      after_dfi_store_ = true;
      if (!last_mem_addr_) {
        report(ViolationKind::MalformedSequence, *dfi_global_, basic->id);
        return;
      }
      push(BasicPacket{basic->type, basic->id, *last_mem_addr_});
      return;
    }
    after_dfi_store_ = true;
    Pending p;
    if (const auto* lib = std::get_if<LibraryInfo>(&*info)) {
      p.library = *lib;
      p.expected = (lib->has_load ? 1 : 0) + (lib->has_store ? 1 : 0) + (lib->len64 ? 2 : 1);
    } else {
      p.ret = std::get<ReturnInfo>(*info);
      p.expected = 1;
    }
    pending_ = std::move(p);
  }

  void complete_sequence() {
    Pending p = std::move(*pending_);
    pending_.reset();
    if (p.ret) {
      push(BasicPacket{p.ret->is_return ? AccessType::Load : AccessType::Store, p.ret->id, p.words[0]});
      return;
    }
    const auto& lib = *p.library;
    LibraryPacket pkt;
    pkt.id = lib.id;
    pkt.len64 = lib.len64;
    std::size_t i = 0;
    if (lib.has_load)
      pkt.load_addr = p.words[i++];
    if (lib.has_store)
      pkt.store_addr = p.words[i++];
    std::uint64_t bytes = p.words[i++];
    if (lib.len64)
      bytes |= std::uint64_t{p.words[i++]} << 32;
    pkt.len_words = (bytes + 3) / 4;
    push(pkt);
  }

  void push(DfiPacket pkt) {
    const auto bytes = packet_bytes(pkt);
    metrics_.baseline_bytes += bytes;
    if (occupancy_ + bytes > cfg_.buffer_bytes)
      flush();
    buffer_.push_back({std::move(pkt), metrics_.packets_generated++});
    occupancy_ += bytes;
  }
};

/// Interpreter sink feeding a collector with the raw access stream.
struct CollectorSink {
  Collector& collector;

  void on_load(const Instruction&, std::uint32_t addr) { collector.observe_load(addr); }
  void on_store(const Instruction&, std::uint32_t addr, std::uint32_t value) {
    collector.observe_store(addr, value);
  }
  void on_libcall(const Instruction&, const LibraryAccess&) {}
};

} // namespace dfisim
