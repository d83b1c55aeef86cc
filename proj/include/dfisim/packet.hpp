#pragma once

// DFI packets and their 64-bit FIFO record encoding.
//
//   [63..62] kind: 00 Basic, 01 CompressedPair, 10 Library, 11 Control
//   Basic:          [48] type [47..32] id [31..0] addr
//   CompressedPair: [31..30] slot-valid mask [29..15] slot1 [14..0] slot0
//                   slot = [14] type [13..6] Float8 [5..0] signed id delta
//   Library:        [61..60] 00 header ([20..17] flags, [15..0] id)
//                            01 load addr, 10 store addr, 11 length in words
//   Control:        [61..60] 00 end of stream

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dfisim/float8.hpp"
#include "dfisim/info_word.hpp"
#include "dfisim/mir.hpp"

namespace dfisim {

struct BasicPacket {
  AccessType type = AccessType::Store;
  InstructionId id;
  std::uint32_t addr = 0;
  bool operator==(const BasicPacket&) const = default;
};

struct LibraryPacket {
  InstructionId id;
  std::optional<std::uint32_t> load_addr;
  std::optional<std::uint32_t> store_addr;
  std::uint64_t len_words = 0;
  bool len64 = false;
  bool operator==(const LibraryPacket&) const = default;
};

struct CompressedPacket {
  AccessType type = AccessType::Store;
  Float8 addr_delta;
  std::int8_t id_delta = 0; // -32..31
  bool operator==(const CompressedPacket&) const = default;
};

using DfiPacket = std::variant<BasicPacket, LibraryPacket, CompressedPacket>;

/// A packet in the transmission buffer together with its generation index,
/// which travels as side-band metadata for latency accounting only.
struct TaggedPacket {
  DfiPacket packet;
  std::uint64_t seq = 0;
  bool operator==(const TaggedPacket&) const = default;
};

using PacketBuffer = std::vector<TaggedPacket>;

inline const BasicPacket* as_basic(const TaggedPacket& p) { return std::get_if<BasicPacket>(&p.packet); }
inline const LibraryPacket* as_library(const TaggedPacket& p) {
  return std::get_if<LibraryPacket>(&p.packet);
}

/// Uncompressed footprint in the transmission buffer (one 64-bit record per
/// basic packet; header, operands and length for a library packet).
inline std::uint32_t packet_bytes(const DfiPacket& p) {
  if (const auto* lib = std::get_if<LibraryPacket>(&p))
    return 8 * (2 + (lib->load_addr ? 1 : 0) + (lib->store_addr ? 1 : 0));
  return 8;
}

enum class RecordKind : std::uint8_t { Basic = 0, CompressedPair = 1, Library = 2, Control = 3 };
enum class LibrarySubTag : std::uint8_t { Header = 0, LoadAddr = 1, StoreAddr = 2, Length = 3 };

inline constexpr std::uint64_t kPayloadMask60 = (1ULL << 60) - 1;
inline constexpr std::int8_t kIdDeltaMin = -32;
inline constexpr std::int8_t kIdDeltaMax = 31;

constexpr RecordKind record_kind(std::uint64_t r) { return static_cast<RecordKind>(r >> 62); }

constexpr std::uint64_t make_basic_record(const BasicPacket& p) {
  return (std::uint64_t{static_cast<std::uint8_t>(p.type)} << 48) |
         (std::uint64_t{p.id.value} << 32) | p.addr;
}

constexpr std::uint16_t make_slot(const CompressedPacket& c) {
  return static_cast<std::uint16_t>((static_cast<unsigned>(c.type) << 14) |
                                    (unsigned{c.addr_delta.code()} << 6) |
                                    (static_cast<unsigned>(c.id_delta) & 0x3F));
}

constexpr CompressedPacket parse_slot(std::uint16_t slot) {
  CompressedPacket c;
  c.type = (slot >> 14) & 1 ? AccessType::Load : AccessType::Store;
  c.addr_delta = Float8::from_code(static_cast<std::uint8_t>((slot >> 6) & 0xFF));
  const int raw = slot & 0x3F;
  c.id_delta = static_cast<std::int8_t>(raw >= 32 ? raw - 64 : raw);
  return c;
}

constexpr std::uint64_t make_pair_record(std::optional<CompressedPacket> s0,
                                         std::optional<CompressedPacket> s1) {
  std::uint64_t r = std::uint64_t{static_cast<std::uint8_t>(RecordKind::CompressedPair)} << 62;
  if (s0)
    r |= (1ULL << 30) | make_slot(*s0);
  if (s1)
    r |= (1ULL << 31) | (std::uint64_t{make_slot(*s1)} << 15);
  return r;
}

constexpr std::uint64_t make_library_record(LibrarySubTag tag, std::uint64_t payload) {
  return (std::uint64_t{static_cast<std::uint8_t>(RecordKind::Library)} << 62) |
         (std::uint64_t{static_cast<std::uint8_t>(tag)} << 60) | (payload & kPayloadMask60);
}

inline constexpr std::uint64_t kEndOfStream =
    std::uint64_t{static_cast<std::uint8_t>(RecordKind::Control)} << 62;

/// Wire cost of a record: a compressed pair occupies one 32-bit word, every
/// other record one 64-bit unit.
constexpr std::uint32_t record_wire_bytes(std::uint64_t r) {
  return record_kind(r) == RecordKind::CompressedPair ? 4 : 8;
}

/// FIFO entry: the 64-bit record plus the generation index of each packet
/// it carries (slot order for compressed pairs).
struct Record {
  std::uint64_t bits = 0;
  std::array<std::uint64_t, 2> seq{};
  bool operator==(const Record&) const = default;
};

/// Decompression reference: address and id of the last basic packet.
struct Reference {
  bool valid = false;
  std::uint32_t addr = 0;
  InstructionId id;
  bool operator==(const Reference&) const = default;
};

inline std::optional<CompressedPacket> try_compress(const Reference& ref, const BasicPacket& p) {
  if (!ref.valid)
    return std::nullopt;
  const auto delta = compress_delta(ref.addr, p.addr);
  if (!delta)
    return std::nullopt;
  const int id_delta = int{p.id.value} - int{ref.id.value};
  if (id_delta < kIdDeltaMin || id_delta > kIdDeltaMax)
    return std::nullopt;
  return CompressedPacket{p.type, *delta, static_cast<std::int8_t>(id_delta)};
}

inline void append_library_records(const LibraryPacket& lib, std::uint64_t seq,
                                   std::vector<Record>& out) {
  const std::uint64_t header = encode_library_header(lib.id, lib.load_addr.has_value(),
                                                     lib.store_addr.has_value(), lib.len64);
  out.push_back({make_library_record(LibrarySubTag::Header, header), {seq, 0}});
  if (lib.load_addr)
    out.push_back({make_library_record(LibrarySubTag::LoadAddr, *lib.load_addr), {seq, 0}});
  if (lib.store_addr)
    out.push_back({make_library_record(LibrarySubTag::StoreAddr, *lib.store_addr), {seq, 0}});
  out.push_back({make_library_record(LibrarySubTag::Length, lib.len_words), {seq, 0}});
}

/// Encodes an optimized buffer. With compress, a basic packet whose address
/// and id deltas against ref fit a slot is emitted compressed; consecutive
/// slots share one pair record. ref is advanced past every basic packet.
inline std::vector<Record> compress_buffer(const PacketBuffer& buffer, Reference& ref,
                                           bool compress = true) {
  std::vector<Record> out;
  std::optional<std::pair<CompressedPacket, std::uint64_t>> half;
  auto flush_half = [&] {
    if (half) {
      out.push_back({make_pair_record(half->first, std::nullopt), {half->second, 0}});
      half.reset();
    }
  };
  for (const auto& tp : buffer) {
    if (const auto* lib = as_library(tp)) {
      flush_half();
      append_library_records(*lib, tp.seq, out);
      continue;
    }
    const auto* basic = as_basic(tp);
    if (!basic)
      continue;
    const auto slot = compress ? try_compress(ref, *basic) : std::nullopt;
    if (slot) {
      if (half) {
        out.push_back({make_pair_record(half->first, *slot), {half->second, tp.seq}});
        half.reset();
      } else {
        half.emplace(*slot, tp.seq);
      }
    } else {
      flush_half();
      out.push_back({make_basic_record(*basic), {tp.seq, 0}});
    }
    ref = {true, basic->addr, basic->id};
  }
  flush_half();
  return out;
}

/// Record stream to packet stream. Holds the checker-side decompression
/// reference and the partially received library sequence.
class RecordDecoder {
public:
  enum class Status { Ok, EndOfStream, Malformed };

  /// Calls on_basic(BasicPacket, seq) / on_library(LibraryPacket, seq) for
  /// every packet completed by r. On Malformed, error() describes why.
  template <class OnBasic, class OnLibrary>
  Status feed(const Record& r, OnBasic&& on_basic, OnLibrary&& on_library) {
    const auto kind = record_kind(r.bits);
    if (lib_ && kind != RecordKind::Library)
      return fail("library sequence interrupted");
    switch (kind) {
    case RecordKind::Basic: {
      BasicPacket p;
      p.type = (r.bits >> 48) & 1 ? AccessType::Load : AccessType::Store;
      p.id = InstructionId{static_cast<std::uint32_t>((r.bits >> 32) & 0xFFFF)};
      p.addr = static_cast<std::uint32_t>(r.bits);
      if ((r.bits >> 49) & 0x1FFF)
        return fail("reserved bits set in basic record");
      ref_ = {true, p.addr, p.id};
      on_basic(p, r.seq[0]);
      return Status::Ok;
    }
    case RecordKind::CompressedPair: {
      const unsigned mask = (r.bits >> 30) & 3;
      if (mask == 0 || mask == 2)
        return fail("compressed pair with empty leading slot");
      for (unsigned s = 0; s < 2; ++s) {
        if (!((mask >> s) & 1))
          continue;
        const auto p = expand(parse_slot(static_cast<std::uint16_t>((r.bits >> (15 * s)) & 0x7FFF)));
        if (!p)
          return fail("compressed record before any reference");
        on_basic(*p, r.seq[s]);
      }
      return Status::Ok;
    }
    case RecordKind::Library: return feed_library(r, on_library);
    case RecordKind::Control:
      if (((r.bits >> 60) & 3) != 0)
        return fail("unknown control record");
      return Status::EndOfStream;
    }
    return fail("unknown record kind");
  }

  /// Absolute packet for a slot; advances the reference. nullopt without one.
  std::optional<BasicPacket> expand(const CompressedPacket& c) {
    if (!ref_.valid)
      return std::nullopt;
    BasicPacket p;
    p.type = c.type;
    p.addr = static_cast<std::uint32_t>(std::int64_t{ref_.addr} + c.addr_delta.value());
    p.id = InstructionId{static_cast<std::uint32_t>(int{ref_.id.value} + c.id_delta)};
    ref_ = {true, p.addr, p.id};
    return p;
  }

  void note(const BasicPacket& p) { ref_ = {true, p.addr, p.id}; }

  const std::string& error() const { return error_; }
  const Reference& reference() const { return ref_; }
  void set_reference(const Reference& ref) { ref_ = ref; }

private:
  Reference ref_;
  std::optional<LibraryPacket> lib_;
  std::uint64_t lib_seq_ = 0;
  int stage_ = 0; // 0 expect load addr, 1 expect store addr, 2 expect length
  std::string error_;

  Status fail(std::string why) {
    error_ = std::move(why);
    lib_.reset();
    return Status::Malformed;
  }

  void skip_absent() {
    if (stage_ == 0 && !lib_->load_addr)
      stage_ = 1;
    if (stage_ == 1 && !lib_->store_addr)
      stage_ = 2;
  }

  template <class OnLibrary> Status feed_library(const Record& r, OnLibrary&& on_library) {
    const auto tag = static_cast<LibrarySubTag>((r.bits >> 60) & 3);
    const std::uint64_t payload = r.bits & kPayloadMask60;
    if (tag == LibrarySubTag::Header) {
      if (lib_)
        return fail("nested library header");
      const auto info = decode_info(static_cast<std::uint32_t>(payload));
      const auto* li = info ? std::get_if<LibraryInfo>(&*info) : nullptr;
      if (!li || (payload >> 32))
        return fail("bad library header");
      lib_ = LibraryPacket{li->id, std::nullopt, std::nullopt, 0, li->len64};
      // placeholders mark which operands are expected
      if (li->has_load)
        lib_->load_addr = 0;
      if (li->has_store)
        lib_->store_addr = 0;
      lib_seq_ = r.seq[0];
      stage_ = 0;
      skip_absent();
      return Status::Ok;
    }
    if (!lib_)
      return fail("library operand without header");
    const int want = tag == LibrarySubTag::LoadAddr ? 0 : tag == LibrarySubTag::StoreAddr ? 1 : 2;
    if (want != stage_)
      return fail("library operand out of order");
    if (want < 2 && (payload >> 32))
      return fail("library address exceeds 32 bits");
    if (want == 0) {
      lib_->load_addr = static_cast<std::uint32_t>(payload);
      stage_ = 1;
      skip_absent();
      return Status::Ok;
    }
    if (want == 1) {
      lib_->store_addr = static_cast<std::uint32_t>(payload);
      stage_ = 2;
      return Status::Ok;
    }
    lib_->len_words = payload;
    auto done = *lib_;
    lib_.reset();
    on_library(done, lib_seq_);
    return Status::Ok;
  }
};

/// Decodes a whole record stream (without end marker) back to packets,
/// starting from ref. Used to check losslessness.
inline std::optional<PacketBuffer> decompress_records(const std::vector<Record>& records,
                                                      Reference ref = {}) {
  RecordDecoder dec;
  dec.set_reference(ref);
  PacketBuffer out;
  for (const auto& r : records) {
    const auto st = dec.feed(
        r, [&](const BasicPacket& p, std::uint64_t seq) { out.push_back({p, seq}); },
        [&](const LibraryPacket& p, std::uint64_t seq) { out.push_back({p, seq}); });
    if (st != RecordDecoder::Status::Ok)
      return std::nullopt;
  }
  return out;
}

} // namespace dfisim
