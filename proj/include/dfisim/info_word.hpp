#pragma once

// Data word of a DFI store.
//
//   plain:   [16] type (1 = load)            [15..0] id
//   library: [20] 1 [19] has_load [18] len64 [17] has_store   [15..0] id
//   return:  [21] 1 [16] is_return           [15..0] max_static_id + thread

#include <cstdint>
#include <optional>
#include <variant>

#include "dfisim/error.hpp"
#include "dfisim/mir.hpp"

namespace dfisim {

enum class AccessType : std::uint8_t { Store = 0, Load = 1 };

inline constexpr std::uint32_t kDfiDummy = 0x0DF1'D0D0;
inline constexpr std::uint32_t kPacketDummy = 0x0DF1'F1F0;

struct InstrumentationConfig {
  std::uint32_t dfi_dummy = kDfiDummy;
  std::uint32_t packet_dummy = kPacketDummy;
  std::uint32_t thread_id = 0;
};

inline constexpr std::uint32_t kTypeBit = 1u << 16;
inline constexpr std::uint32_t kHasStoreBit = 1u << 17;
inline constexpr std::uint32_t kLen64Bit = 1u << 18;
inline constexpr std::uint32_t kHasLoadBit = 1u << 19;
inline constexpr std::uint32_t kLibraryBit = 1u << 20;
inline constexpr std::uint32_t kReturnBit = 1u << 21;
inline constexpr std::uint32_t kLibraryFlagMask = kHasLoadBit | kLen64Bit | kHasStoreBit;

constexpr std::uint32_t encode_basic_info(AccessType type, InstructionId id) {
  return (static_cast<std::uint32_t>(type) << 16) + id.value;
}

constexpr std::uint32_t encode_library_header(InstructionId id, bool has_load, bool has_store,
                                              bool len64) {
  return kLibraryBit | (has_load ? kHasLoadBit : 0) | (len64 ? kLen64Bit : 0) |
         (has_store ? kHasStoreBit : 0) | id.value;
}

/// Throws ConfigError when max_static_id + thread_id leaves the id space.
inline std::uint32_t encode_return_info(InstructionId max_static_id, std::uint32_t thread_id,
                                        bool is_return) {
  const std::uint64_t composite = std::uint64_t{max_static_id.value} + thread_id;
  if (composite > kMaxIdentifier)
    throw ConfigError("return identifier overflow: " + std::to_string(composite));
  return kReturnBit | (is_return ? kTypeBit : 0) | static_cast<std::uint32_t>(composite);
}

struct BasicInfo {
  AccessType type;
  InstructionId id;
  bool operator==(const BasicInfo&) const = default;
};

struct LibraryInfo {
  InstructionId id;
  bool has_load;
  bool has_store;
  bool len64;
  bool operator==(const LibraryInfo&) const = default;
};

struct ReturnInfo {
  InstructionId id;
  bool is_return;
  bool operator==(const ReturnInfo&) const = default;
};

using InfoWord = std::variant<BasicInfo, LibraryInfo, ReturnInfo>;

/// Inverse of the three encoders; nullopt for words matching no shape.
constexpr std::optional<InfoWord> decode_info(std::uint32_t word) {
  const InstructionId id{word & 0xFFFF};
  if (word >> 22)
    return std::nullopt;
  if (word & kReturnBit) {
    if (word & (kLibraryBit | kLibraryFlagMask))
      return std::nullopt;
    return ReturnInfo{id, (word & kTypeBit) != 0};
  }
  if (word & kLibraryBit) {
    const bool load = word & kHasLoadBit;
    const bool store = word & kHasStoreBit;
    if ((word & kTypeBit) || (!load && !store))
      return std::nullopt;
    return LibraryInfo{id, load, store, (word & kLen64Bit) != 0};
  }
  if (word & kLibraryFlagMask)
    return std::nullopt;
  return BasicInfo{(word & kTypeBit) ? AccessType::Load : AccessType::Store, id};
}

} // namespace dfisim
