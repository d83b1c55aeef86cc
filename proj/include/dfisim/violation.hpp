#pragma once

#include <cstdint>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>

#include "dfisim/mir.hpp"

namespace dfisim {

enum class ViolationKind { DfiCheckFailure, FifoAccessViolation, MalformedSequence, DoubleDfiStore };

inline std::string_view kind_name(ViolationKind k) {
  switch (k) {
  case ViolationKind::DfiCheckFailure: return "DfiCheckFailure";
  case ViolationKind::FifoAccessViolation: return "FifoAccessViolation";
  case ViolationKind::MalformedSequence: return "MalformedSequence";
  case ViolationKind::DoubleDfiStore: return "DoubleDfiStore";
  }
  return "?";
}

/// For DfiCheckFailure, found_id is not in the RDS of load_id. packet_index
/// counts the packets generated between the offending packet and the check.
struct Violation {
  ViolationKind kind = ViolationKind::DfiCheckFailure;
  InstructionId load_id;
  InstructionId found_id;
  std::uint32_t addr = 0;
  std::uint64_t packet_index = 0;

  bool operator==(const Violation&) const = default;
  /// Order used to compare verdict multisets; ignores packet_index.
  auto verdict_key() const {
    return std::tuple{static_cast<int>(kind), load_id.value, found_id.value, addr};
  }
};

inline std::string format_violation(const Violation& v) {
  std::ostringstream os;
  os << "VIOLATION kind=" << kind_name(v.kind) << " load_id=" << v.load_id.value
     << " found_id=" << v.found_id.value << " addr=0x" << std::hex << v.addr << std::dec
     << " packet_index=" << v.packet_index;
  return os.str();
}

} // namespace dfisim
