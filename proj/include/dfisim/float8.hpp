#pragma once

// 8-bit address-delta format: [7] sign, [6..3] significand, [2..0] exponent.
// value = (-1)^sign * significand * 16^exponent, so |value| <= 15 * 2^28.

#include <cstdint>
#include <optional>

namespace dfisim {

class Float8 {
public:
  static constexpr std::int64_t kMaxMagnitude = 15LL << 28;

  constexpr Float8() = default;
  constexpr Float8(bool negative, std::uint8_t significand, std::uint8_t exponent)
      : code_(static_cast<std::uint8_t>((negative ? 0x80 : 0) | ((significand & 0xF) << 3) |
                                        (exponent & 0x7))) {}

  static constexpr Float8 from_code(std::uint8_t code) {
    Float8 f;
    f.code_ = code;
    return f;
  }

  constexpr std::uint8_t code() const { return code_; }
  constexpr bool negative() const { return (code_ & 0x80) != 0; }
  constexpr std::uint8_t significand() const { return (code_ >> 3) & 0xF; }
  constexpr std::uint8_t exponent() const { return code_ & 0x7; }

  constexpr std::int64_t value() const {
    const std::int64_t mag = static_cast<std::int64_t>(significand()) << (4 * exponent());
    return negative() ? -mag : mag;
  }

  constexpr bool operator==(const Float8&) const = default;

private:
  std::uint8_t code_ = 0;
};

/// Canonical encoding of delta, if representable. Zero encodes as all-zero
/// bits; every other representable value has exactly one encoding.
constexpr std::optional<Float8> encode_float8(std::int64_t delta) {
  if (delta == 0)
    return Float8{};
  const bool neg = delta < 0;
  std::uint64_t mag = neg ? static_cast<std::uint64_t>(-delta) : static_cast<std::uint64_t>(delta);
  if (mag > static_cast<std::uint64_t>(Float8::kMaxMagnitude))
    return std::nullopt;
  std::uint8_t exp = 0;
  while (mag > 15) {
    if ((mag & 0xF) != 0)
      return std::nullopt;
    mag >>= 4;
    ++exp;
  }
  if (exp > 7)
    return std::nullopt;
  return Float8{neg, static_cast<std::uint8_t>(mag), exp};
}

/// Float8 encoding of cur - prev, if representable.
constexpr std::optional<Float8> compress_delta(std::int64_t prev_addr, std::int64_t cur_addr) {
  return encode_float8(cur_addr - prev_addr);
}

} // namespace dfisim
