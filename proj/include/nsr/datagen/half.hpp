#pragma once

#include <array>
#include <cstdint>

namespace nsr::datagen {

inline constexpr int kBitsPerValue = 16;
inline constexpr std::uint16_t kHalfMaxPattern = 0x7BFF;  // 65504

/// IEEE-754 binary16 pattern of `v`, rounded to nearest (ties to even) from
/// the full double value. Finite values beyond the half range saturate to
/// +-65504; NaN maps to the canonical quiet NaN 0x7E00.
std::uint16_t to_half_bits(double v);

/// Exact value of a binary16 pattern.
double half_bits_to_double(std::uint16_t bits);

/// Bit k (k = 0 is the sign bit, MSB first) of the half-precision pattern, as 0/1.
std::array<std::uint8_t, kBitsPerValue> encode_multihot(double v);

}  // namespace nsr::datagen
