#include "nsr/datagen/half.hpp"

#include <cmath>

namespace nsr::datagen {

std::uint16_t to_half_bits(double v) {
  if (std::isnan(v)) return 0x7E00;
  const std::uint16_t sign = std::signbit(v) ? 0x8000 : 0x0000;
  const double a = std::fabs(v);
  if (a == 0.0) return sign;

  // Subnormal range: multiples of 2^-24.
  if (a < 0x1.0p-14) {
    const double q = std::nearbyint(std::ldexp(a, 24));  // ties to even
    return static_cast<std::uint16_t>(sign | static_cast<std::uint16_t>(q));  // q == 1024 is 2^-14
  }
  int e2 = 0;
  std::frexp(a, &e2);
  int exponent = e2 - 1;  // a in [2^exponent, 2^(exponent+1))
  double q = std::nearbyint(std::ldexp(a, 10 - exponent));
  if (q == 2048.0) {
    q = 1024.0;
    ++exponent;
  }
  if (exponent + 15 >= 31) return sign | kHalfMaxPattern;
  const auto biased = static_cast<std::uint16_t>(exponent + 15);
  return static_cast<std::uint16_t>(sign | (biased << 10) | (static_cast<std::uint16_t>(q) - 1024));
}

double half_bits_to_double(std::uint16_t bits) {
  const int exponent = (bits >> 10) & 0x1F;
  const int mantissa = bits & 0x3FF;
  double magnitude = 0.0;
  if (exponent == 0) {
    magnitude = std::ldexp(static_cast<double>(mantissa), -24);
  } else if (exponent == 31) {
    magnitude = mantissa == 0 ? INFINITY : NAN;
  } else {
    magnitude = std::ldexp(1024.0 + mantissa, exponent - 25);
  }
  return (bits & 0x8000) ? -magnitude : magnitude;
}

std::array<std::uint8_t, kBitsPerValue> encode_multihot(double v) {
  const std::uint16_t bits = to_half_bits(v);
  std::array<std::uint8_t, kBitsPerValue> out{};
  for (int k = 0; k < kBitsPerValue; ++k) out[k] = (bits >> (15 - k)) & 1u;
  return out;
}

}  // namespace nsr::datagen
