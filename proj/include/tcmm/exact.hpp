// SPDX-License-Identifier: MIT
//
// exact.hpp — exact significand arithmetic.
//
// Matrix-unit datapaths compute on unnormalized fixed-point significands.
// This header provides the substrate: exact dyadic values of arbitrary
// precision (ExactScaled), exponent alignment with mode-controlled rounding
// into a shared fixed-point grid (AlignedFixed), exact fixed-point summation,
// and normalization into fp32/fp16 output patterns.

#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <bit>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "tcmm/formats.hpp"

namespace tcmm {

using BigInt = boost::multiprecision::cpp_int;

// ---------------------------------------------------------------------------
// Rounding modes
// ---------------------------------------------------------------------------

// Directed modes plus the six tie-breaking flavours of round-to-nearest.
enum class RoundingMode : uint8_t {
  RU,   // toward +inf
  RD,   // toward -inf
  RZ,   // toward zero
  RA,   // away from zero
  RNU,  // nearest, ties toward +inf
  RND,  // nearest, ties toward -inf
  RNZ,  // nearest, ties toward zero
  RNA,  // nearest, ties away from zero
  RNE,  // nearest, ties to even
  RNO,  // nearest, ties to odd
};

inline const char* rounding_mode_name(RoundingMode m) {
  switch (m) {
    case RoundingMode::RU: return "RU";
    case RoundingMode::RD: return "RD";
    case RoundingMode::RZ: return "RZ";
    case RoundingMode::RA: return "RA";
    case RoundingMode::RNU: return "RNU";
    case RoundingMode::RND: return "RND";
    case RoundingMode::RNZ: return "RNZ";
    case RoundingMode::RNA: return "RNA";
    case RoundingMode::RNE: return "RNE";
    case RoundingMode::RNO: return "RNO";
  }
  return "?";
}

inline bool is_nearest(RoundingMode m) {
  return m >= RoundingMode::RNU;
}

// ---------------------------------------------------------------------------
// ExactScaled: sign * magnitude * 2^exp2, magnitude a nonnegative integer
// ---------------------------------------------------------------------------

// Exact dyadic rational.  Zero keeps its sign so that flush/zero-sign rules
// stay expressible.  No operation here loses bits except the ones whose name
// says so.
struct ExactScaled {
  int sign = +1;     // +1 or -1
  BigInt mag = 0;    // >= 0
  long exp2 = 0;     // value = sign * mag * 2^exp2

  bool is_zero() const { return mag == 0; }
};

inline ExactScaled exact_zero() { return {+1, 0, 0}; }

// Decoded storage value -> exact dyadic.  Finite classes only.
inline ExactScaled to_exact(const DecodedNumber& d) {
  assert(is_finite(d));
  return {d.sign, BigInt(d.sig), static_cast<long>(d.exponent) - d.frac_bits};
}

// Exact unnormalized product of two finite decoded values.  The significands
// multiply and the exponents add; the result is NOT renormalized (a product
// of two values in [1,2) is kept as s in [1,4)).
inline ExactScaled exact_mul(const DecodedNumber& a, const DecodedNumber& b) {
  assert(is_finite(a) && is_finite(b));
  return {a.sign * b.sign, BigInt(a.sig) * b.sig,
          static_cast<long>(a.exponent) - a.frac_bits +
              static_cast<long>(b.exponent) - b.frac_bits};
}

inline ExactScaled exact_mul(const ExactScaled& a, const ExactScaled& b) {
  return {a.sign * b.sign, a.mag * b.mag, a.exp2 + b.exp2};
}

inline ExactScaled exact_neg(ExactScaled v) {
  v.sign = -v.sign;
  return v;
}

// Exact sum (aligns to the smaller scale; lossless).
inline ExactScaled exact_add(const ExactScaled& a, const ExactScaled& b) {
  if (a.is_zero()) return b.is_zero() ? exact_zero() : b;
  if (b.is_zero()) return a;
  long e = std::min(a.exp2, b.exp2);
  BigInt am = a.mag << static_cast<unsigned>(a.exp2 - e);
  BigInt bm = b.mag << static_cast<unsigned>(b.exp2 - e);
  BigInt s = (a.sign > 0 ? am : -am) + (b.sign > 0 ? bm : -bm);
  if (s == 0) return exact_zero();
  return s > 0 ? ExactScaled{+1, s, e} : ExactScaled{-1, -s, e};
}

// Floor of log2(|v|); v must be nonzero.
inline long floor_log2(const ExactScaled& v) {
  assert(!v.is_zero());
  return static_cast<long>(boost::multiprecision::msb(v.mag)) + v.exp2;
}

// Exact comparison of |a| against m * 2^e (m >= 0).
inline int cmp_abs(const ExactScaled& a, int64_t m, long e) {
  BigInt rhs = m;
  if (a.is_zero()) return rhs == 0 ? 0 : -1;
  long common = std::min(a.exp2, e);
  BigInt lhs = a.mag << static_cast<unsigned>(a.exp2 - common);
  rhs <<= static_cast<unsigned>(e - common);
  if (lhs < rhs) return -1;
  return lhs == rhs ? 0 : +1;
}

// Exact comparison of |a| against 2^e.
inline int cmp_abs_pow2(const ExactScaled& a, long e) {
  return cmp_abs(a, 1, e);
}

// Exact conversion helpers (mostly for tests and reports).
inline ExactScaled exact_from_double(double x) {
  assert(std::isfinite(x));
  if (x == 0.0) return {std::signbit(x) ? -1 : +1, 0, 0};
  int sign = x < 0 ? -1 : +1;
  x = std::fabs(x);
  int e;
  double m = std::frexp(x, &e);          // x = m * 2^e, m in [0.5, 1)
  uint64_t mi = static_cast<uint64_t>(std::ldexp(m, 53));
  return {sign, BigInt(mi), static_cast<long>(e) - 53};
}

inline double exact_to_double(const ExactScaled& v) {
  if (v.is_zero()) return v.sign < 0 ? -0.0 : 0.0;
  // Round via long double to keep small dyadics exact in reports.
  long double acc = 0.0L;
  BigInt m = v.mag;
  long sh = v.exp2;
  // Peel 32 bits at a time.
  std::vector<uint32_t> limbs;
  while (m != 0) {
    limbs.push_back(static_cast<uint32_t>(m & 0xFFFFFFFFu));
    m >>= 32;
  }
  for (size_t i = limbs.size(); i-- > 0;) {
    acc = acc * 4294967296.0L + limbs[i];
  }
  acc = std::ldexp(acc, static_cast<int>(sh));
  return static_cast<double>(v.sign < 0 ? -acc : acc);
}

// ---------------------------------------------------------------------------
// round_at: round an exact value to a multiple of a power-of-two ulp
// ---------------------------------------------------------------------------

namespace detail {

// Rounds the signed integer q + (rem / 2^shift) * sign_of_q... —
// concretely: given |v| = (q * 2^shift + rem) * 2^grain with
// 0 <= rem < 2^shift, decides whether the magnitude rounds to q or q+1
// under `mode` for a value of sign `sign`.
inline BigInt round_magnitude(BigInt q, const BigInt& rem, unsigned shift,
                              int sign, RoundingMode mode) {
  if (rem == 0) return q;
  bool up;  // increase magnitude?
  switch (mode) {
    case RoundingMode::RZ: up = false; break;
    case RoundingMode::RA: up = true; break;
    case RoundingMode::RU: up = sign > 0; break;
    case RoundingMode::RD: up = sign < 0; break;
    default: {
      BigInt half = BigInt(1) << (shift - 1);
      if (rem > half) { up = true; break; }
      if (rem < half) { up = false; break; }
      switch (mode) {  // exact tie
        case RoundingMode::RNU: up = sign > 0; break;
        case RoundingMode::RND: up = sign < 0; break;
        case RoundingMode::RNZ: up = false; break;
        case RoundingMode::RNA: up = true; break;
        case RoundingMode::RNE: up = boost::multiprecision::bit_test(q, 0);
          break;
        case RoundingMode::RNO: up = !boost::multiprecision::bit_test(q, 0);
          break;
        default: up = false; break;
      }
    }
  }
  return up ? q + 1 : q;
}

}  // namespace detail

// Rounds v to an integer multiple of 2^grain_exp2 under `mode`; exact when v
// already lies on the grid.  Returns the multiple as a signed BigInt.
inline BigInt round_to_units(const ExactScaled& v, long grain_exp2,
                             RoundingMode mode) {
  if (v.is_zero()) return 0;
  long d = v.exp2 - grain_exp2;
  BigInt units;
  if (d >= 0) {
    units = v.mag << static_cast<unsigned>(d);
  } else {
    unsigned shift = static_cast<unsigned>(-d);
    BigInt q = v.mag >> shift;
    BigInt rem = v.mag - (q << shift);
    units = detail::round_magnitude(q, rem, shift, v.sign, mode);
  }
  return v.sign > 0 ? units : -units;
}

// round_at: same rounding, returned as an exact value.
inline ExactScaled round_at(const ExactScaled& v, long ulp_exp2,
                            RoundingMode mode) {
  BigInt units = round_to_units(v, ulp_exp2, mode);
  if (units == 0) {
    // Directed rounds keep the sign of the interval they collapse from.
    return {v.sign, 0, ulp_exp2};
  }
  if (units > 0) return {+1, units, ulp_exp2};
  return {-1, -units, ulp_exp2};
}

// ---------------------------------------------------------------------------
// AlignedFixed: one shared fixed-point grid
// ---------------------------------------------------------------------------

// A signed fixed-point number value = units * 2^(ref_exp - frac_bits).
// Summands aligned to the same (ref_exp, frac_bits) add exactly.
struct AlignedFixed {
  long ref_exp = 0;
  int frac_bits = 0;
  BigInt units = 0;  // signed

  ExactScaled value() const {
    if (units == 0) return exact_zero();
    if (units > 0) return {+1, units, ref_exp - frac_bits};
    return {-1, -units, ref_exp - frac_bits};
  }
};

// Aligns v to reference exponent e_ref keeping F fractional bits; bits below
// the grid are disposed of according to `mode`.
inline AlignedFixed align_round(const ExactScaled& v, long e_ref, int F,
                                RoundingMode mode) {
  return {e_ref, F, round_to_units(v, e_ref - F, mode)};
}

// Exact fixed-point sum; all terms must share the grid.
inline AlignedFixed fixed_sum(std::span<const AlignedFixed> terms) {
  assert(!terms.empty());
  AlignedFixed acc{terms[0].ref_exp, terms[0].frac_bits, 0};
  for (const AlignedFixed& t : terms) {
    assert(t.ref_exp == acc.ref_exp && t.frac_bits == acc.frac_bits &&
           "fixed_sum terms must share one grid");
    acc.units += t.units;
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Output normalization
// ---------------------------------------------------------------------------

namespace detail {

// Encodes a value already known to be exactly representable in `fmt`
// (finite, in range, fits the fraction width).  Zero encodes as +0.
inline uint64_t encode_exact_ieee(FormatId fmt, const ExactScaled& v) {
  const FormatSpec& f = format_spec(fmt);
  if (v.is_zero()) return 0;
  long fl = floor_log2(v);
  long e = std::max(fl, static_cast<long>(f.min_normal_exp));
  long grain = e - f.fraction_bits;
  long sh = v.exp2 - grain;
  BigInt units;
  if (sh >= 0) {
    units = v.mag << static_cast<unsigned>(sh);
  } else {
    // The value must sit on the grid; only trailing zeros may be dropped.
    assert((v.mag & ((BigInt(1) << static_cast<unsigned>(-sh)) - 1)) == 0 &&
           "value not on the format grid");
    units = v.mag >> static_cast<unsigned>(-sh);
  }
  assert(units < (BigInt(1) << (f.fraction_bits + 1)));
  uint64_t u = static_cast<uint64_t>(units);
  uint64_t sign = v.sign < 0
                      ? uint64_t{1} << (f.exponent_bits + f.fraction_bits)
                      : 0;
  uint64_t frac_hi = uint64_t{1} << f.fraction_bits;
  if (u & frac_hi) {  // normal
    uint64_t expf = static_cast<uint64_t>(e + f.bias);
    return sign | (expf << f.fraction_bits) | (u & (frac_hi - 1));
  }
  return sign | u;  // subnormal: exponent field 0
}

}  // namespace detail

// Normalizes an exact finite sum to an FP32 pattern.
//
// The significand is renormalized to the FP32 exponent range and rounded at
// `round_bit` fractional bits (13 or 23) under `mode`.  A rounded magnitude
// >= 2^128 becomes infinity.  Values below the normal range round on the
// fixed subnormal quantum 2^-149.  Exact zero emits +0.0.
inline uint32_t normalize_fp32(const ExactScaled& v, int round_bit,
                               RoundingMode mode) {
  assert(round_bit == 13 || round_bit == 23);
  if (v.is_zero()) return 0x00000000u;
  long fl = floor_log2(v);
  ExactScaled r;
  if (fl >= -126) {
    r = round_at(v, fl - round_bit, mode);
  } else {
    r = round_at(v, -149, mode);
  }
  if (r.is_zero()) return 0x00000000u;
  if (cmp_abs_pow2(r, 128) >= 0)
    return static_cast<uint32_t>(infinity_bits(FormatId::fp32, r.sign));
  return static_cast<uint32_t>(detail::encode_exact_ieee(FormatId::fp32, r));
}

// Normalizes an exact finite sum to an FP16 pattern: RNE at the 10th
// fractional bit of the (range-clamped) exponent; a rounded magnitude at or
// above (2 - 2^-11) * 2^15 becomes infinity.
inline uint16_t normalize_fp16(const ExactScaled& v) {
  if (v.is_zero()) return 0x0000u;
  long fl = std::max(floor_log2(v), -14L);
  ExactScaled r = round_at(v, fl - 10, RoundingMode::RNE);
  if (r.is_zero()) return 0x0000u;
  // Overflow threshold: (2 - 2^-11) * 2^15 = 65520.
  if (cmp_abs(r, 65520, 0) >= 0)
    return static_cast<uint16_t>(infinity_bits(FormatId::fp16, r.sign));
  return static_cast<uint16_t>(detail::encode_exact_ieee(FormatId::fp16, r));
}

// General nearest-even conversion of an exact value into an IEEE-shaped
// format (fp64/fp32/fp16/bf16): gradual underflow, overflow to infinity.
// Used for input quantization and reference conversions.
inline uint64_t round_to_format(FormatId fmt, const ExactScaled& v,
                                RoundingMode mode = RoundingMode::RNE) {
  const FormatSpec& f = format_spec(fmt);
  assert(f.nan_rule == NanRule::ieee && f.id != FormatId::tf32);
  if (v.is_zero()) {
    return v.sign < 0 && f.has_negative_zero
               ? uint64_t{1} << (f.exponent_bits + f.fraction_bits)
               : 0;
  }
  long fl = std::max(floor_log2(v), static_cast<long>(f.min_normal_exp));
  ExactScaled r = round_at(v, fl - f.fraction_bits, mode);
  if (r.is_zero()) {
    return v.sign < 0 && f.has_negative_zero
               ? uint64_t{1} << (f.exponent_bits + f.fraction_bits)
               : 0;
  }
  if (cmp_abs_pow2(r, f.max_exp + 1) >= 0) return infinity_bits(fmt, r.sign);
  return detail::encode_exact_ieee(fmt, r);
}

// ---------------------------------------------------------------------------
// Scalar fused multiply-add
// ---------------------------------------------------------------------------

// Bit-level FMA on fp64 patterns: exactly a*b + c with one RNE rounding.
// NaN results are canonicalized to the standard quiet pattern.
inline uint64_t ieee_fma64(uint64_t a, uint64_t b, uint64_t c) {
  double r = std::fma(std::bit_cast<double>(a), std::bit_cast<double>(b),
                      std::bit_cast<double>(c));
  if (std::isnan(r)) return quiet_nan_bits(FormatId::fp64);
  return std::bit_cast<uint64_t>(r);
}

// Bit-level FMA on fp32 patterns.
inline uint32_t ieee_fma32(uint32_t a, uint32_t b, uint32_t c) {
  float r = std::fmaf(std::bit_cast<float>(a), std::bit_cast<float>(b),
                      std::bit_cast<float>(c));
  if (std::isnan(r)) return static_cast<uint32_t>(quiet_nan_bits(FormatId::fp32));
  return std::bit_cast<uint32_t>(r);
}

}  // namespace tcmm
