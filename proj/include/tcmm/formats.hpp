// SPDX-License-Identifier: MIT
//
// formats.hpp — floating-point storage formats used by GPU matrix units.
//
// Every format is described by a FormatSpec (field widths, bias, special-value
// encoding rule) and decoded into a DecodedNumber: an exact sign/significand/
// exponent triple plus a class tag.  Decoding is total: every bit pattern of
// the format's container maps to a value or to a class tag, never to an error.

#pragma once

#include <cassert>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace tcmm {

// ---------------------------------------------------------------------------
// Format identities
// ---------------------------------------------------------------------------

enum class FormatId : uint8_t {
  fp64,
  fp32,
  tf32,      // 32-bit container; low 13 fraction bits ignored by the unit
  fp16,
  bf16,
  e4m3fn,    // 8-bit, finite-only, NaN = all-ones exponent+fraction
  e5m2,      // 8-bit, IEEE-style infinities and NaNs
  e4m3fnuz,  // 8-bit, no -0/inf, NaN = sign bit with zero magnitude
  e5m2fnuz,
  e2m3,      // 6-bit, carried in an 8-bit container, no inf/NaN
  e3m2,      // 6-bit, carried in an 8-bit container, no inf/NaN
  e2m1,      // 4-bit, no inf/NaN
  ue8m0,     // unsigned power-of-two scale; 0xFF = NaN; cannot encode zero
  ue4m3,     // unsigned scale in an 8-bit container; top bit ignored
};

inline constexpr int kNumFormats = 14;

// How the format encodes NaN (and, implicitly, infinity).
enum class NanRule : uint8_t {
  ieee,        // all-ones exponent: fraction==0 -> inf, else NaN
  fn_allones,  // all-ones exponent AND fraction -> NaN; no infinities
  fnuz,        // sign bit with zero exponent/fraction -> NaN; no -0, no inf
  allones,     // the single all-ones pattern of the value field -> NaN
  none,        // every pattern is finite
};

struct FormatSpec {
  FormatId id;
  const char* name;     // lowercase, as used in matrix file headers
  int storage_bits;     // container width as stored in files / registers
  int value_bits;       // meaningful low bits (6 for the 8-bit fp6 container)
  int sign_bits;        // 1 or 0
  int exponent_bits;
  int fraction_bits;
  int bias;
  int min_normal_exp;   // unbiased exponent of the smallest normal
  int max_exp;          // unbiased exponent of the largest finite value
  NanRule nan_rule;
  bool has_infinity;
  bool has_negative_zero;  // a sign-only pattern decodes to a negative zero
};

// Indexed by FormatId.
inline constexpr FormatSpec kFormatSpecs[kNumFormats] = {
    // id              name        st  vb sg  eb  fb  bias  minN   maxE
    {FormatId::fp64, "fp64", 64, 64, 1, 11, 52, 1023, -1022, 1023,
     NanRule::ieee, true, true},
    {FormatId::fp32, "fp32", 32, 32, 1, 8, 23, 127, -126, 127,
     NanRule::ieee, true, true},
    {FormatId::tf32, "tf32", 32, 32, 1, 8, 10, 127, -126, 127,
     NanRule::ieee, true, true},
    {FormatId::fp16, "fp16", 16, 16, 1, 5, 10, 15, -14, 15,
     NanRule::ieee, true, true},
    {FormatId::bf16, "bf16", 16, 16, 1, 8, 7, 127, -126, 127,
     NanRule::ieee, true, true},
    {FormatId::e4m3fn, "e4m3fn", 8, 8, 1, 4, 3, 7, -6, 8,
     NanRule::fn_allones, false, true},
    {FormatId::e5m2, "e5m2", 8, 8, 1, 5, 2, 15, -14, 15,
     NanRule::ieee, true, true},
    {FormatId::e4m3fnuz, "e4m3fnuz", 8, 8, 1, 4, 3, 8, -7, 7,
     NanRule::fnuz, false, false},
    {FormatId::e5m2fnuz, "e5m2fnuz", 8, 8, 1, 5, 2, 16, -15, 15,
     NanRule::fnuz, false, false},
    {FormatId::e2m3, "e2m3", 8, 6, 1, 2, 3, 1, 0, 2,
     NanRule::none, false, true},
    {FormatId::e3m2, "e3m2", 8, 6, 1, 3, 2, 3, -2, 4,
     NanRule::none, false, true},
    {FormatId::e2m1, "e2m1", 4, 4, 1, 2, 1, 1, 0, 2,
     NanRule::none, false, true},
    {FormatId::ue8m0, "ue8m0", 8, 8, 0, 8, 0, 127, -127, 127,
     NanRule::allones, false, false},
    {FormatId::ue4m3, "ue4m3", 8, 7, 0, 4, 3, 7, -6, 8,
     NanRule::allones, false, false},
};

inline const FormatSpec& format_spec(FormatId id) {
  return kFormatSpecs[static_cast<int>(id)];
}

inline const char* format_name(FormatId id) { return format_spec(id).name; }

inline std::optional<FormatId> parse_format_name(std::string_view s) {
  for (const FormatSpec& f : kFormatSpecs) {
    if (s == f.name) return f.id;
  }
  return std::nullopt;
}

// Number of hex digits one element occupies in matrix files.
inline int storage_hex_digits(FormatId id) {
  return (format_spec(id).storage_bits + 3) / 4;
}

// Mask covering the meaningful value bits of the container.
inline uint64_t value_mask(FormatId id) {
  int vb = format_spec(id).value_bits;
  return vb >= 64 ? ~uint64_t{0} : ((uint64_t{1} << vb) - 1);
}

// ---------------------------------------------------------------------------
// Container fixups
//
// Some formats ride in a wider container whose extra bits the matrix unit
// ignores.  The fixup rewrites a raw container pattern into the pattern the
// arithmetic actually consumes and must be applied before decoding operands.
// ---------------------------------------------------------------------------

// tf32: a 32-bit pattern whose low 13 fraction bits are cleared.  Clearing
// happens before special-value detection, so an all-ones-exponent pattern
// with only low-fraction bits set becomes an infinity, not a NaN.
inline uint32_t tf32_fixup(uint32_t bits) { return bits & 0xFFFFE000u; }

// ue4m3: an 8-bit container whose top bit is ignored.
inline uint8_t ue4m3_fixup(uint8_t bits) { return bits & 0x7Fu; }

// Applies the container fixup appropriate for `id` (identity for others).
inline uint64_t container_fixup(FormatId id, uint64_t bits) {
  switch (id) {
    case FormatId::tf32:
      return tf32_fixup(static_cast<uint32_t>(bits));
    case FormatId::ue4m3:
      return ue4m3_fixup(static_cast<uint8_t>(bits));
    default:
      return bits;
  }
}

// ---------------------------------------------------------------------------
// Decoding
// ---------------------------------------------------------------------------

enum class NumClass : uint8_t { zero, subnormal, normal, infinity, nan };

// An exactly decoded value:  value = sign * (sig / 2^frac_bits) * 2^exponent.
//
// Conventions:
//  * sign is +1 or -1 (also for zeros; formats without -0 always give +1).
//  * Normals have 2^frac_bits <= sig < 2^(frac_bits+1); subnormals have
//    0 < sig < 2^frac_bits with exponent pinned to min_normal_exp.
//  * Zeros keep sig = 0 and exponent = min_normal_exp so that exponent
//    arithmetic (e.g. forming a product exponent) stays well defined.
//  * For infinity/NaN only `cls` and `sign` are meaningful.
struct DecodedNumber {
  NumClass cls;
  int sign;       // +1 / -1
  int64_t sig;    // integer significand, < 2^(frac_bits+1)
  int frac_bits;  // fraction width the significand is scaled by
  int exponent;   // unbiased exponent
};

inline bool is_finite(const DecodedNumber& d) {
  return d.cls != NumClass::infinity && d.cls != NumClass::nan;
}

inline bool is_zero(const DecodedNumber& d) { return d.cls == NumClass::zero; }

// Decodes `bits` (low `storage_bits` of the argument) as format `id`.
// Total: every pattern decodes.  Container fixups are applied internally, and
// bits above value_bits are ignored.
inline DecodedNumber decode(FormatId id, uint64_t bits) {
  const FormatSpec& f = format_spec(id);
  bits = container_fixup(id, bits) & value_mask(id);

  if (id == FormatId::tf32) {
    // After the fixup the pattern is read with fp32 field geometry; the
    // cleared low bits are what limit the precision to 10 fraction bits.
    return decode(FormatId::fp32, bits);
  }
  if (id == FormatId::ue8m0) {
    // Pure power-of-two scale: value = 2^(bits - bias); 0xFF is NaN.
    if (bits == 0xFF) return {NumClass::nan, +1, 0, 0, 0};
    return {NumClass::normal, +1, 1, 0, static_cast<int>(bits) - f.bias};
  }

  const uint64_t frac_mask = (uint64_t{1} << f.fraction_bits) - 1;
  const uint64_t exp_mask = (uint64_t{1} << f.exponent_bits) - 1;
  const uint64_t frac = bits & frac_mask;
  const uint64_t expf = (bits >> f.fraction_bits) & exp_mask;
  const int sign =
      (f.sign_bits && (bits >> (f.exponent_bits + f.fraction_bits)) & 1) ? -1
                                                                         : +1;

  switch (f.nan_rule) {
    case NanRule::ieee:
      if (expf == exp_mask) {
        if (frac == 0) return {NumClass::infinity, sign, 0, f.fraction_bits, 0};
        return {NumClass::nan, sign, 0, f.fraction_bits, 0};
      }
      break;
    case NanRule::fn_allones:
      if (expf == exp_mask && frac == frac_mask)
        return {NumClass::nan, sign, 0, f.fraction_bits, 0};
      break;
    case NanRule::fnuz:
      if (sign < 0 && expf == 0 && frac == 0)
        return {NumClass::nan, +1, 0, f.fraction_bits, 0};
      break;
    case NanRule::allones:
      if (bits == value_mask(id))
        return {NumClass::nan, +1, 0, f.fraction_bits, 0};
      break;
    case NanRule::none:
      break;
  }

  if (expf == 0) {
    if (frac == 0)
      return {NumClass::zero, sign, 0, f.fraction_bits, f.min_normal_exp};
    return {NumClass::subnormal, sign, static_cast<int64_t>(frac),
            f.fraction_bits, f.min_normal_exp};
  }
  return {NumClass::normal, sign,
          static_cast<int64_t>(frac | (uint64_t{1} << f.fraction_bits)),
          f.fraction_bits, static_cast<int>(expf) - f.bias};
}

// ---------------------------------------------------------------------------
// Encoding helpers for well-known patterns
// ---------------------------------------------------------------------------

// Positive/negative infinity pattern (format must have infinities).
inline uint64_t infinity_bits(FormatId id, int sign) {
  const FormatSpec& f = format_spec(id);
  assert(f.has_infinity);
  if (id == FormatId::tf32) return infinity_bits(FormatId::fp32, sign);
  uint64_t exp_all = ((uint64_t{1} << f.exponent_bits) - 1) << f.fraction_bits;
  uint64_t s = (sign < 0) ? uint64_t{1} << (f.exponent_bits + f.fraction_bits)
                          : 0;
  return s | exp_all;
}

// The quiet-NaN pattern produced by scalar fused-multiply-add datapaths.
inline uint64_t quiet_nan_bits(FormatId id) {
  switch (id) {
    case FormatId::fp64: return 0x7FF8000000000000ull;
    case FormatId::fp32: return 0x7FC00000ull;
    case FormatId::fp16: return 0x7E00ull;
    default: assert(false); return 0;
  }
}

// The all-ones NaN pattern produced by dot-product-unit datapaths.
inline uint64_t dotunit_nan_bits(FormatId id) {
  switch (id) {
    case FormatId::fp32: return 0x7FFFFFFFull;
    case FormatId::fp16: return 0x7FFFull;
    default: assert(false); return 0;
  }
}

// Encodes sign * 2^e exactly, if the format can represent it.
// Exponents below min_normal_exp fall into the subnormal range down to
// min_normal_exp - fraction_bits.
inline std::optional<uint64_t> encode_pow2(FormatId id, int sign, int e) {
  const FormatSpec& f = format_spec(id);
  if (sign < 0 && f.sign_bits == 0) return std::nullopt;
  if (id == FormatId::tf32) {
    // fp32 container geometry, but anything the fixup would clear is not
    // representable.
    if (e < f.min_normal_exp - f.fraction_bits) return std::nullopt;
    return encode_pow2(FormatId::fp32, sign, e);
  }
  uint64_t s =
      (sign < 0) ? uint64_t{1} << (f.exponent_bits + f.fraction_bits) : 0;
  if (id == FormatId::ue8m0) {
    if (e < -127 || e > 127) return std::nullopt;
    return static_cast<uint64_t>(e + f.bias);
  }
  if (e > f.max_exp) return std::nullopt;
  if (e >= f.min_normal_exp) {
    uint64_t expf = static_cast<uint64_t>(e + f.bias);
    uint64_t bits = s | (expf << f.fraction_bits);
    // Guard against colliding with a NaN rule (e.g. all-ones exponent).
    DecodedNumber d = decode(id, bits);
    if (d.cls != NumClass::normal) return std::nullopt;
    return bits;
  }
  int shift = f.min_normal_exp - e;  // subnormal: frac = 2^(frac_bits-shift)
  if (shift > f.fraction_bits) return std::nullopt;
  return s | (uint64_t{1} << (f.fraction_bits - shift));
}

// Unbiased exponent of the smallest representable positive value.
inline int min_pow2_exp(FormatId id) {
  const FormatSpec& f = format_spec(id);
  if (id == FormatId::ue8m0) return -127;
  return f.min_normal_exp - f.fraction_bits;
}

// Unbiased exponent of the largest representable power of two.
inline int max_pow2_exp(FormatId id) {
  return format_spec(id).max_exp;
}

}  // namespace tcmm
