// SPDX-License-Identifier: MIT
//
// exact_test.cpp — exact significand arithmetic: rounding-mode tables,
// alignment, fixed-point summation, output normalization, scalar FMA.

#include "tcmm/exact.hpp"

#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace {

using namespace tcmm;

ExactScaled dyadic(int sign, int64_t mag, long exp2) {
  return {sign, BigInt(mag), exp2};
}

// Exact equality of two ExactScaled values.
bool same_value(const ExactScaled& a, const ExactScaled& b) {
  ExactScaled d = exact_add(a, exact_neg(b));
  return d.is_zero();
}

// ===========================================================================
// The ten rounding modes, cell for cell
// ===========================================================================

struct ModeRow {
  RoundingMode mode;
  // Results for probes 1+0.75u, 1+0.25u, -1-0.75u, -1-0.25u,
  // expressed as the integer multiple of u added to +/-1.
  int directed[4];
};

// Frozen expectations for the directed-probe battery.  Units: result =
// sign_base * 1 + cell * u.
constexpr ModeRow kDirectedRows[] = {
    {RoundingMode::RU, {+1, +1, 0, 0}},
    {RoundingMode::RD, {0, 0, -1, -1}},
    {RoundingMode::RZ, {0, 0, 0, 0}},
    {RoundingMode::RA, {+1, +1, -1, -1}},
    // All nearest modes agree on non-tie probes.
    {RoundingMode::RNU, {+1, 0, -1, 0}},
    {RoundingMode::RND, {+1, 0, -1, 0}},
    {RoundingMode::RNZ, {+1, 0, -1, 0}},
    {RoundingMode::RNA, {+1, 0, -1, 0}},
    {RoundingMode::RNE, {+1, 0, -1, 0}},
    {RoundingMode::RNO, {+1, 0, -1, 0}},
};

// Frozen expectations for the tie battery: probes 1+0.5u, 1+1.5u,
// -1-0.5u, -1-1.5u.
struct TieRow {
  RoundingMode mode;
  int cells[4];
};

constexpr TieRow kTieRows[] = {
    {RoundingMode::RNU, {+1, +2, 0, -1}},
    {RoundingMode::RND, {0, +1, -1, -2}},
    {RoundingMode::RNZ, {0, +1, 0, -1}},
    {RoundingMode::RNA, {+1, +2, -1, -2}},
    {RoundingMode::RNE, {0, +2, 0, -2}},
    {RoundingMode::RNO, {+1, +1, -1, -1}},
};

// Builds the probe value base + quarters*(u/4) with u = 2^uexp.
ExactScaled probe_value(int base_sign, int quarters, long uexp) {
  // |value| = 1 + quarters * 2^(uexp-2); encode at grain uexp-2.
  BigInt mag = (BigInt(1) << static_cast<unsigned>(2 - uexp)) + quarters;
  return {base_sign, mag, uexp - 2};
}

TEST(Rounding, DirectedTable) {
  const long uexp = -10;  // u = 2^-10
  for (const ModeRow& row : kDirectedRows) {
    const int probes[4][2] = {{+1, 3}, {+1, 1}, {-1, 3}, {-1, 1}};
    for (int i = 0; i < 4; ++i) {
      ExactScaled in = probe_value(probes[i][0], probes[i][1], uexp);
      ExactScaled out = round_at(in, uexp, row.mode);
      // expected = sign*1 + cell*u
      ExactScaled want = exact_add(
          dyadic(probes[i][0], 1, 0),
          row.directed[i] == 0 ? exact_zero()
                               : dyadic(row.directed[i] > 0 ? +1 : -1,
                                        std::abs(row.directed[i]), uexp));
      EXPECT_TRUE(same_value(out, want))
          << rounding_mode_name(row.mode) << " probe " << i;
    }
  }
}

TEST(Rounding, TieTable) {
  const long uexp = -10;
  for (const TieRow& row : kTieRows) {
    const int probes[4][2] = {{+1, 2}, {+1, 6}, {-1, 2}, {-1, 6}};
    for (int i = 0; i < 4; ++i) {
      ExactScaled in = probe_value(probes[i][0], probes[i][1], uexp);
      ExactScaled out = round_at(in, uexp, row.mode);
      ExactScaled want = exact_add(
          dyadic(probes[i][0], 1, 0),
          row.cells[i] == 0 ? exact_zero()
                            : dyadic(row.cells[i] > 0 ? +1 : -1,
                                     std::abs(row.cells[i]), uexp));
      EXPECT_TRUE(same_value(out, want))
          << rounding_mode_name(row.mode) << " probe " << i;
    }
  }
}

TEST(Rounding, PinnedSpecCells) {
  long u = -8;
  // 1 + 0.25u under RZ -> 1.
  EXPECT_TRUE(same_value(round_at(probe_value(+1, 1, u), u, RoundingMode::RZ),
                         dyadic(+1, 1, 0)));
  // -1 - 1.5u under RNE -> -1 - 2u.
  EXPECT_TRUE(same_value(round_at(probe_value(-1, 6, u), u, RoundingMode::RNE),
                         exact_add(dyadic(-1, 1, 0), dyadic(-1, 2, u))));
  // 1 + 0.5u under RNO -> 1 + u.
  EXPECT_TRUE(same_value(round_at(probe_value(+1, 2, u), u, RoundingMode::RNO),
                         exact_add(dyadic(+1, 1, 0), dyadic(+1, 1, u))));
}

TEST(Rounding, FloorCeilEnvelope) {
  std::mt19937_64 rng(0xC0FFEE);
  for (int iter = 0; iter < 20000; ++iter) {
    int sign = (rng() & 1) ? +1 : -1;
    int64_t mag = static_cast<int64_t>(rng() % 4096);
    long e = static_cast<long>(rng() % 17) - 8;
    ExactScaled v = dyadic(sign, mag, e);
    long grain = static_cast<long>(rng() % 13) - 6;
    BigInt lo = round_to_units(v, grain, RoundingMode::RD);
    BigInt hi = round_to_units(v, grain, RoundingMode::RU);
    EXPECT_TRUE(hi == lo || hi == lo + 1);
    for (RoundingMode m :
         {RoundingMode::RZ, RoundingMode::RA, RoundingMode::RNU,
          RoundingMode::RND, RoundingMode::RNZ, RoundingMode::RNA,
          RoundingMode::RNE, RoundingMode::RNO}) {
      BigInt r = round_to_units(v, grain, m);
      EXPECT_TRUE(r == lo || r == hi) << rounding_mode_name(m);
    }
    // RZ == RD for nonnegative values; RD <= RZ in general.
    BigInt rz = round_to_units(v, grain, RoundingMode::RZ);
    if (sign > 0 || mag == 0) {
      EXPECT_EQ(rz, lo);
    }
    EXPECT_LE(lo, rz);
  }
}

// ===========================================================================
// exact_mul and exact_add
// ===========================================================================

TEST(Exact, UnnormalizedProduct) {
  // 1.5*2^3 times 1.5*2^1: significands multiply to 2.25, exponents add to 4;
  // the product is kept unnormalized.
  DecodedNumber a = decode(FormatId::fp32, 0x41400000u);  // 12.0 = 1.5*2^3
  DecodedNumber b = decode(FormatId::fp32, 0x40400000u);  // 3.0 = 1.5*2^1
  EXPECT_EQ(a.exponent, 3);
  EXPECT_EQ(b.exponent, 1);
  ExactScaled p = exact_mul(a, b);
  EXPECT_TRUE(same_value(p, dyadic(+1, 36, 0)));
  // Significand 2.25 at exponent 4: mag*2^exp2 = 2.25*2^4 with the leading
  // bit at position 2^1 relative to 2^4 (i.e. not renormalized to [1,2)).
  EXPECT_EQ(floor_log2(p), 5);  // 36 in [32,64)

  // Multiplying by zero gives an exact zero.
  DecodedNumber z = decode(FormatId::fp32, 0);
  EXPECT_TRUE(exact_mul(a, z).is_zero());

  // BF16 subnormal 2^-127 decodes as 0.5*2^-126 and multiplies exactly.
  DecodedNumber s = decode(FormatId::bf16, 0x0040);
  DecodedNumber one = decode(FormatId::bf16, 0x3F80);
  ExactScaled q = exact_mul(s, one);
  EXPECT_TRUE(same_value(q, dyadic(+1, 1, -127)));
}

TEST(Exact, AddAndCompare) {
  EXPECT_TRUE(same_value(exact_add(dyadic(+1, 3, 0), dyadic(-1, 3, 0)),
                         exact_zero()));
  EXPECT_TRUE(same_value(exact_add(dyadic(+1, 1, -3), dyadic(+1, 1, -4)),
                         dyadic(+1, 3, -4)));
  EXPECT_EQ(cmp_abs_pow2(dyadic(+1, 1, 128), 128), 0);
  EXPECT_EQ(cmp_abs_pow2(dyadic(-1, 3, 126), 128), -1);  // 3*2^126 < 2^128
  EXPECT_EQ(cmp_abs_pow2(dyadic(+1, 5, 126), 128), +1);
  EXPECT_EQ(cmp_abs(dyadic(+1, 65520, 0), 65520, 0), 0);
}

// ===========================================================================
// align_round and fixed_sum
// ===========================================================================

TEST(Aligned, SmallAccumulatorWindow) {
  // The FP32 value nearest -1e-6, aligned to reference exponent 22 with a
  // 24-bit fractional window: RD pulls it to -1 unit (= -0.25), RZ drops it.
  uint32_t c_bits = std::bit_cast<uint32_t>(-1e-6f);
  ExactScaled c = to_exact(decode(FormatId::fp32, c_bits));
  AlignedFixed rd = align_round(c, 22, 24, RoundingMode::RD);
  EXPECT_EQ(rd.units, -1);
  EXPECT_TRUE(same_value(rd.value(), dyadic(-1, 1, -2)));  // -0.25
  AlignedFixed rz = align_round(c, 22, 24, RoundingMode::RZ);
  EXPECT_EQ(rz.units, 0);
  AlignedFixed rne = align_round(c, 22, 24, RoundingMode::RNE);
  EXPECT_EQ(rne.units, 0);

  // +1.0 aligned to its own exponent window is exact.
  AlignedFixed one = align_round(dyadic(+1, 1, 0), 0, 13, RoundingMode::RZ);
  EXPECT_EQ(one.units, 1 << 13);
}

TEST(Aligned, FixedSumExactAndOrderFree) {
  std::vector<AlignedFixed> terms = {
      {5, 20, 3}, {5, 20, -3}, {5, 20, 1}};
  EXPECT_EQ(fixed_sum(terms).units, 1);

  // Sixteen products of 6*6 at a 35-bit window sum to exactly 576.
  std::vector<AlignedFixed> prods;
  for (int i = 0; i < 16; ++i)
    prods.push_back(align_round(dyadic(+1, 36, 0), 9, 35, RoundingMode::RZ));
  AlignedFixed s = fixed_sum(prods);
  EXPECT_TRUE(same_value(s.value(), dyadic(+1, 576, 0)));

  // Permutation invariance, bitwise.
  std::mt19937_64 rng(77);
  std::vector<AlignedFixed> list;
  for (int i = 0; i < 64; ++i)
    list.push_back({0, 30, BigInt(static_cast<int64_t>(rng()) >> 16)});
  BigInt want = fixed_sum(list).units;
  for (int shuffle = 0; shuffle < 20; ++shuffle) {
    std::shuffle(list.begin(), list.end(), rng);
    EXPECT_EQ(fixed_sum(list).units, want);
  }
}

// ===========================================================================
// normalize_fp32 / normalize_fp16
// ===========================================================================

TEST(Normalize, Fp32Pinned) {
  // 1 + 2^-14 rounded to zero at the 13th fractional bit collapses to 1.0.
  ExactScaled v = exact_add(dyadic(+1, 1, 0), dyadic(+1, 1, -14));
  EXPECT_EQ(normalize_fp32(v, 13, RoundingMode::RZ), 0x3F800000u);
  // ... but survives a 23-bit window.
  EXPECT_EQ(normalize_fp32(v, 23, RoundingMode::RZ),
            std::bit_cast<uint32_t>(1.0f + std::ldexp(1.0f, -14)));

  EXPECT_EQ(normalize_fp32(dyadic(+1, 1, 128), 23, RoundingMode::RZ),
            0x7F800000u);
  EXPECT_EQ(normalize_fp32(dyadic(-1, 1, 128), 23, RoundingMode::RNE),
            0xFF800000u);
  EXPECT_EQ(normalize_fp32(dyadic(+1, 3, -1), 23, RoundingMode::RNE),
            0x3FC00000u);  // 1.5
  EXPECT_EQ(normalize_fp32(exact_zero(), 23, RoundingMode::RNE), 0u);
  // Exact zero emits +0 regardless of the sign it arrived with.
  EXPECT_EQ(normalize_fp32({-1, 0, 0}, 23, RoundingMode::RNE), 0u);
}

TEST(Normalize, Fp32SubnormalQuantum) {
  // Below 2^-126 rounding happens on the fixed 2^-149 grid, independent of
  // the round_bit parameter.
  ExactScaled v = exact_add(dyadic(+1, 1, -127), dyadic(+1, 3, -151));
  uint32_t got = normalize_fp32(v, 13, RoundingMode::RNE);
  // 2^-127 = 0x00400000 subnormal; +0.75*2^-149 rounds to one extra unit.
  EXPECT_EQ(got, 0x00400001u);
  EXPECT_EQ(normalize_fp32(v, 13, RoundingMode::RZ), 0x00400000u);
  // A value that rounds up to exactly 2^-126 crosses into the normal range.
  ExactScaled w = exact_add(dyadic(+1, 1, -126), dyadic(-1, 1, -151));
  EXPECT_EQ(normalize_fp32(w, 23, RoundingMode::RNE), 0x00800000u);
  // RZ keeps it subnormal at the top subnormal pattern.
  EXPECT_EQ(normalize_fp32(w, 23, RoundingMode::RZ), 0x007FFFFFu);
}

TEST(Normalize, Fp32CarryAcrossPow2) {
  // (2 - 2^-24) rounds up across the power-of-two boundary.
  ExactScaled v = exact_add(dyadic(+1, 2, 0), dyadic(-1, 1, -24));
  EXPECT_EQ(normalize_fp32(v, 23, RoundingMode::RNE),
            std::bit_cast<uint32_t>(2.0f));
  // Near the top of the range the carry must become infinity.
  ExactScaled top = exact_add(dyadic(+1, 1, 128), dyadic(-1, 1, 100));
  EXPECT_EQ(normalize_fp32(top, 23, RoundingMode::RNE), 0x7F800000u);
  EXPECT_EQ(normalize_fp32(top, 23, RoundingMode::RZ),
            std::bit_cast<uint32_t>(
                static_cast<float>(std::ldexp(1.99999988079071044921875, 127))));
}

TEST(Normalize, Fp32MatchesNativeConversion) {
  // round_bit = 23 with RNE equals the platform's correctly rounded
  // conversion, checked on random 64-bit dyadics via long double.
  std::mt19937_64 rng(0xD1CE);
  for (int iter = 0; iter < 100000; ++iter) {
    uint64_t mag = rng();
    long e = static_cast<long>(rng() % 300) - 180;  // 2^-180 .. 2^119 scale
    int sign = (rng() & 1) ? +1 : -1;
    ExactScaled v{sign, BigInt(mag), e};
    long double exact = std::ldexp(static_cast<long double>(mag),
                                   static_cast<int>(e));
    if (sign < 0) exact = -exact;
    float want = static_cast<float>(exact);
    uint32_t got = normalize_fp32(v, 23, RoundingMode::RNE);
    ASSERT_EQ(got, std::bit_cast<uint32_t>(want))
        << "mag=" << mag << " e=" << e << " sign=" << sign;
  }
}

TEST(Normalize, Fp16Pinned) {
  // RNE tie at 1 + 2^-11 resolves to even: 1.0.
  EXPECT_EQ(normalize_fp16(exact_add(dyadic(+1, 1, 0), dyadic(+1, 1, -11))),
            0x3C00u);
  // 65520 reaches the overflow threshold exactly.
  EXPECT_EQ(normalize_fp16(dyadic(+1, 65520, 0)), 0x7C00u);
  EXPECT_EQ(normalize_fp16(dyadic(-1, 65520, 0)), 0xFC00u);
  EXPECT_EQ(normalize_fp16(dyadic(+1, 65504, 0)), 0x7BFFu);
  // -2.5*2^-12 is exactly representable: -1.25*2^-11.
  uint16_t got = normalize_fp16(dyadic(-1, 5, -13));
  DecodedNumber d = decode(FormatId::fp16, got);
  EXPECT_EQ(d.cls, NumClass::normal);
  EXPECT_TRUE(same_value(to_exact(d), dyadic(-1, 5, -13)));
  // Subnormal rounding happens at 2^-24.
  EXPECT_EQ(normalize_fp16(dyadic(+1, 3, -25)), 0x0002u);  // 1.5*2^-24 -> 2*2^-24
  EXPECT_EQ(normalize_fp16(dyadic(+1, 1, -25)), 0x0000u);  // tie to even: 0
  EXPECT_EQ(normalize_fp16(dyadic(+1, 3, -26)), 0x0001u);  // 0.75*2^-24 -> 2^-24
}

TEST(Normalize, Fp16RoundTripAllPatterns) {
  for (uint32_t bits = 0; bits < 0x10000; ++bits) {
    DecodedNumber d = decode(FormatId::fp16, bits);
    if (!is_finite(d)) continue;
    uint64_t got = round_to_format(FormatId::fp16, to_exact(d));
    // Negative zero keeps its sign through the general converter.
    ASSERT_EQ(got, bits) << "bits=0x" << std::hex << bits;
  }
}

TEST(Normalize, RoundToFormatMatchesNativeFloat) {
  std::mt19937_64 rng(0xFEED);
  for (int iter = 0; iter < 100000; ++iter) {
    uint64_t raw = rng();
    double x = std::bit_cast<double>(raw);
    if (!std::isfinite(x)) continue;
    float want = static_cast<float>(x);
    uint64_t got = round_to_format(FormatId::fp32, exact_from_double(x));
    ASSERT_EQ(static_cast<uint32_t>(got), std::bit_cast<uint32_t>(want))
        << std::hexfloat << x;
  }
}

// ===========================================================================
// Scalar FMA
// ===========================================================================

TEST(Fma, Pinned) {
  EXPECT_EQ(ieee_fma64(std::bit_cast<uint64_t>(1.5),
                       std::bit_cast<uint64_t>(2.0),
                       std::bit_cast<uint64_t>(0.0)),
            std::bit_cast<uint64_t>(3.0));
  // The product 2^120 is held exactly inside the fused operation.
  double c = -std::ldexp(1.0, 120) + std::ldexp(1.0, 70);
  EXPECT_EQ(ieee_fma64(std::bit_cast<uint64_t>(std::ldexp(1.0, 60)),
                       std::bit_cast<uint64_t>(std::ldexp(1.0, 60)),
                       std::bit_cast<uint64_t>(c)),
            std::bit_cast<uint64_t>(std::ldexp(1.0, 70)));
  // NaN results canonicalize.
  EXPECT_EQ(ieee_fma64(std::bit_cast<uint64_t>(0.0),
                       infinity_bits(FormatId::fp64, +1), 0),
            quiet_nan_bits(FormatId::fp64));
  EXPECT_EQ(ieee_fma32(std::bit_cast<uint32_t>(0.0f),
                       static_cast<uint32_t>(infinity_bits(FormatId::fp32, -1)),
                       0),
            static_cast<uint32_t>(quiet_nan_bits(FormatId::fp32)));
}

// Exact-rational oracle: product and sum carried exactly, then one RNE
// rounding through the independent exact pipeline.
TEST(Fma, MatchesExactRationalOracle64) {
  std::mt19937_64 rng(31337);
  int checked = 0;
  while (checked < 100000) {
    double a = std::bit_cast<double>(rng());
    double b = std::bit_cast<double>(rng());
    double c = std::bit_cast<double>(rng());
    if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(c)) continue;
    ++checked;
    ExactScaled exact =
        exact_add(exact_mul(exact_from_double(a), exact_from_double(b)),
                  exact_from_double(c));
    uint64_t want;
    if (exact.is_zero()) {
      // IEEE: exact zero sum keeps +0 under RNE unless all contributions
      // are negative zero; reproduce via the hardware result's sign.
      want = std::bit_cast<uint64_t>(std::fma(a, b, c));
    } else {
      want = round_to_format(FormatId::fp64, exact);
    }
    uint64_t got = ieee_fma64(std::bit_cast<uint64_t>(a),
                              std::bit_cast<uint64_t>(b),
                              std::bit_cast<uint64_t>(c));
    ASSERT_EQ(got, want) << std::hexfloat << a << " " << b << " " << c;
  }
}

TEST(Fma, MatchesExactRationalOracle32) {
  std::mt19937_64 rng(8088);
  int checked = 0;
  while (checked < 100000) {
    float a = std::bit_cast<float>(static_cast<uint32_t>(rng()));
    float b = std::bit_cast<float>(static_cast<uint32_t>(rng()));
    float c = std::bit_cast<float>(static_cast<uint32_t>(rng()));
    if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(c)) continue;
    ++checked;
    ExactScaled exact = exact_add(
        exact_mul(exact_from_double(a), exact_from_double(b)),
        exact_from_double(c));
    uint32_t want;
    if (exact.is_zero()) {
      want = std::bit_cast<uint32_t>(std::fmaf(a, b, c));
    } else {
      want = static_cast<uint32_t>(round_to_format(FormatId::fp32, exact));
    }
    uint32_t got = ieee_fma32(std::bit_cast<uint32_t>(a),
                              std::bit_cast<uint32_t>(b),
                              std::bit_cast<uint32_t>(c));
    ASSERT_EQ(got, want) << std::hexfloat << a << " " << b << " " << c;
  }
}

}  // namespace
