#pragma once
// Dot-add arithmetic paths.
//
// Every matrix-multiply-accumulate unit modeled by this library reduces, per
// output element, to one deterministic scalar function
//
//     d = f(c, a[0..K-1], b[0..K-1])
//
// over bit patterns.  This header implements the nine such functions the
// library models, built on the exact-significand kernel in exact.hpp:
//
//   sfma     - sequential IEEE-754 fused-multiply-add chain
//   gps      - grouped pairwise float summation with subnormal flushing
//   fda      - single fused sum: align everything to the max exponent,
//              truncate to F fractional bits, add exactly, normalize once
//   cofda    - chain of two fda halves through a normalized intermediate
//   gdfs     - group dot products rescaled by block scale factors, then fused
//   fdrda    - fused dot (truncating) plus a round-down accumulate stage
//   cofdrda  - chain of two fdrda halves
//   gfdrda   - fdrda with an even/odd pre-summation split and a conditional
//              truncation of far-below accumulator inputs
//   cogfdrda - chain of two gfdrda halves
//
// All functions are pure; inputs and outputs are raw storage bits.

#include <algorithm>
#include <bit>
#include <cassert>
#include <cfloat>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "tcmm/exact.hpp"
#include "tcmm/formats.hpp"

namespace tcmm {

enum class Algorithm {
  sfma,
  gps,
  fda,
  cofda,
  gdfs,
  fdrda,
  cofdrda,
  gfdrda,
  cogfdrda,
};

inline const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::sfma: return "sfma";
    case Algorithm::gps: return "gps";
    case Algorithm::fda: return "fda";
    case Algorithm::cofda: return "cofda";
    case Algorithm::gdfs: return "gdfs";
    case Algorithm::fdrda: return "fdrda";
    case Algorithm::cofdrda: return "cofdrda";
    case Algorithm::gfdrda: return "gfdrda";
    case Algorithm::cogfdrda: return "cogfdrda";
  }
  return "?";
}

inline bool parse_algorithm_name(std::string_view s, Algorithm* out) {
  for (Algorithm a :
       {Algorithm::sfma, Algorithm::gps, Algorithm::fda, Algorithm::cofda,
        Algorithm::gdfs, Algorithm::fdrda, Algorithm::cofdrda,
        Algorithm::gfdrda, Algorithm::cogfdrda}) {
    if (s == algorithm_name(a)) {
      *out = a;
      return true;
    }
  }
  return false;
}

// Chained variants run their base operation twice over half the operands.
inline bool is_chained(Algorithm a) {
  return a == Algorithm::cofda || a == Algorithm::cofdrda ||
         a == Algorithm::cogfdrda;
}

inline Algorithm chain_inner(Algorithm a) {
  switch (a) {
    case Algorithm::cofda: return Algorithm::fda;
    case Algorithm::cofdrda: return Algorithm::fdrda;
    case Algorithm::cogfdrda: return Algorithm::gfdrda;
    default: assert(!"not a chained algorithm"); return a;
  }
}

struct AlgorithmParams {
  Algorithm algorithm = Algorithm::fda;
  // Fractional bits kept when summands are aligned to a shared exponent.
  int f_bits = 24;
  // Fractional bit position of the final FP32 truncation (fda/gdfs only).
  int round_bit = 23;
  // gps only: how many consecutive products form one pairwise-summed group.
  int group = 4;
  FormatId out_fmt = FormatId::fp32;
  // fdrda/gfdrda study knob: replace every round-down (floor) disposal in the
  // accumulate stages with round-toward-zero.  Not used by any cataloged
  // instruction; kept for error-direction experiments.
  bool rd_as_rz = false;
};

struct DotAddRequest {
  FormatId a_fmt = FormatId::fp16;
  FormatId b_fmt = FormatId::fp16;
  FormatId c_fmt = FormatId::fp32;
  std::span<const uint64_t> a{};
  std::span<const uint64_t> b{};
  uint64_t c = 0;
  // Optional per-block scale factors (one per scale_block elements).
  std::span<const uint64_t> a_sf{};
  std::span<const uint64_t> b_sf{};
  FormatId sf_fmt = FormatId::ue8m0;
  int scale_block = 0;  // 0 = no scale factors
};

namespace detail {

// One finite summand: its exact value and the exponent used for alignment.
// The alignment exponent is the raw (unnormalized) exponent sum of the
// factors, not floor(log2(value)) -- e.g. 1.5 * 1.5 = 2.25 * 2^0 keeps e = 0,
// and zero factors contribute their format's minimum-normal exponent.
struct Summand {
  ExactScaled v;
  long e = 0;
};

struct SpecialScan {
  bool nan = false;
  bool pos_inf = false;
  bool neg_inf = false;

  void add_inf(int sign) { (sign > 0 ? pos_inf : neg_inf) = true; }
  bool any() const { return nan || pos_inf || neg_inf; }
};

// Infinity/NaN screening over c and the K products, before any arithmetic:
// NaN anywhere or 0*inf makes the result NaN; otherwise infinite inputs make
// their product infinite with the usual sign rule.
inline SpecialScan scan_specials(std::span<const DecodedNumber> da,
                                 std::span<const DecodedNumber> db,
                                 const DecodedNumber& dc) {
  SpecialScan s;
  if (dc.cls == NumClass::nan) s.nan = true;
  if (dc.cls == NumClass::infinity) s.add_inf(dc.sign);
  for (size_t k = 0; k < da.size(); ++k) {
    const DecodedNumber& x = da[k];
    const DecodedNumber& y = db[k];
    if (x.cls == NumClass::nan || y.cls == NumClass::nan) {
      s.nan = true;
      continue;
    }
    bool xi = x.cls == NumClass::infinity;
    bool yi = y.cls == NumClass::infinity;
    if (!xi && !yi) continue;
    if ((xi && is_zero(y)) || (yi && is_zero(x))) {
      s.nan = true;  // 0 * inf
    } else {
      s.add_inf(x.sign * y.sign);
    }
  }
  return s;
}

// Exact value of a finite decoded number as a float.  Every finite value of
// the 16-bit-and-narrower formats (and fp32 itself) is exactly representable.
inline float decoded_to_float(const DecodedNumber& d) {
  switch (d.cls) {
    case NumClass::nan:
      return std::numeric_limits<float>::quiet_NaN();
    case NumClass::infinity:
      return d.sign > 0 ? std::numeric_limits<float>::infinity()
                        : -std::numeric_limits<float>::infinity();
    default:
      return std::ldexp(static_cast<float>(d.sign) * static_cast<float>(d.sig),
                        d.exponent - d.frac_bits);
  }
}

// ---------------------------------------------------------------------------
// sfma: d starts at c and absorbs one correctly rounded FMA per product.
// The left-to-right order is part of the contract (not reassociable).
// ---------------------------------------------------------------------------

inline uint64_t run_sfma(const DotAddRequest& req, FormatId out_fmt) {
  assert(req.a_fmt == out_fmt && req.b_fmt == out_fmt &&
         req.c_fmt == out_fmt && "sfma operands share one format");
  if (out_fmt == FormatId::fp64) {
    uint64_t d = req.c;
    for (size_t k = 0; k < req.a.size(); ++k)
      d = ieee_fma64(req.a[k], req.b[k], d);
    return d;
  }
  assert(out_fmt == FormatId::fp32);
  auto d = static_cast<uint32_t>(req.c);
  for (size_t k = 0; k < req.a.size(); ++k)
    d = ieee_fma32(static_cast<uint32_t>(req.a[k]),
                   static_cast<uint32_t>(req.b[k]), d);
  return d;
}

// ---------------------------------------------------------------------------
// gps: plain float arithmetic with flush-to-zero at every stage boundary.
// ---------------------------------------------------------------------------

static_assert(FLT_EVAL_METHOD == 0,
              "float expressions must evaluate in IEEE binary32");

// Flush anything below the normal range to zero, keeping the sign (the
// multiply preserves the sign bit of x; zero inputs pass through unchanged).
inline float gps_flush_signed(float x) {
  return std::fabs(x) < 0x1p-126f ? x * 0.0f : x;
}

// Balanced-tree float sum over a power-of-two group, flushing after every
// addition.  A single element is returned as-is (no flush).
inline float gps_pairwise(std::span<const float> p) {
  if (p.size() == 1) return p[0];
  size_t h = p.size() / 2;
  return gps_flush_signed(gps_pairwise(p.first(h)) + gps_pairwise(p.subspan(h)));
}

inline uint64_t run_gps(const DotAddRequest& req, int group) {
  const size_t n = req.a.size();
  assert(group > 0 && n % static_cast<size_t>(group) == 0);
  assert(req.c_fmt == FormatId::fp32);

  // Subnormal a/b inputs are flushed to +0.0 before use.
  std::vector<float> p(n);
  for (size_t k = 0; k < n; ++k) {
    DecodedNumber da = decode(req.a_fmt, req.a[k]);
    DecodedNumber db = decode(req.b_fmt, req.b[k]);
    float fa = da.cls == NumClass::subnormal ? 0.0f : decoded_to_float(da);
    float fb = db.cls == NumClass::subnormal ? 0.0f : decoded_to_float(db);
    // The product is a single correctly rounded float multiply; anything that
    // lands below the normal range is flushed with its sign kept.
    p[k] = gps_flush_signed(fa * fb);
  }

  // The accumulator starts from c; a subnormal (or zero) c restarts at +0.0.
  float d = std::bit_cast<float>(static_cast<uint32_t>(req.c));
  if (std::fabs(d) < 0x1p-126f) d = 0.0f;

  for (size_t g = 0; g < n / static_cast<size_t>(group); ++g) {
    float s = gps_pairwise(std::span<const float>(p).subspan(
        g * static_cast<size_t>(group), static_cast<size_t>(group)));
    d = gps_flush_signed(d + s);
  }

  uint32_t bits = std::bit_cast<uint32_t>(d);
  if (std::isnan(d)) bits = static_cast<uint32_t>(quiet_nan_bits(FormatId::fp32));
  return bits;
}

// ---------------------------------------------------------------------------
// fda: one shared alignment, one exact sum, one output rounding.
// ---------------------------------------------------------------------------

inline uint64_t run_fda(const DotAddRequest& req, int F, int round_bit,
                        FormatId out_fmt) {
  const size_t K = req.a.size();
  assert(req.b.size() == K);
  assert(out_fmt == FormatId::fp32 || out_fmt == FormatId::fp16);

  std::vector<DecodedNumber> da(K), db(K);
  for (size_t k = 0; k < K; ++k) {
    da[k] = decode(req.a_fmt, req.a[k]);
    db[k] = decode(req.b_fmt, req.b[k]);
  }
  DecodedNumber dc = decode(req.c_fmt, req.c);

  // Per-element exponent offsets contributed by block scale factors.  The
  // scale format here is a pure power of two, so only exponents fold in.
  std::vector<long> sf_e(K, 0);
  bool sf_nan = false;
  if (req.scale_block > 0) {
    assert(req.sf_fmt == FormatId::ue8m0);
    for (size_t k = 0; k < K; ++k) {
      size_t blk = k / static_cast<size_t>(req.scale_block);
      assert(blk < req.a_sf.size() && blk < req.b_sf.size());
      DecodedNumber sa = decode(req.sf_fmt, req.a_sf[blk]);
      DecodedNumber sb = decode(req.sf_fmt, req.b_sf[blk]);
      if (sa.cls == NumClass::nan || sb.cls == NumClass::nan) {
        sf_nan = true;
        continue;
      }
      sf_e[k] = static_cast<long>(sa.exponent) + sb.exponent;
    }
  }

  SpecialScan ss = scan_specials(da, db, dc);
  if (ss.nan || sf_nan || (ss.pos_inf && ss.neg_inf))
    return dotunit_nan_bits(out_fmt);
  if (ss.pos_inf) return infinity_bits(out_fmt, +1);
  if (ss.neg_inf) return infinity_bits(out_fmt, -1);

  // Exact unnormalized products, then everything aligned to the largest
  // raw exponent with F fractional bits (low bits dropped toward zero).
  std::vector<Summand> terms;
  terms.reserve(K + 1);
  terms.push_back({to_exact(dc), dc.exponent});
  for (size_t k = 0; k < K; ++k) {
    ExactScaled pv = exact_mul(da[k], db[k]);
    pv.exp2 += sf_e[k];
    terms.push_back(
        {pv, static_cast<long>(da[k].exponent) + db[k].exponent + sf_e[k]});
  }
  long e_max = terms[0].e;
  for (const Summand& t : terms) e_max = std::max(e_max, t.e);

  std::vector<AlignedFixed> ax;
  ax.reserve(terms.size());
  for (const Summand& t : terms)
    ax.push_back(align_round(t.v, e_max, F, RoundingMode::RZ));
  ExactScaled total = fixed_sum(ax).value();

  if (out_fmt == FormatId::fp16) return normalize_fp16(total);
  return normalize_fp32(total, round_bit, RoundingMode::RZ);
}

// ---------------------------------------------------------------------------
// gdfs: exact group dot products, rescaled per block, then one fused sum.
// ---------------------------------------------------------------------------

inline uint64_t run_gdfs(const DotAddRequest& req) {
  constexpr int kGroup = 16;  // summation group size, independent of S
  constexpr int kFrac = 35;   // fractional bits of the shared alignment
  const size_t K = req.a.size();
  const int S = req.scale_block;
  assert(K > 0 && K % kGroup == 0);
  assert(S == 16 || S == 32);
  assert(req.a_sf.size() == K / static_cast<size_t>(S) &&
         req.b_sf.size() == K / static_cast<size_t>(S));
  assert(req.c_fmt == FormatId::fp32);

  DecodedNumber dc = decode(req.c_fmt, req.c);
  bool nan = dc.cls == NumClass::nan;
  for (uint64_t s : req.a_sf)
    nan = nan || decode(req.sf_fmt, s).cls == NumClass::nan;
  for (uint64_t s : req.b_sf)
    nan = nan || decode(req.sf_fmt, s).cls == NumClass::nan;
  if (nan) return dotunit_nan_bits(FormatId::fp32);
  if (dc.cls == NumClass::infinity) return req.c;

  // Products and group sums are small dyadic fixed-point values; both stages
  // are exact.
  const size_t n_groups = K / kGroup;
  std::vector<ExactScaled> sigma(n_groups, exact_zero());
  for (size_t k = 0; k < K; ++k) {
    DecodedNumber a = decode(req.a_fmt, req.a[k]);
    DecodedNumber b = decode(req.b_fmt, req.b[k]);
    assert(is_finite(a) && is_finite(b));
    sigma[k / kGroup] = exact_add(sigma[k / kGroup], exact_mul(a, b));
  }

  // Each group sum picks up its block's scale factors; the scale exponents
  // (not the group values) define the alignment exponents.
  std::vector<Summand> terms;
  terms.reserve(n_groups + 1);
  terms.push_back({to_exact(dc), dc.exponent});
  for (size_t g = 0; g < n_groups; ++g) {
    size_t blk = g * kGroup / static_cast<size_t>(S);
    DecodedNumber sa = decode(req.sf_fmt, req.a_sf[blk]);
    DecodedNumber sb = decode(req.sf_fmt, req.b_sf[blk]);
    ExactScaled gamma = exact_mul(exact_mul(sigma[g], to_exact(sa)), to_exact(sb));
    terms.push_back({gamma, static_cast<long>(sa.exponent) + sb.exponent});
  }

  long e_max = terms[0].e;
  for (const Summand& t : terms) e_max = std::max(e_max, t.e);
  std::vector<AlignedFixed> ax;
  ax.reserve(terms.size());
  for (const Summand& t : terms)
    ax.push_back(align_round(t.v, e_max, kFrac, RoundingMode::RZ));
  ExactScaled total = fixed_sum(ax).value();

  return normalize_fp32(total, 23, RoundingMode::RZ);
}

// ---------------------------------------------------------------------------
// fdrda / gfdrda: truncating dot stage, round-down accumulate stage, one
// round-to-nearest-even output conversion.
// ---------------------------------------------------------------------------

// Builds the exact products for the round-down family.  Unlike run_fda, a
// product whose magnitude reaches 2^128 overflows to a signed infinity here.
// Returns false (with *out set) when specials decide the result early.
inline bool fdrda_products(const DotAddRequest& req, std::vector<Summand>* prods,
                           uint64_t* out) {
  const size_t K = req.a.size();
  assert(req.b.size() == K && K > 0);
  assert(req.c_fmt == FormatId::fp32);
  assert(req.scale_block == 0 && "round-down family takes no scale factors");

  std::vector<DecodedNumber> da(K), db(K);
  for (size_t k = 0; k < K; ++k) {
    da[k] = decode(req.a_fmt, req.a[k]);
    db[k] = decode(req.b_fmt, req.b[k]);
  }
  DecodedNumber dc = decode(req.c_fmt, req.c);

  SpecialScan ss = scan_specials(da, db, dc);
  if (ss.nan || (ss.pos_inf && ss.neg_inf)) {
    *out = quiet_nan_bits(FormatId::fp32);
    return false;
  }
  if (ss.pos_inf || ss.neg_inf) {
    *out = infinity_bits(FormatId::fp32, ss.pos_inf ? +1 : -1);
    return false;
  }

  // Exact products, with overflow to infinity at |p| >= 2^128 (inclusive).
  bool pos_ovf = false, neg_ovf = false;
  prods->clear();
  prods->reserve(K);
  for (size_t k = 0; k < K; ++k) {
    ExactScaled pv = exact_mul(da[k], db[k]);
    if (cmp_abs_pow2(pv, 128) >= 0) {
      (pv.sign > 0 ? pos_ovf : neg_ovf) = true;
      continue;
    }
    prods->push_back(
        {pv, static_cast<long>(da[k].exponent) + db[k].exponent});
  }
  if (pos_ovf && neg_ovf) {
    *out = quiet_nan_bits(FormatId::fp32);
    return false;
  }
  if (pos_ovf || neg_ovf) {
    *out = infinity_bits(FormatId::fp32, pos_ovf ? +1 : -1);
    return false;
  }
  return true;
}

// Aligns a set of summands to their own maximum exponent with F fractional
// bits (dropping low bits per `mode`) and sums exactly.
inline Summand truncating_dot(std::span<const Summand> terms, int F,
                              RoundingMode mode) {
  assert(!terms.empty());
  long e = terms[0].e;
  for (const Summand& t : terms) e = std::max(e, t.e);
  std::vector<AlignedFixed> ax;
  ax.reserve(terms.size());
  for (const Summand& t : terms) ax.push_back(align_round(t.v, e, F, mode));
  return {fixed_sum(ax).value(), e};
}

inline uint64_t run_fdrda(const DotAddRequest& req, bool rd_as_rz) {
  std::vector<Summand> prods;
  uint64_t special = 0;
  if (!fdrda_products(req, &prods, &special)) return special;

  // Dot stage: align products (c excluded) to e_dot, drop toward zero at 24
  // fractional bits, sum exactly.
  Summand dot = truncating_dot(prods, 24, RoundingMode::RZ);

  // Accumulate stage: the dot result keeps 31 fractional bits and c keeps 24,
  // both relative to e_max, and both round DOWN (toward minus infinity).
  DecodedNumber dc = decode(req.c_fmt, req.c);
  RoundingMode rd = rd_as_rz ? RoundingMode::RZ : RoundingMode::RD;
  long e_max = std::max(dot.e, static_cast<long>(dc.exponent));
  ExactScaled dot_r = align_round(dot.v, e_max, 31, rd).value();
  ExactScaled c_r = align_round(to_exact(dc), e_max, 24, rd).value();

  return normalize_fp32(exact_add(dot_r, c_r), 23, RoundingMode::RNE);
}

inline uint64_t run_gfdrda(const DotAddRequest& req, bool rd_as_rz) {
  std::vector<Summand> prods;
  uint64_t special = 0;
  if (!fdrda_products(req, &prods, &special)) return special;

  // Even- and odd-index products are first summed separately (each group
  // aligned to its own maximum, dropping toward zero), then the two partial
  // dots are aligned to each other with round-down disposal.
  std::vector<Summand> even, odd;
  for (size_t k = 0; k < prods.size(); ++k)
    (k % 2 == 0 ? even : odd).push_back(prods[k]);

  RoundingMode rd = rd_as_rz ? RoundingMode::RZ : RoundingMode::RD;
  Summand dot;
  if (odd.empty()) {
    dot = truncating_dot(even, 24, RoundingMode::RZ);
  } else {
    Summand se = truncating_dot(even, 24, RoundingMode::RZ);
    Summand so = truncating_dot(odd, 24, RoundingMode::RZ);
    long e_dot = std::max(se.e, so.e);
    ExactScaled er = align_round(se.v, e_dot, 24, rd).value();
    ExactScaled orr = align_round(so.v, e_dot, 24, rd).value();
    dot = {exact_add(er, orr), e_dot};
  }

  // Accumulate stage as in run_fdrda, except that a c sitting more than 25
  // binades below e_max is dropped toward zero instead of rounded down.
  DecodedNumber dc = decode(req.c_fmt, req.c);
  long e_max = std::max(dot.e, static_cast<long>(dc.exponent));
  ExactScaled dot_r = align_round(dot.v, e_max, 31, rd).value();
  RoundingMode c_mode =
      static_cast<long>(dc.exponent) < e_max - 25 ? RoundingMode::RZ : rd;
  ExactScaled c_r = align_round(to_exact(dc), e_max, 24, c_mode).value();

  return normalize_fp32(exact_add(dot_r, c_r), 23, RoundingMode::RNE);
}

}  // namespace detail

// Computes one output element d = f(c, a, b) under the given algorithm.
// Chained variants split the products in half and run their base operation
// twice, feeding the first (fully normalized) result in as the second c.
inline uint64_t dot_add(const DotAddRequest& req, const AlgorithmParams& prm) {
  assert(req.a.size() == req.b.size());
  switch (prm.algorithm) {
    case Algorithm::sfma:
      return detail::run_sfma(req, prm.out_fmt);
    case Algorithm::gps:
      return detail::run_gps(req, prm.group);
    case Algorithm::fda:
      return detail::run_fda(req, prm.f_bits, prm.round_bit, prm.out_fmt);
    case Algorithm::gdfs:
      return detail::run_gdfs(req);
    case Algorithm::fdrda:
      return detail::run_fdrda(req, prm.rd_as_rz);
    case Algorithm::gfdrda:
      return detail::run_gfdrda(req, prm.rd_as_rz);
    case Algorithm::cofda:
    case Algorithm::cofdrda:
    case Algorithm::cogfdrda: {
      const size_t K = req.a.size();
      assert(K % 2 == 0 && K > 0);
      assert(req.scale_block == 0 && "scaled operands are never chained");
      AlgorithmParams inner = prm;
      inner.algorithm = chain_inner(prm.algorithm);
      DotAddRequest first = req;
      first.a = req.a.first(K / 2);
      first.b = req.b.first(K / 2);
      DotAddRequest second = req;
      second.a = req.a.subspan(K / 2);
      second.b = req.b.subspan(K / 2);
      second.c = dot_add(first, inner);
      second.c_fmt = prm.out_fmt;
      return dot_add(second, inner);
    }
  }
  assert(!"unreachable");
  return 0;
}

}  // namespace tcmm
