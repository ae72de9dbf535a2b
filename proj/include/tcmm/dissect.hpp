#pragma once
// Black-box dissection of dot-product-accumulate units.
//
// Given only a deterministic callable d = f(c, a[], b[]) over encoded bit
// patterns (plus the declared element count and operand formats), the probes
// in this header recover:
//   * the summation order, as a priority matrix and a classified tree shape
//     (sequential, pairwise groups, one fused node, or a chain of two fused
//     nodes),
//   * the effective fractional precision at every summand position,
//   * the rounding rule applied on the accumulation path and on the final
//     conversion into the output format,
//   * how subnormals, signed zeros, overflow, and NaN-producing inputs are
//     treated.
//
// All probe operands are powers of two (or tiny-integer multiples of powers
// of two) chosen from the operand formats' exponent ranges, so every probe
// value is exactly representable and every expected outcome can be computed
// in exact arithmetic.  Units whose operands carry per-block scale factors
// are probed through those scales: a wide magnitude gap between two probe
// values can be synthesized even when the element format itself spans only a
// few binades.

#include <algorithm>
#include <array>
#include <bit>
#include <cassert>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tcmm/catalog.hpp"

namespace tcmm {

// ---------------------------------------------------------------------------
// Result types
// ---------------------------------------------------------------------------

enum class TreeKind : uint8_t {
  sequential,      // one running sum absorbs c and then each product in order
  group_pairwise,  // fixed-size product groups summed pairwise, groups chained
  fused,           // a single multi-input node aligned to one shared exponent
  chain_of_fused,  // two fused nodes; the first half's result feeds the second
  unclassified,    // measured priorities match none of the known shapes
};

inline const char* tree_kind_name(TreeKind k) {
  switch (k) {
    case TreeKind::sequential: return "sequential";
    case TreeKind::group_pairwise: return "group_pairwise";
    case TreeKind::fused: return "fused";
    case TreeKind::chain_of_fused: return "chain_of_fused";
    case TreeKind::unclassified: return "unclassified";
  }
  return "?";
}

// Summand positions are numbered 0..k-1 for the products a[i]*b[i]; position
// k stands for the addend c.
struct SummationTreeShape {
  TreeKind kind = TreeKind::unclassified;
  int group = 0;  // group_pairwise: products per group
  int arity = 0;  // fused: total inputs of the single node (k + 1)
  int split = 0;  // chain_of_fused: products consumed by the first node
  // priority[i][j]: with a large X at position i, -X at j, and a small y
  // everywhere else, the number of y-summands still reflected in the output
  // (output / y).  -1 on the diagonal, -2 where the output was not a clean
  // multiple of y.
  std::vector<std::vector<long>> priority;
};

enum class Flag : uint8_t { yes, no, untested };

inline const char* flag_name(Flag f) {
  switch (f) {
    case Flag::yes: return "yes";
    case Flag::no: return "no";
    case Flag::untested: return "untested";
  }
  return "?";
}

// The unit under test: a deterministic dot-add over bit patterns.  Scale
// spans are empty unless scale_block > 0, in which case each span carries
// k / scale_block entries.
struct DutInfo {
  int k = 0;
  FormatId a_fmt = FormatId::fp16;
  FormatId b_fmt = FormatId::fp16;
  FormatId c_fmt = FormatId::fp32;
  FormatId d_fmt = FormatId::fp32;
  int scale_block = 0;
  FormatId sf_fmt = FormatId::ue8m0;
};

using DutFn = std::function<uint64_t(
    uint64_t c, std::span<const uint64_t> a, std::span<const uint64_t> b,
    std::span<const uint64_t> a_sf, std::span<const uint64_t> b_sf)>;

struct Dut {
  DutInfo info;
  DutFn fn;
};

inline Dut make_dut(const InstructionDescriptor& desc) {
  Dut dut;
  dut.info = DutInfo{desc.k,     desc.a_fmt,       desc.b_fmt, desc.c_fmt,
                     desc.d_fmt, desc.scale_block, desc.sf_fmt};
  InstructionDescriptor copy = desc;
  dut.fn = [copy](uint64_t c, std::span<const uint64_t> a,
                  std::span<const uint64_t> b, std::span<const uint64_t> a_sf,
                  std::span<const uint64_t> b_sf) {
    return dot_add(copy, a, b, c, a_sf, b_sf);
  };
  return dut;
}

// Outcome of one rounding-rule probe battery.  cells[0..3] hold the measured
// result offsets (in last-place units) for probe fractions +3/4, +1/4, -3/4,
// -1/4; cells[4..7] for the halfway fractions +1/2, +3/2, -1/2, -3/2 when
// ties_probed is set.  99 marks a cell that was not run, 9 a result that was
// not an integer offset in [-2, 2].
struct RoundingFinding {
  bool known = false;
  RoundingMode mode = RoundingMode::RNE;
  bool ties_probed = false;
  std::array<int, 8> cells{99, 99, 99, 99, 99, 99, 99, 99};
};

struct PrecisionScan {
  // bits[p]: fractional bits preserved for summand position p (index k = c).
  std::vector<int> bits;
  // saturated[p]: the probe exhausted the operand range without breaking the
  // identity; bits[p] is then only a lower bound.
  std::vector<uint8_t> saturated;
};

struct EdgeOutcome {
  std::string label;
  uint64_t bits = 0;
};

struct DissectionReport {
  DutInfo info;
  SummationTreeShape tree;
  PrecisionScan precision;
  RoundingFinding c_rounding;
  // yes: an addend sitting more than one bit below the window kept by the
  // c alignment is discarded toward zero even though in-window addends round
  // downward.
  Flag c_deep_drop = Flag::untested;
  RoundingFinding final_rounding;
  Flag flush_c_in = Flag::untested;
  Flag flush_ab_in = Flag::untested;
  Flag flush_post_mul = Flag::untested;
  Flag flush_post_add = Flag::untested;
  Flag neg_zero_out = Flag::untested;
  Flag product_overflow = Flag::untested;
  Flag intermediate_overflow = Flag::untested;
  Flag nan_from_zero_times_inf = Flag::untested;
  Flag nan_from_inf_minus_inf = Flag::untested;
  std::vector<EdgeOutcome> overflow_edges;
};

// ---------------------------------------------------------------------------
// Exact-value helpers
// ---------------------------------------------------------------------------

namespace detail {

inline ExactScaled make_scaled(int sign, long long sig, int frac, long e) {
  if (sig == 0) return exact_zero();
  return ExactScaled{sign, BigInt(sig), e - frac};
}

inline bool exact_eq(const ExactScaled& a, const ExactScaled& b) {
  return exact_add(a, exact_neg(b)).is_zero();
}

// Decodes bits as a finite value; infinities and NaNs yield nullopt.
inline std::optional<ExactScaled> finite_value(FormatId fmt, uint64_t bits) {
  DecodedNumber d = decode(fmt, bits);
  if (d.cls == NumClass::infinity || d.cls == NumClass::nan)
    return std::nullopt;
  return to_exact(d);
}

// Encodes sign * (sig / 2^frac) * 2^e exactly, or nullopt if the format
// cannot represent it bit-for-bit.
inline std::optional<uint64_t> try_encode(FormatId fmt, int sign,
                                          long long sig, int frac, long e) {
  const FormatSpec& f = format_spec(fmt);
  if (sig == 0) {
    if (sign < 0) {
      if (!f.has_negative_zero) return std::nullopt;
      return uint64_t{1} << (f.exponent_bits + f.fraction_bits);
    }
    return uint64_t{0};
  }
  if (sig < 0) return std::nullopt;
  if (sign < 0 && f.sign_bits == 0) return std::nullopt;
  while ((sig & 1) == 0) {
    sig >>= 1;
    --frac;
  }
  ExactScaled target = make_scaled(sign, sig, frac, e);
  int L = std::bit_width(static_cast<unsigned long long>(sig)) - 1;
  long E = e - frac + L;  // exponent of the leading bit
  uint64_t bits = 0;
  if (fmt == FormatId::ue8m0) {
    if (L != 0 || sign < 0) return std::nullopt;
    auto p = encode_pow2(fmt, sign, static_cast<int>(E));
    if (!p) return std::nullopt;
    bits = *p;
  } else if (fmt == FormatId::tf32) {
    auto inner = try_encode(FormatId::fp32, sign, sig, frac, e);
    if (!inner || (*inner & 0x1FFFu) != 0) return std::nullopt;
    bits = *inner;
  } else {
    uint64_t sbit = sign < 0
                        ? uint64_t{1} << (f.exponent_bits + f.fraction_bits)
                        : 0;
    if (E >= f.min_normal_exp) {
      if (E > f.max_exp || L > f.fraction_bits) return std::nullopt;
      uint64_t mant = (static_cast<uint64_t>(sig) ^ (uint64_t{1} << L))
                      << (f.fraction_bits - L);
      bits = sbit |
             (static_cast<uint64_t>(E + f.bias) << f.fraction_bits) | mant;
    } else {
      long shift = (e - frac) - (f.min_normal_exp - f.fraction_bits);
      if (shift < 0 || shift + L >= f.fraction_bits) return std::nullopt;
      bits = sbit | (static_cast<uint64_t>(sig) << shift);
    }
  }
  auto back = finite_value(fmt, bits);
  if (!back || !exact_eq(*back, target)) return std::nullopt;
  return bits;
}

// Splits sign * (sig / 2^frac) * 2^e into one a-operand and one b-operand
// whose product is exactly that value.  Splits with both factors normal are
// preferred so the probe also works on units that flush subnormal inputs.
inline std::optional<std::pair<uint64_t, uint64_t>> synth_product(
    FormatId a_fmt, FormatId b_fmt, int sign, long long sig, int frac,
    long e) {
  const FormatSpec& fa = format_spec(a_fmt);
  const FormatSpec& fb = format_spec(b_fmt);
  for (int pass = 0; pass < 2; ++pass) {
    int b_lo = pass == 0 ? fb.min_normal_exp : min_pow2_exp(b_fmt);
    int a_lo = pass == 0 ? fa.min_normal_exp : min_pow2_exp(a_fmt);
    // mantissa on the a side, pure power of two on the b side
    for (int tb = fb.max_exp; tb >= b_lo; --tb) {
      auto bv = try_encode(b_fmt, +1, 1, 0, tb);
      if (!bv) continue;
      auto av = try_encode(a_fmt, sign, sig, frac, e - tb);
      if (pass == 0 && av && decode(a_fmt, *av).cls == NumClass::subnormal)
        av = std::nullopt;
      if (av) return std::make_pair(*av, *bv);
    }
    // mantissa on the b side
    for (int ta = fa.max_exp; ta >= a_lo; --ta) {
      auto av = try_encode(a_fmt, +1, 1, 0, ta);
      if (!av) continue;
      auto bv = try_encode(b_fmt, sign, sig, frac, e - ta);
      if (pass == 0 && bv && decode(b_fmt, *bv).cls == NumClass::subnormal)
        bv = std::nullopt;
      if (bv) return std::make_pair(*av, *bv);
    }
  }
  return std::nullopt;
}

inline uint64_t unit_scale_bits(FormatId sf) {
  auto v = encode_pow2(sf, +1, 0);
  assert(v);
  return *v;
}

// Assembles one probe invocation: zeroed operands, unit scales, and explicit
// summand values placed by position (position k = the addend c).
class ProbeRunner {
 public:
  explicit ProbeRunner(const Dut& dut) : dut_(&dut) { reset(); }

  void reset() {
    const DutInfo& f = dut_->info;
    a_.assign(static_cast<size_t>(f.k), 0);
    b_.assign(static_cast<size_t>(f.k), 0);
    c_ = 0;
    size_t blocks =
        f.scale_block > 0 ? static_cast<size_t>(f.k / f.scale_block) : 0;
    asf_.assign(blocks, blocks ? unit_scale_bits(f.sf_fmt) : 0);
    bsf_.assign(blocks, blocks ? unit_scale_bits(f.sf_fmt) : 0);
  }

  bool set_summand(int pos, int sign, long long sig, int frac, long e) {
    const DutInfo& f = dut_->info;
    if (pos == f.k) {
      auto v = try_encode(f.c_fmt, sign, sig, frac, e);
      if (!v) return false;
      c_ = *v;
      return true;
    }
    auto p = synth_product(f.a_fmt, f.b_fmt, sign, sig, frac, e);
    if (!p) return false;
    a_[static_cast<size_t>(pos)] = p->first;
    b_[static_cast<size_t>(pos)] = p->second;
    return true;
  }

  void set_c_bits(uint64_t bits) { c_ = bits; }
  void set_product_bits(int pos, uint64_t av, uint64_t bv) {
    a_[static_cast<size_t>(pos)] = av;
    b_[static_cast<size_t>(pos)] = bv;
  }

  // Sets the combined scale contribution of one block to 2^q, split across
  // the a-side and b-side factors.  Prefers splits whose decoded exponent
  // fields also sum to q: a subnormal scale encoding carries the right value
  // but a pinned exponent field, which would shift any alignment the unit
  // keys on the scale exponents.  Falls back to a value-only split when no
  // faithful one exists.
  bool set_block_scale(int block, long q) {
    FormatId sf = dut_->info.sf_fmt;
    long lo = min_pow2_exp(sf), hi = max_pow2_exp(sf);
    bool have_fallback = false;
    uint64_t fa = 0, fb = 0;
    for (long qa = std::min(hi, q - lo); qa >= std::max(lo, q - hi); --qa) {
      auto av = encode_pow2(sf, +1, static_cast<int>(qa));
      auto bv = encode_pow2(sf, +1, static_cast<int>(q - qa));
      if (!av || !bv) continue;
      if (decode(sf, *av).exponent + decode(sf, *bv).exponent == q) {
        asf_[static_cast<size_t>(block)] = *av;
        bsf_[static_cast<size_t>(block)] = *bv;
        return true;
      }
      if (!have_fallback) {
        have_fallback = true;
        fa = *av;
        fb = *bv;
      }
    }
    if (have_fallback) {
      asf_[static_cast<size_t>(block)] = fa;
      bsf_[static_cast<size_t>(block)] = fb;
      return true;
    }
    return false;
  }

  // Places sign * (sig / 2^frac) * 2^e at a product position, recruiting the
  // position's block scale when the element formats alone cannot reach e.
  // Falls back to plain synthesis for scale-free units.
  bool set_scaled_summand(int pos, int sign, long long sig, int frac,
                          long e) {
    const DutInfo& f = dut_->info;
    if (pos == f.k || f.scale_block == 0)
      return set_summand(pos, sign, sig, frac, e);
    long plo = min_pow2_exp(f.a_fmt) + min_pow2_exp(f.b_fmt);
    long phi = max_pow2_exp(f.a_fmt) + max_pow2_exp(f.b_fmt);
    long slo = 2 * min_pow2_exp(f.sf_fmt), shi = 2 * max_pow2_exp(f.sf_fmt);
    int block = pos / f.scale_block;
    for (long q = std::max(slo, e - phi); q <= std::min(shi, e - plo + 4);
         ++q) {
      auto p = synth_product(f.a_fmt, f.b_fmt, sign, sig, frac, e - q);
      if (!p) continue;
      if (!set_block_scale(block, q)) continue;
      set_product_bits(pos, p->first, p->second);
      return true;
    }
    return false;
  }

  uint64_t run() const { return dut_->fn(c_, a_, b_, asf_, bsf_); }

 private:
  const Dut* dut_;
  std::vector<uint64_t> a_, b_, asf_, bsf_;
  uint64_t c_ = 0;
};

// Probe magnitudes for the summation-order scan: X = 2^ex, y = 2^ey.
struct OrderBudget {
  bool ok = false;
  long ex = 0;
  long ey = 0;
  bool absorb_ok = false;   // X + y rounds back to X in a binary accumulator
  bool trunc25_ok = false;  // y vanishes under a 25-bit alignment at X
};

inline OrderBudget order_budget(const DutInfo& f) {
  bool out16 = f.d_fmt == FormatId::fp16 || f.c_fmt == FormatId::fp16;
  bool out64 = f.d_fmt == FormatId::fp64;
  long cap = out16 ? 14 : out64 ? 200 : 60;
  long flo = out16 ? -18 : out64 ? -200 : -100;
  long phi = max_pow2_exp(f.a_fmt) + max_pow2_exp(f.b_fmt);
  long plo_n = format_spec(f.a_fmt).min_normal_exp +
               format_spec(f.b_fmt).min_normal_exp;
  long plo_s = min_pow2_exp(f.a_fmt) + min_pow2_exp(f.b_fmt);
  OrderBudget bg;
  bg.ex = std::min(phi, cap);
  bg.ey = std::max(plo_n, flo);
  // Keep a wide gap between X and y: in a two-node chain, up to K/2+1 copies
  // of y can pool inside the first node, and that pooled value must still
  // vanish under the second node's alignment window (as wide as 25 bits
  // plus a round-up margin).  Normal-product magnitudes are preferred so the
  // scan also works on units that flush subnormal inputs, but those units
  // all have wide gaps anyway; narrow-gap formats fall back to subnormals.
  if (bg.ex - bg.ey < 32) bg.ey = std::max(plo_s, flo);
  if (bg.ex - bg.ey < 3) return bg;
  bg.ok = true;
  bg.absorb_ok = bg.ex - bg.ey >= (out64 ? 54 : 25);
  bg.trunc25_ok = bg.ex - bg.ey >= 26;
  return bg;
}

// output / y as a small nonnegative integer, or -2.
inline long read_count(FormatId d_fmt, uint64_t out, long ey, int k) {
  auto v = finite_value(d_fmt, out);
  if (!v) return -2;
  if (v->is_zero()) return 0;
  if (v->sign < 0) return -2;
  // Decoded significands are not normalized; shift may run either way, but a
  // right shift must not discard set bits (the output must be a multiple of
  // y).
  long shift = v->exp2 - ey;
  BigInt n = v->mag;
  if (shift >= 0) {
    if (shift > 62) return -2;
    n <<= static_cast<unsigned>(shift);
  } else {
    unsigned back = static_cast<unsigned>(-shift);
    if ((n >> back) << back != n) return -2;
    n >>= back;
  }
  if (n > k + 1) return -2;
  return static_cast<long>(n);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Summation-order probe
// ---------------------------------------------------------------------------

// Fills the priority matrix by running the unit with +X at one position, -X
// at another, and y everywhere else, then classifies the matrix against the
// known tree shapes.  The X/y gap is chosen so that y vanishes from any
// partial sum holding X, while counts n*y stay exact; the surviving multiple
// of y therefore counts the summands merged after X and -X neutralized.
inline SummationTreeShape probe_order(const Dut& dut) {
  using namespace detail;
  const DutInfo& f = dut.info;
  const int K = f.k;
  SummationTreeShape shape;
  shape.priority.assign(static_cast<size_t>(K + 1),
                        std::vector<long>(static_cast<size_t>(K + 1), -1));
  OrderBudget bg = order_budget(f);
  if (!bg.ok) return shape;

  ProbeRunner pr(dut);
  for (int i = 0; i <= K; ++i) {
    for (int j = 0; j <= K; ++j) {
      if (i == j) continue;
      pr.reset();
      bool ok = true;
      for (int pos = 0; pos <= K && ok; ++pos) {
        int sign = pos == j ? -1 : +1;
        long e = (pos == i || pos == j) ? bg.ex : bg.ey;
        ok = pr.set_summand(pos, sign, 1, 0, e);
      }
      shape.priority[static_cast<size_t>(i)][static_cast<size_t>(j)] =
          ok ? read_count(f.d_fmt, pr.run(), bg.ey, K) : -2;
    }
  }

  auto leafpos = [K](int p) { return p == K ? 0 : p + 1; };
  auto expect_sequential = [&](int i, int j) {
    return static_cast<long>(K) - std::max(leafpos(i), leafpos(j));
  };
  // Size of the smallest pairwise subtree containing two leaves of an
  // n-leaf balanced tree (n a power of two).
  auto lca_span = [](int u, int v, int n) {
    while (n > 1) {
      int h = n / 2;
      if ((u < h) != (v < h)) return n;
      if (u >= h) {
        u -= h;
        v -= h;
      }
      n = h;
    }
    return 1;
  };
  auto expect_gps = [&](int i, int j, int G) -> long {
    bool ip = i < K, jp = j < K;
    if (ip && jp && i / G == j / G)
      return static_cast<long>(K) + 1 - lca_span(i % G, j % G, G);
    long gl = std::max(ip ? i / G : -1, jp ? j / G : -1);
    return static_cast<long>(K) - (gl + 1) * static_cast<long>(G);
  };
  auto expect_chain = [&](int i, int j, int split) -> long {
    auto in_first = [&](int p) { return p == K || p < split; };
    return in_first(i) && in_first(j) ? static_cast<long>(K - split) : 0;
  };
  auto matches = [&](auto&& fn) {
    for (int i = 0; i <= K; ++i)
      for (int j = 0; j <= K; ++j)
        if (i != j &&
            shape.priority[static_cast<size_t>(i)][static_cast<size_t>(j)] !=
                fn(i, j))
          return false;
    return true;
  };

  if (bg.absorb_ok && matches(expect_sequential)) {
    shape.kind = TreeKind::sequential;
    return shape;
  }
  for (int G : {2, 4}) {
    if (bg.absorb_ok && K >= G && K % G == 0 &&
        matches([&](int i, int j) { return expect_gps(i, j, G); })) {
      shape.kind = TreeKind::group_pairwise;
      shape.group = G;
      return shape;
    }
  }
  if (bg.trunc25_ok && K >= 4 && K % 2 == 0 &&
      matches([&](int i, int j) { return expect_chain(i, j, K / 2); })) {
    shape.kind = TreeKind::chain_of_fused;
    shape.split = K / 2;
    return shape;
  }
  // A single fused node shows a constant matrix: all zero when y sits below
  // the alignment grain at X, all K-1 when the node preserves every summand.
  for (long cnt : {long{0}, static_cast<long>(K - 1)}) {
    if (matches([&](int, int) { return cnt; })) {
      shape.kind = TreeKind::fused;
      shape.arity = K + 1;
      return shape;
    }
  }
  shape.kind = TreeKind::unclassified;
  return shape;
}

// ---------------------------------------------------------------------------
// Shared probe plumbing
// ---------------------------------------------------------------------------

namespace detail {

struct BitsResult {
  int bits = 0;
  bool saturated = false;
};

// Partner leaf sharing the first summation op with `pos` in a binary tree.
inline int binary_partner(const SummationTreeShape& tree, int K, int pos) {
  if (tree.kind == TreeKind::sequential) {
    if (pos == K) return 0;  // c meets the first product
    return pos == 0 ? K : pos - 1;
  }
  // group_pairwise: the in-group pairwise partner
  if (pos == K) return 0;
  int G = tree.group;
  return (pos / G) * G + ((pos % G) ^ 1);
}

// Two product positions, distinct from `pos`, whose partial sums meet before
// anything else joins — used to park cancelling anchors inside the fused
// node that also consumes `pos`.
struct FusedSpots {
  int anchor1 = 0;
  int anchor2 = 1;
};

inline FusedSpots fused_spots(const SummationTreeShape& tree, int K,
                              int pos) {
  FusedSpots sp;
  int lo = 0, hi = K;  // product positions [lo, hi)
  if (tree.kind == TreeKind::chain_of_fused) {
    bool first = pos == K || pos < tree.split;
    lo = first ? 0 : tree.split;
    hi = first ? tree.split : K;
  }
  sp.anchor1 = lo == pos ? lo + 1 : lo;
  sp.anchor2 = sp.anchor1 + 1 == pos ? sp.anchor1 + 2 : sp.anchor1 + 1;
  assert(sp.anchor2 < hi);
  (void)hi;
  return sp;
}

// Anchor layout for scale-carrying units: two spots whose partial sums stay
// in separate exact groups (so the anchors do not cancel before alignment),
// in blocks away from the probed position.  ok is false when the unit has
// too few blocks to isolate the probed position from the anchors.
struct ScaledSpots {
  bool ok = false;
  int block1 = 0, block2 = 0;
  int spot1 = 0, spot2 = 0;
};

inline ScaledSpots scaled_spots(const DutInfo& f, int pos) {
  ScaledSpots sp;
  int S = f.scale_block;
  if (S <= 0) return sp;
  int blocks = f.k / S;
  if (blocks < 2) return sp;
  int pb = pos == f.k ? -1 : pos / S;
  if (S >= 32) {
    // one block holds both anchors, in different 16-wide exact groups
    sp.block1 = sp.block2 = pb == 0 ? 1 : 0;
    sp.spot1 = sp.block1 * S;
    sp.spot2 = sp.spot1 + 16;
  } else {
    if (blocks < 3 && pb >= 0) return sp;
    int chosen[2], picked = 0;
    for (int b = 0; b < blocks && picked < 2; ++b)
      if (b != pb) chosen[picked++] = b;
    if (picked < 2) return sp;
    sp.block1 = chosen[0];
    sp.block2 = chosen[1];
    sp.spot1 = sp.block1 * S;
    sp.spot2 = sp.block2 * S;
  }
  sp.ok = true;
  return sp;
}

// Places +2^e_anc and -2^e_anc at the two anchor spots through a common
// block scale.  The largest workable scale is preferred (element factors of
// 1 when reachable) so that units keying their alignment on the scale
// exponents see the anchors at full height.
inline bool place_scaled_anchors(ProbeRunner& pr, const DutInfo& f,
                                 const ScaledSpots& sp, long e_anc) {
  long phi = max_pow2_exp(f.a_fmt) + max_pow2_exp(f.b_fmt);
  long plo = min_pow2_exp(f.a_fmt) + min_pow2_exp(f.b_fmt);
  long slo = 2 * min_pow2_exp(f.sf_fmt), shi = 2 * max_pow2_exp(f.sf_fmt);
  auto try_q = [&](long q) {
    auto p1 = synth_product(f.a_fmt, f.b_fmt, +1, 1, 0, e_anc - q);
    auto p2 = synth_product(f.a_fmt, f.b_fmt, -1, 1, 0, e_anc - q);
    if (!p1 || !p2) return false;
    if (!pr.set_block_scale(sp.block1, q)) return false;
    if (sp.block2 != sp.block1 && !pr.set_block_scale(sp.block2, q))
      return false;
    pr.set_product_bits(sp.spot1, p1->first, p1->second);
    pr.set_product_bits(sp.spot2, p2->first, p2->second);
    return true;
  };
  for (long q = std::min(shi, e_anc); q >= std::max(slo, e_anc - phi); --q)
    if (try_q(q)) return true;
  // Anchors below the scale range: the scale floor is exact while the element
  // factors go fractional.  Exponent-field faithfulness is lost down here,
  // but such anchors cancel exactly, so they cannot disturb a measurement.
  for (long q = std::min(shi, e_anc - plo); q > std::min(shi, e_anc); --q)
    if (try_q(q)) return true;
  return false;
}

// 1 + eps identity at a binary op: the first exponent t where the output is
// no longer exactly 1 + 2^-t equals the fractional bits kept.
inline BitsResult binary_pair_bits(const Dut& dut, int partner, int pos) {
  for (int t = 1; t <= 60; ++t) {
    ProbeRunner pr(dut);
    if (!pr.set_summand(partner, +1, 1, 0, 0)) return {t - 1, true};
    if (!pr.set_summand(pos, +1, 1, 0, -t)) return {t, true};
    auto v = finite_value(dut.info.d_fmt, pr.run());
    ExactScaled want =
        exact_add(make_scaled(+1, 1, 0, 0), make_scaled(+1, 1, 0, -t));
    if (!v || !exact_eq(*v, want)) return {t, false};
  }
  return {60, true};
}

// Fused-node probe: anchors +2^e_anc and -2^e_anc cancel inside the node and
// pin its alignment exponent; a summand 2^(e_anc - s) survives exactly while
// s stays within the node's fractional window.
inline BitsResult fused_spread_bits(const Dut& dut, const FusedSpots& spots,
                                    int pos, long e_anc, long eps_floor) {
  const DutInfo& f = dut.info;
  for (int s = 1; s <= 60; ++s) {
    long ee = e_anc - s;
    if (ee < eps_floor) return {s - 1, true};
    ProbeRunner pr(dut);
    if (!pr.set_summand(spots.anchor1, +1, 1, 0, e_anc) ||
        !pr.set_summand(spots.anchor2, -1, 1, 0, e_anc))
      return {s - 1, true};
    if (!pr.set_summand(pos, +1, 1, 0, ee)) return {s - 1, true};
    auto v = finite_value(f.d_fmt, pr.run());
    if (!v || !exact_eq(*v, make_scaled(+1, 1, 0, ee))) return {s - 1, false};
  }
  return {60, true};
}

// Scale-assisted spread probe: the anchors climb through block scales while
// the probed value stays fixed (products) or descends directly (the fp32
// addend c), so the spread can exceed the element formats' range.
inline std::optional<BitsResult> scaled_fused_spread_bits(const Dut& dut,
                                                          int pos) {
  const DutInfo& f = dut.info;
  ScaledSpots sp = scaled_spots(f, pos);
  if (!sp.ok) return std::nullopt;
  long phi = max_pow2_exp(f.a_fmt) + max_pow2_exp(f.b_fmt);
  long plo = min_pow2_exp(f.a_fmt) + min_pow2_exp(f.b_fmt);
  long shi = 2 * max_pow2_exp(f.sf_fmt), slo = 2 * min_pow2_exp(f.sf_fmt);
  bool wide_scale = shi - slo >= 80;
  for (int s = 1; s <= 60; ++s) {
    ProbeRunner pr(dut);
    long ee, e_anc;
    if (pos == f.k) {
      e_anc = 0;
      ee = -s;
      if (!pr.set_summand(pos, +1, 1, 0, ee)) return BitsResult{s - 1, true};
    } else {
      ee = wide_scale ? 0 : plo + slo;
      e_anc = ee + s;
      if (e_anc > phi + shi) return BitsResult{s - 1, true};
      if (!pr.set_scaled_summand(pos, +1, 1, 0, ee))
        return BitsResult{s - 1, true};
    }
    if (!place_scaled_anchors(pr, f, sp, e_anc))
      return BitsResult{s - 1, true};
    auto v = finite_value(f.d_fmt, pr.run());
    if (!v || !exact_eq(*v, make_scaled(+1, 1, 0, ee)))
      return BitsResult{s - 1, false};
  }
  return BitsResult{60, true};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Precision probe
// ---------------------------------------------------------------------------

// Measures the fractional bits preserved at every summand position: for
// binary trees via the 1 + eps identity at the op where the position first
// merges, for fused nodes via cancelling anchors and a widening exponent
// spread.  A saturated entry means the operand formats ran out of range
// before the identity broke; the value is then a lower bound.
inline PrecisionScan probe_precision(const Dut& dut,
                                     const SummationTreeShape& tree) {
  using namespace detail;
  const DutInfo& f = dut.info;
  const int K = f.k;
  PrecisionScan scan;
  if (tree.kind == TreeKind::unclassified) return scan;
  scan.bits.assign(static_cast<size_t>(K + 1), 0);
  scan.saturated.assign(static_cast<size_t>(K + 1), 0);
  OrderBudget bg = order_budget(f);
  long out_floor = f.d_fmt == FormatId::fp16   ? -22
                   : f.d_fmt == FormatId::fp64 ? -1000
                                               : -140;
  for (int pos = 0; pos <= K; ++pos) {
    BitsResult r;
    if (tree.kind == TreeKind::sequential ||
        tree.kind == TreeKind::group_pairwise) {
      r = binary_pair_bits(dut, binary_partner(tree, K, pos), pos);
    } else {
      std::optional<BitsResult> s;
      if (f.scale_block > 0) s = scaled_fused_spread_bits(dut, pos);
      if (s) {
        r = *s;
      } else {
        long floor_ = pos == K
                          ? min_pow2_exp(f.c_fmt) + 2
                          : min_pow2_exp(f.a_fmt) + min_pow2_exp(f.b_fmt);
        r = fused_spread_bits(dut, fused_spots(tree, K, pos), pos, bg.ex,
                              std::max(floor_, out_floor));
      }
    }
    scan.bits[static_cast<size_t>(pos)] = r.bits;
    scan.saturated[static_cast<size_t>(pos)] = r.saturated ? 1 : 0;
  }
  return scan;
}

// ---------------------------------------------------------------------------
// Rounding probes
// ---------------------------------------------------------------------------

namespace detail {

// Measured offset of `out` from `base` in units of 2^u_exp, if it is an
// integer in [-2, 2]; 9 otherwise.
inline int read_delta(FormatId d_fmt, uint64_t out, const ExactScaled& base,
                      long u_exp) {
  auto v = finite_value(d_fmt, out);
  if (!v) return 9;
  for (int d = -2; d <= 2; ++d) {
    ExactScaled want =
        exact_add(base, make_scaled(d < 0 ? -1 : +1, std::abs(d), 0, u_exp));
    if (exact_eq(*v, want)) return d;
  }
  return 9;
}

struct CellPattern {
  RoundingMode mode;
  std::array<int, 4> d;
};

inline const std::array<CellPattern, 4>& directed_patterns() {
  static const std::array<CellPattern, 4> p = {{
      {RoundingMode::RU, {1, 1, 0, 0}},
      {RoundingMode::RD, {0, 0, -1, -1}},
      {RoundingMode::RZ, {0, 0, 0, 0}},
      {RoundingMode::RA, {1, 1, -1, -1}},
  }};
  return p;
}

inline const std::array<CellPattern, 6>& tie_patterns() {
  static const std::array<CellPattern, 6> p = {{
      {RoundingMode::RNU, {1, 2, 0, -1}},
      {RoundingMode::RND, {0, 1, -1, -2}},
      {RoundingMode::RNZ, {0, 1, 0, -1}},
      {RoundingMode::RNA, {1, 2, -1, -2}},
      {RoundingMode::RNE, {0, 2, 0, -2}},
      {RoundingMode::RNO, {1, 1, -1, -1}},
  }};
  return p;
}

// Halfway-cell responses of the four directed modes.  When only halfway
// fractions are constructible these collide pairwise with the nearest-family
// modes (RZ with RNZ, and so on); the directed reading is preferred.
inline const std::array<CellPattern, 4>& directed_tie_patterns() {
  static const std::array<CellPattern, 4> p = {{
      {RoundingMode::RU, {1, 2, 0, -1}},
      {RoundingMode::RD, {0, 1, -1, -2}},
      {RoundingMode::RZ, {0, 1, 0, -1}},
      {RoundingMode::RA, {1, 2, -1, -2}},
  }};
  return p;
}

// One rounding battery: anchors() pins the context and returns the base
// value; place() injects the probe fraction (sig / 2^frac last-place units)
// at the probed position.
struct BatterySetup {
  std::function<std::optional<ExactScaled>(ProbeRunner&, int sign)> anchors;
  std::function<bool(ProbeRunner&, int sign, long long sig, int frac, long e)>
      place;
  long u_exp = 0;
};

inline int battery_cell(const Dut& dut, const BatterySetup& setup,
                        long long sig, int frac, int sign) {
  ProbeRunner pr(dut);
  auto base = setup.anchors(pr, sign);
  if (!base) return 99;
  if (!setup.place(pr, sign, sig, frac, setup.u_exp)) return 99;
  return read_delta(dut.info.d_fmt, pr.run(), *base, setup.u_exp);
}

inline RoundingFinding run_battery(const Dut& dut, const BatterySetup& setup,
                                   bool directed_reachable) {
  RoundingFinding fin;
  if (directed_reachable) {
    // +3/4, +1/4, -3/4, -1/4 of one last-place unit
    static const int fr[4][2] = {{3, +1}, {1, +1}, {-3, -1}, {-1, -1}};
    for (int i = 0; i < 4; ++i)
      fin.cells[static_cast<size_t>(i)] =
          battery_cell(dut, setup, std::abs(fr[i][0]), 2, fr[i][1]);
    std::array<int, 4> got = {fin.cells[0], fin.cells[1], fin.cells[2],
                              fin.cells[3]};
    for (const auto& p : directed_patterns()) {
      if (got == p.d) {
        fin.known = true;
        fin.mode = p.mode;
        return fin;
      }
    }
    if (got != std::array<int, 4>{1, 0, -1, 0})
      return fin;  // neither directed nor the round-to-nearest signature
  }
  fin.ties_probed = true;
  // +1/2, +3/2, -1/2, -3/2 of one last-place unit
  static const int ft[4][2] = {{1, +1}, {3, +1}, {-1, -1}, {-3, -1}};
  for (int i = 0; i < 4; ++i)
    fin.cells[static_cast<size_t>(4 + i)] =
        battery_cell(dut, setup, std::abs(ft[i][0]), 1, ft[i][1]);
  std::array<int, 4> got = {fin.cells[4], fin.cells[5], fin.cells[6],
                            fin.cells[7]};
  if (!directed_reachable) {
    for (const auto& p : directed_tie_patterns()) {
      if (got == p.d) {
        fin.known = true;
        fin.mode = p.mode;
        return fin;
      }
    }
  }
  for (const auto& p : tie_patterns()) {
    if (got == p.d) {
      fin.known = true;
      fin.mode = p.mode;
      return fin;
    }
  }
  return fin;
}

// Battery over a binary op: anchor +-1.5 at the partner leaf, the fraction
// at the probed position, measured against base +-1.5.
inline BatterySetup binary_battery(const SummationTreeShape& tree,
                                   const DutInfo& f, int pos, int bits) {
  BatterySetup setup;
  setup.u_exp = -(bits - 1);
  int partner = binary_partner(tree, f.k, pos);
  // Anchor at +/-1.5 rather than +/-1.0: every probe then stays inside the
  // anchor's own binade (a negative fraction added to 1.0 would fall into the
  // binade below, where the unit in the last place halves).
  setup.anchors = [partner](ProbeRunner& pr,
                            int sign) -> std::optional<ExactScaled> {
    if (!pr.set_summand(partner, sign, 3, 1, 0)) return std::nullopt;
    return make_scaled(sign, 3, 1, 0);
  };
  setup.place = [pos](ProbeRunner& pr, int sign, long long sig, int frac,
                      long e) {
    return pr.set_summand(pos, sign, sig, frac, e);
  };
  return setup;
}

// Battery over a fused node: anchors +2^e_anc / -2^e_anc cancel, the probed
// position carries the fraction, and the output is the rounded fraction on
// its own (base 0, unit 2^(e_anc - F)).
inline BatterySetup fused_battery(const SummationTreeShape& tree,
                                  const DutInfo& f, int pos, int F) {
  BatterySetup setup;
  ScaledSpots ssp = scaled_spots(f, pos);
  if (ssp.ok) {
    long shi = 2 * max_pow2_exp(f.sf_fmt);
    long e_anc = std::min(shi, long{40});
    setup.u_exp = e_anc - F;
    DutInfo fi = f;
    setup.anchors = [fi, ssp, e_anc](
                        ProbeRunner& pr, int) -> std::optional<ExactScaled> {
      if (!place_scaled_anchors(pr, fi, ssp, e_anc)) return std::nullopt;
      return exact_zero();
    };
    setup.place = [pos](ProbeRunner& pr, int sign, long long sig, int frac,
                        long e) {
      return pr.set_scaled_summand(pos, sign, sig, frac, e);
    };
    return setup;
  }
  OrderBudget bg = order_budget(f);
  long e_anc = bg.ex;
  FusedSpots spots = fused_spots(tree, f.k, pos);
  setup.u_exp = e_anc - F;
  setup.anchors = [spots, e_anc](ProbeRunner& pr,
                                 int) -> std::optional<ExactScaled> {
    if (!pr.set_summand(spots.anchor1, +1, 1, 0, e_anc) ||
        !pr.set_summand(spots.anchor2, -1, 1, 0, e_anc))
      return std::nullopt;
    return exact_zero();
  };
  setup.place = [pos](ProbeRunner& pr, int sign, long long sig, int frac,
                      long e) {
    return pr.set_scaled_summand(pos, sign, sig, frac, e);
  };
  return setup;
}

}  // namespace detail

// Classifies the rounding rule applied to the summand at `pos` when it joins
// the accumulation, by measuring the four directed fractions (+-3/4, +-1/4)
// and, when those indicate round-to-nearest, the four halfway fractions.
// Requires the position's precision from probe_precision.
inline RoundingFinding probe_rounding(const Dut& dut,
                                      const SummationTreeShape& tree,
                                      const PrecisionScan& prec, int pos) {
  using namespace detail;
  RoundingFinding fin;
  if (tree.kind == TreeKind::unclassified || prec.bits.empty()) return fin;
  if (prec.saturated[static_cast<size_t>(pos)]) return fin;
  int bits = prec.bits[static_cast<size_t>(pos)];
  if (bits <= 2) return fin;
  BatterySetup setup;
  if (tree.kind == TreeKind::sequential ||
      tree.kind == TreeKind::group_pairwise) {
    setup = binary_battery(tree, dut.info, pos, bits);
  } else {
    setup = fused_battery(tree, dut.info, pos, bits);
  }
  return run_battery(dut, setup, /*directed_reachable=*/true);
}

// Classifies the rounding of the final conversion into the output format.
// The context pins the sum at sign * 1.5 * 2^e0, split between the addend
// (1.25 * 2^e0) and one pinned product (0.25 * 2^e0); the probed position
// adds f * 2^(e0 - mb) on top.  Keeping the large part on the addend and the
// products two binades down leaves every product-only truncation stage wide
// enough that the probe fraction reaches the final conversion intact, where
// it straddles the last kept bit of the output format.
inline RoundingFinding probe_final_rounding(const Dut& dut,
                                            const SummationTreeShape& tree,
                                            const PrecisionScan& prec) {
  using namespace detail;
  RoundingFinding fin;
  if (tree.kind == TreeKind::unclassified || prec.bits.empty()) return fin;
  const DutInfo& f = dut.info;
  int mb = format_spec(f.d_fmt).fraction_bits;
  long plo = min_pow2_exp(f.a_fmt) + min_pow2_exp(f.b_fmt);
  int blocks = f.scale_block > 0 ? f.k / f.scale_block : 0;
  long slo = blocks ? 2 * min_pow2_exp(f.sf_fmt) : 0;
  long shi = blocks ? 2 * max_pow2_exp(f.sf_fmt) : 0;
  // Low enough for the addend format, high enough that the probe fractions
  // stay synthesizable from the element (and scale) formats.
  long e0 = std::max(long{0}, plo + slo + mb + 3);
  BatterySetup setup;
  setup.u_exp = e0 - mb;
  int frac_pos = 0;  // a 1-product unit carries the fraction on its product
  if (f.k >= 2) {
    frac_pos = tree.kind == TreeKind::chain_of_fused ? tree.split
               : blocks >= 2                         ? f.scale_block
                                                     : 1;
  }
  DutInfo fi = f;
  if (blocks == 1) {
    // All products share one block scale: fix a single scale exponent q
    // under which the pinned product and every probe fraction synthesize.
    std::optional<long> shared_q;
    for (long q = shi; q >= slo && !shared_q; --q) {
      if (!synth_product(f.a_fmt, f.b_fmt, +1, 1, 0, e0 - 2 - q)) continue;
      bool all = true;
      for (int fb = 1; fb <= 2 && all; ++fb)
        for (long long sg = 1; sg <= 3 && all; sg += 2)
          if (!synth_product(f.a_fmt, f.b_fmt, +1, sg, fb, setup.u_exp - q))
            all = false;
      if (all) shared_q = q;
    }
    if (!shared_q) return fin;
    long q = *shared_q;
    setup.anchors = [fi, e0, q](ProbeRunner& pr,
                                int sign) -> std::optional<ExactScaled> {
      if (!pr.set_summand(fi.k, sign, 5, 2, e0)) return std::nullopt;
      if (!pr.set_block_scale(0, q)) return std::nullopt;
      auto p = synth_product(fi.a_fmt, fi.b_fmt, sign, 1, 0, e0 - 2 - q);
      if (!p) return std::nullopt;
      pr.set_product_bits(0, p->first, p->second);
      return make_scaled(sign, 3, 1, e0);
    };
    setup.place = [fi, q, frac_pos](ProbeRunner& pr, int sign, long long sig,
                                    int frac, long e) {
      auto p = synth_product(fi.a_fmt, fi.b_fmt, sign, sig, frac, e - q);
      if (!p) return false;
      pr.set_product_bits(frac_pos, p->first, p->second);
      return true;
    };
    return run_battery(dut, setup, /*directed_reachable=*/true);
  }
  setup.anchors = [fi, e0](ProbeRunner& pr,
                           int sign) -> std::optional<ExactScaled> {
    if (fi.k >= 2) {
      if (!pr.set_summand(fi.k, sign, 5, 2, e0)) return std::nullopt;
      if (!pr.set_scaled_summand(0, sign, 1, 0, e0 - 2)) return std::nullopt;
    } else {
      if (!pr.set_summand(fi.k, sign, 3, 1, e0)) return std::nullopt;
    }
    return make_scaled(sign, 3, 1, e0);
  };
  setup.place = [frac_pos](ProbeRunner& pr, int sign, long long sig, int frac,
                           long e) {
    return pr.set_scaled_summand(frac_pos, sign, sig, frac, e);
  };
  return run_battery(dut, setup, /*directed_reachable=*/true);
}

// When the accumulation path rounds the addend c downward, checks whether an
// addend more than one bit below the kept window is instead discarded toward
// zero: shallow (-3/4 grain) and deep (-3/8 grain) addends against a lone
// anchor product 2^e_anc.
inline Flag probe_c_deep_drop(const Dut& dut, const SummationTreeShape& tree,
                              const PrecisionScan& prec,
                              const RoundingFinding& c_path) {
  using namespace detail;
  (void)tree;
  if (!c_path.known || c_path.mode != RoundingMode::RD) return Flag::untested;
  const DutInfo& f = dut.info;
  const int K = f.k;
  if (prec.bits.empty() || prec.saturated[static_cast<size_t>(K)])
    return Flag::untested;
  int F = prec.bits[static_cast<size_t>(K)];
  OrderBudget bg = order_budget(f);
  long e_anc = bg.ex;
  auto run_with_c = [&](long long sig, int frac) -> std::optional<int> {
    ProbeRunner pr(dut);
    if (!pr.set_summand(0, +1, 1, 0, e_anc)) return std::nullopt;
    if (!pr.set_summand(K, -1, sig, frac, e_anc - F)) return std::nullopt;
    ExactScaled base = make_scaled(+1, 1, 0, e_anc);
    return read_delta(f.d_fmt, pr.run(), base, e_anc - F);
  };
  auto shallow = run_with_c(3, 2);  // -3/4 grain: inside the window
  auto deep = run_with_c(3, 3);     // -3/8 grain: below the window
  if (!shallow || !deep || *shallow == 9 || *deep == 9) return Flag::untested;
  if (*shallow != -1) return Flag::untested;  // downward rounding not visible
  return *deep == 0 ? Flag::yes : Flag::no;
}

// ---------------------------------------------------------------------------
// Special-value battery
// ---------------------------------------------------------------------------

namespace detail {

inline bool is_nan_bits(FormatId fmt, uint64_t bits) {
  return decode(fmt, bits).cls == NumClass::nan;
}
inline bool is_inf_or_nan(FormatId fmt, uint64_t bits) {
  NumClass c = decode(fmt, bits).cls;
  return c == NumClass::infinity || c == NumClass::nan;
}

// yes if the output is zero, no if it equals `kept`, untested otherwise.
inline Flag value_or_zero_flag(FormatId d_fmt, uint64_t out,
                               const ExactScaled& kept) {
  auto v = finite_value(d_fmt, out);
  if (!v) return Flag::untested;
  if (v->is_zero()) return Flag::yes;
  return exact_eq(*v, kept) ? Flag::no : Flag::untested;
}

inline uint64_t neg_zero_bits(const FormatSpec& f) {
  return uint64_t{1} << (f.exponent_bits + f.fraction_bits);
}

}  // namespace detail

// Runs the special-value battery.  Each probe is skipped (flag untested)
// when the operand formats cannot express the values it needs or when the
// surviving value it looks for would not be visible in the output format.
inline void probe_special(const Dut& dut, DissectionReport& rep) {
  using namespace detail;
  const DutInfo& f = dut.info;
  const int K = f.k;
  const FormatSpec& fa = format_spec(f.a_fmt);
  const FormatSpec& fb = format_spec(f.b_fmt);
  const FormatSpec& fc = format_spec(f.c_fmt);

  // (1) subnormal addend c
  {
    long e = fc.min_normal_exp - 1;
    ProbeRunner pr(dut);
    if (pr.set_summand(K, +1, 1, 0, e))
      rep.flush_c_in =
          value_or_zero_flag(f.d_fmt, pr.run(), make_scaled(+1, 1, 0, e));
  }
  // (2) subnormal multiplier input
  {
    long e = fa.min_normal_exp - 1;
    auto av = try_encode(f.a_fmt, +1, 1, 0, e);
    auto bv = try_encode(f.b_fmt, +1, 1, 0, 0);
    if (av && bv) {
      ProbeRunner pr(dut);
      pr.set_product_bits(0, *av, *bv);
      rep.flush_ab_in =
          value_or_zero_flag(f.d_fmt, pr.run(), make_scaled(+1, 1, 0, e));
    }
  }
  // (3) product below the 32-bit normal range, from normal inputs; only
  // meaningful when the output format could represent the kept value
  if (f.d_fmt == FormatId::fp32) {
    for (long t = -130; t >= -140; --t) {
      auto p = synth_product(f.a_fmt, f.b_fmt, +1, 1, 0, t);
      if (!p) continue;
      if (decode(f.a_fmt, p->first).cls != NumClass::normal ||
          decode(f.b_fmt, p->second).cls != NumClass::normal)
        continue;
      ProbeRunner pr(dut);
      pr.set_product_bits(0, p->first, p->second);
      rep.flush_post_mul =
          value_or_zero_flag(f.d_fmt, pr.run(), make_scaled(+1, 1, 0, t));
      break;
    }
  }
  // (4) subnormal partial sum: 1.5m + (-m), m the smallest normal of the
  // accumulation domain, placed so the two values meet at the first op
  if (f.d_fmt != FormatId::fp16) {
    long emin = f.d_fmt == FormatId::fp64 ? -1022 : -126;
    auto p1 = synth_product(f.a_fmt, f.b_fmt, +1, 3, 1, emin);
    bool normals = p1 &&
                   decode(f.a_fmt, p1->first).cls == NumClass::normal &&
                   decode(f.b_fmt, p1->second).cls == NumClass::normal;
    if (normals) {
      ProbeRunner pr(dut);
      pr.set_product_bits(0, p1->first, p1->second);
      bool ok = K >= 2 ? pr.set_summand(1, -1, 1, 0, emin)
                       : pr.set_summand(K, -1, 1, 0, emin);
      if (ok)
        rep.flush_post_add = value_or_zero_flag(
            f.d_fmt, pr.run(), make_scaled(+1, 1, 0, emin - 1));
    }
  }
  // (5) negative zero: c = -0 plus zero-valued products ((+0) * (-0) where
  // an operand format can express -0)
  if (fc.has_negative_zero) {
    ProbeRunner pr(dut);
    pr.set_c_bits(neg_zero_bits(fc));
    if (fb.has_negative_zero) {
      for (int pos = 0; pos < K; ++pos)
        pr.set_product_bits(pos, 0, neg_zero_bits(fb));
    } else if (fa.has_negative_zero) {
      for (int pos = 0; pos < K; ++pos)
        pr.set_product_bits(pos, neg_zero_bits(fa), 0);
    }
    DecodedNumber d = decode(f.d_fmt, pr.run());
    rep.neg_zero_out = d.cls != NumClass::zero ? Flag::untested
                       : d.sign < 0            ? Flag::yes
                                               : Flag::no;
  }
  // (6) product magnitude past the operand format's top binade:
  // 2 * 2^Emax + (-2^Emax) should land exactly on 2^Emax
  {
    long E = fb.max_exp;
    auto av = try_encode(f.a_fmt, +1, 1, 0, 1);
    auto bv = encode_pow2(f.b_fmt, +1, static_cast<int>(E));
    if (av && bv && E <= fc.max_exp) {
      ProbeRunner pr(dut);
      pr.set_product_bits(0, *av, *bv);
      if (pr.set_summand(K, -1, 1, 0, E))
        rep.product_overflow =
            is_inf_or_nan(f.d_fmt, pr.run()) ? Flag::yes : Flag::no;
    }
  }
  // (7) running-sum overflow: 2^E + 2^E - 2^E at the accumulation domain's
  // top binade, with the subtrahend both first and last in program order
  {
    long Eacc = f.d_fmt == FormatId::fp64 ? 1023 : 127;
    long phi = fa.max_exp + fb.max_exp;
    if (K >= 2 && phi >= Eacc && fc.max_exp >= Eacc) {
      bool any_blowup = false, ran = false;
      {
        ProbeRunner pr(dut);
        if (pr.set_summand(K, -1, 1, 0, Eacc) &&
            pr.set_summand(0, +1, 1, 0, Eacc) &&
            pr.set_summand(1, +1, 1, 0, Eacc)) {
          ran = true;
          any_blowup |= is_inf_or_nan(f.d_fmt, pr.run());
        }
      }
      {
        ProbeRunner pr(dut);
        if (pr.set_summand(K, +1, 1, 0, Eacc) &&
            pr.set_summand(0, +1, 1, 0, Eacc) &&
            pr.set_summand(K - 1, -1, 1, 0, Eacc)) {
          ran = true;
          any_blowup |= is_inf_or_nan(f.d_fmt, pr.run());
        }
      }
      if (ran) rep.intermediate_overflow = any_blowup ? Flag::yes : Flag::no;
    }
  }
  // (8) output-boundary edges: (2 - u) * 2^E plus f * u * 2^E with u the
  // multiplier-format ulp of 2, recorded raw and uninterpreted
  {
    int ufb = fa.fraction_bits;
    long E = fb.max_exp;
    long long top = (1LL << (ufb + 1)) - 1;  // (2 - u) at unit scale
    struct EdgeSpec {
      const char* label;
      int sign;
      long long sig;
      int frac;
    };
    const EdgeSpec specs[] = {
        {"+0.75u", +1, 3, 2}, {"+0.50u", +1, 1, 1}, {"+0.25u", +1, 1, 2},
        {"-0.75u", -1, 3, 2}, {"-0.50u", -1, 1, 1}, {"-0.25u", -1, 1, 2},
    };
    for (const EdgeSpec& s : specs) {
      if (K < 2) break;
      auto big = synth_product(f.a_fmt, f.b_fmt, +1, top, ufb, E);
      auto small =
          synth_product(f.a_fmt, f.b_fmt, s.sign, s.sig, s.frac + ufb, E);
      if (!big || !small) continue;
      ProbeRunner pr(dut);
      pr.set_product_bits(0, big->first, big->second);
      pr.set_product_bits(1, small->first, small->second);
      rep.overflow_edges.push_back(EdgeOutcome{s.label, pr.run()});
    }
  }
  // (9) NaN generation: 0 * inf, then +inf + -inf
  {
    FormatId inf_fmt = FormatId::fp32;
    bool b_side = false, a_side = false;
    if (fb.has_infinity) {
      inf_fmt = f.b_fmt;
      b_side = true;
    } else if (fa.has_infinity) {
      inf_fmt = f.a_fmt;
      a_side = true;
    }
    if (b_side || a_side) {
      {
        ProbeRunner pr(dut);
        if (b_side)
          pr.set_product_bits(0, 0, infinity_bits(inf_fmt, +1));
        else
          pr.set_product_bits(0, infinity_bits(inf_fmt, +1), 0);
        rep.nan_from_zero_times_inf =
            is_nan_bits(f.d_fmt, pr.run()) ? Flag::yes : Flag::no;
      }
      if (K >= 2) {
        auto one = b_side ? try_encode(f.a_fmt, +1, 1, 0, 0)
                          : try_encode(f.b_fmt, +1, 1, 0, 0);
        if (one) {
          ProbeRunner pr(dut);
          if (b_side) {
            pr.set_product_bits(0, *one, infinity_bits(inf_fmt, +1));
            pr.set_product_bits(1, *one, infinity_bits(inf_fmt, -1));
          } else {
            pr.set_product_bits(0, infinity_bits(inf_fmt, +1), *one);
            pr.set_product_bits(1, infinity_bits(inf_fmt, -1), *one);
          }
          rep.nan_from_inf_minus_inf =
              is_nan_bits(f.d_fmt, pr.run()) ? Flag::yes : Flag::no;
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Full dissection and report serialization
// ---------------------------------------------------------------------------

inline DissectionReport dissect(const Dut& dut) {
  DissectionReport rep;
  rep.info = dut.info;
  rep.tree = probe_order(dut);
  rep.precision = probe_precision(dut, rep.tree);
  rep.c_rounding = probe_rounding(dut, rep.tree, rep.precision, dut.info.k);
  // Composite signature: in-window addends round downward while the
  // quarter-fraction cells sit below the window and are dropped to zero.
  if (!rep.c_rounding.known && rep.c_rounding.cells[0] == 0 &&
      rep.c_rounding.cells[1] == 0 && rep.c_rounding.cells[2] == -1 &&
      rep.c_rounding.cells[3] == 0) {
    rep.c_rounding.known = true;
    rep.c_rounding.mode = RoundingMode::RD;
  }
  rep.c_deep_drop =
      probe_c_deep_drop(dut, rep.tree, rep.precision, rep.c_rounding);
  rep.final_rounding = probe_final_rounding(dut, rep.tree, rep.precision);
  probe_special(dut, rep);
  return rep;
}

inline DissectionReport dissect(const InstructionDescriptor& desc) {
  return dissect(make_dut(desc));
}

inline std::string report_to_text(const DissectionReport& rep) {
  std::ostringstream os;
  const int K = rep.info.k;
  os << "unit:\n";
  os << "  k: " << K << "\n";
  os << "  a: " << format_name(rep.info.a_fmt)
     << "  b: " << format_name(rep.info.b_fmt)
     << "  c: " << format_name(rep.info.c_fmt)
     << "  d: " << format_name(rep.info.d_fmt) << "\n";
  if (rep.info.scale_block > 0)
    os << "  scale: " << format_name(rep.info.sf_fmt) << " per "
       << rep.info.scale_block << "\n";
  os << "tree:\n";
  os << "  kind: " << tree_kind_name(rep.tree.kind) << "\n";
  if (rep.tree.kind == TreeKind::group_pairwise)
    os << "  group: " << rep.tree.group << "\n";
  if (rep.tree.kind == TreeKind::fused)
    os << "  arity: " << rep.tree.arity << "\n";
  if (rep.tree.kind == TreeKind::chain_of_fused)
    os << "  split: " << rep.tree.split << "\n";
  if (rep.tree.kind == TreeKind::unclassified && !rep.tree.priority.empty()) {
    os << "  priority:\n";
    for (int i = 0; i <= K; ++i) {
      os << "   ";
      for (int j = 0; j <= K; ++j)
        os << " "
           << rep.tree
                  .priority[static_cast<size_t>(i)][static_cast<size_t>(j)];
      os << "\n";
    }
  }
  os << "precision:\n";
  if (rep.precision.bits.empty()) {
    os << "  (not probed)\n";
  } else {
    auto emit = [&](const std::string& label, int pos) {
      os << "  " << label << ": ";
      if (rep.precision.saturated[static_cast<size_t>(pos)])
        os << ">=" << rep.precision.bits[static_cast<size_t>(pos)]
           << " (saturated)";
      else
        os << rep.precision.bits[static_cast<size_t>(pos)];
      os << "\n";
    };
    auto same = [&](int x, int y) {
      return rep.precision.bits[static_cast<size_t>(x)] ==
                 rep.precision.bits[static_cast<size_t>(y)] &&
             rep.precision.saturated[static_cast<size_t>(x)] ==
                 rep.precision.saturated[static_cast<size_t>(y)];
    };
    int run_start = 0;
    for (int pos = 1; pos <= K; ++pos) {
      if (pos < K && same(pos, run_start)) continue;
      std::ostringstream label;
      if (run_start == pos - 1)
        label << "p" << run_start;
      else
        label << "p" << run_start << "..p" << pos - 1;
      emit(label.str(), run_start);
      run_start = pos;
    }
    emit("c", K);
  }
  auto emit_rounding = [&](const char* label, const RoundingFinding& fin) {
    os << "  " << label << ": ";
    if (fin.known)
      os << rounding_mode_name(fin.mode);
    else
      os << "unknown";
    os << "  cells=[";
    for (int i = 0; i < (fin.ties_probed ? 8 : 4); ++i)
      os << (i ? " " : "") << fin.cells[static_cast<size_t>(i)];
    os << "]\n";
  };
  os << "rounding:\n";
  emit_rounding("c_path", rep.c_rounding);
  os << "  c_deep_drop: " << flag_name(rep.c_deep_drop) << "\n";
  emit_rounding("final", rep.final_rounding);
  os << "flags:\n";
  os << "  flush_c_in: " << flag_name(rep.flush_c_in) << "\n";
  os << "  flush_ab_in: " << flag_name(rep.flush_ab_in) << "\n";
  os << "  flush_post_mul: " << flag_name(rep.flush_post_mul) << "\n";
  os << "  flush_post_add: " << flag_name(rep.flush_post_add) << "\n";
  os << "  neg_zero_out: " << flag_name(rep.neg_zero_out) << "\n";
  os << "  product_overflow: " << flag_name(rep.product_overflow) << "\n";
  os << "  intermediate_overflow: " << flag_name(rep.intermediate_overflow)
     << "\n";
  os << "  nan_from_zero_times_inf: "
     << flag_name(rep.nan_from_zero_times_inf) << "\n";
  os << "  nan_from_inf_minus_inf: " << flag_name(rep.nan_from_inf_minus_inf)
     << "\n";
  if (!rep.overflow_edges.empty()) {
    os << "edges:\n";
    char buf[32];
    for (const EdgeOutcome& e : rep.overflow_edges) {
      std::snprintf(buf, sizeof buf, "0x%0*llx",
                    storage_hex_digits(rep.info.d_fmt),
                    static_cast<unsigned long long>(e.bits));
      os << "  " << e.label << ": " << buf << "\n";
    }
  }
  return os.str();
}

}  // namespace tcmm
