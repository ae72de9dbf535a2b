// Tests for the black-box dissection toolkit.
//
// Coverage is split three ways:
//  1. ClassifierSoundness: a synthetic device with a tunable rounding rule
//     checks that the rounding classifier recovers every supported mode at
//     several accumulator grain positions.
//  2. CatalogDissect: dissect() runs against catalogued instructions and the
//     full report (tree shape, per-position precision, rounding modes, flag
//     battery, overflow edges) is pinned to hand-derived expectations.
//  3. Unclassified: a device summing in an order no matcher covers must fall
//     through with the probe matrix preserved and downstream probes skipped.

#include "tcmm/dissect.hpp"

#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <span>
#include <string_view>
#include <vector>

#include "tcmm/catalog.hpp"
#include "tcmm/exact.hpp"
#include "tcmm/formats.hpp"

namespace {

using namespace tcmm;

uint32_t f32_bits(float v) { return std::bit_cast<uint32_t>(v); }

// Large fp32 values near the top of the range, computed exactly in double.
uint32_t f32_bits_from_double(double v) {
  return std::bit_cast<uint32_t>(static_cast<float>(v));
}

const InstructionDescriptor& entry(Architecture arch, std::string_view name) {
  const InstructionDescriptor* d = catalog().find(arch, name);
  if (d == nullptr) {
    ADD_FAILURE() << "catalog entry not found: " << name;
    static InstructionDescriptor dummy{};
    return dummy;
  }
  return *d;
}

DissectionReport dissect_entry(Architecture arch, std::string_view name) {
  return dissect(entry(arch, name));
}

void expect_bits_all(const PrecisionScan& scan, size_t positions, int bits) {
  ASSERT_EQ(scan.bits.size(), positions);
  ASSERT_EQ(scan.saturated.size(), positions);
  for (size_t i = 0; i < scan.bits.size(); ++i) {
    EXPECT_EQ(scan.bits[i], bits) << "position " << i;
    EXPECT_EQ(scan.saturated[i], 0) << "position " << i;
  }
}

void expect_mode(const RoundingFinding& fin, RoundingMode mode,
                 bool ties_probed) {
  ASSERT_TRUE(fin.known);
  EXPECT_EQ(fin.mode, mode) << "got " << rounding_mode_name(fin.mode);
  EXPECT_EQ(fin.ties_probed, ties_probed);
}

void expect_unknown(const RoundingFinding& fin) { EXPECT_FALSE(fin.known); }

std::optional<uint64_t> edge_bits(const DissectionReport& rep,
                                  std::string_view label) {
  for (const EdgeOutcome& e : rep.overflow_edges) {
    if (e.label == label) return e.bits;
  }
  ADD_FAILURE() << "missing overflow edge: " << label;
  return std::nullopt;
}

void expect_edges(const DissectionReport& rep, uint64_t p75, uint64_t p50,
                  uint64_t p25, uint64_t m75, uint64_t m50, uint64_t m25) {
  ASSERT_EQ(rep.overflow_edges.size(), 6u);
  EXPECT_EQ(edge_bits(rep, "+0.75u").value_or(~0ull), p75);
  EXPECT_EQ(edge_bits(rep, "+0.50u").value_or(~0ull), p50);
  EXPECT_EQ(edge_bits(rep, "+0.25u").value_or(~0ull), p25);
  EXPECT_EQ(edge_bits(rep, "-0.75u").value_or(~0ull), m75);
  EXPECT_EQ(edge_bits(rep, "-0.50u").value_or(~0ull), m50);
  EXPECT_EQ(edge_bits(rep, "-0.25u").value_or(~0ull), m25);
}

// ---------------------------------------------------------------------------
// 1. Rounding-classifier soundness against a synthetic reference device.
// ---------------------------------------------------------------------------

// A K=2 all-binary64 device that accumulates c + a0*b0 + a1*b1 exactly and
// then applies a single rounding step at grain 2^grain_exp2. This exercises
// the classifier against a ground-truth rounding rule with no other noise.
Dut rounding_oracle(long grain_exp2, RoundingMode mode) {
  Dut dut;
  dut.info.k = 2;
  dut.info.a_fmt = FormatId::fp64;
  dut.info.b_fmt = FormatId::fp64;
  dut.info.c_fmt = FormatId::fp64;
  dut.info.d_fmt = FormatId::fp64;
  dut.info.scale_block = 0;
  dut.fn = [grain_exp2, mode](uint64_t c, std::span<const uint64_t> a,
                              std::span<const uint64_t> b,
                              std::span<const uint64_t>,
                              std::span<const uint64_t>) -> uint64_t {
    ExactScaled sum = to_exact(decode(FormatId::fp64, c));
    for (size_t i = 0; i < 2; ++i) {
      ExactScaled p = exact_mul(to_exact(decode(FormatId::fp64, a[i])),
                                to_exact(decode(FormatId::fp64, b[i])));
      sum = exact_add(sum, p);
    }
    ExactScaled r = round_at(sum, grain_exp2, mode);
    return std::bit_cast<uint64_t>(exact_to_double(r));
  };
  return dut;
}

TEST(ClassifierSoundness, RecoversAllModesAcrossGrains) {
  const RoundingMode modes[] = {
      RoundingMode::RU,  RoundingMode::RD,  RoundingMode::RZ,
      RoundingMode::RA,  RoundingMode::RNU, RoundingMode::RND,
      RoundingMode::RNZ, RoundingMode::RNA, RoundingMode::RNE,
      RoundingMode::RNO};
  for (long grain : {-10L, -13L, -24L, -25L}) {
    for (RoundingMode mode : modes) {
      Dut dut = rounding_oracle(grain, mode);
      SummationTreeShape tree;
      tree.kind = TreeKind::sequential;
      PrecisionScan prec;
      prec.bits.assign(3, static_cast<int>(1 - grain));
      prec.saturated.assign(3, 0);
      RoundingFinding fin = probe_rounding(dut, tree, prec, 2);
      ASSERT_TRUE(fin.known)
          << rounding_mode_name(mode) << " at grain " << grain;
      EXPECT_EQ(fin.mode, mode)
          << "expected " << rounding_mode_name(mode) << " got "
          << rounding_mode_name(fin.mode) << " at grain " << grain;
    }
  }
}

// ---------------------------------------------------------------------------
// 2. Catalogued instructions: full-report fixpoints.
// ---------------------------------------------------------------------------

TEST(CatalogDissect, AmpereDmma884) {
  DissectionReport rep = dissect_entry(Architecture::ampere, "DMMA.884");
  EXPECT_EQ(rep.tree.kind, TreeKind::sequential);
  expect_bits_all(rep.precision, 5, 53);
  expect_mode(rep.c_rounding, RoundingMode::RNE, true);
  expect_mode(rep.final_rounding, RoundingMode::RNE, true);
  EXPECT_EQ(rep.c_deep_drop, Flag::untested);
  EXPECT_EQ(rep.flush_c_in, Flag::no);
  EXPECT_EQ(rep.flush_ab_in, Flag::no);
  EXPECT_EQ(rep.flush_post_mul, Flag::untested);
  EXPECT_EQ(rep.flush_post_add, Flag::no);
  EXPECT_EQ(rep.neg_zero_out, Flag::yes);
  EXPECT_EQ(rep.product_overflow, Flag::no);
  EXPECT_EQ(rep.intermediate_overflow, Flag::yes);
  EXPECT_EQ(rep.nan_from_zero_times_inf, Flag::yes);
  EXPECT_EQ(rep.nan_from_inf_minus_inf, Flag::yes);
  expect_edges(rep, 0x7FF0000000000000ull, 0x7FF0000000000000ull,
               0x7FEFFFFFFFFFFFFFull, 0x7FEFFFFFFFFFFFFEull,
               0x7FEFFFFFFFFFFFFEull, 0x7FEFFFFFFFFFFFFFull);
}

TEST(CatalogDissect, Cdna3SfmaFp32) {
  DissectionReport rep =
      dissect_entry(Architecture::cdna3, "v_mfma_f32_16x16x4_f32");
  EXPECT_EQ(rep.tree.kind, TreeKind::sequential);
  expect_bits_all(rep.precision, 5, 24);
  expect_mode(rep.c_rounding, RoundingMode::RNE, true);
  expect_mode(rep.final_rounding, RoundingMode::RNE, true);
  EXPECT_EQ(rep.flush_c_in, Flag::no);
  EXPECT_EQ(rep.flush_ab_in, Flag::no);
  EXPECT_EQ(rep.flush_post_mul, Flag::no);
  EXPECT_EQ(rep.flush_post_add, Flag::no);
  EXPECT_EQ(rep.neg_zero_out, Flag::yes);
  EXPECT_EQ(rep.product_overflow, Flag::no);
  EXPECT_EQ(rep.intermediate_overflow, Flag::yes);
  EXPECT_EQ(rep.nan_from_zero_times_inf, Flag::yes);
  EXPECT_EQ(rep.nan_from_inf_minus_inf, Flag::yes);
  expect_edges(rep, f32_bits(HUGE_VALF), f32_bits(HUGE_VALF), 0x7F7FFFFFu,
               0x7F7FFFFEu, 0x7F7FFFFEu, 0x7F7FFFFFu);
}

TEST(CatalogDissect, Cdna2GroupPairwiseF16) {
  DissectionReport rep =
      dissect_entry(Architecture::cdna2, "v_mfma_f32_32x32x8_f16");
  EXPECT_EQ(rep.tree.kind, TreeKind::group_pairwise);
  EXPECT_EQ(rep.tree.group, 4);
  expect_bits_all(rep.precision, 9, 24);
  expect_mode(rep.c_rounding, RoundingMode::RNE, true);
  expect_mode(rep.final_rounding, RoundingMode::RNE, true);
  EXPECT_EQ(rep.flush_c_in, Flag::yes);
  EXPECT_EQ(rep.flush_ab_in, Flag::yes);
  EXPECT_EQ(rep.flush_post_mul, Flag::untested);
  EXPECT_EQ(rep.flush_post_add, Flag::untested);
  EXPECT_EQ(rep.neg_zero_out, Flag::no);
  EXPECT_EQ(rep.product_overflow, Flag::no);
  EXPECT_EQ(rep.intermediate_overflow, Flag::untested);
  EXPECT_EQ(rep.nan_from_zero_times_inf, Flag::yes);
  EXPECT_EQ(rep.nan_from_inf_minus_inf, Flag::yes);
  expect_edges(rep, f32_bits(65528.0f), f32_bits(65520.0f),
               f32_bits(65512.0f), f32_bits(65480.0f), f32_bits(65488.0f),
               f32_bits(65496.0f));
}

TEST(CatalogDissect, Cdna2GroupPairwiseBf16FlushesEverywhere) {
  DissectionReport rep =
      dissect_entry(Architecture::cdna2, "v_mfma_f32_32x32x4bf16");
  EXPECT_EQ(rep.tree.kind, TreeKind::group_pairwise);
  EXPECT_EQ(rep.tree.group, 2);
  expect_bits_all(rep.precision, 5, 24);
  expect_mode(rep.c_rounding, RoundingMode::RNE, true);
  expect_mode(rep.final_rounding, RoundingMode::RNE, true);
  EXPECT_EQ(rep.flush_c_in, Flag::yes);
  EXPECT_EQ(rep.flush_ab_in, Flag::yes);
  EXPECT_EQ(rep.flush_post_mul, Flag::yes);
  EXPECT_EQ(rep.flush_post_add, Flag::yes);
  EXPECT_EQ(rep.neg_zero_out, Flag::no);
  EXPECT_EQ(rep.product_overflow, Flag::yes);
  EXPECT_EQ(rep.intermediate_overflow, Flag::yes);
  EXPECT_EQ(rep.nan_from_zero_times_inf, Flag::yes);
  EXPECT_EQ(rep.nan_from_inf_minus_inf, Flag::yes);
  const double b = std::ldexp(1.0, 128);
  expect_edges(rep, f32_bits_from_double(b - std::ldexp(1.0, 118)),
               f32_bits_from_double(b - std::ldexp(2.0, 118)),
               f32_bits_from_double(b - std::ldexp(3.0, 118)),
               f32_bits_from_double(b - std::ldexp(7.0, 118)),
               f32_bits_from_double(b - std::ldexp(6.0, 118)),
               f32_bits_from_double(b - std::ldexp(5.0, 118)));
}

TEST(CatalogDissect, VoltaHmma884F32) {
  DissectionReport rep = dissect_entry(Architecture::volta, "HMMA.884.F32.F32");
  EXPECT_EQ(rep.tree.kind, TreeKind::fused);
  EXPECT_EQ(rep.tree.arity, 5);
  expect_bits_all(rep.precision, 5, 23);
  expect_mode(rep.c_rounding, RoundingMode::RZ, false);
  expect_mode(rep.final_rounding, RoundingMode::RZ, false);
  EXPECT_EQ(rep.c_deep_drop, Flag::untested);
  EXPECT_EQ(rep.flush_c_in, Flag::yes);
  EXPECT_EQ(rep.flush_ab_in, Flag::no);
  EXPECT_EQ(rep.flush_post_mul, Flag::untested);
  EXPECT_EQ(rep.flush_post_add, Flag::untested);
  EXPECT_EQ(rep.neg_zero_out, Flag::no);
  EXPECT_EQ(rep.product_overflow, Flag::no);
  EXPECT_EQ(rep.intermediate_overflow, Flag::untested);
  EXPECT_EQ(rep.nan_from_zero_times_inf, Flag::yes);
  EXPECT_EQ(rep.nan_from_inf_minus_inf, Flag::yes);
  expect_edges(rep, f32_bits(65528.0f), f32_bits(65520.0f),
               f32_bits(65512.0f), f32_bits(65480.0f), f32_bits(65488.0f),
               f32_bits(65496.0f));
}

TEST(CatalogDissect, VoltaHmma884F16) {
  DissectionReport rep = dissect_entry(Architecture::volta, "HMMA.884.F16.F16");
  EXPECT_EQ(rep.tree.kind, TreeKind::fused);
  EXPECT_EQ(rep.tree.arity, 5);
  expect_bits_all(rep.precision, 5, 23);
  expect_mode(rep.c_rounding, RoundingMode::RZ, false);
  expect_mode(rep.final_rounding, RoundingMode::RNE, true);
  EXPECT_EQ(rep.flush_c_in, Flag::no);
  EXPECT_EQ(rep.flush_ab_in, Flag::no);
  EXPECT_EQ(rep.flush_post_mul, Flag::untested);
  EXPECT_EQ(rep.flush_post_add, Flag::untested);
  EXPECT_EQ(rep.neg_zero_out, Flag::no);
  EXPECT_EQ(rep.product_overflow, Flag::no);
  EXPECT_EQ(rep.nan_from_zero_times_inf, Flag::yes);
  EXPECT_EQ(rep.nan_from_inf_minus_inf, Flag::yes);
  expect_edges(rep, 0x7C00u, 0x7C00u, 0x7BFFu, 0x7BFEu, 0x7BFEu, 0x7BFFu);
}

TEST(CatalogDissect, TuringHmma1688) {
  DissectionReport rep = dissect_entry(Architecture::turing, "HMMA.1688.F32");
  EXPECT_EQ(rep.tree.kind, TreeKind::fused);
  EXPECT_EQ(rep.tree.arity, 9);
  expect_bits_all(rep.precision, 9, 24);
  expect_mode(rep.c_rounding, RoundingMode::RZ, false);
  expect_mode(rep.final_rounding, RoundingMode::RZ, false);
  EXPECT_EQ(rep.flush_c_in, Flag::yes);
  EXPECT_EQ(rep.flush_ab_in, Flag::no);
  EXPECT_EQ(rep.product_overflow, Flag::no);
  EXPECT_EQ(rep.intermediate_overflow, Flag::untested);
  expect_edges(rep, f32_bits(65528.0f), f32_bits(65520.0f),
               f32_bits(65512.0f), f32_bits(65480.0f), f32_bits(65488.0f),
               f32_bits(65496.0f));
}

TEST(CatalogDissect, HopperHmma1688WiderWindow) {
  DissectionReport rep = dissect_entry(Architecture::hopper, "HMMA.1688.F32");
  EXPECT_EQ(rep.tree.kind, TreeKind::fused);
  EXPECT_EQ(rep.tree.arity, 9);
  expect_bits_all(rep.precision, 9, 25);
  expect_mode(rep.c_rounding, RoundingMode::RZ, false);
  expect_mode(rep.final_rounding, RoundingMode::RZ, false);
  EXPECT_EQ(rep.flush_c_in, Flag::yes);
  EXPECT_EQ(rep.product_overflow, Flag::no);
  EXPECT_EQ(rep.intermediate_overflow, Flag::untested);
}

TEST(CatalogDissect, AmpereHmma16816Chain) {
  DissectionReport rep = dissect_entry(Architecture::ampere, "HMMA.16816.F32");
  EXPECT_EQ(rep.tree.kind, TreeKind::chain_of_fused);
  EXPECT_EQ(rep.tree.split, 8);
  expect_bits_all(rep.precision, 17, 24);
  expect_mode(rep.c_rounding, RoundingMode::RZ, false);
  expect_mode(rep.final_rounding, RoundingMode::RZ, false);
  EXPECT_EQ(rep.flush_c_in, Flag::yes);
  EXPECT_EQ(rep.intermediate_overflow, Flag::untested);
}

TEST(CatalogDissect, AmpereHmmaTf32Chain) {
  DissectionReport rep =
      dissect_entry(Architecture::ampere, "HMMA.1688.F32.TF32");
  EXPECT_EQ(rep.tree.kind, TreeKind::chain_of_fused);
  EXPECT_EQ(rep.tree.split, 4);
  expect_bits_all(rep.precision, 9, 24);
  expect_mode(rep.c_rounding, RoundingMode::RZ, false);
  expect_mode(rep.final_rounding, RoundingMode::RZ, false);
  EXPECT_EQ(rep.flush_c_in, Flag::no);
  EXPECT_EQ(rep.flush_ab_in, Flag::no);
  EXPECT_EQ(rep.flush_post_mul, Flag::no);
  EXPECT_EQ(rep.flush_post_add, Flag::no);
  EXPECT_EQ(rep.neg_zero_out, Flag::no);
  EXPECT_EQ(rep.product_overflow, Flag::no);
  EXPECT_EQ(rep.intermediate_overflow, Flag::yes);
  EXPECT_EQ(rep.nan_from_zero_times_inf, Flag::yes);
  EXPECT_EQ(rep.nan_from_inf_minus_inf, Flag::yes);
  const double b = std::ldexp(1.0, 128);
  expect_edges(rep, f32_bits_from_double(b - std::ldexp(1.0, 115)),
               f32_bits_from_double(b - std::ldexp(2.0, 115)),
               f32_bits_from_double(b - std::ldexp(3.0, 115)),
               f32_bits_from_double(b - std::ldexp(7.0, 115)),
               f32_bits_from_double(b - std::ldexp(6.0, 115)),
               f32_bits_from_double(b - std::ldexp(5.0, 115)));
}

TEST(CatalogDissect, AdaQmmaFp8Chain) {
  DissectionReport rep =
      dissect_entry(Architecture::ada_lovelace, "QMMA.16832.F32.E4M3.E4M3");
  EXPECT_EQ(rep.tree.kind, TreeKind::chain_of_fused);
  EXPECT_EQ(rep.tree.split, 16);
  expect_bits_all(rep.precision, 33, 13);
  expect_mode(rep.c_rounding, RoundingMode::RZ, false);
  expect_mode(rep.final_rounding, RoundingMode::RZ, false);
  EXPECT_EQ(rep.flush_c_in, Flag::yes);
  EXPECT_EQ(rep.flush_ab_in, Flag::no);
  EXPECT_EQ(rep.flush_post_mul, Flag::untested);
  EXPECT_EQ(rep.flush_post_add, Flag::untested);
  EXPECT_EQ(rep.neg_zero_out, Flag::no);
  EXPECT_EQ(rep.product_overflow, Flag::no);
  EXPECT_EQ(rep.intermediate_overflow, Flag::untested);
  EXPECT_EQ(rep.nan_from_zero_times_inf, Flag::untested);
  EXPECT_EQ(rep.nan_from_inf_minus_inf, Flag::untested);
  expect_edges(rep, f32_bits(504.0f), f32_bits(496.0f), f32_bits(488.0f),
               f32_bits(456.0f), f32_bits(464.0f), f32_bits(472.0f));
}

TEST(CatalogDissect, Cdna3RoundDownF16) {
  DissectionReport rep =
      dissect_entry(Architecture::cdna3, "v_mfma_f32_32x32x8_f16");
  EXPECT_EQ(rep.tree.kind, TreeKind::fused);
  EXPECT_EQ(rep.tree.arity, 9);
  expect_bits_all(rep.precision, 9, 24);
  expect_mode(rep.c_rounding, RoundingMode::RD, false);
  expect_mode(rep.final_rounding, RoundingMode::RNE, true);
  EXPECT_EQ(rep.c_deep_drop, Flag::no);
  EXPECT_EQ(rep.flush_c_in, Flag::yes);
  EXPECT_EQ(rep.flush_ab_in, Flag::no);
  EXPECT_EQ(rep.product_overflow, Flag::no);
  EXPECT_EQ(rep.nan_from_zero_times_inf, Flag::yes);
  EXPECT_EQ(rep.nan_from_inf_minus_inf, Flag::yes);
  expect_edges(rep, f32_bits(65528.0f), f32_bits(65520.0f),
               f32_bits(65512.0f), f32_bits(65480.0f), f32_bits(65488.0f),
               f32_bits(65496.0f));
}

TEST(CatalogDissect, Cdna3RoundDownXf32) {
  DissectionReport rep =
      dissect_entry(Architecture::cdna3, "v_mfma_f32_32x32x4_xf32");
  EXPECT_EQ(rep.tree.kind, TreeKind::fused);
  EXPECT_EQ(rep.tree.arity, 5);
  expect_bits_all(rep.precision, 5, 24);
  expect_mode(rep.c_rounding, RoundingMode::RD, false);
  expect_mode(rep.final_rounding, RoundingMode::RNE, true);
  EXPECT_EQ(rep.c_deep_drop, Flag::no);
  EXPECT_EQ(rep.flush_c_in, Flag::no);
  EXPECT_EQ(rep.flush_post_mul, Flag::no);
  EXPECT_EQ(rep.flush_post_add, Flag::no);
  EXPECT_EQ(rep.product_overflow, Flag::yes);
  EXPECT_EQ(rep.intermediate_overflow, Flag::no);
  const double b = std::ldexp(1.0, 128);
  expect_edges(rep, f32_bits_from_double(b - std::ldexp(1.0, 115)),
               f32_bits_from_double(b - std::ldexp(2.0, 115)),
               f32_bits_from_double(b - std::ldexp(3.0, 115)),
               f32_bits_from_double(b - std::ldexp(7.0, 115)),
               f32_bits_from_double(b - std::ldexp(6.0, 115)),
               f32_bits_from_double(b - std::ldexp(5.0, 115)));
}

TEST(CatalogDissect, Cdna3ChainedRoundDownF16) {
  DissectionReport rep =
      dissect_entry(Architecture::cdna3, "v_mfma_f32_16x16x16_f16");
  EXPECT_EQ(rep.tree.kind, TreeKind::chain_of_fused);
  EXPECT_EQ(rep.tree.split, 8);
  expect_bits_all(rep.precision, 17, 24);
  expect_mode(rep.c_rounding, RoundingMode::RD, false);
  expect_mode(rep.final_rounding, RoundingMode::RNE, true);
  EXPECT_EQ(rep.c_deep_drop, Flag::no);
  EXPECT_EQ(rep.flush_c_in, Flag::yes);
  EXPECT_EQ(rep.intermediate_overflow, Flag::untested);
}

TEST(CatalogDissect, Cdna3Fp8ConditionalRoundDown) {
  DissectionReport rep =
      dissect_entry(Architecture::cdna3, "v_mfma_f32_32x32x16_fp8_fp8");
  EXPECT_EQ(rep.tree.kind, TreeKind::fused);
  EXPECT_EQ(rep.tree.arity, 17);
  expect_bits_all(rep.precision, 17, 24);
  // The carried term is rounded down only when it reaches deep below the
  // window; near the top it truncates. The directed probes alone see the
  // composite signature {0,0,-1,0}, resolved without a tie pass.
  ASSERT_TRUE(rep.c_rounding.known);
  EXPECT_EQ(rep.c_rounding.mode, RoundingMode::RD);
  EXPECT_FALSE(rep.c_rounding.ties_probed);
  EXPECT_EQ(rep.c_rounding.cells[0], 0);
  EXPECT_EQ(rep.c_rounding.cells[1], 0);
  EXPECT_EQ(rep.c_rounding.cells[2], -1);
  EXPECT_EQ(rep.c_rounding.cells[3], 0);
  EXPECT_EQ(rep.c_deep_drop, Flag::yes);
  expect_mode(rep.final_rounding, RoundingMode::RNE, true);
  EXPECT_EQ(rep.flush_c_in, Flag::yes);
  EXPECT_EQ(rep.flush_ab_in, Flag::no);
  EXPECT_EQ(rep.neg_zero_out, Flag::no);
  EXPECT_EQ(rep.product_overflow, Flag::no);
  EXPECT_EQ(rep.nan_from_zero_times_inf, Flag::untested);
  EXPECT_EQ(rep.nan_from_inf_minus_inf, Flag::untested);
  expect_edges(rep, f32_bits(252.0f), f32_bits(248.0f), f32_bits(244.0f),
               f32_bits(228.0f), f32_bits(232.0f), f32_bits(236.0f));
}

TEST(CatalogDissect, Cdna3Fp8ChainConditionalRoundDown) {
  DissectionReport rep =
      dissect_entry(Architecture::cdna3, "v_mfma_f32_16x16x32_fp8_fp8");
  EXPECT_EQ(rep.tree.kind, TreeKind::chain_of_fused);
  EXPECT_EQ(rep.tree.split, 16);
  expect_bits_all(rep.precision, 33, 24);
  ASSERT_TRUE(rep.c_rounding.known);
  EXPECT_EQ(rep.c_rounding.mode, RoundingMode::RD);
  EXPECT_FALSE(rep.c_rounding.ties_probed);
  EXPECT_EQ(rep.c_deep_drop, Flag::yes);
  expect_mode(rep.final_rounding, RoundingMode::RNE, true);
}

TEST(CatalogDissect, BlackwellScaledWideAccumulator) {
  DissectionReport rep = dissect_entry(Architecture::blackwell, "UTCOMMA");
  EXPECT_EQ(rep.tree.kind, TreeKind::fused);
  EXPECT_EQ(rep.tree.arity, 65);
  expect_bits_all(rep.precision, 65, 35);
  expect_mode(rep.c_rounding, RoundingMode::RZ, false);
  expect_mode(rep.final_rounding, RoundingMode::RZ, false);
  EXPECT_EQ(rep.c_deep_drop, Flag::untested);
  EXPECT_EQ(rep.flush_c_in, Flag::yes);
  EXPECT_EQ(rep.flush_ab_in, Flag::no);
  EXPECT_EQ(rep.neg_zero_out, Flag::no);
  EXPECT_EQ(rep.product_overflow, Flag::no);
  EXPECT_EQ(rep.nan_from_zero_times_inf, Flag::untested);
  EXPECT_EQ(rep.nan_from_inf_minus_inf, Flag::untested);
  expect_edges(rep, f32_bits(7.5f), f32_bits(7.0f), f32_bits(6.5f),
               f32_bits(4.5f), f32_bits(5.0f), f32_bits(5.5f));
}

TEST(CatalogDissect, BlackwellScaledNarrowScaleFormat) {
  DissectionReport rep = dissect_entry(Architecture::blackwell, "UTCOMMA.4X");
  EXPECT_EQ(rep.tree.kind, TreeKind::fused);
  EXPECT_EQ(rep.tree.arity, 65);
  expect_bits_all(rep.precision, 65, 35);
  expect_mode(rep.c_rounding, RoundingMode::RZ, false);
  expect_mode(rep.final_rounding, RoundingMode::RZ, false);
}

TEST(CatalogDissect, BlackwellSingleBlockScaledFp8) {
  DissectionReport rep =
      dissect_entry(Architecture::blackwell, "UTCQMMA.SF.F32.E4M3.E4M3.E8");
  EXPECT_EQ(rep.tree.kind, TreeKind::fused);
  EXPECT_EQ(rep.tree.arity, 33);
  expect_bits_all(rep.precision, 33, 25);
  expect_mode(rep.c_rounding, RoundingMode::RZ, false);
  expect_mode(rep.final_rounding, RoundingMode::RZ, false);
  EXPECT_EQ(rep.flush_c_in, Flag::yes);
  EXPECT_EQ(rep.flush_ab_in, Flag::no);
  EXPECT_EQ(rep.neg_zero_out, Flag::no);
  EXPECT_EQ(rep.product_overflow, Flag::no);
  EXPECT_EQ(rep.nan_from_zero_times_inf, Flag::untested);
  expect_edges(rep, f32_bits(504.0f), f32_bits(496.0f), f32_bits(488.0f),
               f32_bits(456.0f), f32_bits(464.0f), f32_bits(472.0f));
}

TEST(CatalogDissect, BlackwellSingleBlockScaledFp4) {
  DissectionReport rep =
      dissect_entry(Architecture::blackwell, "UTCQMMA.SF.F32.E2M1.E2M1.E8");
  EXPECT_EQ(rep.tree.kind, TreeKind::fused);
  EXPECT_EQ(rep.tree.arity, 33);
  ASSERT_EQ(rep.precision.bits.size(), 33u);
  ASSERT_EQ(rep.precision.saturated.size(), 33u);
  for (size_t i = 0; i < 32; ++i) {
    EXPECT_EQ(rep.precision.bits[i], 6) << "position " << i;
    EXPECT_EQ(rep.precision.saturated[i], 1) << "position " << i;
  }
  EXPECT_EQ(rep.precision.bits[32], 25);
  EXPECT_EQ(rep.precision.saturated[32], 0);
  expect_mode(rep.c_rounding, RoundingMode::RZ, false);
  // With four-bit factors every probe fraction the final-rounding battery
  // could use collides with the narrow product range, so it reports unknown
  // rather than guessing.
  expect_unknown(rep.final_rounding);
  EXPECT_EQ(rep.flush_c_in, Flag::yes);
  EXPECT_EQ(rep.flush_ab_in, Flag::no);
  expect_edges(rep, f32_bits(7.5f), f32_bits(7.0f), f32_bits(6.5f),
               f32_bits(4.5f), f32_bits(5.0f), f32_bits(5.5f));
}

// ---------------------------------------------------------------------------
// 3. Fallback behavior for a device no matcher covers.
// ---------------------------------------------------------------------------

// Accumulates products from the highest index down and adds c last; no
// catalogued ordering matches those absorption counts.
Dut reversed_accumulator() {
  Dut dut;
  dut.info.k = 4;
  dut.info.a_fmt = FormatId::fp32;
  dut.info.b_fmt = FormatId::fp32;
  dut.info.c_fmt = FormatId::fp32;
  dut.info.d_fmt = FormatId::fp32;
  dut.info.scale_block = 0;
  dut.fn = [](uint64_t c, std::span<const uint64_t> a,
              std::span<const uint64_t> b, std::span<const uint64_t>,
              std::span<const uint64_t>) -> uint64_t {
    float r = 0.0f;
    for (int i = 3; i >= 0; --i) {
      r += std::bit_cast<float>(static_cast<uint32_t>(a[i])) *
           std::bit_cast<float>(static_cast<uint32_t>(b[i]));
    }
    r += std::bit_cast<float>(static_cast<uint32_t>(c));
    return std::bit_cast<uint32_t>(r);
  };
  return dut;
}

TEST(Unclassified, ReversedOrderFallsThrough) {
  DissectionReport rep = dissect(reversed_accumulator());
  EXPECT_EQ(rep.tree.kind, TreeKind::unclassified);
  ASSERT_EQ(rep.tree.priority.size(), 5u);
  // The raw probe matrix is preserved for manual analysis.
  EXPECT_EQ(rep.tree.priority[0][1], 1);
  EXPECT_EQ(rep.tree.priority[2][3], 3);
  EXPECT_EQ(rep.tree.priority[0][0], -1);
  // Downstream probes need a classified tree and report nothing.
  EXPECT_TRUE(rep.precision.bits.empty());
  expect_unknown(rep.c_rounding);
  expect_unknown(rep.final_rounding);
  EXPECT_EQ(rep.c_deep_drop, Flag::untested);
}

TEST(ReportText, MentionsTreeAndPrecision) {
  DissectionReport rep = dissect_entry(Architecture::volta, "HMMA.884.F32.F32");
  std::string text = report_to_text(rep);
  EXPECT_NE(text.find("fused"), std::string::npos);
  EXPECT_NE(text.find("23"), std::string::npos);
  EXPECT_NE(text.find("RZ"), std::string::npos);
}

// Frozen full-text reports for one representative of each datapath family.
// A diff here means observable dissection behavior changed; regenerate the
// files deliberately if the change is intended.
TEST(ReportText, GoldenReports) {
  struct Row {
    Architecture arch;
    std::string_view name;
    std::string_view file;
  };
  const Row rows[] = {
      {Architecture::volta, "HMMA.884.F32.F32", "volta_hmma_884_f32_f32.txt"},
      {Architecture::ampere, "DMMA.884", "ampere_dmma_884.txt"},
      {Architecture::cdna2, "v_mfma_f32_32x32x8_f16",
       "cdna2_mfma_32x32x8_f16.txt"},
      {Architecture::cdna3, "v_mfma_f32_32x32x16_fp8_fp8",
       "cdna3_mfma_32x32x16_fp8.txt"},
      {Architecture::blackwell, "UTCOMMA", "blackwell_utcomma.txt"},
      {Architecture::blackwell, "UTCQMMA.SF.F32.E2M1.E2M1.E8",
       "blackwell_utcqmma_e2m1.txt"},
  };
  for (const Row& r : rows) {
    std::string path = std::string(TCMM_SOURCE_DIR) + "/tests/golden/" +
                       std::string(r.file);
    std::ifstream is(path);
    ASSERT_TRUE(is.good()) << "missing golden file " << path;
    std::stringstream buf;
    buf << is.rdbuf();
    DissectionReport rep = dissect_entry(r.arch, r.name);
    EXPECT_EQ(report_to_text(rep), buf.str()) << r.file;
  }
}

}  // namespace
