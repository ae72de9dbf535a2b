#pragma once
// Catalog of warp- and tile-level matrix multiply-add instructions: which
// GPU generations provide them, the operand formats and tile shapes they
// take, and the dot-product arithmetic each one routes to.
//
// The catalog is the single source of truth pairing instruction names with
// AlgorithmParams.  `dot_add(desc, ...)` computes one output element under a
// descriptor; `matmul(desc, ...)` applies it element-wise to whole tiles.

#include <algorithm>
#include <array>
#include <cassert>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tcmm/algorithms.hpp"
#include "tcmm/formats.hpp"

namespace tcmm {

// ---------------------------------------------------------------------------
// Architectures

enum class Architecture : uint8_t {
  volta,
  turing,
  ampere,
  ada_lovelace,
  hopper,
  blackwell,
  rtx_blackwell,
  cdna2,
  cdna3,
};

inline constexpr int kNumArchitectures = 9;

inline constexpr Architecture kAllArchitectures[kNumArchitectures] = {
    Architecture::volta,     Architecture::turing,
    Architecture::ampere,    Architecture::ada_lovelace,
    Architecture::hopper,    Architecture::blackwell,
    Architecture::rtx_blackwell, Architecture::cdna2,
    Architecture::cdna3,
};

inline const char* architecture_name(Architecture a) {
  switch (a) {
    case Architecture::volta: return "Volta";
    case Architecture::turing: return "Turing";
    case Architecture::ampere: return "Ampere";
    case Architecture::ada_lovelace: return "AdaLovelace";
    case Architecture::hopper: return "Hopper";
    case Architecture::blackwell: return "Blackwell";
    case Architecture::rtx_blackwell: return "RTXBlackwell";
    case Architecture::cdna2: return "CDNA2";
    case Architecture::cdna3: return "CDNA3";
  }
  assert(!"unreachable");
  return "?";
}

inline bool parse_architecture_name(std::string_view s, Architecture* out) {
  for (Architecture a : kAllArchitectures) {
    if (s == architecture_name(a)) {
      *out = a;
      return true;
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// Instruction descriptors

struct InstructionDescriptor {
  Architecture arch{};
  std::string name;

  // Output tile is m x n and the reduction depth is k.  m == n == 0 marks
  // the tile-flexible instructions whose output shape is chosen per call;
  // k is fixed for every instruction.
  int m = 0;
  int n = 0;
  int k = 0;

  FormatId a_fmt = FormatId::fp16;
  FormatId b_fmt = FormatId::fp16;
  FormatId c_fmt = FormatId::fp32;
  FormatId d_fmt = FormatId::fp32;

  // Arithmetic of one output element.  Only the free parameters of the
  // algorithm are populated; fields an algorithm fixes internally are zero.
  AlgorithmParams algorithm{};

  // Block-scaled variants carry one scale factor per `scale_block`
  // consecutive elements of the reduction axis; 0 = unscaled.
  int scale_block = 0;
  FormatId sf_fmt = FormatId::ue8m0;
};

namespace detail {

inline AlgorithmParams make_params(Algorithm alg, int f = 0, int group = 0) {
  AlgorithmParams p;
  p.algorithm = alg;
  if (alg == Algorithm::fda || alg == Algorithm::cofda) {
    p.f_bits = f;
    p.round_bit = (f == 13) ? 13 : 23;
  } else {
    p.f_bits = 0;
    p.round_bit = 0;
  }
  p.group = (alg == Algorithm::gps) ? group : 0;
  return p;
}

inline InstructionDescriptor inst(Architecture arch, std::string name, int m,
                                  int n, int k, FormatId a, FormatId b,
                                  FormatId c, FormatId d, AlgorithmParams prm,
                                  int scale_block = 0,
                                  FormatId sf = FormatId::ue8m0) {
  InstructionDescriptor e;
  e.arch = arch;
  e.name = std::move(name);
  e.m = m;
  e.n = n;
  e.k = k;
  e.a_fmt = a;
  e.b_fmt = b;
  e.c_fmt = c;
  e.d_fmt = d;
  e.algorithm = prm;
  e.algorithm.out_fmt = d;
  e.scale_block = scale_block;
  e.sf_fmt = sf;
  return e;
}

// Adds one entry; an instruction reachable from two table rows (alias rows
// or overlapping type expansions) is kept once, and the duplicates must
// agree on every field.
inline void add_entry(std::vector<InstructionDescriptor>* v,
                      InstructionDescriptor e) {
  for (const InstructionDescriptor& prev : *v) {
    if (prev.arch == e.arch && prev.name == e.name) {
      assert(prev.m == e.m && prev.n == e.n && prev.k == e.k);
      assert(prev.a_fmt == e.a_fmt && prev.b_fmt == e.b_fmt &&
             prev.c_fmt == e.c_fmt && prev.d_fmt == e.d_fmt);
      assert(prev.algorithm.algorithm == e.algorithm.algorithm &&
             prev.algorithm.f_bits == e.algorithm.f_bits &&
             prev.algorithm.group == e.algorithm.group);
      assert(prev.scale_block == e.scale_block && prev.sf_fmt == e.sf_fmt);
      return;
    }
  }
  v->push_back(std::move(e));
}

struct ArchAlg {
  Architecture arch;
  Algorithm alg;
  int f;  // alignment fractional bits when the algorithm has them free
};

struct TypeTok {
  const char* tok;
  FormatId fmt;
};

inline void build_nvidia(std::vector<InstructionDescriptor>* v) {
  using A = Architecture;
  using G = Algorithm;
  using Fm = FormatId;

  static constexpr TypeTok kF8[] = {
      {"E4M3", Fm::e4m3fn},
      {"E5M2", Fm::e5m2},
  };
  static constexpr TypeTok kF8F6F4[] = {
      {"E4M3", Fm::e4m3fn}, {"E5M2", Fm::e5m2}, {"E2M3", Fm::e2m3},
      {"E3M2", Fm::e3m2},   {"E2M1", Fm::e2m1},
  };
  static constexpr TypeTok kCd[] = {
      {"F32", Fm::fp32},
      {"F16", Fm::fp16},
  };

  // First-generation 8x8x4 FP16 instructions.  The hardware op runs four
  // such tiles concurrently; element arithmetic is identical, so the
  // catalog models one logical 8x8x4 tile.
  for (ArchAlg t : {ArchAlg{A::volta, G::fda, 23},
                    ArchAlg{A::turing, G::fda, 24}}) {
    AlgorithmParams p = make_params(t.alg, t.f);
    add_entry(v, inst(t.arch, "HMMA.884.F32.F32", 8, 8, 4, Fm::fp16, Fm::fp16,
                      Fm::fp32, Fm::fp32, p));
    add_entry(v, inst(t.arch, "HMMA.884.F32.F16", 8, 8, 4, Fm::fp16, Fm::fp16,
                      Fm::fp16, Fm::fp32, p));
    add_entry(v, inst(t.arch, "HMMA.884.F16.F16", 8, 8, 4, Fm::fp16, Fm::fp16,
                      Fm::fp16, Fm::fp16, p));
  }

  // 16x8x8 FP16 instructions (every generation from the second on).
  for (ArchAlg t : {ArchAlg{A::turing, G::fda, 24},
                    ArchAlg{A::ampere, G::fda, 24},
                    ArchAlg{A::ada_lovelace, G::fda, 24},
                    ArchAlg{A::hopper, G::fda, 25},
                    ArchAlg{A::blackwell, G::fda, 25},
                    ArchAlg{A::rtx_blackwell, G::fda, 25}}) {
    AlgorithmParams p = make_params(t.alg, t.f);
    add_entry(v, inst(t.arch, "HMMA.1688.F32", 16, 8, 8, Fm::fp16, Fm::fp16,
                      Fm::fp32, Fm::fp32, p));
    add_entry(v, inst(t.arch, "HMMA.1688.F16", 16, 8, 8, Fm::fp16, Fm::fp16,
                      Fm::fp16, Fm::fp16, p));
  }

  // Double-precision 8x8x4, written two ways in vendor tooling.
  for (A a : {A::ampere, A::ada_lovelace, A::hopper, A::blackwell,
              A::rtx_blackwell}) {
    for (const char* nm : {"DMMA.884", "DMMA.8x8x4"}) {
      add_entry(v, inst(a, nm, 8, 8, 4, Fm::fp64, Fm::fp64, Fm::fp64,
                        Fm::fp64, make_params(G::sfma)));
    }
  }

  // Full-depth TF32/FP16/BF16 instructions.  Generations whose dot unit is
  // half as deep as the instruction chain two passes; later generations run
  // one fused pass.
  for (ArchAlg t : {ArchAlg{A::ampere, G::cofda, 24},
                    ArchAlg{A::ada_lovelace, G::cofda, 24},
                    ArchAlg{A::hopper, G::fda, 25},
                    ArchAlg{A::blackwell, G::fda, 25},
                    ArchAlg{A::rtx_blackwell, G::fda, 25}}) {
    AlgorithmParams p = make_params(t.alg, t.f);
    add_entry(v, inst(t.arch, "HMMA.1688.F32.TF32", 16, 8, 8, Fm::tf32,
                      Fm::tf32, Fm::fp32, Fm::fp32, p));
    add_entry(v, inst(t.arch, "HMMA.16816.F32", 16, 8, 16, Fm::fp16, Fm::fp16,
                      Fm::fp32, Fm::fp32, p));
    add_entry(v, inst(t.arch, "HMMA.16816.F16", 16, 8, 16, Fm::fp16, Fm::fp16,
                      Fm::fp16, Fm::fp16, p));
    add_entry(v, inst(t.arch, "HMMA.16816.F32.BF16", 16, 8, 16, Fm::bf16,
                      Fm::bf16, Fm::fp32, Fm::fp32, p));
  }

  // Half-depth TF32/BF16 variants: single fused pass on every generation.
  for (ArchAlg t : {ArchAlg{A::ampere, G::fda, 24},
                    ArchAlg{A::ada_lovelace, G::fda, 24},
                    ArchAlg{A::hopper, G::fda, 25},
                    ArchAlg{A::blackwell, G::fda, 25},
                    ArchAlg{A::rtx_blackwell, G::fda, 25}}) {
    AlgorithmParams p = make_params(t.alg, t.f);
    add_entry(v, inst(t.arch, "HMMA.1684.F32.TF32", 16, 8, 4, Fm::tf32,
                      Fm::tf32, Fm::fp32, Fm::fp32, p));
    add_entry(v, inst(t.arch, "HMMA.1688.F32.BF16", 16, 8, 8, Fm::bf16,
                      Fm::bf16, Fm::fp32, Fm::fp32, p));
  }

  // FP8 16x8x32 and 16x8x16.
  for (ArchAlg t : {ArchAlg{A::ada_lovelace, G::cofda, 13},
                    ArchAlg{A::rtx_blackwell, G::fda, 25}}) {
    AlgorithmParams p = make_params(t.alg, t.f);
    for (const TypeTok& cd : kCd) {
      for (const TypeTok& at : kF8) {
        for (const TypeTok& bt : kF8) {
          std::string nm = std::string("QMMA.16832.") + cd.tok + "." +
                           at.tok + "." + bt.tok;
          add_entry(v, inst(t.arch, std::move(nm), 16, 8, 32, at.fmt, bt.fmt,
                            cd.fmt, cd.fmt, p));
        }
      }
    }
  }
  for (ArchAlg t : {ArchAlg{A::ada_lovelace, G::fda, 13},
                    ArchAlg{A::rtx_blackwell, G::fda, 25}}) {
    AlgorithmParams p = make_params(t.alg, t.f);
    for (const TypeTok& cd : kCd) {
      for (const TypeTok& at : kF8) {
        for (const TypeTok& bt : kF8) {
          std::string nm = std::string("QMMA.16816.") + cd.tok + "." +
                           at.tok + "." + bt.tok;
          add_entry(v, inst(t.arch, std::move(nm), 16, 8, 16, at.fmt, bt.fmt,
                            cd.fmt, cd.fmt, p));
        }
      }
    }
  }

  // Deeper double-precision tiles.
  struct NameDepth {
    const char* name;
    int k;
  };
  static constexpr NameDepth kDeepF64[] = {
      {"DMMA.16x8x16", 16}, {"DMMA.16x8x8", 8}, {"DMMA.16x8x4", 4}};
  for (const NameDepth& nd : kDeepF64) {
    add_entry(v, inst(A::hopper, nd.name, 16, 8, nd.k, Fm::fp64, Fm::fp64,
                      Fm::fp64, Fm::fp64, make_params(G::sfma)));
  }

  // Warp-group 64x8 instructions.
  {
    AlgorithmParams p = make_params(G::fda, 25);
    add_entry(v, inst(A::hopper, "HGMMA.64x8x8.F32.TF32", 64, 8, 8, Fm::tf32,
                      Fm::tf32, Fm::fp32, Fm::fp32, p));
    add_entry(v, inst(A::hopper, "HGMMA.64x8x16.F32", 64, 8, 16, Fm::fp16,
                      Fm::fp16, Fm::fp32, Fm::fp32, p));
    add_entry(v, inst(A::hopper, "HGMMA.64x8x16.F16", 64, 8, 16, Fm::fp16,
                      Fm::fp16, Fm::fp16, Fm::fp16, p));
    add_entry(v, inst(A::hopper, "HGMMA.64x8x16.F32.BF16", 64, 8, 16,
                      Fm::bf16, Fm::bf16, Fm::fp32, Fm::fp32, p));
  }
  {
    AlgorithmParams p = make_params(G::fda, 13);
    for (const TypeTok& cd : kCd) {
      for (const TypeTok& at : kF8) {
        for (const TypeTok& bt : kF8) {
          std::string nm = std::string("QGMMA.64x8x32.") + cd.tok + "." +
                           at.tok + "." + bt.tok;
          add_entry(v, inst(A::hopper, std::move(nm), 64, 8, 32, at.fmt,
                            bt.fmt, cd.fmt, cd.fmt, p));
        }
      }
    }
  }

  // Tile-flexible instructions: the caller picks the output shape, the
  // reduction depth is fixed by the operand type.
  {
    AlgorithmParams p = make_params(G::fda, 25);
    add_entry(v, inst(A::blackwell, "UTCHMMA.F32.TF32", 0, 0, 8, Fm::tf32,
                      Fm::tf32, Fm::fp32, Fm::fp32, p));
    add_entry(v, inst(A::blackwell, "UTCHMMA.F32", 0, 0, 16, Fm::fp16,
                      Fm::fp16, Fm::fp32, Fm::fp32, p));
    add_entry(v, inst(A::blackwell, "UTCHMMA.F16", 0, 0, 16, Fm::fp16,
                      Fm::fp16, Fm::fp16, Fm::fp16, p));
    add_entry(v, inst(A::blackwell, "UTCHMMA.F32.BF16", 0, 0, 16, Fm::bf16,
                      Fm::bf16, Fm::fp32, Fm::fp32, p));
    for (const TypeTok& cd : kCd) {
      for (const TypeTok& at : kF8F6F4) {
        for (const TypeTok& bt : kF8F6F4) {
          std::string nm = std::string("UTCQMMA.") + cd.tok + "." + at.tok +
                           "." + bt.tok;
          add_entry(v, inst(A::blackwell, std::move(nm), 0, 0, 32, at.fmt,
                            bt.fmt, cd.fmt, cd.fmt, p));
        }
      }
    }
    for (const TypeTok& at : kF8F6F4) {
      for (const TypeTok& bt : kF8F6F4) {
        std::string nm = std::string("UTCQMMA.SF.F32.") + at.tok + "." +
                         bt.tok + ".E8";
        add_entry(v, inst(A::blackwell, std::move(nm), 0, 0, 32, at.fmt,
                          bt.fmt, Fm::fp32, Fm::fp32, p, 32, Fm::ue8m0));
      }
    }
  }
  add_entry(v, inst(A::blackwell, "UTCOMMA", 0, 0, 64, Fm::e2m1, Fm::e2m1,
                    Fm::fp32, Fm::fp32, make_params(G::gdfs), 32,
                    Fm::ue8m0));
  add_entry(v, inst(A::blackwell, "UTCOMMA.4X", 0, 0, 64, Fm::e2m1, Fm::e2m1,
                    Fm::fp32, Fm::fp32, make_params(G::gdfs), 16,
                    Fm::ue4m3));

  // FP8/FP6/FP4 16x8x32, plus the block-scaled form.  The pure-FP8 names
  // also appear in the FP8 expansion above; the duplicates agree and are
  // kept once.
  {
    AlgorithmParams p = make_params(G::fda, 25);
    for (const TypeTok& cd : kCd) {
      for (const TypeTok& at : kF8F6F4) {
        for (const TypeTok& bt : kF8F6F4) {
          std::string nm = std::string("QMMA.16832.") + cd.tok + "." +
                           at.tok + "." + bt.tok;
          add_entry(v, inst(A::rtx_blackwell, std::move(nm), 16, 8, 32,
                            at.fmt, bt.fmt, cd.fmt, cd.fmt, p));
        }
      }
    }
    for (const TypeTok& at : kF8F6F4) {
      for (const TypeTok& bt : kF8F6F4) {
        std::string nm = std::string("QMMA.SF.16832.F32.") + at.tok + "." +
                         bt.tok + ".E8";
        add_entry(v, inst(A::rtx_blackwell, std::move(nm), 16, 8, 32, at.fmt,
                          bt.fmt, Fm::fp32, Fm::fp32, p, 32, Fm::ue8m0));
      }
    }
  }

  // FP4 16x8x64 with mandatory block scales: power-of-two scale blocks of
  // 32, or fractional-capable scale blocks of 16.
  add_entry(v, inst(A::rtx_blackwell, "OMMA.SF.16864.F32.E2M1.E2M1.E8", 16,
                    8, 64, Fm::e2m1, Fm::e2m1, Fm::fp32, Fm::fp32,
                    make_params(G::gdfs), 32, Fm::ue8m0));
  add_entry(v, inst(A::rtx_blackwell, "OMMA.SF.16864.F32.E2M1.E2M1.UE4M3.4X",
                    16, 8, 64, Fm::e2m1, Fm::e2m1, Fm::fp32, Fm::fp32,
                    make_params(G::gdfs), 16, Fm::ue4m3));
}

inline void build_amd(std::vector<InstructionDescriptor>* v) {
  using A = Architecture;
  using G = Algorithm;
  using Fm = FormatId;

  struct Shape {
    const char* name;
    int m, n, k;
  };

  // Serial-FMA instructions, present on both generations.
  static constexpr Shape kSerialF64[] = {
      {"v_mfma_f64_16x16x4_f64", 16, 16, 4},
      {"v_mfma_f64_4x4x4_4b_f64", 4, 4, 4},
  };
  static constexpr Shape kSerialF32[] = {
      {"v_mfma_f32_32x32x1_2b_f32", 32, 32, 1},
      {"v_mfma_f32_16x16x1_4b_f32", 16, 16, 1},
      {"v_mfma_f32_4x4x1_16b_f32", 4, 4, 1},
      {"v_mfma_f32_32x32x2_f32", 32, 32, 2},
      {"v_mfma_f32_16x16x4_f32", 16, 16, 4},
  };
  for (A a : {A::cdna2, A::cdna3}) {
    for (const Shape& s : kSerialF64) {
      add_entry(v, inst(a, s.name, s.m, s.n, s.k, Fm::fp64, Fm::fp64,
                        Fm::fp64, Fm::fp64, make_params(G::sfma)));
    }
    for (const Shape& s : kSerialF32) {
      add_entry(v, inst(a, s.name, s.m, s.n, s.k, Fm::fp32, Fm::fp32,
                        Fm::fp32, Fm::fp32, make_params(G::sfma)));
    }
  }

  // Reduced-precision FP32 input (19 significant bits), third generation
  // only.  The deep shape chains two passes of the round-down unit.
  add_entry(v, inst(A::cdna3, "v_mfma_f32_16x16x8_xf32", 16, 16, 8, Fm::tf32,
                    Fm::tf32, Fm::fp32, Fm::fp32,
                    make_params(G::cofdrda)));
  add_entry(v, inst(A::cdna3, "v_mfma_f32_32x32x4_xf32", 32, 32, 4, Fm::tf32,
                    Fm::tf32, Fm::fp32, Fm::fp32, make_params(G::fdrda)));

  // FP16 inputs: grouped pairwise FP32 sums on the second generation, the
  // round-down dot unit on the third.
  static constexpr Shape kF16Flat[] = {
      {"v_mfma_f32_32x32x4_2b_f16", 32, 32, 4},
      {"v_mfma_f32_16x16x4_4b_f16", 16, 16, 4},
      {"v_mfma_f32_4x4x4_16b_f16", 4, 4, 4},
      {"v_mfma_f32_32x32x8_f16", 32, 32, 8},
  };
  for (const Shape& s : kF16Flat) {
    add_entry(v, inst(A::cdna2, s.name, s.m, s.n, s.k, Fm::fp16, Fm::fp16,
                      Fm::fp32, Fm::fp32, make_params(G::gps, 0, 4)));
    add_entry(v, inst(A::cdna3, s.name, s.m, s.n, s.k, Fm::fp16, Fm::fp16,
                      Fm::fp32, Fm::fp32, make_params(G::fdrda)));
  }
  add_entry(v, inst(A::cdna2, "v_mfma_f32_16x16x16_f16", 16, 16, 16,
                    Fm::fp16, Fm::fp16, Fm::fp32, Fm::fp32,
                    make_params(G::gps, 0, 4)));
  add_entry(v, inst(A::cdna3, "v_mfma_f32_16x16x16_f16", 16, 16, 16,
                    Fm::fp16, Fm::fp16, Fm::fp32, Fm::fp32,
                    make_params(G::cofdrda)));

  // First-wave BF16 names, second generation only, pair-at-a-time sums.
  static constexpr Shape kBf16Legacy[] = {
      {"v_mfma_f32_32x32x2bf16", 32, 32, 2},
      {"v_mfma_f32_16x16x2bf16", 16, 16, 2},
      {"v_mfma_f32_4x4x2bf16", 4, 4, 2},
      {"v_mfma_f32_32x32x4bf16", 32, 32, 4},
      {"v_mfma_f32_16x16x8bf16", 16, 16, 8},
  };
  for (const Shape& s : kBf16Legacy) {
    add_entry(v, inst(A::cdna2, s.name, s.m, s.n, s.k, Fm::bf16, Fm::bf16,
                      Fm::fp32, Fm::fp32, make_params(G::gps, 0, 2)));
  }

  // Deeper BF16 shapes (named *_1k in second-generation tooling), grouped
  // four at a time there and run on the round-down dot unit afterwards.
  static constexpr Shape kBf16Flat[] = {
      {"v_mfma_f32_32x32x4_2b_bf16", 32, 32, 4},
      {"v_mfma_f32_16x16x4_4b_bf16", 16, 16, 4},
      {"v_mfma_f32_4x4x4_16b_bf16", 4, 4, 4},
      {"v_mfma_f32_32x32x8_bf16", 32, 32, 8},
  };
  for (const Shape& s : kBf16Flat) {
    add_entry(v, inst(A::cdna2, s.name, s.m, s.n, s.k, Fm::bf16, Fm::bf16,
                      Fm::fp32, Fm::fp32, make_params(G::gps, 0, 4)));
    add_entry(v, inst(A::cdna3, s.name, s.m, s.n, s.k, Fm::bf16, Fm::bf16,
                      Fm::fp32, Fm::fp32, make_params(G::fdrda)));
  }
  add_entry(v, inst(A::cdna2, "v_mfma_f32_16x16x16_bf16", 16, 16, 16,
                    Fm::bf16, Fm::bf16, Fm::fp32, Fm::fp32,
                    make_params(G::gps, 0, 4)));
  add_entry(v, inst(A::cdna3, "v_mfma_f32_16x16x16_bf16", 16, 16, 16,
                    Fm::bf16, Fm::bf16, Fm::fp32, Fm::fp32,
                    make_params(G::cofdrda)));

  // FP8 inputs, third generation only.  bf8 is the 5-exponent-bit flavor,
  // fp8 the 4-exponent-bit one; both use the all-zero-significand NaN
  // encoding without infinities.  The deep shape chains two passes.
  static constexpr TypeTok kAmdF8[] = {
      {"bf8", Fm::e5m2fnuz},
      {"fp8", Fm::e4m3fnuz},
  };
  for (const TypeTok& at : kAmdF8) {
    for (const TypeTok& bt : kAmdF8) {
      std::string deep = std::string("v_mfma_f32_16x16x32_") + at.tok + "_" +
                         bt.tok;
      add_entry(v, inst(A::cdna3, std::move(deep), 16, 16, 32, at.fmt,
                        bt.fmt, Fm::fp32, Fm::fp32,
                        make_params(G::cogfdrda)));
      std::string wide = std::string("v_mfma_f32_32x32x16_") + at.tok + "_" +
                         bt.tok;
      add_entry(v, inst(A::cdna3, std::move(wide), 32, 32, 16, at.fmt,
                        bt.fmt, Fm::fp32, Fm::fp32,
                        make_params(G::gfdrda)));
    }
  }
}

inline std::vector<InstructionDescriptor> build_catalog() {
  std::vector<InstructionDescriptor> v;
  build_nvidia(&v);
  build_amd(&v);
  return v;
}

inline int edit_distance(std::string_view a, std::string_view b) {
  std::vector<int> row(b.size() + 1);
  for (size_t j = 0; j <= b.size(); ++j) row[j] = static_cast<int>(j);
  for (size_t i = 1; i <= a.size(); ++i) {
    int diag = row[0];
    row[0] = static_cast<int>(i);
    for (size_t j = 1; j <= b.size(); ++j) {
      int subst = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
      diag = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, subst});
    }
  }
  return row[b.size()];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Catalog

class Catalog {
 public:
  static const Catalog& instance() {
    static const Catalog c;
    return c;
  }

  std::span<const InstructionDescriptor> entries() const { return entries_; }

  const InstructionDescriptor* find(Architecture arch,
                                    std::string_view name) const {
    const auto& m = index_[static_cast<size_t>(arch)];
    auto it = m.find(name);
    return it == m.end() ? nullptr : &entries_[it->second];
  }

  struct Lookup {
    const InstructionDescriptor* desc = nullptr;
    std::string suggestion;  // nearest catalogued name when desc == nullptr
  };

  Lookup lookup(Architecture arch, std::string_view name) const {
    Lookup r;
    r.desc = find(arch, name);
    if (r.desc) return r;
    int best = std::numeric_limits<int>::max();
    for (const auto& [nm, idx] : index_[static_cast<size_t>(arch)]) {
      int d = detail::edit_distance(name, nm);
      if (d < best || (d == best && nm < r.suggestion)) {
        best = d;
        r.suggestion = nm;
      }
    }
    return r;
  }

  std::vector<const InstructionDescriptor*> for_architecture(
      Architecture arch) const {
    std::vector<const InstructionDescriptor*> out;
    for (const InstructionDescriptor& e : entries_)
      if (e.arch == arch) out.push_back(&e);
    return out;
  }

 private:
  Catalog() : entries_(detail::build_catalog()) {
    for (size_t i = 0; i < entries_.size(); ++i) {
      index_[static_cast<size_t>(entries_[i].arch)].emplace(entries_[i].name,
                                                            i);
    }
  }

  std::vector<InstructionDescriptor> entries_;
  std::array<std::map<std::string, size_t, std::less<>>, kNumArchitectures>
      index_;
};

inline const Catalog& catalog() { return Catalog::instance(); }

// ---------------------------------------------------------------------------
// Running instructions

namespace detail {

[[noreturn]] inline void operand_error(const std::string& msg) {
  throw std::invalid_argument(msg);
}

inline void check_count(const char* operand, size_t got, size_t want) {
  if (got != want) {
    std::ostringstream os;
    os << "operand " << operand << ": expected " << want << " elements, got "
       << got;
    operand_error(os.str());
  }
}

}  // namespace detail

// Computes one output element under the descriptor.  Operand lengths must
// match the instruction's reduction depth and scale-block layout; violations
// throw std::invalid_argument naming the offending operand.
inline uint64_t dot_add(const InstructionDescriptor& desc,
                        std::span<const uint64_t> a,
                        std::span<const uint64_t> b, uint64_t c,
                        std::span<const uint64_t> a_sf = {},
                        std::span<const uint64_t> b_sf = {}) {
  detail::check_count("a", a.size(), static_cast<size_t>(desc.k));
  detail::check_count("b", b.size(), static_cast<size_t>(desc.k));
  if (desc.scale_block > 0) {
    size_t blocks = static_cast<size_t>(desc.k / desc.scale_block);
    detail::check_count("a_sf", a_sf.size(), blocks);
    detail::check_count("b_sf", b_sf.size(), blocks);
  } else {
    detail::check_count("a_sf", a_sf.size(), 0);
    detail::check_count("b_sf", b_sf.size(), 0);
  }

  DotAddRequest req;
  req.a_fmt = desc.a_fmt;
  req.b_fmt = desc.b_fmt;
  req.c_fmt = desc.c_fmt;
  req.a = a;
  req.b = b;
  req.c = c;
  req.a_sf = a_sf;
  req.b_sf = b_sf;
  req.sf_fmt = desc.sf_fmt;
  req.scale_block = desc.scale_block;
  return dot_add(req, desc.algorithm);
}

// ---------------------------------------------------------------------------
// Whole-tile dispatch

struct MatrixBuffer {
  FormatId fmt = FormatId::fp32;
  int rows = 0;
  int cols = 0;
  std::vector<uint64_t> elems;  // row-major, rows*cols encodings

  uint64_t at(int r, int c) const {
    return elems[static_cast<size_t>(r) * cols + c];
  }
  uint64_t& at(int r, int c) {
    return elems[static_cast<size_t>(r) * cols + c];
  }
};

inline MatrixBuffer make_matrix(FormatId fmt, int rows, int cols,
                                uint64_t fill = 0) {
  MatrixBuffer m;
  m.fmt = fmt;
  m.rows = rows;
  m.cols = cols;
  m.elems.assign(static_cast<size_t>(rows) * cols, fill);
  return m;
}

namespace detail {

inline void check_matrix(const char* operand, const MatrixBuffer& m,
                         int rows, int cols, FormatId fmt) {
  if (m.rows != rows || m.cols != cols || m.fmt != fmt ||
      m.elems.size() != static_cast<size_t>(rows) * cols) {
    std::ostringstream os;
    os << "matrix " << operand << ": expected " << rows << "x" << cols
       << " of " << format_name(fmt) << ", got " << m.rows << "x" << m.cols
       << " of " << format_name(m.fmt);
    if (m.elems.size() != static_cast<size_t>(m.rows) * m.cols)
      os << " (element count " << m.elems.size() << " does not match)";
    operand_error(os.str());
  }
}

}  // namespace detail

// D = A*B + C, element-wise through dot_add.  A is MxK, B is KxN, C and D
// are MxN.  Tile-flexible instructions (m == n == 0) take M from A and N
// from B.  Block-scaled instructions additionally require A_sf (M x K/S)
// and B_sf (K/S x N); element k of a row/column uses scale block k/S.
inline MatrixBuffer matmul(const InstructionDescriptor& desc,
                           const MatrixBuffer& A, const MatrixBuffer& B,
                           const MatrixBuffer& C,
                           const MatrixBuffer* A_sf = nullptr,
                           const MatrixBuffer* B_sf = nullptr) {
  const int M = desc.m > 0 ? desc.m : A.rows;
  const int N = desc.n > 0 ? desc.n : B.cols;
  const int K = desc.k;
  if (M <= 0 || N <= 0) detail::operand_error("matrix A: empty output tile");
  detail::check_matrix("A", A, M, K, desc.a_fmt);
  detail::check_matrix("B", B, K, N, desc.b_fmt);
  detail::check_matrix("C", C, M, N, desc.c_fmt);

  const int blocks = desc.scale_block > 0 ? K / desc.scale_block : 0;
  if (desc.scale_block > 0) {
    if (!A_sf) detail::operand_error("matrix A_sf: required but missing");
    if (!B_sf) detail::operand_error("matrix B_sf: required but missing");
    detail::check_matrix("A_sf", *A_sf, M, blocks, desc.sf_fmt);
    detail::check_matrix("B_sf", *B_sf, blocks, N, desc.sf_fmt);
  } else {
    if (A_sf) detail::operand_error("matrix A_sf: instruction is unscaled");
    if (B_sf) detail::operand_error("matrix B_sf: instruction is unscaled");
  }

  MatrixBuffer D = make_matrix(desc.d_fmt, M, N);
  std::vector<uint64_t> bcol(static_cast<size_t>(K));
  std::vector<uint64_t> bsf_col(static_cast<size_t>(blocks));
  for (int j = 0; j < N; ++j) {
    for (int k = 0; k < K; ++k) bcol[static_cast<size_t>(k)] = B.at(k, j);
    for (int t = 0; t < blocks; ++t)
      bsf_col[static_cast<size_t>(t)] = B_sf->at(t, j);
    for (int i = 0; i < M; ++i) {
      std::span<const uint64_t> arow(
          A.elems.data() + static_cast<size_t>(i) * K,
          static_cast<size_t>(K));
      std::span<const uint64_t> asf_row;
      if (blocks > 0)
        asf_row = std::span<const uint64_t>(
            A_sf->elems.data() + static_cast<size_t>(i) * blocks,
            static_cast<size_t>(blocks));
      D.at(i, j) = dot_add(desc, arow, bcol, C.at(i, j), asf_row,
                           std::span<const uint64_t>(bsf_col));
    }
  }
  return D;
}

// ---------------------------------------------------------------------------
// Human-auditable serialization

// One tab-separated line per entry, in catalog order.  Fields an algorithm
// fixes internally print as 0 (f_bits/round_bit/group) or "-" (sf).
inline std::string catalog_tsv() {
  std::ostringstream os;
  os << "architecture\tname\tm\tn\tk\ta\tb\tc\td\talgorithm\tf_bits\t"
        "round_bit\tgroup\tscale_block\tsf\n";
  for (const InstructionDescriptor& e : catalog().entries()) {
    os << architecture_name(e.arch) << '\t' << e.name << '\t' << e.m << '\t'
       << e.n << '\t' << e.k << '\t' << format_name(e.a_fmt) << '\t'
       << format_name(e.b_fmt) << '\t' << format_name(e.c_fmt) << '\t'
       << format_name(e.d_fmt) << '\t'
       << algorithm_name(e.algorithm.algorithm) << '\t'
       << e.algorithm.f_bits << '\t' << e.algorithm.round_bit << '\t'
       << e.algorithm.group << '\t' << e.scale_block << '\t'
       << (e.scale_block > 0 ? format_name(e.sf_fmt) : "-") << '\n';
  }
  return os.str();
}

}  // namespace tcmm
