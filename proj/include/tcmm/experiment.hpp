#pragma once

// Error-direction experiment: runs one cataloged instruction side by side
// with a variant whose round-down disposals are replaced by round-toward-
// zero, against an FP64 fused-multiply-add reference, on reproducible
// Gaussian inputs.  Produces per-element deviation records plus summary
// statistics (mean, median, histogram).
//
// Reproducibility contract (also documented in the README):
//   * Generator: SplitMix64 (Steele, Lea & Flood 2014) with the standard
//     constants; the whole experiment consumes one stream seeded with
//     ExperimentConfig::seed.
//   * Uniforms: u = ((x >> 11) + 1) * 2^-53, open at zero, closed at one.
//   * Gaussians: basic Box-Muller; each pair of uniforms (u1, u2) yields
//     r*cos(2*pi*u2) first and caches r*sin(2*pi*u2) as the next draw,
//     where r = sqrt(-2*ln(u1)).  The cache persists across matrices.
//   * Per round, the stream fills A row-major, then B row-major, then C
//     row-major.  A and B draw 1000*N(0,1), C draws N(0,1); every draw is
//     rounded to the operand's storage format with round-to-nearest-even.
//   * Output elements are recorded row-major per round; `samples` records
//     total, so the final round may be recorded only partially.

#include <algorithm>
#include <bit>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "catalog.hpp"
#include "exact.hpp"
#include "formats.hpp"

namespace tcmm {

// SplitMix64: 64-bit state, 64-bit output, period 2^64.
struct SplitMix64 {
  uint64_t state = 0;

  explicit SplitMix64(uint64_t seed) : state(seed) {}

  uint64_t next() {
    uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
};

// Standard-normal draws via Box-Muller over one SplitMix64 stream.
struct GaussianSource {
  SplitMix64 rng;
  bool have_cached = false;
  double cached = 0.0;

  explicit GaussianSource(uint64_t seed) : rng(seed) {}

  // Uniform on (0, 1]: never returns 0, so log(u) is always finite.
  double uniform01() {
    return static_cast<double>((rng.next() >> 11) + 1) * 0x1.0p-53;
  }

  double next() {
    if (have_cached) {
      have_cached = false;
      return cached;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double t = 2.0 * 3.141592653589793238462643383279502884 * u2;
    cached = r * std::sin(t);
    have_cached = true;
    return r * std::cos(t);
  }
};

struct ExperimentConfig {
  uint64_t seed = 1;
  long long samples = 0;
  Architecture arch = Architecture::cdna3;
  std::string instruction = "v_mfma_f32_32x32x8_f16";
};

// One output element: the device result, the round-toward-zero variant's
// result, the FP64 reference, and both deviations (device minus reference,
// computed in FP64).
struct DeltaRecord {
  int row = 0;
  int col = 0;
  uint64_t d_rd_bits = 0;   // device output encoding (its d format)
  uint64_t d_rz_bits = 0;   // variant output encoding (same format)
  uint64_t d_real_bits = 0; // FP64 reference encoding
  double delta_rd = 0.0;
  double delta_rz = 0.0;
};

struct HistogramBucket {
  double lo = 0.0;
  double hi = 0.0;
  long long count_rd = 0;
  long long count_rz = 0;
};

struct ExperimentSummary {
  long long count = 0;
  double mean_rd = 0.0;
  double mean_rz = 0.0;
  double median_rd = 0.0;
  double median_rz = 0.0;
  std::vector<HistogramBucket> histogram;  // empty when count == 0
};

struct ExperimentResult {
  ExperimentConfig config;
  const InstructionDescriptor* instruction = nullptr;
  std::vector<DeltaRecord> records;
  ExperimentSummary summary;
};

namespace detail {

inline double decoded_value(FormatId fmt, uint64_t bits) {
  DecodedNumber d = decode(fmt, bits);
  switch (d.cls) {
    case NumClass::nan:
      return std::numeric_limits<double>::quiet_NaN();
    case NumClass::infinity:
      return d.sign < 0 ? -std::numeric_limits<double>::infinity()
                        : std::numeric_limits<double>::infinity();
    case NumClass::zero:
      return d.sign < 0 ? -0.0 : 0.0;
    default:
      return exact_to_double(to_exact(d));
  }
}

// Round a double to `fmt` with round-to-nearest-even.  Supports the two
// operand formats the experiment draws (wider formats would need more
// normalizers).
inline uint64_t quantize_rne(FormatId fmt, double x) {
  switch (fmt) {
    case FormatId::fp64:
      return std::bit_cast<uint64_t>(x);
    case FormatId::fp32:
      return std::bit_cast<uint32_t>(static_cast<float>(x));
    case FormatId::fp16: {
      ExactScaled v = exact_from_double(x);
      if (v.is_zero()) return std::signbit(x) ? 0x8000u : 0x0000u;
      return normalize_fp16(v);
    }
    case FormatId::bf16: {
      ExactScaled v = exact_from_double(x);
      if (v.is_zero()) return std::signbit(x) ? 0x8000u : 0x0000u;
      long fl = floor_log2(v);
      ExactScaled r =
          round_at(v, std::max(fl, long{-126}) - 7, RoundingMode::RNE);
      if (r.is_zero()) return std::signbit(x) ? 0x8000u : 0x0000u;
      if (cmp_abs_pow2(r, 128) >= 0) return infinity_bits(FormatId::bf16, r.sign);
      return encode_exact_ieee(FormatId::bf16, r);
    }
    default:
      throw std::invalid_argument(
          std::string("experiment: no quantizer for format ") +
          format_name(fmt));
  }
}

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

inline constexpr int kExperimentHistogramBuckets = 16;

// Runs the experiment; throws std::invalid_argument for instructions the
// experiment cannot drive (unknown name, block-scaled, tile-flexible).
inline ExperimentResult run_bias_experiment(const ExperimentConfig& cfg) {
  const InstructionDescriptor* base = catalog().find(cfg.arch,
                                                     cfg.instruction);
  if (!base)
    throw std::invalid_argument(
        std::string("unknown instruction '") + cfg.instruction + "' on " +
        architecture_name(cfg.arch));
  if (base->scale_block != 0)
    throw std::invalid_argument(
        "bias experiment: block-scaled instructions are not supported");
  if (base->m <= 0 || base->n <= 0)
    throw std::invalid_argument(
        "bias experiment: instruction has no fixed output tile");
  if (cfg.samples < 0)
    throw std::invalid_argument("bias experiment: samples must be >= 0");

  InstructionDescriptor variant = *base;
  variant.algorithm.rd_as_rz = true;

  const int M = base->m, N = base->n, K = base->k;

  ExperimentResult out;
  out.config = cfg;
  out.instruction = base;
  out.records.reserve(static_cast<size_t>(cfg.samples));

  GaussianSource gauss(cfg.seed);
  AlgorithmParams ref_params;
  ref_params.algorithm = Algorithm::sfma;
  ref_params.out_fmt = FormatId::fp64;

  std::vector<uint64_t> a64(static_cast<size_t>(K));
  std::vector<uint64_t> b64(static_cast<size_t>(K));

  long long remaining = cfg.samples;
  while (remaining > 0) {
    MatrixBuffer A = make_matrix(base->a_fmt, M, K);
    MatrixBuffer B = make_matrix(base->b_fmt, K, N);
    MatrixBuffer C = make_matrix(base->c_fmt, M, N);
    for (uint64_t& e : A.elems)
      e = detail::quantize_rne(base->a_fmt, 1000.0 * gauss.next());
    for (uint64_t& e : B.elems)
      e = detail::quantize_rne(base->b_fmt, 1000.0 * gauss.next());
    for (uint64_t& e : C.elems)
      e = detail::quantize_rne(base->c_fmt, gauss.next());

    MatrixBuffer D_dev = matmul(*base, A, B, C);
    MatrixBuffer D_var = matmul(variant, A, B, C);

    for (int i = 0; i < M && remaining > 0; ++i) {
      for (int j = 0; j < N && remaining > 0; ++j, --remaining) {
        for (int k = 0; k < K; ++k) {
          a64[static_cast<size_t>(k)] = std::bit_cast<uint64_t>(
              detail::decoded_value(base->a_fmt, A.at(i, k)));
          b64[static_cast<size_t>(k)] = std::bit_cast<uint64_t>(
              detail::decoded_value(base->b_fmt, B.at(k, j)));
        }
        DotAddRequest ref;
        ref.a_fmt = ref.b_fmt = ref.c_fmt = FormatId::fp64;
        ref.a = a64;
        ref.b = b64;
        ref.c = std::bit_cast<uint64_t>(
            detail::decoded_value(base->c_fmt, C.at(i, j)));
        uint64_t real_bits = dot_add(ref, ref_params);
        double d_real = std::bit_cast<double>(real_bits);

        DeltaRecord rec;
        rec.row = i;
        rec.col = j;
        rec.d_rd_bits = D_dev.at(i, j);
        rec.d_rz_bits = D_var.at(i, j);
        rec.d_real_bits = real_bits;
        rec.delta_rd =
            detail::decoded_value(base->d_fmt, rec.d_rd_bits) - d_real;
        rec.delta_rz =
            detail::decoded_value(base->d_fmt, rec.d_rz_bits) - d_real;
        out.records.push_back(rec);
      }
    }
  }

  // --- summary ---------------------------------------------------------
  ExperimentSummary& s = out.summary;
  s.count = static_cast<long long>(out.records.size());
  if (s.count == 0) return out;

  std::vector<double> rd, rz;
  rd.reserve(out.records.size());
  rz.reserve(out.records.size());
  double sum_rd = 0.0, sum_rz = 0.0;
  double lo = out.records[0].delta_rd, hi = lo;
  for (const DeltaRecord& r : out.records) {
    rd.push_back(r.delta_rd);
    rz.push_back(r.delta_rz);
    sum_rd += r.delta_rd;
    sum_rz += r.delta_rz;
    lo = std::min({lo, r.delta_rd, r.delta_rz});
    hi = std::max({hi, r.delta_rd, r.delta_rz});
  }
  s.mean_rd = sum_rd / static_cast<double>(s.count);
  s.mean_rz = sum_rz / static_cast<double>(s.count);
  s.median_rd = detail::median_of(std::move(rd));
  s.median_rz = detail::median_of(std::move(rz));

  const int nb = kExperimentHistogramBuckets;
  double width = (hi - lo) / nb;
  if (width <= 0.0) {
    s.histogram.push_back({lo, hi, s.count, s.count});
  } else {
    s.histogram.resize(static_cast<size_t>(nb));
    for (int b = 0; b < nb; ++b) {
      s.histogram[static_cast<size_t>(b)].lo = lo + b * width;
      s.histogram[static_cast<size_t>(b)].hi =
          b + 1 == nb ? hi : lo + (b + 1) * width;
    }
    auto bucket_of = [&](double x) {
      int b = static_cast<int>((x - lo) / width);
      return std::clamp(b, 0, nb - 1);
    };
    for (const DeltaRecord& r : out.records) {
      ++s.histogram[static_cast<size_t>(bucket_of(r.delta_rd))].count_rd;
      ++s.histogram[static_cast<size_t>(bucket_of(r.delta_rz))].count_rz;
    }
  }
  return out;
}

// --- text output -------------------------------------------------------

inline const char* kExperimentCsvHeader =
    "row,col,d_rd_hex,d_rz_hex,d_real_hex,delta_rd,delta_rz";

inline std::string experiment_csv(const ExperimentResult& r) {
  const int out_digits =
      r.instruction ? storage_hex_digits(r.instruction->d_fmt) : 8;
  std::string out = kExperimentCsvHeader;
  out.push_back('\n');
  char buf[128];
  for (const DeltaRecord& rec : r.records) {
    std::snprintf(buf, sizeof buf, "%d,%d,%0*llx,%0*llx,%016llx,", rec.row,
                  rec.col, out_digits,
                  static_cast<unsigned long long>(rec.d_rd_bits), out_digits,
                  static_cast<unsigned long long>(rec.d_rz_bits),
                  static_cast<unsigned long long>(rec.d_real_bits));
    out += buf;
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", rec.delta_rd,
                  rec.delta_rz);
    out += buf;
  }
  return out;
}

inline std::string experiment_summary_text(const ExperimentResult& r) {
  std::ostringstream os;
  os << "instruction: "
     << (r.instruction ? architecture_name(r.instruction->arch) : "?") << ' '
     << (r.instruction ? r.instruction->name : std::string("?")) << '\n';
  os << "seed: " << r.config.seed << '\n';
  os << "samples: " << r.summary.count << '\n';
  if (r.summary.count == 0) {
    os << "summary: empty (no records)\n";
    return os.str();
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "delta_rd: mean=%.9g median=%.9g\n",
                r.summary.mean_rd, r.summary.median_rd);
  os << buf;
  std::snprintf(buf, sizeof buf, "delta_rz: mean=%.9g median=%.9g\n",
                r.summary.mean_rz, r.summary.median_rz);
  os << buf;
  os << "histogram (" << r.summary.histogram.size() << " buckets):\n";
  for (const HistogramBucket& b : r.summary.histogram) {
    std::snprintf(buf, sizeof buf, "  [%.9g, %.9g%s  rd=%lld rz=%lld\n",
                  b.lo, b.hi, &b == &r.summary.histogram.back() ? "]" : ")",
                  b.count_rd, b.count_rz);
    os << buf;
  }
  return os.str();
}

}  // namespace tcmm
