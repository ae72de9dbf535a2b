// Command-line front end: catalog listing, tile computation on matrix
// files, cross-instruction comparison, black-box arithmetic dissection,
// and the rounding-deviation experiment.
//
// Exit codes: 0 success; 1 usage, parse, or operand errors; 2 divergence
// (compare only).

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tcmm/catalog.hpp"
#include "tcmm/dissect.hpp"
#include "tcmm/experiment.hpp"
#include "tcmm/formats.hpp"
#include "tcmm/matrix_io.hpp"

namespace {

using nlohmann::json;
using namespace tcmm;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitDivergent = 2;

[[nodiscard]] int fail(const std::string& msg) {
  std::cerr << "error: " << msg << "\n";
  return kExitError;
}

std::string known_architectures() {
  std::string out;
  for (int i = 0; i < kNumArchitectures; ++i) {
    if (i) out += ", ";
    out += architecture_name(static_cast<Architecture>(i));
  }
  return out;
}

// Architecture names match case-insensitively with '_'/'-' ignored, so
// "cdna3", "CDNA3", "ada_lovelace", and "AdaLovelace" all work.
std::string fold_name(std::string_view s) {
  std::string out;
  for (char ch : s) {
    if (ch == '_' || ch == '-') continue;
    out.push_back(static_cast<char>(
        std::tolower(static_cast<unsigned char>(ch))));
  }
  return out;
}

bool parse_arch(const std::string& s, Architecture* out, std::string* err) {
  if (parse_architecture_name(s, out)) return true;
  std::string want = fold_name(s);
  for (Architecture a : kAllArchitectures) {
    if (fold_name(architecture_name(a)) == want) {
      *out = a;
      return true;
    }
  }
  *err = "unknown architecture '" + s + "' (known: " + known_architectures() +
         ")";
  return false;
}

const InstructionDescriptor* find_instruction(Architecture arch,
                                              const std::string& name,
                                              std::string* err) {
  Catalog::Lookup lk = catalog().lookup(arch, name);
  if (lk.desc) return lk.desc;
  *err = "unknown instruction '" + name + "' on " + architecture_name(arch);
  if (!lk.suggestion.empty()) *err += " (did you mean '" + lk.suggestion + "'?)";
  return nullptr;
}

// Reads one operand file, prefixing parse failures with the flag and path.
std::optional<MatrixBuffer> load_operand(const std::string& flag,
                                         const std::string& path,
                                         std::string* err) {
  MatrixParseResult r = read_matrix_file(path);
  if (!r.ok()) {
    *err = flag + " (" + path + "): " + r.error.to_string();
    return std::nullopt;
  }
  return std::move(r.matrix);
}

std::string hex_bits(FormatId fmt, uint64_t bits) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%0*llx", storage_hex_digits(fmt),
                static_cast<unsigned long long>(bits));
  return buf;
}

bool write_text_file(const std::string& path, const std::string& body,
                     std::string* err) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << body;
  out.flush();
  if (!out) {
    *err = "cannot write file '" + path + "'";
    return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// list

void tsv_like_rows(std::ostream& os,
                   const std::vector<const InstructionDescriptor*>& entries,
                   char sep) {
  const char* cols[] = {"architecture", "name", "m", "n", "k", "a", "b",
                        "c", "d", "algorithm", "f_bits", "round_bit",
                        "group", "scale_block", "sf"};
  for (size_t i = 0; i < std::size(cols); ++i)
    os << (i ? std::string(1, sep) : "") << cols[i];
  os << '\n';
  for (const InstructionDescriptor* e : entries) {
    os << architecture_name(e->arch) << sep << e->name << sep << e->m << sep
       << e->n << sep << e->k << sep << format_name(e->a_fmt) << sep
       << format_name(e->b_fmt) << sep << format_name(e->c_fmt) << sep
       << format_name(e->d_fmt) << sep
       << algorithm_name(e->algorithm.algorithm) << sep
       << e->algorithm.f_bits << sep << e->algorithm.round_bit << sep
       << e->algorithm.group << sep << e->scale_block << sep
       << (e->scale_block > 0 ? format_name(e->sf_fmt) : "-") << '\n';
  }
}

json entry_to_json(const InstructionDescriptor& e) {
  json j;
  j["architecture"] = architecture_name(e.arch);
  j["name"] = e.name;
  j["m"] = e.m;
  j["n"] = e.n;
  j["k"] = e.k;
  j["a"] = format_name(e.a_fmt);
  j["b"] = format_name(e.b_fmt);
  j["c"] = format_name(e.c_fmt);
  j["d"] = format_name(e.d_fmt);
  j["algorithm"] = algorithm_name(e.algorithm.algorithm);
  j["f_bits"] = e.algorithm.f_bits;
  j["round_bit"] = e.algorithm.round_bit;
  j["group"] = e.algorithm.group;
  j["scale_block"] = e.scale_block;
  if (e.scale_block > 0)
    j["sf"] = format_name(e.sf_fmt);
  else
    j["sf"] = nullptr;
  return j;
}

int cmd_list(const std::string& arch_str, const std::string& format,
             const std::string& out_path) {
  std::vector<const InstructionDescriptor*> entries;
  if (!arch_str.empty()) {
    Architecture arch{};
    std::string err;
    if (!parse_arch(arch_str, &arch, &err)) return fail(err);
    entries = catalog().for_architecture(arch);
  } else {
    for (const InstructionDescriptor& e : catalog().entries())
      entries.push_back(&e);
  }

  std::ostringstream os;
  if (format == "json") {
    json j = json::array();
    for (const InstructionDescriptor* e : entries) j.push_back(entry_to_json(*e));
    os << j.dump(2) << '\n';
  } else {
    tsv_like_rows(os, entries, format == "csv" ? ',' : '\t');
  }

  if (!out_path.empty()) {
    std::string err;
    if (!write_text_file(out_path, os.str(), &err)) return fail(err);
    std::cout << "wrote " << out_path << ": " << entries.size()
              << " instructions\n";
  } else {
    std::cout << os.str();
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// compute

struct OperandFlags {
  std::string a, b, c, asf, bsf;
};

struct LoadedOperands {
  MatrixBuffer A, B, C;
  std::optional<MatrixBuffer> Asf, Bsf;
};

// Loads and validates operand files against one descriptor's scale layout.
std::optional<LoadedOperands> load_operands(const InstructionDescriptor& desc,
                                            const OperandFlags& files,
                                            std::string* err) {
  LoadedOperands ops;
  auto a = load_operand("--a", files.a, err);
  if (!a) return std::nullopt;
  auto b = load_operand("--b", files.b, err);
  if (!b) return std::nullopt;
  auto c = load_operand("--c", files.c, err);
  if (!c) return std::nullopt;
  ops.A = std::move(*a);
  ops.B = std::move(*b);
  ops.C = std::move(*c);

  const bool scaled = desc.scale_block > 0;
  if (scaled && (files.asf.empty() || files.bsf.empty())) {
    *err = desc.name + " is block-scaled: it requires --asf and --bsf files " +
           "carrying one " + format_name(desc.sf_fmt) + " scale per " +
           std::to_string(desc.scale_block) + " elements of the reduction axis";
    return std::nullopt;
  }
  if (!scaled && (!files.asf.empty() || !files.bsf.empty())) {
    *err = desc.name + " is unscaled: --asf/--bsf do not apply";
    return std::nullopt;
  }
  if (scaled) {
    auto asf = load_operand("--asf", files.asf, err);
    if (!asf) return std::nullopt;
    auto bsf = load_operand("--bsf", files.bsf, err);
    if (!bsf) return std::nullopt;
    ops.Asf = std::move(*asf);
    ops.Bsf = std::move(*bsf);
  }
  return ops;
}

int cmd_compute(const std::string& arch_str, const std::string& inst,
                const OperandFlags& files, const std::string& out_path) {
  Architecture arch{};
  std::string err;
  if (!parse_arch(arch_str, &arch, &err)) return fail(err);
  const InstructionDescriptor* desc = find_instruction(arch, inst, &err);
  if (!desc) return fail(err);

  std::optional<LoadedOperands> ops = load_operands(*desc, files, &err);
  if (!ops) return fail(err);

  MatrixBuffer D;
  try {
    D = matmul(*desc, ops->A, ops->B, ops->C,
               ops->Asf ? &*ops->Asf : nullptr,
               ops->Bsf ? &*ops->Bsf : nullptr);
  } catch (const std::invalid_argument& e) {
    return fail(e.what());
  }

  if (!out_path.empty()) {
    if (!write_matrix_file(out_path, D, &err)) return fail(err);
    std::cout << "wrote " << out_path << ": " << D.rows << "x" << D.cols
              << " " << format_name(D.fmt) << "\n";
  } else {
    std::cout << emit_matrix(D);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// compare

int cmd_compare(const std::string& arch1_str, const std::string& inst1,
                const std::string& arch2_str, const std::string& inst2,
                const OperandFlags& files, const std::string& format,
                const std::string& out_path) {
  Architecture arch1{}, arch2{};
  std::string err;
  if (!parse_arch(arch1_str, &arch1, &err)) return fail(err);
  if (!parse_arch(arch2_str, &arch2, &err)) return fail(err);
  const InstructionDescriptor* d1 = find_instruction(arch1, inst1, &err);
  if (!d1) return fail(err);
  const InstructionDescriptor* d2 = find_instruction(arch2, inst2, &err);
  if (!d2) return fail(err);

  std::optional<LoadedOperands> ops = load_operands(*d1, files, &err);
  if (!ops) return fail(err);

  MatrixBuffer D1, D2;
  try {
    const MatrixBuffer* asf = ops->Asf ? &*ops->Asf : nullptr;
    const MatrixBuffer* bsf = ops->Bsf ? &*ops->Bsf : nullptr;
    D1 = matmul(*d1, ops->A, ops->B, ops->C, asf, bsf);
    D2 = matmul(*d2, ops->A, ops->B, ops->C, asf, bsf);
  } catch (const std::invalid_argument& e) {
    return fail(e.what());
  }
  if (D1.fmt != D2.fmt || D1.rows != D2.rows || D1.cols != D2.cols)
    return fail(std::string("outputs are not comparable: ") +
                std::to_string(D1.rows) + "x" + std::to_string(D1.cols) + " " +
                format_name(D1.fmt) + " vs " + std::to_string(D2.rows) + "x" +
                std::to_string(D2.cols) + " " + format_name(D2.fmt));

  long long differing = 0;
  double max_abs = 0.0;
  bool nan_mismatch = false;
  json diffs = json::array();
  std::ostringstream body;
  for (int i = 0; i < D1.rows; ++i) {
    for (int j = 0; j < D1.cols; ++j) {
      uint64_t x = D1.at(i, j), y = D2.at(i, j);
      if (x == y) continue;
      ++differing;
      double vx = tcmm::detail::decoded_value(D1.fmt, x);
      double vy = tcmm::detail::decoded_value(D2.fmt, y);
      if (std::isnan(vx) || std::isnan(vy)) {
        nan_mismatch = true;
      } else {
        max_abs = std::max(max_abs, std::abs(vx - vy));
      }
      if (format == "json") {
        json d;
        d["row"] = i;
        d["col"] = j;
        d["lhs"] = hex_bits(D1.fmt, x);
        d["rhs"] = hex_bits(D2.fmt, y);
        diffs.push_back(d);
      } else {
        char line[160];
        std::snprintf(line, sizeof line, "(%d,%d) %s != %s  (%.9g vs %.9g)\n",
                      i, j, hex_bits(D1.fmt, x).c_str(),
                      hex_bits(D2.fmt, y).c_str(), vx, vy);
        body << line;
      }
    }
  }
  const long long total =
      static_cast<long long>(D1.rows) * static_cast<long long>(D1.cols);

  std::ostringstream os;
  if (format == "json") {
    json j;
    j["lhs"] = {{"architecture", architecture_name(arch1)}, {"name", inst1}};
    j["rhs"] = {{"architecture", architecture_name(arch2)}, {"name", inst2}};
    j["identical"] = differing == 0;
    j["differing"] = differing;
    j["total"] = total;
    j["max_abs_difference"] = max_abs;
    j["nan_mismatch"] = nan_mismatch;
    j["diffs"] = diffs;
    os << j.dump(2) << '\n';
  } else {
    os << body.str();
    if (differing == 0) {
      os << "identical: " << total << " elements\n";
    } else {
      os << "differing: " << differing << " of " << total << " elements\n";
      os << "max abs numeric difference: ";
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.9g", max_abs);
      os << buf;
      if (nan_mismatch) os << " (plus NaN mismatches)";
      os << '\n';
    }
  }

  if (!out_path.empty()) {
    if (!write_text_file(out_path, os.str(), &err)) return fail(err);
  } else {
    std::cout << os.str();
  }
  return differing == 0 ? kExitOk : kExitDivergent;
}

// ---------------------------------------------------------------------------
// dissect

const char* flag_text(Flag f) { return flag_name(f); }

json rounding_to_json(const RoundingFinding& f) {
  json j;
  j["known"] = f.known;
  j["mode"] = f.known ? json(rounding_mode_name(f.mode)) : json(nullptr);
  j["ties_probed"] = f.ties_probed;
  j["cells"] = f.cells;
  return j;
}

json report_to_json(const DissectionReport& rep) {
  json j;
  json unit;
  unit["k"] = rep.info.k;
  unit["a"] = format_name(rep.info.a_fmt);
  unit["b"] = format_name(rep.info.b_fmt);
  unit["c"] = format_name(rep.info.c_fmt);
  unit["d"] = format_name(rep.info.d_fmt);
  unit["scale_block"] = rep.info.scale_block;
  unit["sf"] = rep.info.scale_block > 0 ? json(format_name(rep.info.sf_fmt))
                                        : json(nullptr);
  j["unit"] = unit;

  json tree;
  tree["kind"] = tree_kind_name(rep.tree.kind);
  tree["group"] = rep.tree.group;
  tree["arity"] = rep.tree.arity;
  tree["split"] = rep.tree.split;
  tree["priority"] = rep.tree.priority;
  j["tree"] = tree;

  json precision;
  precision["bits"] = rep.precision.bits;
  precision["saturated"] = rep.precision.saturated;
  j["precision"] = precision;

  json rounding;
  rounding["c_path"] = rounding_to_json(rep.c_rounding);
  rounding["c_deep_drop"] = flag_text(rep.c_deep_drop);
  rounding["final"] = rounding_to_json(rep.final_rounding);
  j["rounding"] = rounding;

  json flags;
  flags["flush_c_in"] = flag_text(rep.flush_c_in);
  flags["flush_ab_in"] = flag_text(rep.flush_ab_in);
  flags["flush_post_mul"] = flag_text(rep.flush_post_mul);
  flags["flush_post_add"] = flag_text(rep.flush_post_add);
  flags["neg_zero_out"] = flag_text(rep.neg_zero_out);
  flags["product_overflow"] = flag_text(rep.product_overflow);
  flags["intermediate_overflow"] = flag_text(rep.intermediate_overflow);
  flags["nan_from_zero_times_inf"] = flag_text(rep.nan_from_zero_times_inf);
  flags["nan_from_inf_minus_inf"] = flag_text(rep.nan_from_inf_minus_inf);
  j["flags"] = flags;

  json edges = json::array();
  for (const EdgeOutcome& e : rep.overflow_edges) {
    json d;
    d["label"] = e.label;
    d["bits"] = hex_bits(rep.info.d_fmt, e.bits);
    edges.push_back(d);
  }
  j["edges"] = edges;
  return j;
}

int cmd_dissect(const std::string& arch_str, const std::string& inst,
                const std::string& format, const std::string& out_path) {
  Architecture arch{};
  std::string err;
  if (!parse_arch(arch_str, &arch, &err)) return fail(err);
  const InstructionDescriptor* desc = find_instruction(arch, inst, &err);
  if (!desc) return fail(err);

  DissectionReport rep = dissect(*desc);
  std::string body;
  if (format == "json") {
    json j = report_to_json(rep);
    j["instruction"] = {{"architecture", architecture_name(arch)},
                        {"name", desc->name}};
    body = j.dump(2) + "\n";
  } else {
    body = report_to_text(rep);
  }

  std::cout << body;
  if (!out_path.empty()) {
    if (!write_text_file(out_path, body, &err)) return fail(err);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// bias-experiment

int cmd_bias_experiment(const std::string& arch_str, const std::string& inst,
                        long long samples, uint64_t seed,
                        const std::string& format,
                        const std::string& out_path) {
  ExperimentConfig cfg;
  std::string err;
  if (!parse_arch(arch_str, &cfg.arch, &err)) return fail(err);
  cfg.instruction = inst;
  cfg.samples = samples;
  cfg.seed = seed;

  ExperimentResult r;
  try {
    r = run_bias_experiment(cfg);
  } catch (const std::invalid_argument& e) {
    return fail(e.what());
  }

  if (format == "text") {
    std::cout << experiment_summary_text(r);
    return kExitOk;
  }
  if (format == "json") {
    json j;
    j["instruction"] = {{"architecture", architecture_name(cfg.arch)},
                        {"name", cfg.instruction}};
    j["seed"] = cfg.seed;
    j["samples"] = r.summary.count;
    if (r.summary.count == 0) {
      j["summary"] = nullptr;
    } else {
      json s;
      s["mean_rd"] = r.summary.mean_rd;
      s["mean_rz"] = r.summary.mean_rz;
      s["median_rd"] = r.summary.median_rd;
      s["median_rz"] = r.summary.median_rz;
      json hist = json::array();
      for (const HistogramBucket& b : r.summary.histogram) {
        json hb;
        hb["lo"] = b.lo;
        hb["hi"] = b.hi;
        hb["count_rd"] = b.count_rd;
        hb["count_rz"] = b.count_rz;
        hist.push_back(hb);
      }
      s["histogram"] = hist;
      j["summary"] = s;
    }
    std::string body = j.dump(2) + "\n";
    if (!out_path.empty()) {
      if (!write_text_file(out_path, body, &err)) return fail(err);
      std::cout << experiment_summary_text(r);
    } else {
      std::cout << body;
    }
    return kExitOk;
  }

  // csv (default): records go to --out (or stdout); the human summary goes
  // to stdout when the records went to a file, else to stderr so piping
  // stdout still yields clean CSV.
  std::string csv = experiment_csv(r);
  if (!out_path.empty()) {
    if (!write_text_file(out_path, csv, &err)) return fail(err);
    std::cout << experiment_summary_text(r);
  } else {
    std::cout << csv;
    std::cerr << experiment_summary_text(r);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Bit-accurate simulator and black-box dissector of GPU matrix-unit "
      "floating-point arithmetic"};
  app.require_subcommand(1);

  std::string arch, arch2, inst, inst2, out_path;
  std::string format = "text";
  OperandFlags files;
  std::string bias_arch = "cdna3";
  std::string bias_inst = "v_mfma_f32_32x32x8_f16";
  std::string bias_format = "csv";
  long long samples = 0;
  uint64_t seed = 1;

  CLI::App* list = app.add_subcommand("list", "Dump the instruction catalog");
  list->add_option("--arch", arch, "Restrict to one architecture");
  list->add_option("--format", format, "text | csv | json")
      ->check(CLI::IsMember({"text", "csv", "json"}));
  list->add_option("--out", out_path, "Write to a file instead of stdout");

  CLI::App* compute = app.add_subcommand(
      "compute", "Compute D = A*B + C for one instruction on matrix files");
  compute->add_option("--arch", arch, "Architecture")->required();
  compute->add_option("--inst", inst, "Instruction mnemonic")->required();
  compute->add_option("--a", files.a, "A matrix file")->required();
  compute->add_option("--b", files.b, "B matrix file")->required();
  compute->add_option("--c", files.c, "C matrix file")->required();
  compute->add_option("--asf", files.asf, "A scale-factor matrix file");
  compute->add_option("--bsf", files.bsf, "B scale-factor matrix file");
  compute->add_option("--out", out_path,
                      "Output matrix file (default: stdout)");

  CLI::App* compare = app.add_subcommand(
      "compare",
      "Run two instructions on the same inputs and diff the outputs "
      "(exit 2 when they diverge)");
  compare->add_option("--arch", arch, "First architecture")->required();
  compare->add_option("--inst", inst, "First instruction")->required();
  compare->add_option("--arch2", arch2, "Second architecture")->required();
  compare->add_option("--inst2", inst2, "Second instruction")->required();
  compare->add_option("--a", files.a, "A matrix file")->required();
  compare->add_option("--b", files.b, "B matrix file")->required();
  compare->add_option("--c", files.c, "C matrix file")->required();
  compare->add_option("--asf", files.asf, "A scale-factor matrix file");
  compare->add_option("--bsf", files.bsf, "B scale-factor matrix file");
  compare->add_option("--format", format, "text | json")
      ->check(CLI::IsMember({"text", "json"}));
  compare->add_option("--out", out_path, "Write the report to a file");

  CLI::App* dis = app.add_subcommand(
      "dissect", "Probe an instruction's arithmetic and print the findings");
  dis->add_option("--arch", arch, "Architecture")->required();
  dis->add_option("--inst", inst, "Instruction mnemonic")->required();
  dis->add_option("--format", format, "text | json")
      ->check(CLI::IsMember({"text", "json"}));
  dis->add_option("--out", out_path, "Also write the report to a file");

  CLI::App* bias = app.add_subcommand(
      "bias-experiment",
      "Compare native round-down accumulation against a round-toward-zero "
      "variant on seeded Gaussian inputs");
  bias->add_option("--arch", bias_arch, "Architecture (default cdna3)");
  bias->add_option("--inst", bias_inst,
                   "Instruction mnemonic (default v_mfma_f32_32x32x8_f16)");
  bias->add_option("--samples", samples, "Output elements to record")
      ->required();
  bias->add_option("--seed", seed, "Generator seed (default 1)");
  bias->add_option("--format", bias_format, "csv | text | json")
      ->check(CLI::IsMember({"csv", "text", "json"}));
  bias->add_option("--out", out_path, "Write records to a file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitError;
  }

  if (list->parsed()) return cmd_list(arch, format, out_path);
  if (compute->parsed()) return cmd_compute(arch, inst, files, out_path);
  if (compare->parsed())
    return cmd_compare(arch, inst, arch2, inst2, files, format, out_path);
  if (dis->parsed()) return cmd_dissect(arch, inst, format, out_path);
  if (bias->parsed())
    return cmd_bias_experiment(bias_arch, bias_inst, samples, seed,
                               bias_format, out_path);
  return kExitError;
}
