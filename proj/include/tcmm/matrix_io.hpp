#pragma once

// Text serialization for matrix tiles.
//
// Layout:
//
//   mmat <format> <rows> <cols>
//   <cols> hex tokens ... (first row)
//   ...                   (rows lines total, row-major)
//
// Each token is the raw storage encoding of one element, written as
// lowercase hex with exactly storage_hex_digits(format) digits.  Tokens on
// a line are separated by spaces or tabs; lines end with '\n' (a '\r'
// before it is tolerated).  Whitespace-only lines after the last data row
// are ignored; anything else after it is an error.
//
// emit_matrix produces the canonical form: single spaces, lowercase hex,
// one trailing newline.  parse_matrix(emit_matrix(m)) reproduces m
// bit-exactly, and emit_matrix(*parse_matrix(text).matrix) == text for any
// canonical text.

#include <cassert>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "catalog.hpp"
#include "formats.hpp"

namespace tcmm {

struct MatrixParseError {
  int line = 0;    // 1-based; 0 for file-level errors (open failure)
  int column = 0;  // 1-based byte offset of the offending token
  std::string message;

  std::string to_string() const {
    if (line <= 0) return message;
    std::ostringstream os;
    os << "line " << line << ", column " << column << ": " << message;
    return os.str();
  }
};

struct MatrixParseResult {
  std::optional<MatrixBuffer> matrix;
  MatrixParseError error;

  bool ok() const { return matrix.has_value(); }
};

namespace detail {

struct LineToken {
  size_t column;  // 0-based byte offset within the line
  std::string_view text;
};

inline std::vector<LineToken> split_tokens(std::string_view line) {
  std::vector<LineToken> out;
  size_t i = 0;
  while (i < line.size()) {
    if (line[i] == ' ' || line[i] == '\t') {
      ++i;
      continue;
    }
    size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    out.push_back({start, line.substr(start, i - start)});
  }
  return out;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    std::string_view line = nl == std::string_view::npos
                                ? text.substr(pos)
                                : text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  // A trailing '\n' yields one empty final line; keep it, the data loop
  // skips whitespace-only tails.
  return lines;
}

inline MatrixParseResult matrix_error(int line, size_t column0,
                                      std::string message) {
  MatrixParseResult r;
  r.error = {line, static_cast<int>(column0) + 1, std::move(message)};
  return r;
}

inline bool parse_dim(std::string_view tok, int& out) {
  if (tok.empty() || tok.size() > 9) return false;
  int value = 0;
  auto [ptr, ec] =
      std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) return false;
  if (value <= 0) return false;
  out = value;
  return true;
}

inline bool parse_hex_token(std::string_view tok, int digits, uint64_t& out) {
  if (tok.size() != static_cast<size_t>(digits)) return false;
  uint64_t v = 0;
  for (char ch : tok) {
    int d;
    if (ch >= '0' && ch <= '9')
      d = ch - '0';
    else if (ch >= 'a' && ch <= 'f')
      d = ch - 'a' + 10;
    else
      return false;  // uppercase and other characters are not canonical
    v = (v << 4) | static_cast<uint64_t>(d);
  }
  out = v;
  return true;
}

}  // namespace detail

// Maximum element count accepted by the parser; guards against hostile
// headers allocating unbounded memory.
inline constexpr size_t kMaxMatrixElements = size_t{1} << 24;

inline MatrixParseResult parse_matrix(std::string_view text) {
  using detail::matrix_error;
  std::vector<std::string_view> lines = detail::split_lines(text);
  while (!lines.empty() && detail::split_tokens(lines.back()).empty())
    lines.pop_back();

  // --- header -------------------------------------------------------------
  std::vector<detail::LineToken> head =
      lines.empty() ? std::vector<detail::LineToken>{}
                    : detail::split_tokens(lines[0]);
  if (head.empty())
    return matrix_error(1, 0, "empty input; expected 'mmat' header");
  if (head[0].text != "mmat")
    return matrix_error(1, head[0].column,
                        "expected 'mmat' header, got '" +
                            std::string(head[0].text) + "'");
  if (head.size() < 4)
    return matrix_error(1, lines[0].size(),
                        "header needs 'mmat <format> <rows> <cols>'");
  if (head.size() > 4)
    return matrix_error(1, head[4].column,
                        "unexpected token '" + std::string(head[4].text) +
                            "' after header");

  std::optional<FormatId> fmt = parse_format_name(head[1].text);
  if (!fmt)
    return matrix_error(1, head[1].column,
                        "unknown format '" + std::string(head[1].text) + "'");

  int rows = 0, cols = 0;
  if (!detail::parse_dim(head[2].text, rows))
    return matrix_error(1, head[2].column,
                        "expected positive integer rows, got '" +
                            std::string(head[2].text) + "'");
  if (!detail::parse_dim(head[3].text, cols))
    return matrix_error(1, head[3].column,
                        "expected positive integer cols, got '" +
                            std::string(head[3].text) + "'");
  if (static_cast<size_t>(rows) * static_cast<size_t>(cols) >
      kMaxMatrixElements)
    return matrix_error(1, head[2].column, "matrix dimensions too large");

  const FormatSpec& spec = format_spec(*fmt);
  const int digits = storage_hex_digits(*fmt);
  const bool check_width = digits * 4 > spec.storage_bits;
  const uint64_t width_mask =
      spec.storage_bits >= 64 ? ~uint64_t{0}
                              : (uint64_t{1} << spec.storage_bits) - 1;

  MatrixBuffer m = make_matrix(*fmt, rows, cols);

  // --- data rows ------------------------------------------------------------
  for (int r = 0; r < rows; ++r) {
    size_t li = static_cast<size_t>(r) + 1;
    if (li >= lines.size())
      return matrix_error(static_cast<int>(lines.size()) + 1, 0,
                          "unexpected end of input: expected " +
                              std::to_string(rows) + " data rows, got " +
                              std::to_string(r));
    std::vector<detail::LineToken> toks = detail::split_tokens(lines[li]);
    int lineno = static_cast<int>(li) + 1;
    if (toks.size() < static_cast<size_t>(cols))
      return matrix_error(lineno, lines[li].size(),
                          "row " + std::to_string(r + 1) + ": expected " +
                              std::to_string(cols) + " values, found " +
                              std::to_string(toks.size()));
    if (toks.size() > static_cast<size_t>(cols))
      return matrix_error(
          lineno, toks[static_cast<size_t>(cols)].column,
          "row " + std::to_string(r + 1) + ": expected " +
              std::to_string(cols) + " values; unexpected token '" +
              std::string(toks[static_cast<size_t>(cols)].text) + "'");
    for (int c = 0; c < cols; ++c) {
      const detail::LineToken& tok = toks[static_cast<size_t>(c)];
      uint64_t value = 0;
      if (!detail::parse_hex_token(tok.text, digits, value))
        return matrix_error(lineno, tok.column,
                            "expected " + std::to_string(digits) +
                                "-digit lowercase hex value, got '" +
                                std::string(tok.text) + "'");
      if (check_width && (value & ~width_mask) != 0)
        return matrix_error(lineno, tok.column,
                            "value '" + std::string(tok.text) +
                                "' exceeds the " +
                                std::to_string(spec.storage_bits) +
                                "-bit storage of " + spec.name);
      m.at(r, c) = value;
    }
  }

  // --- trailing content -----------------------------------------------------
  for (size_t li = static_cast<size_t>(rows) + 1; li < lines.size(); ++li) {
    std::vector<detail::LineToken> toks = detail::split_tokens(lines[li]);
    if (!toks.empty())
      return matrix_error(static_cast<int>(li) + 1, toks[0].column,
                          "unexpected content after " + std::to_string(rows) +
                              " data rows");
  }

  MatrixParseResult r;
  r.matrix = std::move(m);
  return r;
}

inline std::string emit_matrix(const MatrixBuffer& m) {
  assert(m.rows > 0 && m.cols > 0);
  assert(m.elems.size() == static_cast<size_t>(m.rows) * m.cols);
  const FormatSpec& spec = format_spec(m.fmt);
  const int digits = storage_hex_digits(m.fmt);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  {
    std::ostringstream os;
    os << "mmat " << spec.name << ' ' << m.rows << ' ' << m.cols << '\n';
    out = os.str();
  }
  out.reserve(out.size() +
              static_cast<size_t>(m.rows) * m.cols * (digits + 1));
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) {
      uint64_t v = m.at(r, c);
      assert(spec.storage_bits >= 64 || (v >> spec.storage_bits) == 0);
      for (int d = digits - 1; d >= 0; --d)
        out.push_back(kHex[(v >> (4 * d)) & 0xF]);
      out.push_back(c + 1 == m.cols ? '\n' : ' ');
    }
  }
  return out;
}

// --- file wrappers ----------------------------------------------------------

inline MatrixParseResult read_matrix_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    MatrixParseResult r;
    r.error = {0, 0, "cannot open file '" + path + "'"};
    return r;
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  return parse_matrix(text);
}

inline bool write_matrix_file(const std::string& path, const MatrixBuffer& m,
                              std::string* error = nullptr) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    if (error) *error = "cannot write file '" + path + "'";
    return false;
  }
  out << emit_matrix(m);
  out.flush();
  if (!out) {
    if (error) *error = "write to '" + path + "' failed";
    return false;
  }
  return true;
}

}  // namespace tcmm
