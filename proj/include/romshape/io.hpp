#pragma once

#include <bit>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <json.hpp>

#include "romshape/error.hpp"
#include "romshape/numkernel.hpp"

namespace romshape {

namespace fs = std::filesystem;
using json = nlohmann::json;

static_assert(std::endian::native == std::endian::little, "f64le payloads assume a little-endian host");

inline const char* tool_version() { return "romshape 0.1.0"; }

inline std::string sha256_hex(const void* data, std::size_t size) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data, size, digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

inline std::string sha256_hex(const std::string& s) { return sha256_hex(s.data(), s.size()); }

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for " + path.string());
}

inline std::string file_sha256(const fs::path& path) { return sha256_hex(read_file(path)); }

/// Row-major little-endian bytes of a matrix.
inline std::string matrix_bytes(const Mat& m) {
  std::string bytes(static_cast<std::size_t>(m.size()) * sizeof(double), '\0');
  char* dst = bytes.data();
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      std::memcpy(dst, &v, sizeof(double));
      dst += sizeof(double);
    }
  return bytes;
}

inline Mat matrix_from_bytes(const char* src, Index rows, Index cols) {
  Mat m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) {
      double v;
      std::memcpy(&v, src, sizeof(double));
      src += sizeof(double);
      m(i, j) = v;
    }
  return m;
}

/// Writes `<path>` (payload) and `<path>.json` (descriptor).
inline void write_matrix(const fs::path& path, const Mat& m) {
  const std::string bytes = matrix_bytes(m);
  json desc = {{"rows", m.rows()},
               {"cols", m.cols()},
               {"dtype", "f64le"},
               {"layout", "row-major"},
               {"sha256", sha256_hex(bytes)}};
  write_file(path, bytes);
  write_file(fs::path(path.string() + ".json"), desc.dump(2) + "\n");
}

inline Mat read_matrix(const fs::path& path) {
  json desc;
  try {
    desc = json::parse(read_file(fs::path(path.string() + ".json")));
  } catch (const json::exception& e) {
    throw FormatError("corrupted header for " + path.string() + ": " + e.what());
  }
  if (!desc.is_object() || !desc.contains("rows") || !desc.contains("cols") ||
      desc.value("dtype", "") != "f64le" || desc.value("layout", "") != "row-major")
    throw FormatError("corrupted header for " + path.string());
  const auto rows = desc["rows"].get<Index>();
  const auto cols = desc["cols"].get<Index>();
  if (rows < 0 || cols < 0) throw FormatError("corrupted header for " + path.string());
  const std::string bytes = read_file(path);
  if (bytes.size() != static_cast<std::size_t>(rows * cols) * sizeof(double))
    throw FormatError("dimension mismatch for " + path.string());
  if (desc.value("sha256", "") != sha256_hex(bytes))
    throw FormatError("checksum failure for " + path.string());
  return matrix_from_bytes(bytes.data(), rows, cols);
}

/// Shortest-exact text form used by every CSV writer ("%.17g").
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& token) {
  const char* s = token.c_str();
  while (*s == ' ' || *s == '\t') ++s;
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s, &end);
  while (end && (*end == ' ' || *end == '\t' || *end == '\r')) ++end;
  if (end == s || (end && *end != '\0')) throw FormatError("not a number: '" + token + "'");
  return v;
}

/// Parses a decimal literal scaled by 10^shift, with one correctly rounded conversion.
inline double parse_scaled(const std::string& token, int shift) {
  std::string t = token;
  while (!t.empty() && (t.back() == ' ' || t.back() == '\r' || t.back() == '\t')) t.pop_back();
  std::size_t start = t.find_first_not_of(" \t");
  t = start == std::string::npos ? "" : t.substr(start);
  const std::size_t epos = t.find_first_of("eE");
  long exponent = 0;
  std::string mantissa = t;
  if (epos != std::string::npos) {
    mantissa = t.substr(0, epos);
    exponent = static_cast<long>(parse_double(t.substr(epos + 1)));
  }
  parse_double(mantissa);  // validates the mantissa
  return parse_double(mantissa + "e" + std::to_string(exponent + shift));
}

/// Inverse of parse_scaled: the exact text of v with its decimal exponent shifted by -shift.
inline std::string format_scaled(double v, int shift) {
  if (!std::isfinite(v)) return format_double(v);
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  std::string s(buf);
  const std::size_t epos = s.find('e');
  const long exponent = std::strtol(s.c_str() + epos + 1, nullptr, 10) - shift;
  return s.substr(0, epos) + "e" + std::to_string(exponent);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

/// CSV with a header row; each matrix column becomes one CSV row prefixed by k.
inline std::string columns_csv(const Mat& m, const std::vector<std::string>& header) {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
  out += "\n";
  for (Index k = 0; k < m.cols(); ++k) {
    out += std::to_string(k);
    for (Index i = 0; i < m.rows(); ++i) out += "," + format_double(m(i, k));
    out += "\n";
  }
  return out;
}

/// Reads back a columns_csv file (dropping the leading k column).
inline Mat read_columns_csv(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    std::vector<double> r;
    for (std::size_t i = 1; i < cells.size(); ++i) r.push_back(parse_double(cells[i]));
    rows.push_back(std::move(r));
  }
  if (rows.empty()) return Mat(0, 0);
  Mat m(static_cast<Index>(rows[0].size()), static_cast<Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].size() != rows[0].size()) throw FormatError("ragged csv " + path.string());
    for (std::size_t i = 0; i < rows[k].size(); ++i) m(static_cast<Index>(i), static_cast<Index>(k)) = rows[k][i];
  }
  return m;
}

inline std::vector<std::string> indexed_header(const std::string& first, const std::string& prefix, Index n) {
  std::vector<std::string> h{first};
  for (Index i = 0; i < n; ++i) h.push_back(prefix + std::to_string(i));
  return h;
}

inline std::vector<std::string> output_header(Index p) {
  std::vector<std::string> h{"k"};
  for (Index j = 0; j < p / 2; ++j) {
    h.push_back("x" + std::to_string(j));
    h.push_back("z" + std::to_string(j));
  }
  return h;
}

/// manifest.json for a directory: config hash, tool version, sha256 of every other file.
inline json write_manifest(const fs::path& dir, const std::string& config_hash, json extra = json::object()) {
  std::vector<std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string rel = fs::relative(entry.path(), dir).generic_string();
    if (rel == "manifest.json") continue;
    files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  json checksums = json::object();
  for (const auto& f : files) checksums[f] = file_sha256(dir / f);
  json manifest = std::move(extra);
  manifest["config_hash"] = config_hash;
  manifest["tool_version"] = tool_version();
  manifest["files"] = checksums;
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

}  // namespace romshape
