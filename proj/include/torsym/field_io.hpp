#pragma once

// Text field format:
//
//   TORSYM-FIELD 1
//   dim <d>
//   n <n>
//   ell <half period, shortest round-trip decimal>
//   values
//   <n^d values, one per line, row-major with the last axis fastest>
//
// Values are written with shortest round-trip formatting so save/load is
// bit-exact.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>

#include "torsym/field.hpp"

namespace torsym {

inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline void write_field(std::ostream& os, const ScalarField& u) {
  const Grid& g = u.grid();
  os << "TORSYM-FIELD 1\n"
     << "dim " << g.dim() << '\n'
     << "n " << g.n() << '\n'
     << "ell " << format_double(g.ell()) << '\n'
     << "values\n";
  for (double v : u.values()) os << format_double(v) << '\n';
}

namespace detail {

class LineReader {
 public:
  explicit LineReader(std::istream& is) : is_(is) {}

  std::string next(const char* expecting) {
    std::string line;
    while (std::getline(is_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return line;
    }
    throw FormatError("field file: unexpected end of input at line " + std::to_string(line_no_ + 1) +
                      ", expecting " + expecting);
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError("field file line " + std::to_string(line_no_) + ": " + what);
  }

  int line() const { return line_no_; }

 private:
  std::istream& is_;
  int line_no_ = 0;
};

template <class T>
T parse_number(const std::string& text, const LineReader& r, const char* what) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  while (first < last && (*first == ' ' || *first == '\t')) ++first;
  while (last > first && (last[-1] == ' ' || last[-1] == '\t')) --last;
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last) r.fail(std::string("cannot parse ") + what + " from '" + text + "'");
  return value;
}

template <class T>
T keyed(LineReader& r, const std::string& key) {
  const std::string line = r.next(key.c_str());
  if (line.rfind(key + ' ', 0) != 0) r.fail("expected '" + key + " <value>', got '" + line + "'");
  return parse_number<T>(line.substr(key.size() + 1), r, key.c_str());
}

}  // namespace detail

inline ScalarField read_field(std::istream& is) {
  detail::LineReader r(is);
  const std::string magic = r.next("header");
  if (magic != "TORSYM-FIELD 1") r.fail("bad header '" + magic + "' (expected 'TORSYM-FIELD 1')");
  const int dim = detail::keyed<int>(r, "dim");
  if (dim < 1 || dim > kMaxDim) r.fail("dim must be 1, 2 or 3, got " + std::to_string(dim));
  const int n = detail::keyed<int>(r, "n");
  if (n < 4 || n % 2 != 0) r.fail("samples per axis must be even and >= 4, got " + std::to_string(n));
  const double ell = detail::keyed<double>(r, "ell");
  Grid g = [&] {
    try {
      return Grid(dim, n, ell);
    } catch (const ConfigError& e) {
      r.fail(e.what());
    }
  }();
  if (r.next("values") != "values") r.fail("expected 'values'");
  std::vector<double> values(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    values[k] = detail::parse_number<double>(r.next("a value"), r, "value");
    if (!std::isfinite(values[k])) r.fail("non-finite value");
  }
  std::string rest;
  while (std::getline(is, rest)) {
    if (rest.find_first_not_of(" \t\r") != std::string::npos) {
      throw FormatError("field file line " + std::to_string(r.line() + 1) + ": trailing data after " +
                        std::to_string(g.size()) + " values");
    }
  }
  return ScalarField(g, std::move(values));
}

/// Writes `content` to `path` through a temporary file in the same directory
/// followed by a rename.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot open '" + tmp.string() + "' for writing");
    os << content;
    os.flush();
    if (!os) throw Error("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
  }
}

inline void save_field(const std::filesystem::path& path, const ScalarField& u) {
  std::ostringstream os;
  write_field(os, u);
  atomic_write(path, os.str());
}

inline ScalarField load_field(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open field file '" + path.string() + "'");
  try {
    return read_field(is);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

/// One line per cell: coordinates then value.
inline void write_field_csv(std::ostream& os, const ScalarField& u) {
  const Grid& g = u.grid();
  for (int a = 0; a < g.dim(); ++a) os << 'x' << a << ',';
  os << "value\n";
  for (std::size_t k = 0; k < g.size(); ++k) {
    const MultiIndex idx = g.unflatten(k);
    for (int a = 0; a < g.dim(); ++a) os << format_double(g.coord(idx[a])) << ',';
    os << format_double(u[k]) << '\n';
  }
}

}  // namespace torsym
