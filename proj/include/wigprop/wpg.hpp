#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>

#include "phase.hpp"

namespace wigprop {

// ASCII header, one key=value per line, blank line, then np*nq little-endian
// float64 values, p index slow.
struct GridFileHeader {
  std::string magic = "WPG1";
  std::string kind = "propagator";  // propagator | wigner | symbol-re | symbol-im
  std::string route = "exact";
  int np = 0, nq = 0;
  double pmin = 0, pmax = 0, qmin = 0, qmax = 0;
  double t = 0;
  double origin_p = 0, origin_q = 0;
  std::string model;
  std::string encoding = "f64le";

  bool operator==(const GridFileHeader&) const = default;
  PhaseGrid grid() const { return PhaseGrid(pmin, pmax, np, qmin, qmax, nq); }
};

namespace detail {

// shortest representation that parses back to the same double
inline std::string exact_double(double x) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

inline double parse_header_double(const std::string& key, const std::string& v) {
  double x = 0;
  auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) throw NumericError("WPG1 header: bad value for " + key);
  return x;
}

inline int parse_header_int(const std::string& key, const std::string& v) {
  int x = 0;
  auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) throw NumericError("WPG1 header: bad value for " + key);
  return x;
}

inline void put_le(std::string& out, double v) {
  std::uint64_t u = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

inline double get_le(const unsigned char* b) {
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(u);
}

}  // namespace detail

inline GridFileHeader make_header(const ScalarField& f, std::string kind, std::string route, double t, PhasePoint origin,
                                  std::string model) {
  GridFileHeader h;
  h.kind = std::move(kind);
  h.route = std::move(route);
  h.np = f.grid.np();
  h.nq = f.grid.nq();
  h.pmin = f.grid.p.min;
  h.pmax = f.grid.p.max;
  h.qmin = f.grid.q.min;
  h.qmax = f.grid.q.max;
  h.t = t;
  h.origin_p = origin.p;
  h.origin_q = origin.q;
  h.model = std::move(model);
  return h;
}

inline std::string encode_field(const GridFileHeader& h, const ScalarField& f) {
  if (h.np != f.grid.np() || h.nq != f.grid.nq()) throw ConfigError("WPG1 header does not match the field shape");
  using detail::exact_double;
  std::string s;
  s += "magic=" + h.magic + "\n";
  s += "kind=" + h.kind + "\n";
  s += "route=" + h.route + "\n";
  s += "np=" + std::to_string(h.np) + "\n";
  s += "nq=" + std::to_string(h.nq) + "\n";
  s += "pmin=" + exact_double(h.pmin) + "\n";
  s += "pmax=" + exact_double(h.pmax) + "\n";
  s += "qmin=" + exact_double(h.qmin) + "\n";
  s += "qmax=" + exact_double(h.qmax) + "\n";
  s += "t=" + exact_double(h.t) + "\n";
  s += "origin_p=" + exact_double(h.origin_p) + "\n";
  s += "origin_q=" + exact_double(h.origin_q) + "\n";
  s += "model=" + h.model + "\n";
  s += "encoding=" + h.encoding + "\n";
  s += "\n";
  s.reserve(s.size() + 8 * f.values.size());
  for (double v : f.values) detail::put_le(s, v);
  return s;
}

inline std::pair<GridFileHeader, ScalarField> decode_field(const std::string& bytes) {
  std::size_t pos = 0;
  std::map<std::string, std::string> kv;
  bool blank = false;
  while (pos < bytes.size()) {
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string::npos) break;
    const std::string line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) {
      blank = true;
      break;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw NumericError("WPG1 header: malformed line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (kv["magic"] != "WPG1") throw NumericError("not a WPG1 file (magic '" + kv["magic"] + "')");
  if (!blank) throw NumericError("WPG1 header is not terminated by a blank line");
  static const char* required[] = {"kind", "route", "np", "nq", "pmin", "pmax", "qmin",
                                   "qmax", "t", "origin_p", "origin_q", "model", "encoding"};
  for (const char* k : required)
    if (!kv.count(k)) throw NumericError(std::string("WPG1 header: missing ") + k);
  GridFileHeader h;
  h.kind = kv["kind"];
  if (h.kind != "propagator" && h.kind != "wigner" && h.kind != "symbol-re" && h.kind != "symbol-im")
    throw NumericError("WPG1 header: unknown kind " + h.kind);
  h.route = kv["route"];
  h.np = detail::parse_header_int("np", kv["np"]);
  h.nq = detail::parse_header_int("nq", kv["nq"]);
  h.pmin = detail::parse_header_double("pmin", kv["pmin"]);
  h.pmax = detail::parse_header_double("pmax", kv["pmax"]);
  h.qmin = detail::parse_header_double("qmin", kv["qmin"]);
  h.qmax = detail::parse_header_double("qmax", kv["qmax"]);
  h.t = detail::parse_header_double("t", kv["t"]);
  h.origin_p = detail::parse_header_double("origin_p", kv["origin_p"]);
  h.origin_q = detail::parse_header_double("origin_q", kv["origin_q"]);
  h.model = kv["model"];
  h.encoding = kv["encoding"];
  if (h.encoding != "f64le") throw NumericError("WPG1 header: unsupported encoding " + h.encoding);
  PhaseGrid g;
  try {
    g = h.grid();
  } catch (const ConfigError& e) {
    throw NumericError(std::string("WPG1 header: ") + e.what());
  }
  const std::size_t need = 8 * g.size();
  const std::size_t have = bytes.size() - pos;
  if (have < need) throw NumericError("WPG1 payload truncated");
  if (have > need) throw NumericError("WPG1 payload has trailing bytes");
  ScalarField f(g);
  const auto* b = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  for (std::size_t i = 0; i < g.size(); ++i) {
    f.values[i] = detail::get_le(b + 8 * i);
    if (std::isnan(f.values[i])) throw NumericError("WPG1 payload contains NaN");
  }
  return {h, std::move(f)};
}

inline void write_field(const std::string& path, const GridFileHeader& h, const ScalarField& f) {
  const std::string s = encode_field(h, f);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open " + path + " for writing");
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
  if (!os) throw NumericError("write failed: " + path);
}

inline std::pair<GridFileHeader, ScalarField> read_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open " + path);
  const std::string s((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_field(s);
}

// debugging export: one p row per line
inline void write_text(const std::string& path, const ScalarField& f) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open " + path + " for writing");
  for (int i = 0; i < f.grid.np(); ++i) {
    for (int j = 0; j < f.grid.nq(); ++j) os << (j ? " " : "") << detail::exact_double(f.at(i, j));
    os << '\n';
  }
}

inline void write_trajectory(const std::string& path, const std::vector<double>& t, const std::vector<PhasePoint>& r) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open " + path + " for writing");
  os << "# t p q\n";
  for (std::size_t i = 0; i < t.size(); ++i)
    os << detail::exact_double(t[i]) << ' ' << detail::exact_double(r[i].p) << ' ' << detail::exact_double(r[i].q)
       << '\n';
}

}  // namespace wigprop
