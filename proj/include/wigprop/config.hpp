#pragma once

#include <charconv>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "models.hpp"
#include "quantum.hpp"
#include "semiclassical.hpp"

namespace wigprop {

// Everything one run needs. Defaults reproduce the Morse run of the first figure.
struct RunConfig {
  SystemParams system{};
  // phase grid for r''
  double pmin = -6.0, pmax = 6.0, qmin = -3.02, qmax = 7.22;
  int np = 128, nq = 128;
  // position box
  double box_qmin = -5.98, box_qmax = 34.94;
  int box_n = 1023;
  PhasePoint origin{0.0, 0.1};
  bool quarter = true;  // t = 2 pi / (4 omega)
  double t = 0.0;
  Route route = Route::exact;
  Resolution res{0.15, 0.12};
  ScanConfig scan{};
  std::string out = "wigprop.wpg";
  int workers = 1;
  // subcommand extras
  std::vector<double> masses{0.25, 1.0, 2.0, 10.0};
  double L = 1.0;
  double modular_dt = 0.05;  // smaller steps expose the unresolved high-energy tail
  std::string suite = "all";
  bool text_export = false;
  bool monitor = true;

  PhaseGrid grid() const { return PhaseGrid(pmin, pmax, np, qmin, qmax, nq); }
  QGrid qgrid() const { return QGrid{box_qmin, box_qmax, box_n}; }
  double time() const { return quarter ? quarter_period(system) : t; }
};

// ConfigError carrying the offending key
struct KeyError : ConfigError {
  std::string key;
  KeyError(std::string k, const std::string& msg) : ConfigError(k + ": " + msg), key(std::move(k)) {}
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const char* e = v.data() + v.size();
  auto r = std::from_chars(v.data(), e, x);
  if (r.ec != std::errc() || r.ptr != e || !std::isfinite(x)) throw KeyError(key, "not a number: '" + v + "'");
  return x;
}

inline int to_int(const std::string& key, const std::string& v) {
  int x = 0;
  const char* e = v.data() + v.size();
  auto r = std::from_chars(v.data(), e, x);
  if (r.ec != std::errc() || r.ptr != e) throw KeyError(key, "not an integer: '" + v + "'");
  return x;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw KeyError(key, "not a boolean: '" + v + "'");
}

inline std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
  if (out.empty()) throw KeyError(key, "empty list");
  return out;
}

}  // namespace detail

using KeyValues = std::vector<std::pair<std::string, std::string>>;

// flat key=value lines, '#' starts a comment
inline KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    kv.emplace_back(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  return kv;
}

inline void apply_key(RunConfig& c, const std::string& k, const std::string& v) {
  using namespace detail;
  auto& pot = c.system.potential;
  if (k == "mass") c.system.mass = to_double(k, v);
  else if (k == "potential") {
    if (v == "morse") pot.kind = PotentialKind::morse;
    else if (v == "harmonic") pot.kind = PotentialKind::harmonic;
    else if (v == "free") pot.kind = PotentialKind::free;
    else throw KeyError(k, "expected morse, harmonic or free");
  } else if (k == "D0") pot.D0 = to_double(k, v);
  else if (k == "alpha") pot.alpha = to_double(k, v);
  else if (k == "qe") pot.qe = to_double(k, v);
  else if (k == "omega") pot.omega = to_double(k, v);
  else if (k == "hbar") {
    const double h = to_double(k, v);
    if (!(h > 0)) throw KeyError(k, "must be positive");
    c.system.conv = WeylConventions(h);
  } else if (k == "pmin") c.pmin = to_double(k, v);
  else if (k == "pmax") c.pmax = to_double(k, v);
  else if (k == "qmin") c.qmin = to_double(k, v);
  else if (k == "qmax") c.qmax = to_double(k, v);
  else if (k == "np") c.np = to_int(k, v);
  else if (k == "nq") c.nq = to_int(k, v);
  else if (k == "box_qmin") c.box_qmin = to_double(k, v);
  else if (k == "box_qmax") c.box_qmax = to_double(k, v);
  else if (k == "box_n") c.box_n = to_int(k, v);
  else if (k == "origin_p") c.origin.p = to_double(k, v);
  else if (k == "origin_q") c.origin.q = to_double(k, v);
  else if (k == "origin") {
    const auto l = to_list(k, v);
    if (l.size() != 2) throw KeyError(k, "expected p,q");
    c.origin = {l[0], l[1]};
  } else if (k == "t") {
    if (v == "quarter-period") c.quarter = true;
    else {
      c.quarter = false;
      c.t = to_double(k, v);
    }
  } else if (k == "route") {
    if (v == "exact") c.route = Route::exact;
    else if (v == "semiclassical") c.route = Route::semiclassical;
    else if (v == "classical") c.route = Route::classical;
    else throw KeyError(k, "expected exact, semiclassical or classical");
  } else if (k == "sigma_p") c.res.sigma_p = to_double(k, v);
  else if (k == "sigma_q") c.res.sigma_q = to_double(k, v);
  else if (k == "scan_extent_p") c.scan.extent_p = to_double(k, v);
  else if (k == "scan_extent_q") c.scan.extent_q = to_double(k, v);
  else if (k == "scan_n") c.scan.n = to_int(k, v);
  else if (k == "eps_det") c.scan.eps_det = to_double(k, v);
  else if (k == "newton_tol") c.scan.newton_tol = to_double(k, v);
  else if (k == "max_iter") c.scan.max_iter = to_int(k, v);
  else if (k == "multistart") c.scan.multistart = to_int(k, v);
  else if (k == "dt") c.scan.dt = to_double(k, v);
  else if (k == "cutoff") c.scan.cutoff = to_double(k, v);
  else if (k == "out") c.out = v;
  else if (k == "workers") c.workers = to_int(k, v);
  else if (k == "masses") c.masses = to_list(k, v);
  else if (k == "L") c.L = to_double(k, v);
  else if (k == "modular_dt") c.modular_dt = to_double(k, v);
  else if (k == "suite") c.suite = v;
  else if (k == "text_export") c.text_export = to_bool(k, v);
  else if (k == "monitor") c.monitor = to_bool(k, v);
  else throw KeyError(k, "unknown key");
}

// Re-throws each invariant violation as a KeyError naming the key.
inline void validate(const RunConfig& c) {
  if (!(c.system.mass > 0)) throw KeyError("mass", "must be positive");
  const auto& pot = c.system.potential;
  if (pot.kind == PotentialKind::morse && !(pot.D0 > 0)) throw KeyError("D0", "must be positive");
  if (pot.kind == PotentialKind::morse && !(pot.alpha > 0)) throw KeyError("alpha", "must be positive");
  if (pot.kind == PotentialKind::harmonic && !(pot.omega > 0)) throw KeyError("omega", "must be positive");
  if (!(c.pmax > c.pmin)) throw KeyError("pmax", "must exceed pmin");
  if (!(c.qmax > c.qmin)) throw KeyError("qmax", "must exceed qmin");
  if (c.np < 2) throw KeyError("np", "must be >= 2");
  if (c.nq < 2) throw KeyError("nq", "must be >= 2");
  if (!(c.box_qmax > c.box_qmin)) throw KeyError("box_qmax", "must exceed box_qmin");
  if (c.box_n < 3 || c.box_n % 2 == 0) throw KeyError("box_n", "must be odd and >= 3");
  if (!c.quarter && c.t < 0) throw KeyError("t", "must be non-negative");
  if (c.res.sigma_p < 0) throw KeyError("sigma_p", "must be non-negative");
  if (c.res.sigma_q < 0) throw KeyError("sigma_q", "must be non-negative");
  if ((c.res.sigma_p == 0) != (c.res.sigma_q == 0)) throw KeyError("sigma_q", "sigma_p and sigma_q must both be zero or both positive");
  if (c.scan.n < 2) throw KeyError("scan_n", "must be >= 2");
  if (!(c.scan.extent_p > 0)) throw KeyError("scan_extent_p", "must be positive");
  if (!(c.scan.extent_q > 0)) throw KeyError("scan_extent_q", "must be positive");
  if (!(c.scan.eps_det > 0)) throw KeyError("eps_det", "must be positive");
  if (c.scan.dt < 0) throw KeyError("dt", "must be non-negative");
  if (c.workers < 1) throw KeyError("workers", "must be >= 1");
  for (double m : c.masses)
    if (!(m > 0)) throw KeyError("masses", "every mass must be positive");
  if (!(c.modular_dt > 0)) throw KeyError("modular_dt", "must be positive");
  if (c.suite != "all" && c.suite != "properties" && c.suite != "kernel")
    throw KeyError("suite", "expected all, properties or kernel");
  const PhaseGrid g = c.grid();
  if (!g.contains(c.origin)) throw KeyError("origin", "lies outside the phase grid");
}

inline RunConfig parse_config(const std::string& text, const KeyValues& overrides = {}) {
  RunConfig c;
  for (const auto& [k, v] : parse_key_values(text)) apply_key(c, k, v);
  for (const auto& [k, v] : overrides) apply_key(c, k, v);
  validate(c);
  return c;
}

inline std::string config_help() {
  return R"(Config keys (key=value, '#' comments; flags override the file):
  mass=0.5            particle mass
  potential=morse     morse | harmonic | free
  D0=1 alpha=1.25 qe=0 omega=0   potential parameters (omega: harmonic only)
  hbar=1
  pmin=-6 pmax=6 np=128          r'' momentum axis, nodes pmin + i (pmax-pmin)/np
  qmin=-3.02 qmax=7.22 nq=128    r'' position axis; nodes must sit on the box lattice or halfway
  box_qmin=-5.98 box_qmax=34.94 box_n=1023   periodic position box, odd box_n
  origin=0,0.1        r' as p,q (also origin_p, origin_q); q' must be a box node
  t=quarter-period    or an absolute time
  route=exact         exact | semiclassical | classical
  sigma_p=0.15 sigma_q=0.12      slice resolution; 0,0 selects the bare lattice point
  scan_extent_p=8 scan_extent_q=8 scan_n=512 eps_det=1e-10 newton_tol=1e-10
  max_iter=60 multistart=24 dt=0 cutoff=4   semiclassical scan (dt=0: period/2000)
  out=wigprop.wpg workers=1      (WIGPROP_WORKERS sets the default worker count)
  masses=0.25,1,2,10  sweep-mass masses
  L=1 modular_dt=0.05 modular check translation and step
  suite=all           verify suite: all | properties | kernel
  text_export=false   also write <out>.txt
  monitor=true        fail when the evolved operator reaches the box edge
)";
}

}  // namespace wigprop
