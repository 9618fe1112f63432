#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "classical.hpp"
#include "quantum.hpp"
#include "semiclassical.hpp"

namespace wigprop {

struct CheckReport {
  std::string name;
  double metric = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string details;
};

inline CheckReport make_report(std::string name, double metric, double tol, std::string details = {}) {
  const bool ok = std::isfinite(metric) && metric <= tol;
  return {std::move(name), metric, tol, ok, std::move(details)};
}

inline double rms_difference(const ScalarField& a, const ScalarField& b) {
  if (!a.grid.same_as(b.grid)) throw ConfigError("rms_difference: different grids");
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) s += (a.values[i] - b.values[i]) * (a.values[i] - b.values[i]);
  return std::sqrt(s / a.values.size());
}

inline double absolute_mass(const ScalarField& f) {
  double s = 0.0;
  for (double v : f.values) s += std::abs(v);
  return s * f.grid.cell_area();
}

// fraction of |G| outside the cell that contains r
inline double mass_outside_cell(const ScalarField& f, PhasePoint r) {
  const long ip = f.grid.p.nearest(r.p), iq = f.grid.q.nearest(r.q);
  double in = 0.0, all = 0.0;
  for (int i = 0; i < f.grid.np(); ++i)
    for (int j = 0; j < f.grid.nq(); ++j) {
      const double a = std::abs(f.at(i, j));
      all += a;
      if (i == ip && j == iq) in += a;
    }
  return all > 0 ? (all - in) / all : 1.0;
}

// N = int max(-G, 0) / int |G|
inline double structure_metric(const ScalarField& f) {
  double neg = 0.0, all = 0.0;
  for (double v : f.values) {
    all += std::abs(v);
    if (v < 0) neg -= v;
  }
  return all > 0 ? neg / all : 0.0;
}

inline CheckReport check_identity_t0(const PropagatorSlice& s) {
  std::ostringstream os;
  os << "route=" << route_name(s.route) << " t=" << s.t;
  const double tol = s.route == Route::semiclassical ? 1e-2 : 1e-6;
  return make_report("identity_t0", mass_outside_cell(s.field, s.origin), tol, os.str());
}

// Offsets cover 4x the |G|-weighted RMS spread of an exact slice about r',
// with a floor of two grid cells per axis.
inline ScanConfig scan_for_support(ScanConfig cfg, const PropagatorSlice& exact) {
  const ScalarField& f = exact.field;
  double w = 0, vp = 0, vq = 0;
  for (int i = 0; i < f.grid.np(); ++i)
    for (int j = 0; j < f.grid.nq(); ++j) {
      const double a = std::abs(f.at(i, j));
      const PhasePoint d = f.grid.node(i, j) - exact.origin;
      w += a;
      vp += a * d.p * d.p;
      vq += a * d.q * d.q;
    }
  cfg.extent_p = std::max(4.0 * std::sqrt(vp / w), 2.0 * f.grid.dp());
  cfg.extent_q = std::max(4.0 * std::sqrt(vq / w), 2.0 * f.grid.dq());
  return cfg;
}

inline CheckReport check_reality(const PropagatorSlice& s) {
  return make_report("reality", s.imag_residue, 1e-9, std::string("route=") + route_name(s.route));
}

// Test state: minimum-uncertainty Gaussian at r0 with the harmonic ground-state width
// (unit frequency for a free particle).
inline Eigen::VectorXcd test_state(const QuantumSystem& qs, PhasePoint r0) {
  const double w = qs.params.potential.kind == PotentialKind::free ? 1.0 : natural_frequency(qs.params);
  return gaussian_state(qs.qgrid, r0, std::sqrt(qs.hbar() / (2.0 * qs.params.mass * w)), qs.hbar());
}

inline CheckReport check_chapman_kolmogorov(const QuantumSystem& qs, PhasePoint r0, double t, int workers = 1) {
  const PhaseGrid g = native_grid(qs.qgrid, qs.conv());
  const ScalarField w0 = wigner_of_state(test_state(qs, r0), qs.qgrid, g, qs.conv());
  const ScalarField full = evolve_wigner(qs, w0, t, workers);
  const ScalarField half = evolve_wigner(qs, evolve_wigner(qs, w0, t / 2, workers), t / 2, workers);
  std::ostringstream os;
  os << "t=" << t << " native lattice " << g.np() << "x" << g.nq();
  return make_report("chapman_kolmogorov", rms_difference(full, half), 1e-4, os.str());
}

inline CheckReport check_orthogonality(const QuantumSystem& qs, PhasePoint r0, double t, int workers = 1) {
  const PhaseGrid g = native_grid(qs.qgrid, qs.conv());
  const ScalarField w0 = wigner_of_state(test_state(qs, r0), qs.qgrid, g, qs.conv());
  const ScalarField back = evolve_wigner(qs, evolve_wigner(qs, w0, t, workers), -t, workers);
  std::ostringstream os;
  os << "forward " << t << " then back";
  return make_report("orthogonality", rms_difference(w0, back), 1e-4, os.str());
}

// Wigner-normalized symbol of K at a single point
inline cplx wigner_at(const OperatorMatrix& K, PhasePoint r, const WeylConventions& conv) {
  PhaseGrid g;
  g.p = Axis{r.p, r.p + 1.0, 1};
  g.q = Axis{r.q, r.q + 1.0, 1};
  const auto h = detail::half_indices(g, K.qgrid);
  cplx v;
  detail::column_symbol([&](int a, int b) { return K.m(a, b); }, h[0], K.qgrid, g.p, conv.hbar(), &v, 1);
  return v / conv.h();
}

// G(r'', t; r', 0) against G(r', -t; r'', 0) on the bare lattice
inline CheckReport check_time_reversal(const QuantumSystem& qs, PhasePoint r1, PhasePoint r2, double t) {
  const Resolution bare{};
  const OperatorMatrix A1 = origin_operator(qs.qgrid, r1, bare, qs.hbar());
  const OperatorMatrix A2 = origin_operator(qs.qgrid, r2, bare, qs.hbar());
  const cplx fwd = wigner_at(OperatorEvolver(qs, A1).at(t), r2, qs.conv());
  const cplx bwd = wigner_at(OperatorEvolver(qs, A2).at(-t), r1, qs.conv());
  std::ostringstream os;
  os.precision(10);
  os << "G(r'',t;r')=" << fwd.real() << " G(r',-t;r'')=" << bwd.real();
  return make_report("time_reversal", std::abs(fwd - bwd), 1e-6, os.str());
}

struct SweepEntry {
  double mass = 0.0;
  double t = 0.0;
  double metric = 0.0;
  PropagatorSlice slice;
  PhasePoint classical;  // endpoint of the classical orbit from r'
  int peak_p = 0, peak_q = 0;
  long cl_p = 0, cl_q = 0;
  double peak_distance = 0.0;  // Chebyshev distance in cells
};

struct SweepTemplate {
  SystemParams params;  // reference mass
  QGrid qgrid;
  PhaseGrid grid;
  Resolution res;
  PhasePoint origin;
};

// Momentum-like quantities scale with sqrt(m / m_ref) between masses
// (natural momentum scale sqrt(2 m D0)); positions and the box stay fixed.
inline SweepEntry sweep_one(const SweepTemplate& tpl, double m, int workers) {
  SystemParams s = tpl.params;
  s.mass = m;
  const double k = std::sqrt(m / tpl.params.mass);
  PhaseGrid g = tpl.grid;
  g.p.min *= k;
  g.p.max *= k;
  Resolution r = tpl.res;
  r.sigma_p *= k;
  const PhasePoint o{tpl.origin.p * k, tpl.origin.q};
  const QuantumSystem qs(s, tpl.qgrid);
  SweepEntry e;
  e.mass = m;
  e.t = quarter_period(s);
  e.slice = wigner_propagator_exact(qs, o, e.t, g, r, workers);
  e.metric = structure_metric(e.slice.field);
  e.classical = classical_endpoint(s, o, e.t, default_dt(s));
  double best = -1;
  for (int i = 0; i < g.np(); ++i)
    for (int j = 0; j < g.nq(); ++j)
      if (std::abs(e.slice.field.at(i, j)) > best) {
        best = std::abs(e.slice.field.at(i, j));
        e.peak_p = i;
        e.peak_q = j;
      }
  e.cl_p = g.p.nearest(e.classical.p);
  e.cl_q = g.q.nearest(e.classical.q);
  e.peak_distance = static_cast<double>(std::max(std::labs(e.peak_p - e.cl_p), std::labs(e.peak_q - e.cl_q)));
  return e;
}

inline std::vector<SweepEntry> classical_limit_sweep(const SweepTemplate& tpl, const std::vector<double>& masses,
                                                     int workers = 1) {
  std::vector<SweepEntry> out;
  for (double m : masses) out.push_back(sweep_one(tpl, m, workers));
  return out;
}

inline bool strictly_decreasing(const std::vector<SweepEntry>& e) {
  for (std::size_t i = 1; i < e.size(); ++i)
    if (!(e[i].metric < e[i - 1].metric)) return false;
  return true;
}

// Uncentred: zero is meaningful for a signed field.
inline double normalized_cross_correlation(const ScalarField& a, const ScalarField& b) {
  if (!a.grid.same_as(b.grid)) throw ConfigError("cross-correlation: different grids");
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    ab += a.values[i] * b.values[i];
    aa += a.values[i] * a.values[i];
    bb += b.values[i] * b.values[i];
  }
  return aa > 0 && bb > 0 ? ab / std::sqrt(aa * bb) : 0.0;
}

// Dominant ridge: in each p row the node of largest |G|. Rows whose ridge value
// is below thr * max|G| are skipped; returns the sign changes along the rest.
inline int ridge_sign_changes(const ScalarField& f, double thr = 1e-2) {
  double mx = 0;
  for (double v : f.values) mx = std::max(mx, std::abs(v));
  int changes = 0, last = 0;
  for (int i = 0; i < f.grid.np(); ++i) {
    int best = 0;
    for (int j = 1; j < f.grid.nq(); ++j)
      if (std::abs(f.at(i, j)) > std::abs(f.at(i, best))) best = j;
    const double v = f.at(i, best);
    if (std::abs(v) <= thr * mx) continue;
    const int sg = v > 0 ? 1 : -1;
    if (last != 0 && sg != last) ++changes;
    last = sg;
  }
  return changes;
}

struct Lobe {
  int sign = 0;
  double weight = 0;  // integral of |G| over the lobe
  std::vector<std::size_t> cells;
};

// 4-connected same-sign components, largest weight first
inline std::vector<Lobe> sign_lobes(const ScalarField& f) {
  const int np = f.grid.np(), nq = f.grid.nq();
  std::vector<int> label(f.values.size(), -1);
  std::vector<Lobe> lobes;
  auto sg = [&](std::size_t k) { return (f.values[k] > 0) - (f.values[k] < 0); };
  for (std::size_t k0 = 0; k0 < f.values.size(); ++k0) {
    if (label[k0] >= 0 || sg(k0) == 0) continue;
    Lobe L;
    L.sign = sg(k0);
    std::vector<std::size_t> stack{k0};
    label[k0] = static_cast<int>(lobes.size());
    while (!stack.empty()) {
      const std::size_t k = stack.back();
      stack.pop_back();
      L.cells.push_back(k);
      L.weight += std::abs(f.values[k]) * f.grid.cell_area();
      const int i = static_cast<int>(k / nq), j = static_cast<int>(k % nq);
      const int di[] = {1, -1, 0, 0}, dj[] = {0, 0, 1, -1};
      for (int d = 0; d < 4; ++d) {
        const int a = i + di[d], b = j + dj[d];
        if (a < 0 || a >= np || b < 0 || b >= nq) continue;
        const std::size_t kk = f.grid.index(a, b);
        if (label[kk] < 0 && sg(kk) == L.sign) {
          label[kk] = label[k0];
          stack.push_back(kk);
        }
      }
    }
    lobes.push_back(std::move(L));
  }
  std::stable_sort(lobes.begin(), lobes.end(), [](const Lobe& a, const Lobe& b) { return a.weight > b.weight; });
  return lobes;
}

// Number of the `count` largest lobes of `ref` over which `test` integrates to the same sign.
inline int matching_lobes(const ScalarField& ref, const ScalarField& test, int count = 3) {
  if (!ref.grid.same_as(test.grid)) throw ConfigError("lobe comparison: different grids");
  const auto lobes = sign_lobes(ref);
  int ok = 0;
  for (int i = 0; i < count && i < static_cast<int>(lobes.size()); ++i) {
    double s = 0;
    for (std::size_t k : lobes[i].cells) s += test.values[k];
    if ((s > 0 ? 1 : s < 0 ? -1 : 0) == lobes[i].sign) ++ok;
  }
  return ok;
}

// Kernel properties: symplecticity, stability matrix vs finite differences,
// symbol round trip and lattice Moyal product against the matrix product.
inline CheckReport check_symplectic(const SystemParams& s, PhasePoint r0, double t) {
  const TrajectoryResult tr = integrate_trajectory(s, r0, t, default_dt(s));
  return make_report("symplectic", tr.max_det_error, 1e-8, "max |det M - 1| along the orbit");
}

inline CheckReport check_stability_fd(const SystemParams& s, PhasePoint r0, double t) {
  const double dt = default_dt(s);
  const StabilityMatrix M = integrate_trajectory(s, r0, t, dt).M;
  const StabilityMatrix F = finite_difference_jacobian(s, r0, t, dt);
  const StabilityMatrix d = M - F;
  const double e = std::max({std::abs(d.pp), std::abs(d.pq), std::abs(d.qp), std::abs(d.qq)});
  return make_report("stability_fd", e, 1e-5, "max element difference to the central-difference Jacobian");
}

// deterministic pseudo-random Hermitian operator on qg
inline OperatorMatrix test_operator(const QGrid& qg, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  CMatrix m(qg.n, qg.n);
  for (int a = 0; a < qg.n; ++a)
    for (int b = 0; b < qg.n; ++b) m(a, b) = cplx(u(rng), u(rng));
  return OperatorMatrix(qg, 0.5 * (m + m.adjoint()));
}

inline CheckReport check_weyl_roundtrip(const QGrid& qg, const WeylConventions& conv) {
  const OperatorMatrix A = test_operator(qg, 7);
  const OperatorMatrix B = operator_of_symbol(weyl_symbol(A, native_grid(qg, conv), conv), qg, conv);
  return make_report("weyl_roundtrip", (A.m - B.m).cwiseAbs().maxCoeff(), 1e-10,
                     "operator -> symbol -> operator, n=" + std::to_string(qg.n));
}

inline CheckReport check_moyal(const QGrid& qg, const WeylConventions& conv) {
  const PhaseGrid g = native_grid(qg, conv);
  const OperatorMatrix A = test_operator(qg, 11), B = test_operator(qg, 13);
  const ComplexField C = moyal_compose(weyl_symbol(A, g, conv), weyl_symbol(B, g, conv), qg, conv);
  const ComplexField ref = weyl_symbol(compose(A, B), g, conv);
  double s = 0.0;
  for (std::size_t i = 0; i < C.values.size(); ++i) s += std::norm(C.values[i] - ref.values[i]);
  return make_report("moyal", std::sqrt(s / C.values.size()), 1e-6,
                     "lattice Moyal product vs symbol of the matrix product, " + std::to_string(qg.n) + "^2");
}

inline std::vector<CheckReport> kernel_checks(const SystemParams& s, PhasePoint r0, double t) {
  const QGrid small{-4.0, 4.0, 33};
  return {check_symplectic(s, r0, t), check_stability_fd(s, r0, t), check_weyl_roundtrip(small, s.conv),
          check_moyal(small, s.conv)};
}

}  // namespace wigprop
