#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "models.hpp"
#include "parallel.hpp"
#include "weyl.hpp"

namespace wigprop {

// Periodic Fourier-grid kinetic energy; real symmetric for any n
// (the Nyquist mode of an even grid enters as a cosine).
inline RMatrix kinetic_matrix(const QGrid& qg, double mass, double hbar) {
  const int n = qg.n;
  const double L = qg.length();
  std::vector<double> row(n, 0.0);
  const int kmax = n / 2;
  for (int d = 0; d < n; ++d) {
    double s = 0.0;
    for (int k = -(n - 1) / 2; k <= kmax; ++k) {
      const double kap = 2.0 * pi * k / L;
      s += kap * kap * std::cos(kap * d * qg.dx());
    }
    row[d] = hbar * hbar / (2.0 * mass) * s / n;
  }
  RMatrix T(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) T(i, j) = row[std::abs(i - j)];
  return T;
}

// Matrix acting on grid vectors (not the kernel): (H v)_i = sum_j H_ij v_j.
inline RMatrix hamiltonian_matrix(const SystemParams& s, const QGrid& qg) {
  RMatrix H = kinetic_matrix(qg, s.mass, s.conv.hbar());
  for (int i = 0; i < qg.n; ++i) H(i, i) += potential(s, qg.x(i));
  return 0.5 * (H + H.transpose());
}

inline OperatorMatrix build_hamiltonian(const SystemParams& s, const QGrid& qg) {
  return OperatorMatrix(qg, hamiltonian_matrix(s, qg).cast<cplx>() / qg.dx());
}

struct EigenSystem {
  Eigen::VectorXd energies;  // ascending
  RMatrix states;            // columns, unit Euclidean norm
};

inline EigenSystem eigensystem(const RMatrix& H) {
  Eigen::SelfAdjointEigenSolver<RMatrix> es(H);
  if (es.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

// Everything the exact route needs, computed once per system.
struct QuantumSystem {
  SystemParams params;
  QGrid qgrid;
  RMatrix H;
  EigenSystem eig;

  QuantumSystem(const SystemParams& p, const QGrid& qg) : params(p), qgrid(qg) {
    p.validate();
    if (qg.n < 3 || !(qg.max > qg.min)) throw ConfigError("position grid needs n >= 3 and max > min");
    H = hamiltonian_matrix(p, qg);
    eig = eigensystem(H);
  }
  double hbar() const { return params.conv.hbar(); }
  const WeylConventions& conv() const { return params.conv; }
};

// U = sum_k e^{-i E_k t/hbar} |k><k| as a matrix on grid vectors
inline CMatrix propagator_matrix(const EigenSystem& eig, double t, double hbar) {
  const Eigen::ArrayXd ph = -eig.energies.array() * t / hbar;
  const RMatrix& S = eig.states;
  const RMatrix re = S * ph.cos().matrix().asDiagonal() * S.transpose();
  const RMatrix im = S * ph.sin().matrix().asDiagonal() * S.transpose();
  CMatrix U(S.rows(), S.cols());
  U.real() = re;
  U.imag() = im;
  return U;
}

inline OperatorMatrix propagator_operator(const QuantumSystem& qs, double t) {
  return OperatorMatrix(qs.qgrid, propagator_matrix(qs.eig, t, qs.hbar()) / qs.qgrid.dx());
}

// rho(t) = U rho U^dagger, done in the energy basis so repeated times are cheap
struct OperatorEvolver {
  const QuantumSystem& qs;
  CMatrix rho_e;  // S^T rho S, matrix form

  OperatorEvolver(const QuantumSystem& q, const OperatorMatrix& rho) : qs(q) {
    if (!(rho.qgrid == q.qgrid)) throw ConfigError("operator and system use different position grids");
    const RMatrix& S = q.eig.states;
    const CMatrix m = rho.m * q.qgrid.dx();
    CMatrix tmp(S.cols(), S.cols());
    tmp.real() = S.transpose() * m.real() * S;
    tmp.imag() = S.transpose() * m.imag() * S;
    rho_e = std::move(tmp);
  }
  OperatorMatrix at(double t) const {
    const auto& E = qs.eig.energies;
    const int n = static_cast<int>(E.size());
    CMatrix r(n, n);
    for (int b = 0; b < n; ++b)
      for (int a = 0; a < n; ++a) r(a, b) = rho_e(a, b) * std::polar(1.0, -(E(a) - E(b)) * t / qs.hbar());
    const RMatrix& S = qs.eig.states;
    CMatrix out(n, n);
    out.real() = S * r.real() * S.transpose();
    out.imag() = S * r.imag() * S.transpose();
    return OperatorMatrix(qs.qgrid, out / qs.qgrid.dx());
  }
};

inline Eigen::VectorXcd evolve_state(const QuantumSystem& qs, const Eigen::VectorXcd& psi, double t) {
  const RMatrix& S = qs.eig.states;
  Eigen::VectorXcd c = S.transpose().cast<cplx>() * psi;
  for (int k = 0; k < c.size(); ++k) c(k) *= std::polar(1.0, -qs.eig.energies(k) * t / qs.hbar());
  return S.cast<cplx>() * c;
}

inline ComplexField weyl_propagator_symbol(const QuantumSystem& qs, double t, const PhaseGrid& grid, int workers = 1) {
  return weyl_symbol(propagator_operator(qs, t), grid, qs.conv().with_norm(SymbolNorm::weyl), workers);
}

// Phase-space resolution of a slice. Zero widths select the bare lattice
// phase-point operator; positive widths replace it by the operator whose
// Wigner function is the normalized Gaussian of those widths around r'.
struct Resolution {
  double sigma_p = 0.0;
  double sigma_q = 0.0;
  bool bare() const { return sigma_p == 0.0 && sigma_q == 0.0; }
  void validate() const {
    if (sigma_p < 0.0 || sigma_q < 0.0) throw ConfigError("resolution widths must be non-negative");
    if ((sigma_p == 0.0) != (sigma_q == 0.0)) throw ConfigError("resolution widths must both be zero or both positive");
  }
};

inline long origin_node(const QGrid& qg, double q) {
  const double x = (q - qg.min) / qg.dx();
  const long j = std::lround(x);
  if (std::abs(x - j) > 1e-6 || j < 0 || j >= qg.n)
    throw ConfigError("origin q must coincide with a position-grid node");
  return j;
}

// Operator whose Wigner function is the (resolved) delta at r'.
inline OperatorMatrix origin_operator(const QGrid& qg, PhasePoint r0, const Resolution& res, double hbar) {
  res.validate();
  const int n = qg.n;
  const double dx = qg.dx();
  CMatrix m = CMatrix::Zero(n, n);
  if (res.bare()) {
    if (n % 2 == 0) throw ConfigError("the bare lattice operator needs an odd position grid");
    const long j = origin_node(qg, r0.q);
    const int mh = (n - 1) / 2;
    for (int k = -mh; k <= mh; ++k)
      m(detail::wrap(static_cast<int>(j + k), n), detail::wrap(static_cast<int>(j - k), n)) =
          std::polar(1.0 / dx, r0.p * 2.0 * k * dx / hbar);
    return OperatorMatrix(qg, std::move(m));
  }
  const double sq = res.sigma_q, sp = res.sigma_p;
  for (int b = 0; b < n; ++b)
    for (int a = 0; a < n; ++a) {
      const double c = 0.5 * (qg.x(a) + qg.x(b)) - r0.q, d = qg.x(a) - qg.x(b);
      m(a, b) = std::exp(-c * c / (2 * sq * sq) - sp * sp * d * d / (2 * hbar * hbar)) * std::polar(1.0, r0.p * d / hbar);
    }
  const cplx tr = m.trace() * dx;
  if (std::abs(tr) < 1e-300) throw NumericError("resolution kernel has zero trace; sigma_q is far below the grid step");
  m /= tr;
  return OperatorMatrix(qg, std::move(m));
}

enum class Route { exact, semiclassical, classical };

inline const char* route_name(Route r) {
  switch (r) {
    case Route::exact: return "exact";
    case Route::semiclassical: return "semiclassical";
    default: return "classical";
  }
}

struct PropagatorSlice {
  ScalarField field;
  PhasePoint origin;
  double t = 0.0;
  Route route = Route::exact;
  double trace = 1.0;         // total mass of the evolved operator, whole box
  double imag_residue = 0.0;  // relative to max |Re|
  double edge_mass = 0.0;     // |diagonal| mass outside the central 90% of the box
};

inline double edge_mass(const OperatorMatrix& K) {
  const QGrid& g = K.qgrid;
  const double lo = g.min + 0.05 * g.length(), hi = g.max - 0.05 * g.length();
  double s = 0.0;
  for (int i = 0; i < g.n; ++i)
    if (g.x(i) < lo || g.x(i) > hi) s += std::abs(K.m(i, i));
  return s * g.dx();
}

inline PropagatorSlice slice_of_operator(const OperatorMatrix& K, PhasePoint r0, double t, const PhaseGrid& grid,
                                         const WeylConventions& conv, int workers) {
  WignerResult w = wigner_of_operator(K, grid, conv, workers);
  PropagatorSlice s;
  s.origin = r0;
  s.t = t;
  s.route = Route::exact;
  double mx = 0.0;
  for (double v : w.field.values) mx = std::max(mx, std::abs(v));
  s.imag_residue = mx > 0 ? w.imag_residue / mx : w.imag_residue;
  s.trace = K.trace().real();
  s.edge_mass = edge_mass(K);
  s.field = std::move(w.field);
  if (!all_finite(s.field)) throw NumericError("exact propagator produced non-finite values");
  return s;
}

inline constexpr double edge_tolerance = 1e-6;

// G_W(r'', t; r', 0) as the Wigner function of U A(r') U^dagger.
inline PropagatorSlice wigner_propagator_exact(const QuantumSystem& qs, PhasePoint r0, double t, const PhaseGrid& grid,
                                               const Resolution& res = {}, int workers = 1, bool monitor = true) {
  const OperatorMatrix A = origin_operator(qs.qgrid, r0, res, qs.hbar());
  const OperatorMatrix K = t == 0.0 ? A : OperatorEvolver(qs, A).at(t);
  PropagatorSlice s = slice_of_operator(K, r0, t, grid, qs.conv(), workers);
  if (monitor && s.edge_mass > edge_tolerance)
    throw NumericError("boundary leak: mass " + std::to_string(s.edge_mass) +
                       " outside the central 90% of the position box");
  return s;
}

// rho_W(t) = sum_r' G(r'', t; r') rho_W(r') dA'. On the native lattice the
// kernel is exact, so the sum is carried out through its operator form:
// symbol -> operator, unitary conjugation, operator -> symbol.
inline ScalarField evolve_wigner(const QuantumSystem& qs, const ScalarField& rho_w, double t, int workers = 1) {
  const WeylConventions wc = qs.conv().with_norm(SymbolNorm::wigner);
  if (!is_native(rho_w.grid, qs.qgrid, wc)) throw ConfigError("evolve_wigner needs a field on the native phase lattice");
  ComplexField c(rho_w.grid);
  for (std::size_t i = 0; i < c.values.size(); ++i) c.values[i] = rho_w.values[i];
  const OperatorMatrix rho = operator_of_symbol(c, qs.qgrid, wc);
  const OperatorMatrix K = t == 0.0 ? rho : OperatorEvolver(qs, rho).at(t);
  return wigner_of_operator(K, rho_w.grid, wc, workers).field;
}

// Literal cell quadrature with explicitly assembled slices; O(n^4), small grids only.
inline ScalarField evolve_wigner_quadrature(const QuantumSystem& qs, const ScalarField& rho_w, double t) {
  const PhaseGrid& g = rho_w.grid;
  ScalarField out(g, 0.0);
  for (int ip = 0; ip < g.np(); ++ip)
    for (int iq = 0; iq < g.nq(); ++iq) {
      const double w = rho_w.at(ip, iq);
      if (w == 0.0) continue;
      const PropagatorSlice s = wigner_propagator_exact(qs, g.node(ip, iq), t, g, {}, 1, false);
      for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += s.field.values[i] * w * g.cell_area();
    }
  return out;
}

inline cplx expectation(const ScalarField& o_w, const ScalarField& rho_w) {
  if (!o_w.grid.same_as(rho_w.grid)) throw ConfigError("expectation: fields live on different grids");
  double s = 0.0;
  for (std::size_t i = 0; i < o_w.values.size(); ++i) s += o_w.values[i] * rho_w.values[i];
  return s * o_w.grid.cell_area();
}

inline cplx expectation(const ComplexField& o_w, const ScalarField& rho_w) {
  if (!o_w.grid.same_as(rho_w.grid)) throw ConfigError("expectation: fields live on different grids");
  cplx s = 0.0;
  for (std::size_t i = 0; i < o_w.values.size(); ++i) s += o_w.values[i] * rho_w.values[i];
  return s * o_w.grid.cell_area();
}

// Minimum-uncertainty Gaussian centred at r0 with position width sigma.
inline Eigen::VectorXcd gaussian_state(const QGrid& qg, PhasePoint r0, double sigma, double hbar) {
  Eigen::VectorXcd psi(qg.n);
  for (int i = 0; i < qg.n; ++i) {
    const double x = qg.x(i) - r0.q;
    psi(i) = std::polar(std::exp(-x * x / (4 * sigma * sigma)), r0.p * x / hbar);
  }
  psi /= std::sqrt(psi.squaredNorm() * qg.dx());
  return psi;
}

// Translation e^{i p L/hbar}: (D psi)(x) = psi(x + L), band-limited on the periodic box.
inline Eigen::VectorXcd translate(const QGrid& qg, const Eigen::VectorXcd& psi, double L, double hbar) {
  (void)hbar;  // e^{i p L/hbar} with p = hbar k, i.e. psi(x + L)
  const int n = qg.n;
  std::vector<cplx> kern(n);
  for (int d = 0; d < n; ++d) {
    cplx s = 0.0;
    for (int k = -(n - 1) / 2; k <= n / 2; ++k) {
      const double kap = 2.0 * pi * k / qg.length();
      const bool nyq = (n % 2 == 0) && k == n / 2;
      s += nyq ? cplx(std::cos(kap * (d * qg.dx() - L))) : std::polar(1.0, kap * (d * qg.dx() - L));
    }
    kern[d] = s / static_cast<double>(n);
  }
  Eigen::VectorXcd out(n);
  for (int i = 0; i < n; ++i) {
    cplx s = 0.0;
    for (int j = 0; j < n; ++j) s += kern[detail::wrap(j - i, n)] * psi(j);
    out(i) = s;
  }
  return out;
}

struct ModularReport {
  cplx D;          // <e^{ipL/hbar}> at t
  cplx fd;         // centred difference at dt
  cplx rhs;        // (i/hbar)<[H, D]>
  cplx classical;  // -(i/hbar) L <V'(q) D>
  double residual = 0.0;       // |fd - rhs| at dt
  double residual_half = 0.0;  // same at dt/2
  double order = 0.0;          // log2(residual / residual_half)
  double gap = 0.0;            // |rhs - classical| / |rhs|
};

inline ModularReport modular_eom_check(const QuantumSystem& qs, double L, const Eigen::VectorXcd& psi0, double t,
                                       double dt) {
  const QGrid& qg = qs.qgrid;
  const double hbar = qs.hbar();
  const double dx = qg.dx();
  auto Dexp = [&](double tt) {
    const Eigen::VectorXcd psi = evolve_state(qs, psi0, tt);
    return psi.dot(translate(qg, psi, L, hbar)) * dx;
  };
  ModularReport r;
  const Eigen::VectorXcd psi = evolve_state(qs, psi0, t);
  const Eigen::VectorXcd Dpsi = translate(qg, psi, L, hbar);
  const Eigen::VectorXcd Hpsi = qs.H.cast<cplx>() * psi;
  r.D = psi.dot(Dpsi) * dx;
  // <psi|H D|psi> - <psi|D H|psi>
  const cplx hd = Hpsi.dot(Dpsi) * dx;
  const cplx dh = psi.dot(translate(qg, Hpsi, L, hbar)) * dx;
  r.rhs = cplx(0.0, 1.0 / hbar) * (hd - dh);
  Eigen::VectorXcd vd(qg.n);
  // Weyl ordering of V'(q) e^{ipL/hbar} puts the force at the midpoint of the hop
  for (int i = 0; i < qg.n; ++i) vd(i) = dpotential(qs.params, qg.x(i) + 0.5 * L) * Dpsi(i);
  r.classical = cplx(0.0, -L / hbar) * psi.dot(vd) * dx;
  r.fd = (Dexp(t + dt) - Dexp(t - dt)) / (2.0 * dt);
  const cplx fd2 = (Dexp(t + dt / 2) - Dexp(t - dt / 2)) / dt;
  r.residual = std::abs(r.fd - r.rhs);
  r.residual_half = std::abs(fd2 - r.rhs);
  r.order = (r.residual > 0 && r.residual_half > 0) ? std::log2(r.residual / r.residual_half) : 0.0;
  r.gap = std::abs(r.rhs) > 0 ? std::abs(r.rhs - r.classical) / std::abs(r.rhs) : 0.0;
  return r;
}

}  // namespace wigprop
