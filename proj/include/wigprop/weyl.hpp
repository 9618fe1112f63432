#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "parallel.hpp"
#include "phase.hpp"

namespace wigprop {

namespace detail {

// Column c of the phase grid sits at half-lattice index h = 2(q - qmin)/dx.
// Even h pairs (j+m, j-m), offset 2m dx; odd h pairs (j+1+m, j-m), offset (2m+1) dx.
inline std::vector<int> half_indices(const PhaseGrid& grid, const QGrid& qg) {
  std::vector<int> h(grid.nq());
  const double half = 0.5 * qg.dx();
  for (int c = 0; c < grid.nq(); ++c) {
    const double x = (grid.q.node(c) - qg.min) / half;
    const long hi = std::lround(x);
    if (std::abs(x - hi) > 1e-6)
      throw ConfigError("phase-grid q nodes must sit on the position lattice or halfway between nodes");
    if (hi < 0 || hi > 2L * qg.n - 2) throw ConfigError("phase-grid q range exceeds the position box");
    h[c] = static_cast<int>(hi);
  }
  return h;
}

inline int wrap(int i, int n) {
  i %= n;
  return i < 0 ? i + n : i;
}

// sum_m e^{-i p qt_m/hbar} acc(a_m, b_m) for every p row of one column.
// The phase is advanced by repeated multiplication to keep exp() out of the inner loop.
template <class Acc>
void column_symbol(Acc&& acc, int h, const QGrid& qg, const Axis& pax, double hbar, cplx* out, std::size_t stride) {
  const int n = qg.n;
  const int mh = (n - 1) / 2;
  const double dx = qg.dx();
  std::vector<cplx> v, z;
  v.reserve(n);
  z.reserve(n);
  auto push = [&](int a, int b, double qt) {
    const cplx val = acc(wrap(a, n), wrap(b, n));
    if (val == cplx(0.0)) return;
    v.push_back(val * std::polar(1.0, -pax.min * qt / hbar));
    z.push_back(std::polar(1.0, -pax.step() * qt / hbar));
  };
  if (h % 2 == 0) {
    const int j = h / 2;
    for (int m = -mh; m <= mh; ++m) push(j + m, j - m, 2.0 * m * dx);
  } else {
    const int j = (h - 1) / 2;
    for (int m = -mh; m < mh; ++m) push(j + 1 + m, j - m, (2.0 * m + 1.0) * dx);
  }
  for (int k = 0; k < pax.n; ++k) {
    cplx s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      s += v[i];
      v[i] *= z[i];
    }
    out[k * stride] = s * (2.0 * dx);
  }
}

// Weight on the 2dx Riemann sum. The native lattice holds one p period (pi hbar/dx), half the
// position grid's Nyquist band. Position-diagonal operators fill the whole band and alias twice,
// states sit inside |p| < pi hbar/(2dx) and do not. Weyl mode halves the sum so the identity maps to 1
// and q to q; wigner mode keeps it so a state integrates to 1. Hence wigner = (2/h) weyl here.
inline double norm_factor(const WeylConventions& conv) {
  return conv.norm() == SymbolNorm::wigner ? 1.0 / conv.h() : 0.5;
}

}  // namespace detail

// Symbol of an operator given by an accessor (a, b) -> <x_a|A|x_b>.
template <class Acc>
ComplexField weyl_symbol_of(Acc&& acc, const QGrid& qg, const PhaseGrid& grid, const WeylConventions& conv,
                            int workers = 1) {
  if (grid.np() > qg.n) throw ConfigError("phase grid has more p nodes than the position grid");
  const auto h = detail::half_indices(grid, qg);
  ComplexField out(grid);
  parallel_for(grid.nq(), workers, [&](long c) {
    detail::column_symbol(acc, h[c], qg, grid.p, conv.hbar(), &out.values[c], grid.nq());
  });
  const double f = detail::norm_factor(conv);
  for (auto& v : out.values) v *= f;
  return out;
}

inline ComplexField weyl_symbol(const OperatorMatrix& A, const PhaseGrid& grid, const WeylConventions& conv,
                                int workers = 1) {
  return weyl_symbol_of([&](int a, int b) { return A.m(a, b); }, A.qgrid, grid, conv, workers);
}

// The odd-n periodic lattice on which the transform is a bijection:
// q nodes are the position nodes, p nodes are multiples of pi hbar / L.
inline PhaseGrid native_grid(const QGrid& qg, const WeylConventions& conv) {
  if (qg.n % 2 == 0) throw ConfigError("native phase lattice needs an odd number of position nodes");
  const double dp = pi * conv.hbar() / qg.length();
  const int mh = (qg.n - 1) / 2;
  return PhaseGrid(-mh * dp, (mh + 1) * dp, qg.n, qg.min, qg.max, qg.n);
}

// p axis with the native spacing pi hbar / L, same node count, centred on 0,
// on which the bare lattice point operator is an exact delta at t = 0.
inline PhaseGrid native_aligned(const PhaseGrid& g, const QGrid& qg, const WeylConventions& conv) {
  const double dpn = pi * conv.hbar() / qg.length();
  const int h = g.np() / 2;
  return PhaseGrid(-h * dpn, (g.np() - h) * dpn, g.np(), g.q.min, g.q.max, g.nq());
}

inline bool is_native(const PhaseGrid& g, const QGrid& qg, const WeylConventions& conv) {
  if (qg.n % 2 == 0 || g.np() != qg.n || g.nq() != qg.n) return false;
  const PhaseGrid nat = native_grid(qg, conv);
  auto close = [](double a, double b, double s) { return std::abs(a - b) <= 1e-9 * s; };
  return close(g.q.min, qg.min, qg.length()) && close(g.q.max, qg.max, qg.length()) &&
         close(g.dp(), nat.dp(), nat.dp()) && std::abs(g.p.min / nat.dp() - std::round(g.p.min / nat.dp())) < 1e-9;
}

// Adjoint lattice transform; exact inverse of weyl_symbol on the native lattice.
inline OperatorMatrix operator_of_symbol(const ComplexField& S, const QGrid& qg, const WeylConventions& conv) {
  if (!is_native(S.grid, qg, conv)) throw ConfigError("operator_of_symbol needs the native phase lattice");
  const int n = qg.n, mh = (n - 1) / 2;
  const double dx = qg.dx(), hbar = conv.hbar();
  const Axis& pax = S.grid.p;
  const double f = detail::norm_factor(conv);
  CMatrix m = CMatrix::Zero(n, n);
  std::vector<cplx> col(n);
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) col[k] = S.at(k, j) / f;
    for (int mm = -mh; mm <= mh; ++mm) {
      const double qt = 2.0 * mm * dx;
      const cplx z = std::polar(1.0, pax.step() * qt / hbar);
      cplx e = std::polar(1.0, pax.min * qt / hbar), s = 0.0;
      for (int k = 0; k < n; ++k) {
        s += e * col[k];
        e *= z;
      }
      m(detail::wrap(j + mm, n), detail::wrap(j - mm, n)) = s / (2.0 * dx * n);
    }
  }
  return OperatorMatrix(qg, std::move(m));
}

struct WignerResult {
  ScalarField field;
  double imag_residue = 0.0;  // max |Im| over the pre-projection field
};

template <class Acc>
WignerResult wigner_of(Acc&& acc, const QGrid& qg, const PhaseGrid& grid, const WeylConventions& conv,
                       int workers = 1) {
  ComplexField c = weyl_symbol_of(acc, qg, grid, conv.with_norm(SymbolNorm::wigner), workers);
  WignerResult r{real_part(c), 0.0};
  for (auto& v : c.values) r.imag_residue = std::max(r.imag_residue, std::abs(v.imag()));
  return r;
}

inline WignerResult wigner_of_operator(const OperatorMatrix& rho, const PhaseGrid& grid, const WeylConventions& conv,
                                       int workers = 1) {
  return wigner_of([&](int a, int b) { return rho.m(a, b); }, rho.qgrid, grid, conv, workers);
}

inline ScalarField wigner_of_state(const Eigen::VectorXcd& psi, const QGrid& qg, const PhaseGrid& grid,
                                   const WeylConventions& conv) {
  if (psi.size() != qg.n) throw ConfigError("state length does not match the position grid");
  const double nrm = psi.squaredNorm() * qg.dx();
  if (std::abs(nrm - 1.0) > 1e-10) throw ConfigError("state is not normalized");
  return wigner_of([&](int a, int b) { return psi(a) * std::conj(psi(b)); }, qg, grid, conv).field;
}

// Moyal product on the native lattice as a chirped sum:
//   C(r) = 1/(2n^2) sum_s A(r+s) B^(s) e^{2i s^r/hbar},  B^(s) = sum_r2 B(r2) e^{2i r2^s/hbar}
// In lattice units 2 s^r/hbar = 2 pi (k_s j_r - j_s k_r)/n, so everything reduces to powers of w = e^{2 pi i/n}.
inline ComplexField moyal_compose(const ComplexField& A, const ComplexField& B, const QGrid& qg,
                                  const WeylConventions& conv) {
  if (!A.grid.same_as(B.grid)) throw ConfigError("moyal_compose: fields live on different grids");
  if (!is_native(A.grid, qg, conv)) throw ConfigError("moyal_compose needs the native phase lattice");
  const int n = qg.n;
  std::vector<cplx> w(n);
  for (int i = 0; i < n; ++i) w[i] = std::polar(1.0, 2.0 * pi * i / n);
  auto W = [&](long e) { return w[static_cast<std::size_t>(detail::wrap(static_cast<int>(e % n), n))]; };
  // p enters through absolute lattice indices, q relative to qmin
  const long k0 = std::lround(A.grid.p.min / A.grid.dp());

  // B^(ks, js) = sum_k2 w^{k2 js} sum_j2 w^{-j2 ks} B(k2, j2), two passes
  std::vector<cplx> tmp(static_cast<std::size_t>(n) * n), bh(static_cast<std::size_t>(n) * n);
  for (int k2 = 0; k2 < n; ++k2)
    for (int ks = 0; ks < n; ++ks) {
      cplx s = 0.0;
      for (int j2 = 0; j2 < n; ++j2) s += W(-static_cast<long>(j2) * ks) * B.at(k2, j2);
      tmp[static_cast<std::size_t>(k2) * n + ks] = s;
    }
  for (int ks = 0; ks < n; ++ks)
    for (int js = 0; js < n; ++js) {
      cplx s = 0.0;
      for (int k2 = 0; k2 < n; ++k2) s += W((k2 + k0) * js) * tmp[static_cast<std::size_t>(k2) * n + ks];
      bh[static_cast<std::size_t>(ks) * n + js] = s;
    }

  ComplexField C(A.grid);
  const double f = detail::norm_factor(conv);
  const double c = 1.0 / (2.0 * n * static_cast<double>(n)) / f;
  for (int kr = 0; kr < n; ++kr)
    for (int jr = 0; jr < n; ++jr) {
      cplx s = 0.0;
      for (int ks = 0; ks < n; ++ks) {
        const int ka = detail::wrap(kr + ks, n);
        for (int js = 0; js < n; ++js) {
          const cplx a = A.at(ka, detail::wrap(jr + js, n));
          s += a * bh[static_cast<std::size_t>(ks) * n + js] *
               W(static_cast<long>(ks) * jr - js * (kr + k0));
        }
      }
      C.at(kr, jr) = s * c;
    }
  return C;
}

}  // namespace wigprop
