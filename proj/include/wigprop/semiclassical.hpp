#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "classical.hpp"
#include "parallel.hpp"
#include "quantum.hpp"

namespace wigprop {

struct ScanConfig {
  double extent_p = 8.0;  // offsets cover |p~| <= extent_p
  double extent_q = 8.0;
  int n = 512;            // offset samples per axis
  double eps_det = 1e-10;
  double newton_tol = 1e-10;
  int max_iter = 60;
  int multistart = 24;  // seeds per axis for find_pairs
  double dt = 0.0;      // 0: default_dt(params)
  double cutoff = 4.0;  // resolution kernel truncated at this many standard deviations

  void validate() const {
    if (!(eps_det > 0.0)) throw ConfigError("eps_det must be positive");
    if (n < 2 || multistart < 2) throw ConfigError("scan resolutions must be >= 2");
    if (!(extent_p > 0.0 && extent_q > 0.0)) throw ConfigError("scan extents must be positive");
  }
  double step(const SystemParams& s) const { return dt > 0.0 ? dt : default_dt(s); }
};

struct PairRoot {
  PhasePoint offset;         // r~' = r+(0) - r-(0)
  PhasePoint plus, minus;    // endpoints
  PhasePoint mid;            // midpoint of the endpoints
  StabilityMatrix Mplus, Mminus;
  double action = 0.0;       // S_vV
  int maslov = 0;            // nu, odd under exchange of the two orbits
  int det_sign_changes = 0;  // zero crossings of det(M+ - M-) along the run
  double detdiff = 0.0;      // det(M+ - M-)
  double amplitude = 0.0;    // (4/h) cos(S/hbar - nu pi/4) / |det|^{1/2} for this ordered pair
  bool degenerate = false;
  double residual = 0.0;     // |mid - target| for roots
};

namespace detail {

inline int sgn(double x) { return (x > 0) - (x < 0); }

inline bool degenerate_pair(const StabilityMatrix& a, const StabilityMatrix& b, double eps) {
  const double d = (a - b).det();
  return std::abs(d) < eps * std::max(1.0, a.norm() * b.norm());
}

// nu = 2(mu+ - mu-) - sig, with mu the focal counts of each orbit and sig the
// signature of the Hessian (R''+ - R''-)/4 of the stationary-phase integral.
// R'' = (1/M_qp) [[M_pp, -1], [-1, M_qq]], det of the difference = det(M+ - M-)/(M+_qp M-_qp).
inline int maslov_index(const StabilityMatrix& a, int fa, const StabilityMatrix& b, int fb) {
  if (a.qp == 0.0 || b.qp == 0.0) return 2 * (fa - fb);
  const double det = (a - b).det() / (a.qp * b.qp);
  const double tr = (a.pp + a.qq) / a.qp - (b.pp + b.qq) / b.qp;
  const int sig = det < 0 ? 0 : 2 * sgn(tr);
  return 2 * (fa - fb) - sig;
}

inline double pair_phase(double S, int nu, double hbar) { return S / hbar - nu * pi / 4.0; }

}  // namespace detail

// Both orbits and the action integrand r~ ^ rbar' - H+ + H- advanced by one RK4.
inline PairRoot evolve_pair(const SystemParams& s, PhasePoint r0, PhasePoint rt, double t, double dt, double eps_det = 1e-10) {
  const int n = t == 0.0 ? 0 : step_count(t, dt);
  const double h = n ? t / n : 0.0;
  struct Y {
    OrbitState a, b;
    double S;
  };
  auto rhs = [&](const Y& y, detail::Deriv& da, detail::Deriv& db) {
    da = detail::orbit_rhs(s, y.a);
    db = detail::orbit_rhs(s, y.b);
    const PhasePoint tilde = y.a.r - y.b.r;
    const PhasePoint bardot{0.5 * (da.p + db.p), 0.5 * (da.q + db.q)};
    return symplectic_product(tilde, bardot) - hamiltonian(s, y.a.r) + hamiltonian(s, y.b.r);
  };
  Y y{{}, {}, 0.0};
  y.a.r = r0 + 0.5 * rt;
  y.b.r = r0 - 0.5 * rt;
  int fa = 0, fb = 0, la = 0, lb = 0, ld = 0, dchanges = 0;
  auto track = [](double v, int& last, int& count) {
    const int sg = detail::sgn(v);
    if (sg != 0) {
      if (last != 0 && sg != last) ++count;
      last = sg;
    }
  };
  for (int i = 0; i < n; ++i) {
    detail::Deriv a1, b1, a2, b2, a3, b3, a4, b4;
    const double s1 = rhs(y, a1, b1);
    const Y y2{detail::advance(y.a, a1, h / 2), detail::advance(y.b, b1, h / 2), y.S + h / 2 * s1};
    const double s2 = rhs(y2, a2, b2);
    const Y y3{detail::advance(y.a, a2, h / 2), detail::advance(y.b, b2, h / 2), y.S + h / 2 * s2};
    const double s3 = rhs(y3, a3, b3);
    const Y y4{detail::advance(y.a, a3, h), detail::advance(y.b, b3, h), y.S + h * s3};
    const double s4 = rhs(y4, a4, b4);
    y.a = detail::rk4_step(s, y.a, h);
    y.b = detail::rk4_step(s, y.b, h);
    y.S += h / 6.0 * (s1 + 2 * s2 + 2 * s3 + s4);
    track(y.a.M.qp, la, fa);
    track(y.b.M.qp, lb, fb);
    track((y.a.M - y.b.M).det(), ld, dchanges);
  }
  if (!std::isfinite(y.S) || !std::isfinite(y.a.r.p + y.a.r.q + y.b.r.p + y.b.r.q))
    throw NumericError("trajectory pair became non-finite");
  PairRoot pr;
  pr.offset = rt;
  pr.plus = y.a.r;
  pr.minus = y.b.r;
  pr.mid = 0.5 * (y.a.r + y.b.r);
  pr.Mplus = y.a.M;
  pr.Mminus = y.b.M;
  pr.action = y.S;
  pr.detdiff = (y.a.M - y.b.M).det();
  pr.det_sign_changes = dchanges;
  pr.degenerate = detail::degenerate_pair(y.a.M, y.b.M, eps_det);
  pr.maslov = pr.degenerate ? 2 * (fa - fb) : detail::maslov_index(y.a.M, fa, y.b.M, fb);
  if (!pr.degenerate)
    pr.amplitude = 4.0 / s.conv.h() * std::cos(detail::pair_phase(pr.action, pr.maslov, s.conv.hbar())) /
                   std::sqrt(std::abs(pr.detdiff));
  return pr;
}

// Roots of mid(r~') = r'' by Newton with Jacobian (M+ - M-)/4, seeded from a coarse scan.
inline std::vector<PairRoot> find_pairs(const SystemParams& s, PhasePoint r0, PhasePoint target, double t,
                                        const ScanConfig& cfg) {
  cfg.validate();
  const double dt = cfg.step(s);
  struct Seed {
    double dist;
    PhasePoint rt;
  };
  std::vector<Seed> seeds;
  const int ns = cfg.multistart;
  for (int i = 0; i < ns; ++i)
    for (int j = 0; j < ns; ++j) {
      const PhasePoint rt{-cfg.extent_p + 2 * cfg.extent_p * (i + 0.5) / ns, -cfg.extent_q + 2 * cfg.extent_q * (j + 0.5) / ns};
      const PairRoot pr = evolve_pair(s, r0, rt, t, dt, cfg.eps_det);
      const PhasePoint d = pr.mid - target;
      seeds.push_back({std::hypot(d.p, d.q), rt});
    }
  std::stable_sort(seeds.begin(), seeds.end(), [](const Seed& a, const Seed& b) { return a.dist < b.dist; });
  seeds.resize(std::min<std::size_t>(seeds.size(), static_cast<std::size_t>(2 * ns)));
  seeds.insert(seeds.begin(), Seed{0.0, {0.0, 0.0}});

  std::vector<PairRoot> roots;
  for (const Seed& sd : seeds) {
    PhasePoint rt = sd.rt;
    PairRoot pr;
    bool ok = false;
    for (int it = 0; it < cfg.max_iter; ++it) {
      pr = evolve_pair(s, r0, rt, t, dt, cfg.eps_det);
      const PhasePoint F = pr.mid - target;
      pr.residual = std::hypot(F.p, F.q);
      if (pr.residual < cfg.newton_tol) {
        ok = true;
        break;
      }
      const StabilityMatrix J{0.25 * (pr.Mplus.pp - pr.Mminus.pp), 0.25 * (pr.Mplus.pq - pr.Mminus.pq),
                              0.25 * (pr.Mplus.qp - pr.Mminus.qp), 0.25 * (pr.Mplus.qq - pr.Mminus.qq)};
      const double det = J.det();
      if (std::abs(det) < 1e-14 * std::max(1.0, J.norm() * J.norm())) break;
      PhasePoint step{(J.qq * F.p - J.pq * F.q) / det, (-J.qp * F.p + J.pp * F.q) / det};
      // keep Newton from leaping across the scanned region
      const double len = std::hypot(step.p, step.q), cap = 0.5 * std::hypot(cfg.extent_p, cfg.extent_q);
      if (len > cap) step = (cap / len) * step;
      rt = rt - step;
    }
    if (!ok) continue;
    bool dup = false;
    for (const auto& r : roots)
      if (std::hypot(r.offset.p - pr.offset.p, r.offset.q - pr.offset.q) < 1e-6) dup = true;
    if (!dup) roots.push_back(pr);
  }
  return roots;
}

// Point evaluation of the semiclassical propagator from its roots (ordered pairs).
inline double semiclassical_point(const std::vector<PairRoot>& roots) {
  double g = 0.0;
  for (const auto& r : roots)
    if (!r.degenerate) g += r.amplitude;
  return g;
}

struct ScanStats {
  long pairs = 0;
  long degenerate = 0;
  long outside = 0;     // deposits that missed the grid
  double deposited = 0.0;
};

struct SemiclassicalSlice {
  PropagatorSlice slice;
  ScanStats stats;
};

namespace detail {

struct OrbitRecord {
  PhasePoint r0;
  OrbitEnd end;
};

// Ordered pair (a, b) as seen from the per-orbit records. The van Vleck action splits as
//   S = R+ - R- + pbar' q~' - pbar'' q~''
// so a lattice of single orbits serves every pair drawn from it.
struct PairValue {
  PhasePoint mid;
  double weight;  // |det|^{1/2} cos(phase), or 0 when degenerate
  bool degenerate;
};

inline PairValue pair_value(const OrbitRecord& a, const OrbitRecord& b, double eps, double hbar) {
  PairValue v;
  v.mid = 0.5 * (a.end.y.r + b.end.y.r);
  const StabilityMatrix& Ma = a.end.y.M;
  const StabilityMatrix& Mb = b.end.y.M;
  v.degenerate = degenerate_pair(Ma, Mb, eps);
  if (v.degenerate) {
    v.weight = 0.0;
    return v;
  }
  const double pbar0 = 0.5 * (a.r0.p + b.r0.p), qt0 = a.r0.q - b.r0.q;
  const double pbar1 = 0.5 * (a.end.y.r.p + b.end.y.r.p), qt1 = a.end.y.r.q - b.end.y.r.q;
  const double S = a.end.y.R - b.end.y.R + pbar0 * qt0 - pbar1 * qt1;
  const int nu = maslov_index(Ma, a.end.focal, Mb, b.end.focal);
  const double det = (Ma - Mb).det();
  v.weight = std::sqrt(std::abs(det)) * std::cos(pair_phase(S, nu, hbar));
  return v;
}

inline void deposit(ScalarField& f, PhasePoint r, double w, ScanStats& st) {
  const long ip = f.grid.p.nearest(r.p), iq = f.grid.q.nearest(r.q);
  if (ip < 0 || ip >= f.grid.np() || iq < 0 || iq >= f.grid.nq()) {
    ++st.outside;
    return;
  }
  f.at(static_cast<int>(ip), static_cast<int>(iq)) += w;
  st.deposited += w;
}

}  // namespace detail

inline constexpr int deposit_chunks = 32;

// Scan-deposition. Every ordered pair sample deposits
//   (1/4h) |det(M+ - M-)|^{1/2} cos(S/hbar - nu pi/4) dA(samples) / cell_area
// at its endpoint midpoint; a pair and its exchange together give the 2cos of the root sum.
// With a resolution, the anchor r' is itself averaged over the Gaussian of that
// resolution, the semiclassical counterpart of the resolved exact slice.
inline SemiclassicalSlice semiclassical_propagator(const SystemParams& s, PhasePoint r0, double t, const PhaseGrid& grid,
                                                   const ScanConfig& cfg, const Resolution& res = {}, int workers = 1) {
  cfg.validate();
  res.validate();
  if (!grid.contains(r0)) throw ConfigError("origin lies outside the phase grid");
  const double hbar = s.conv.hbar();
  const int nsteps = t == 0.0 ? 1 : step_count(t, cfg.step(s));
  const double dp = 2.0 * cfg.extent_p / cfg.n, dq = 2.0 * cfg.extent_q / cfg.n;
  const double inv_cell = 1.0 / grid.cell_area();
  const double pref = 1.0 / (4.0 * s.conv.h());

  // lattice of initial points, symmetric about r0
  int nl_p, nl_q;
  double sp_p, sp_q;
  if (res.bare()) {
    nl_p = nl_q = cfg.n;
    sp_p = dp / 2;
    sp_q = dq / 2;
  } else {
    sp_p = dp;
    sp_q = dq;
    nl_p = 2 * static_cast<int>(std::ceil((cfg.extent_p / 2 + cfg.cutoff * res.sigma_p) / dp)) + 1;
    nl_q = 2 * static_cast<int>(std::ceil((cfg.extent_q / 2 + cfg.cutoff * res.sigma_q) / dq)) + 1;
  }
  auto node = [&](int i, int j) {
    return PhasePoint{r0.p + (i - 0.5 * (nl_p - 1)) * sp_p, r0.q + (j - 0.5 * (nl_q - 1)) * sp_q};
  };
  std::vector<detail::OrbitRecord> orbits(static_cast<std::size_t>(nl_p) * nl_q);
  parallel_for(static_cast<long>(orbits.size()), workers, [&](long k) {
    const int i = static_cast<int>(k / nl_q), j = static_cast<int>(k % nl_q);
    orbits[k].r0 = node(i, j);
    orbits[k].end = integrate_orbit(s, orbits[k].r0, t, nsteps);
  });
  auto rec = [&](int i, int j) -> const detail::OrbitRecord& { return orbits[static_cast<std::size_t>(i) * nl_q + j]; };

  // fixed chunking, merged in order: the sum does not depend on the worker count
  const int nblocks = std::min(deposit_chunks, nl_p);
  std::vector<ScalarField> part(nblocks, ScalarField(grid, 0.0));
  std::vector<ScanStats> pst(nblocks);
  auto chunks = [&](auto&& body) {
    parallel_for(nblocks, workers, [&](long c) { body(static_cast<int>(c), nl_p * c / nblocks, nl_p * (c + 1) / nblocks); });
  };

  if (res.bare()) {
    // sample i pairs node i with its mirror image; offset r~ = 2(x - r0)
    const double dA = dp * dq;
    const long total = static_cast<long>(nl_p) * nl_q;
    chunks([&](int blk, long b, long e) {
      for (long i = b; i < e; ++i)
        for (int j = 0; j < nl_q; ++j) {
          const auto& A = rec(static_cast<int>(i), j);
          const auto& B = rec(nl_p - 1 - static_cast<int>(i), nl_q - 1 - j);
          const detail::PairValue v = detail::pair_value(A, B, cfg.eps_det, hbar);
          ++pst[blk].pairs;
          if (v.degenerate) {
            ++pst[blk].degenerate;
            detail::deposit(part[blk], v.mid, inv_cell / total, pst[blk]);
          } else {
            detail::deposit(part[blk], v.mid, pref * v.weight * dA * inv_cell, pst[blk]);
          }
        }
    });
  } else {
    // ordered pairs of lattice points; anchor s = (x+ + x-)/2 sits on the half lattice,
    // d^2x+ d^2x- = d^2s d^2r~, and the anchor carries the Gaussian weight
    const double isp = 1.0 / res.sigma_p, isq = 1.0 / res.sigma_q;
    const double gnorm = 1.0 / (2.0 * pi * res.sigma_p * res.sigma_q);
    const double d4 = sp_p * sp_p * sp_q * sp_q;
    const double K2 = cfg.cutoff * cfg.cutoff;
    const int rp = static_cast<int>(std::ceil(2.0 * cfg.cutoff * res.sigma_p / sp_p));
    const int rq = static_cast<int>(std::ceil(2.0 * cfg.cutoff * res.sigma_q / sp_q));
    auto count = [](int a, int nl) { return std::min(a, 2 * nl - 2 - a) + 1; };
    chunks([&](int blk, long b, long e) {
      for (long ia = b; ia < e; ++ia) {
        const int i = static_cast<int>(ia);
        for (int j = 0; j < nl_q; ++j) {
          const auto& A = rec(i, j);
          // partners whose anchor lies within the cutoff ellipse: x- near 2 r0 - x+
          const int ci = nl_p - 1 - i, cj = nl_q - 1 - j;
          for (int k = std::max(0, ci - rp); k <= std::min(nl_p - 1, ci + rp); ++k)
            for (int l = std::max(0, cj - rq); l <= std::min(nl_q - 1, cj + rq); ++l) {
              const double sp = 0.5 * (i + k - (nl_p - 1)) * sp_p, sq = 0.5 * (j + l - (nl_q - 1)) * sp_q;
              const double m2 = sp * sp * isp * isp + sq * sq * isq * isq;
              if (m2 > K2) continue;
              const double g = gnorm * std::exp(-0.5 * m2) * d4;
              const auto& B = rec(k, l);
              const detail::PairValue v = detail::pair_value(A, B, cfg.eps_det, hbar);
              ++pst[blk].pairs;
              if (v.degenerate) {
                ++pst[blk].degenerate;
                // delta branch: unit mass per anchor spread over its offset samples
                const double area = count(i + k, nl_p) * count(j + l, nl_q) * 4.0 * sp_p * sp_q;
                detail::deposit(part[blk], v.mid, g / area * inv_cell, pst[blk]);
              } else {
                detail::deposit(part[blk], v.mid, pref * v.weight * g * inv_cell, pst[blk]);
              }
            }
        }
      }
    });
  }

  SemiclassicalSlice out;
  out.slice.field = ScalarField(grid, 0.0);
  for (int b = 0; b < nblocks; ++b) {
    for (std::size_t k = 0; k < grid.size(); ++k) out.slice.field.values[k] += part[b].values[k];
    out.stats.pairs += pst[b].pairs;
    out.stats.degenerate += pst[b].degenerate;
    out.stats.outside += pst[b].outside;
    out.stats.deposited += pst[b].deposited;
  }
  out.stats.deposited *= grid.cell_area();
  out.slice.origin = r0;
  out.slice.t = t;
  out.slice.route = Route::semiclassical;
  out.slice.trace = integral(out.slice.field);
  if (!all_finite(out.slice.field)) throw NumericError("semiclassical deposition produced non-finite values");
  return out;
}

}  // namespace wigprop
