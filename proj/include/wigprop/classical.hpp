#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "models.hpp"
#include "quantum.hpp"

namespace wigprop {

// M = d r(t) / d r(0) in (p, q) block order
struct StabilityMatrix {
  double pp = 1.0, pq = 0.0, qp = 0.0, qq = 1.0;
  double det() const { return pp * qq - pq * qp; }
  double norm() const { return std::sqrt(pp * pp + pq * pq + qp * qp + qq * qq); }
};

inline StabilityMatrix operator-(const StabilityMatrix& a, const StabilityMatrix& b) {
  return {a.pp - b.pp, a.pq - b.pq, a.qp - b.qp, a.qq - b.qq};
}

struct Trajectory {
  std::vector<double> t;
  std::vector<PhasePoint> r;
};

// State of one orbit: point, stability matrix, R = int (p qdot - H) ds.
struct OrbitState {
  PhasePoint r;
  StabilityMatrix M;
  double R = 0.0;
};

namespace detail {

struct Deriv {
  double p, q, mpp, mpq, mqp, mqq, R;
};

inline Deriv orbit_rhs(const SystemParams& s, const OrbitState& y) {
  const double k = d2potential(s, y.r.q), m = s.mass;
  return {-dpotential(s, y.r.q),
          y.r.p / m,
          -k * y.M.qp,
          -k * y.M.qq,
          y.M.pp / m,
          y.M.pq / m,
          y.r.p * y.r.p / (2.0 * m) - potential(s, y.r.q)};
}

inline OrbitState advance(const OrbitState& y, const Deriv& d, double h) {
  OrbitState o;
  o.r = {y.r.p + h * d.p, y.r.q + h * d.q};
  o.M = {y.M.pp + h * d.mpp, y.M.pq + h * d.mpq, y.M.qp + h * d.mqp, y.M.qq + h * d.mqq};
  o.R = y.R + h * d.R;
  return o;
}

inline OrbitState rk4_step(const SystemParams& s, const OrbitState& y, double h) {
  const Deriv k1 = orbit_rhs(s, y);
  const Deriv k2 = orbit_rhs(s, advance(y, k1, h / 2));
  const Deriv k3 = orbit_rhs(s, advance(y, k2, h / 2));
  const Deriv k4 = orbit_rhs(s, advance(y, k3, h));
  auto c = [h](double a, double b, double cc, double d) { return h / 6.0 * (a + 2 * b + 2 * cc + d); };
  OrbitState o;
  o.r = {y.r.p + c(k1.p, k2.p, k3.p, k4.p), y.r.q + c(k1.q, k2.q, k3.q, k4.q)};
  o.M = {y.M.pp + c(k1.mpp, k2.mpp, k3.mpp, k4.mpp), y.M.pq + c(k1.mpq, k2.mpq, k3.mpq, k4.mpq),
         y.M.qp + c(k1.mqp, k2.mqp, k3.mqp, k4.mqp), y.M.qq + c(k1.mqq, k2.mqq, k3.mqq, k4.mqq)};
  o.R = y.R + c(k1.R, k2.R, k3.R, k4.R);
  return o;
}

}  // namespace detail

inline int step_count(double t, double dt) {
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  if (t < 0.0) throw ConfigError("time must be non-negative");
  return std::max(1, static_cast<int>(std::ceil(t / dt - 1e-9)));
}

// Default step: 1/2000 of the natural period.
inline double default_dt(const SystemParams& s) { return 2.0 * pi / natural_frequency(s) / 2000.0; }

struct OrbitEnd {
  OrbitState y;
  int focal = 0;  // sign changes of M_qp = dq(t)/dp(0) after the start
};

// Endpoint-only integration used by the pair engines.
inline OrbitEnd integrate_orbit(const SystemParams& s, PhasePoint r0, double t, int nsteps) {
  OrbitEnd e;
  e.y.r = r0;
  if (t == 0.0) return e;
  const double h = t / nsteps;
  int last = 0;
  for (int i = 0; i < nsteps; ++i) {
    e.y = detail::rk4_step(s, e.y, h);
    const int sg = (e.y.M.qp > 0) - (e.y.M.qp < 0);
    if (sg != 0) {
      if (last != 0 && sg != last) ++e.focal;
      last = sg;
    }
  }
  if (!std::isfinite(e.y.r.p) || !std::isfinite(e.y.r.q) || !std::isfinite(e.y.M.pp) || !std::isfinite(e.y.R))
    throw NumericError("trajectory became non-finite");
  return e;
}

struct TrajectoryResult {
  Trajectory traj;
  StabilityMatrix M;
  double max_energy_drift = 0.0;  // relative, guarded by 1e-12
  double max_det_error = 0.0;     // max |det M - 1| over the samples
};

inline TrajectoryResult integrate_trajectory(const SystemParams& s, PhasePoint r0, double t, double dt) {
  const int n = t == 0.0 ? 0 : step_count(t, dt);
  const double h = n ? t / n : 0.0;
  TrajectoryResult out;
  OrbitState y{};
  y.r = r0;
  const double e0 = hamiltonian(s, r0);
  out.traj.t.push_back(0.0);
  out.traj.r.push_back(r0);
  for (int i = 0; i < n; ++i) {
    y = detail::rk4_step(s, y, h);
    if (!std::isfinite(y.r.p) || !std::isfinite(y.r.q)) throw NumericError("trajectory became non-finite");
    out.traj.t.push_back((i + 1) * h);
    out.traj.r.push_back(y.r);
    out.max_energy_drift = std::max(out.max_energy_drift, std::abs(hamiltonian(s, y.r) - e0) / (std::abs(e0) + 1e-12));
    out.max_det_error = std::max(out.max_det_error, std::abs(y.M.det() - 1.0));
  }
  out.M = y.M;
  return out;
}

inline PhasePoint classical_endpoint(const SystemParams& s, PhasePoint r0, double t, double dt) {
  if (t == 0.0) return r0;
  return integrate_orbit(s, r0, t, step_count(t, dt)).y.r;
}

// Frobenius-Perron propagator of a point: unit mass in the endpoint cell.
inline PropagatorSlice classical_propagator(const SystemParams& s, PhasePoint r0, double t, const PhaseGrid& grid,
                                            double dt) {
  if (!grid.contains(r0)) throw ConfigError("origin lies outside the phase grid");
  const PhasePoint e = classical_endpoint(s, r0, t, dt);
  if (!grid.contains(e))
    throw NumericError("classical endpoint (p=" + std::to_string(e.p) + ", q=" + std::to_string(e.q) +
                       ") lies outside the phase grid");
  PropagatorSlice out;
  out.field = ScalarField(grid, 0.0);
  out.field.at(static_cast<int>(grid.p.nearest(e.p)), static_cast<int>(grid.q.nearest(e.q))) = 1.0 / grid.cell_area();
  out.origin = r0;
  out.t = t;
  out.route = Route::classical;
  return out;
}

// Flow Jacobian by central differences, for checking M.
inline StabilityMatrix finite_difference_jacobian(const SystemParams& s, PhasePoint r0, double t, double dt,
                                                  double eps = 1e-6) {
  const int n = step_count(t, dt);
  auto end = [&](PhasePoint r) { return integrate_orbit(s, r, t, n).y.r; };
  const PhasePoint a = end({r0.p + eps, r0.q}), b = end({r0.p - eps, r0.q});
  const PhasePoint c = end({r0.p, r0.q + eps}), d = end({r0.p, r0.q - eps});
  return {(a.p - b.p) / (2 * eps), (c.p - d.p) / (2 * eps), (a.q - b.q) / (2 * eps), (c.q - d.q) / (2 * eps)};
}

}  // namespace wigprop
