// One line per primary criterion; exit status 1 if any is red.
#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#include <wigprop/cli.hpp>

using namespace wigprop;

namespace {

struct Outcome {
  bool pass = false;
  std::string what;
};

RunConfig load(const char* name) { return parse_config(read_text_file(std::string(WIGPROP_CONFIG_DIR) + "/" + name)); }

std::string num(double x) {
  char b[32];
  std::snprintf(b, sizeof b, "%.4g", x);
  return b;
}

Outcome identity() {
  const RunConfig c = load("fig1.cfg");
  const QuantumSystem qs(c.system, c.qgrid());
  const PhaseGrid g = native_aligned(c.grid(), qs.qgrid, qs.conv());
  const PropagatorSlice s = wigner_propagator_exact(qs, c.origin, 0.0, g);
  const double m = mass_outside_cell(s.field, s.origin);
  return {m < 1e-6, "mass outside origin cell " + num(m) + " (< 1e-6), grid " + std::to_string(g.np()) + "x" +
                        std::to_string(g.nq())};
}

Outcome harmonic_locality() {
  const RunConfig c = load("fig1_harmonic.cfg");
  const QuantumSystem qs(c.system, c.qgrid());
  // cells 0.3 x 0.24 with the endpoint (-0.125, 0) on a node
  const PhaseGrid g(-0.125 - 10 * 0.3, -0.125 + 11 * 0.3, 21, -2.4, 2.64, 21);
  const PropagatorSlice s = wigner_propagator_exact(qs, c.origin, pi / 5, g, c.res);
  const int ie = static_cast<int>(g.p.nearest(-0.125)), je = static_cast<int>(g.q.nearest(0.0));
  double all = 0;
  for (double v : s.field.values) all += std::abs(v);
  double best = 0;
  for (int ci = ie - 1; ci <= ie + 1; ++ci)
    for (int cj = je - 1; cj <= je + 1; ++cj) {
      double in = 0;
      for (int i = ci - 1; i <= ci + 1; ++i)
        for (int j = cj - 1; j <= cj + 1; ++j) in += std::abs(s.field.at(i, j));
      best = std::max(best, in / all);
    }
  return {best >= 0.99, "3x3 block fraction " + num(best) + " (>= 0.99), trace " + num(s.trace)};
}

Outcome morse_nonlocality() {
  const RunConfig c = load("fig1.cfg");
  const QuantumSystem qs(c.system, c.qgrid());
  const PropagatorSlice s = wigner_propagator_exact(qs, c.origin, c.time(), c.grid(), c.res);
  const double neg = structure_metric(s.field);
  const int ridge = ridge_sign_changes(s.field);
  const RunConfig h = load("fig1_harmonic.cfg");
  const QuantumSystem hs(h.system, h.qgrid());
  const double hneg = structure_metric(wigner_propagator_exact(hs, h.origin, h.time(), h.grid(), h.res).field);
  return {neg > 0.05 && ridge > 10 && hneg < 1e-3, "negativity " + num(neg) + " (> 0.05), ridge sign changes " +
                                                       std::to_string(ridge) + " (> 10), harmonic negativity " +
                                                       num(hneg) + " (< 1e-3)"};
}

double route_rms(const RunConfig& c) {
  const QuantumSystem qs(c.system, c.qgrid());
  const PhaseGrid nat = native_grid(qs.qgrid, qs.conv());
  const Eigen::VectorXcd psi0 = test_state(qs, c.origin);
  const double t = c.time();
  const ScalarField via_g = evolve_wigner(qs, wigner_of_state(psi0, qs.qgrid, nat, qs.conv()), t);
  return rms_difference(via_g, wigner_of_state(evolve_state(qs, psi0, t), qs.qgrid, nat, qs.conv()));
}

Outcome route_equivalence() {
  const double h = route_rms(load("fig1_harmonic.cfg")), m = route_rms(load("fig1.cfg"));
  return {h <= 1e-4 && m <= 1e-4, "rms harmonic " + num(h) + ", Morse " + num(m) + " (<= 1e-4)"};
}

Outcome chapman_kolmogorov() {
  const RunConfig c = load("fig1.cfg");
  const QuantumSystem qs(c.system, c.qgrid());
  const CheckReport r = check_chapman_kolmogorov(qs, c.origin, c.time());
  return {r.pass, "rms " + num(r.metric) + " (<= 1e-4), " + r.details};
}

Outcome orthogonality() {
  const RunConfig c = load("fig1.cfg");
  const QuantumSystem qs(c.system, c.qgrid());
  const CheckReport r = check_orthogonality(qs, c.origin, c.time());
  return {r.pass, "rms " + num(r.metric) + " (<= 1e-4), " + r.details};
}

Outcome semiclassical() {
  const RunConfig c = load("fig1.cfg");
  const QuantumSystem qs(c.system, c.qgrid());
  const PropagatorSlice ex = wigner_propagator_exact(qs, c.origin, c.time(), c.grid(), c.res);
  const SemiclassicalSlice sc = semiclassical_propagator(c.system, c.origin, c.time(), c.grid(), c.scan, c.res);
  const double ncc = normalized_cross_correlation(ex.field, sc.slice.field);
  const int lobes = matching_lobes(ex.field, sc.slice.field, 3);
  return {ncc >= 0.5 && lobes == 3, "NCC " + num(ncc) + " (>= 0.5), matching lobes " + std::to_string(lobes) +
                                        "/3, offsets " + std::to_string(c.scan.n) + "^2"};
}

Outcome classical_limit() {
  const RunConfig c = load("fig3.cfg");
  const SweepTemplate tpl{c.system, c.qgrid(), c.grid(), c.res, c.origin};
  const auto e = classical_limit_sweep(tpl, c.masses);
  std::string neg;
  for (const auto& x : e) neg += (neg.empty() ? "" : " ") + num(x.metric);
  const bool dec = strictly_decreasing(e);
  const double d = e.back().peak_distance;
  return {dec && d <= 2, "negativity [" + neg + "] strictly decreasing " + (dec ? "yes" : "no") + ", m=" +
                             num(e.back().mass) + " peak distance " + num(d) + " cells (<= 2)"};
}

Outcome modular() {
  const RunConfig c = load("fig1.cfg");
  const QuantumSystem qs(c.system, c.qgrid());
  const ModularReport m = modular_eom_check(qs, c.L, test_state(qs, c.origin), c.time(), c.modular_dt);
  const bool fd_ok = m.residual < 1e-2 * std::abs(m.rhs);
  SystemParams f = c.system;
  f.potential.kind = PotentialKind::free;
  const QuantumSystem fs(f, c.qgrid());
  const ModularReport z = modular_eom_check(fs, c.L, test_state(fs, c.origin), 0.3, c.modular_dt);
  const double zmax = std::max(std::abs(z.rhs), std::abs(z.classical));
  return {fd_ok && m.order >= 1.9 && m.gap > 0.1 && zmax < 1e-10 && std::abs(z.fd) < 1e-10,
          "Morse residual/|rhs| " + num(m.residual / std::abs(m.rhs)) + ", order " + num(m.order) + " (>= 1.9), gap " +
              num(m.gap) + " (> 0.1); V=0 max|rhs| " + num(zmax) + " |fd| " + num(std::abs(z.fd)) + " (< 1e-10)"};
}

Outcome kernel() {
  const RunConfig c = load("fig1.cfg");
  bool ok = true;
  std::string s;
  for (const auto& r : kernel_checks(c.system, c.origin, c.time())) {
    ok = ok && r.pass;
    s += (s.empty() ? "" : ", ") + r.name + " " + num(r.metric) + " (<= " + num(r.tolerance) + ")";
  }
  return {ok, s};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
  };
  const Criterion all[] = {
      {1, "identity at t=0", 10, identity},
      {2, "harmonic locality", 60, harmonic_locality},
      {3, "Morse non-locality", 300, morse_nonlocality},
      {4, "route equivalence", 300, route_equivalence},
      {5, "Chapman-Kolmogorov", 600, chapman_kolmogorov},
      {6, "orthogonality", 600, orthogonality},
      {7, "semiclassical agreement", 900, semiclassical},
      {8, "classical limit", 1200, classical_limit},
      {9, "modular momentum", 120, modular},
      {10, "kernel properties", 120, kernel},
  };
  int failed = 0;
  for (const auto& c : all) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = o.pass && s < c.limit_s;
    failed += !pass;
    std::printf("%s %2d %-24s %s; %.1f s (< %.0f s)\n", pass ? "PASS" : "FAIL", c.id, c.name, o.what.c_str(), s,
                c.limit_s);
    std::fflush(stdout);
  }
  std::printf("%d/10 criteria pass\n", 10 - failed);
  return failed ? 1 : 0;
}
