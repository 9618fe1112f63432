#pragma once

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "classical.hpp"
#include "config.hpp"
#include "quantum.hpp"
#include "semiclassical.hpp"
#include "verify.hpp"
#include "wpg.hpp"

namespace wigprop {

enum ExitCode { exit_ok = 0, exit_fail = 1, exit_usage = 2, exit_numeric = 3 };

inline std::string fmt_double(double x) {
  std::ostringstream os;
  os << std::setprecision(10) << x;
  return os.str();
}

inline void print_report(std::ostream& out, const CheckReport& r) {
  out << std::left << std::setw(20) << r.name << (r.pass ? "PASS" : "FAIL") << "  metric=" << std::setw(14)
      << fmt_double(r.metric) << " tol=" << fmt_double(r.tolerance) << "  " << r.details << '\n';
}

inline void print_report_kv(std::ostream& out, const CheckReport& r) {
  out << "[check]\nname=" << r.name << "\nmetric=" << fmt_double(r.metric) << "\ntolerance=" << fmt_double(r.tolerance)
      << "\npass=" << (r.pass ? "true" : "false") << "\ndetails=" << r.details << "\n\n";
}

inline std::string strip_ext(const std::string& path) {
  const auto dot = path.rfind('.');
  const auto slash = path.rfind('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path;
  return path.substr(0, dot);
}

inline void emit(const RunConfig& c, const GridFileHeader& h, const ScalarField& f, const std::string& path,
                 std::ostream& out) {
  write_field(path, h, f);
  if (c.text_export) write_text(path + ".txt", f);
  out << "wrote " << path << '\n';
}

inline void slice_summary(std::ostream& out, const PropagatorSlice& s) {
  out << "route=" << route_name(s.route) << "\nt=" << fmt_double(s.t) << "\norigin=" << fmt_double(s.origin.p) << ','
      << fmt_double(s.origin.q) << "\nwindow_mass=" << fmt_double(integral(s.field))
      << "\nnegativity=" << fmt_double(structure_metric(s.field)) << "\nimag_residue=" << fmt_double(s.imag_residue)
      << "\nedge_mass=" << fmt_double(s.edge_mass) << '\n';
}

inline PropagatorSlice run_route(const RunConfig& c, Route route, std::ostream& out) {
  const SystemParams& s = c.system;
  const double t = c.time();
  switch (route) {
    case Route::exact: {
      const QuantumSystem qs(s, c.qgrid());
      return wigner_propagator_exact(qs, c.origin, t, c.grid(), c.res, c.workers, c.monitor);
    }
    case Route::semiclassical: {
      SemiclassicalSlice r = semiclassical_propagator(s, c.origin, t, c.grid(), c.scan, c.res, c.workers);
      out << "pairs=" << r.stats.pairs << "\ndegenerate=" << r.stats.degenerate << "\noff_grid=" << r.stats.outside
          << '\n';
      return r.slice;
    }
    default:
      return classical_propagator(s, c.origin, t, c.grid(), c.scan.step(s));
  }
}

inline int cmd_slice(const RunConfig& c, Route route, std::ostream& out) {
  PropagatorSlice s = run_route(c, route, out);
  slice_summary(out, s);
  emit(c, make_header(s.field, "propagator", route_name(route), s.t, s.origin, describe(c.system)), s.field, c.out, out);
  if (route == Route::classical) {
    const TrajectoryResult tr = integrate_trajectory(c.system, c.origin, c.time(), c.scan.step(c.system));
    write_trajectory(strip_ext(c.out) + ".traj", tr.traj.t, tr.traj.r);
    out << "wrote " << strip_ext(c.out) + ".traj" << '\n';
  }
  return exit_ok;
}

// Gaussian test state at r': its Wigner function at t on the configured grid,
// plus the lattice route-equivalence residual.
inline int cmd_evolve(const RunConfig& c, std::ostream& out) {
  const QuantumSystem qs(c.system, c.qgrid());
  const double t = c.time();
  const Eigen::VectorXcd psi0 = test_state(qs, c.origin);
  const Eigen::VectorXcd psit = evolve_state(qs, psi0, t);
  const ScalarField w = wigner_of_state(psit, qs.qgrid, c.grid(), qs.conv());
  const PhaseGrid nat = native_grid(qs.qgrid, qs.conv());
  const ScalarField via_g = evolve_wigner(qs, wigner_of_state(psi0, qs.qgrid, nat, qs.conv()), t, c.workers);
  const double rms = rms_difference(via_g, wigner_of_state(psit, qs.qgrid, nat, qs.conv()));
  out << "t=" << fmt_double(t) << "\nroute_equivalence_rms=" << fmt_double(rms) << "\nwindow_mass=" << fmt_double(integral(w))
      << '\n';
  emit(c, make_header(w, "wigner", "exact", t, c.origin, describe(c.system)), w, c.out, out);
  return exit_ok;
}

// <q>, <p>, <H> of the evolved test state from phase-space integrals on the
// native lattice, next to the wavefunction values.
inline int cmd_expectation(const RunConfig& c, std::ostream& out) {
  const QuantumSystem qs(c.system, c.qgrid());
  const double t = c.time();
  const QGrid& qg = qs.qgrid;
  const PhaseGrid nat = native_grid(qg, qs.conv());
  const Eigen::VectorXcd psi0 = test_state(qs, c.origin);
  const ScalarField wt = evolve_wigner(qs, wigner_of_state(psi0, qg, nat, qs.conv()), t, c.workers);
  ScalarField q_w(nat), p_w(nat), h_w(nat);
  for (int i = 0; i < nat.np(); ++i)
    for (int j = 0; j < nat.nq(); ++j) {
      const PhasePoint r = nat.node(i, j);
      q_w.at(i, j) = r.q;
      p_w.at(i, j) = r.p;
      h_w.at(i, j) = hamiltonian(c.system, r);
    }
  const Eigen::VectorXcd psi = evolve_state(qs, psi0, t);
  const double dx = qg.dx();
  double qd = 0.0;
  for (int i = 0; i < qg.n; ++i) qd += std::norm(psi(i)) * qg.x(i) * dx;
  const double hd = psi.dot(qs.H.cast<cplx>() * psi).real() * dx;
  out << "t=" << fmt_double(t) << "\n";
  out << "q_phase_space=" << fmt_double(expectation(q_w, wt).real()) << "\nq_wavefunction=" << fmt_double(qd) << '\n';
  out << "p_phase_space=" << fmt_double(expectation(p_w, wt).real()) << '\n';
  out << "H_phase_space=" << fmt_double(expectation(h_w, wt).real()) << "\nH_wavefunction=" << fmt_double(hd) << '\n';
  return exit_ok;
}

inline int cmd_modular(const RunConfig& c, std::ostream& out) {
  const QuantumSystem qs(c.system, c.qgrid());
  const ModularReport r = modular_eom_check(qs, c.L, test_state(qs, c.origin), c.time(), c.modular_dt);
  auto z = [](cplx v) { return fmt_double(v.real()) + (v.imag() < 0 ? "" : "+") + fmt_double(v.imag()) + "i"; };
  out << "L=" << fmt_double(c.L) << "\nD=" << z(r.D) << "\nfinite_difference=" << z(r.fd) << "\nquantum_rhs=" << z(r.rhs)
      << "\nclassical_rhs=" << z(r.classical) << "\nresidual=" << fmt_double(r.residual)
      << "\nresidual_half_dt=" << fmt_double(r.residual_half) << "\norder=" << fmt_double(r.order)
      << "\nquantum_classical_gap=" << fmt_double(r.gap) << '\n';
  return exit_ok;
}

inline std::vector<CheckReport> run_suite(const RunConfig& c) {
  std::vector<CheckReport> reps;
  const QuantumSystem qs(c.system, c.qgrid());
  const double t = c.time();
  const bool props = c.suite == "all" || c.suite == "properties";
  const bool kernel = c.suite == "all" || c.suite == "kernel";
  if (props) {
    const PhaseGrid idg = native_aligned(c.grid(), qs.qgrid, qs.conv());
    reps.push_back(check_identity_t0(wigner_propagator_exact(qs, c.origin, 0.0, idg, {}, c.workers)));
    const double ts = quarter_period(c.system) / 250.0;  // T/1000
    const ScanConfig sc = scan_for_support(c.scan, wigner_propagator_exact(qs, c.origin, ts, idg, {}, c.workers, false));
    SemiclassicalSlice sl = semiclassical_propagator(c.system, c.origin, ts, idg, sc, {}, c.workers);
    reps.push_back(check_identity_t0(sl.slice));
    reps.back().details += " (T/1000), offsets " + fmt_double(sc.extent_p) + " x " + fmt_double(sc.extent_q);
    reps.push_back(check_reality(wigner_propagator_exact(qs, c.origin, t, c.grid(), c.res, c.workers, c.monitor)));
    reps.push_back(check_chapman_kolmogorov(qs, c.origin, t, c.workers));
    reps.push_back(check_orthogonality(qs, c.origin, t, c.workers));
    const long j2 = origin_node(qs.qgrid, c.origin.q) + 10;
    reps.push_back(check_time_reversal(qs, c.origin, {-0.3, qs.qgrid.x(static_cast<int>(j2))}, t));
  }
  if (kernel) {
    for (auto& r : kernel_checks(c.system, c.origin, t)) reps.push_back(std::move(r));
  }
  return reps;
}

inline int cmd_verify(const RunConfig& c, std::ostream& out) {
  const auto reps = run_suite(c);
  bool ok = true;
  for (const auto& r : reps) {
    print_report(out, r);
    ok = ok && r.pass;
  }
  out << '\n';
  for (const auto& r : reps) print_report_kv(out, r);
  out << (ok ? "all checks passed\n" : "some checks FAILED\n");
  return ok ? exit_ok : exit_fail;
}

inline int cmd_sweep(const RunConfig& c, std::ostream& out) {
  SweepTemplate tpl{c.system, c.qgrid(), c.grid(), c.res, c.origin};
  const std::string base = strip_ext(c.out);
  std::ostringstream table;
  table << "# mass t negativity peak_p peak_q classical_p classical_q peak_distance_cells file\n";
  std::vector<SweepEntry> entries;
  for (double m : c.masses) {
    SweepEntry e = sweep_one(tpl, m, c.workers);
    std::ostringstream name;
    name << base << "_m" << m << ".wpg";
    SystemParams sm = c.system;
    sm.mass = m;
    emit(c, make_header(e.slice.field, "propagator", "exact", e.t, e.slice.origin, describe(sm)), e.slice.field,
         name.str(), out);
    const PhasePoint pk = e.slice.field.grid.node(e.peak_p, e.peak_q);
    table << fmt_double(m) << ' ' << fmt_double(e.t) << ' ' << fmt_double(e.metric) << ' ' << fmt_double(pk.p) << ' '
          << fmt_double(pk.q) << ' ' << fmt_double(e.classical.p) << ' ' << fmt_double(e.classical.q) << ' '
          << fmt_double(e.peak_distance) << ' ' << name.str() << '\n';
    e.slice.field = ScalarField();
    entries.push_back(std::move(e));
  }
  const std::string tpath = base + "_summary.txt";
  std::ofstream(tpath) << table.str();
  out << table.str() << "negativity strictly decreasing: " << (strictly_decreasing(entries) ? "yes" : "no") << '\n'
      << "wrote " << tpath << '\n';
  return exit_ok;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw KeyError("config", "cannot read " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"wigprop: propagator of the Wigner function for 1-D systems"};
  app.footer(config_help());
  app.require_subcommand(1);
  std::string config_path, out_path, mass, t, origin, masses, L, suite;
  int workers = 0;
  std::vector<std::string> sets;
  bool text = false;
  const char* names[] = {"exact", "semiclassical", "classical", "evolve", "expectation", "modular", "verify", "sweep-mass"};
  const char* about[] = {"exact propagator slice",     "semiclassical scan-deposition slice",
                         "classical (Liouville) slice", "evolve a Gaussian test state",
                         "phase-space expectation values", "modular-momentum equation-of-motion check",
                         "run a verification suite",   "exact slices over several masses"};
  for (int i = 0; i < 8; ++i) {
    CLI::App* sub = app.add_subcommand(names[i], about[i]);
    sub->add_option("--config", config_path, "key=value config file");
    sub->add_option("--out", out_path, "output path");
    sub->add_option("--workers", workers, "worker threads (default: WIGPROP_WORKERS or 1)");
    sub->add_option("--mass", mass, "particle mass");
    sub->add_option("--t", t, "time or quarter-period");
    sub->add_option("--origin", origin, "r' as p,q");
    sub->add_option("--masses", masses, "comma-separated masses");
    sub->add_option("--L", L, "translation length for modular");
    sub->add_option("--suite", suite, "all | properties | kernel");
    sub->add_option("--set", sets, "any config key as key=value");
    sub->add_flag("--text-export", text, "also write a plain-text matrix");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return exit_usage;
  }
  std::string cmd;
  for (int i = 0; i < 8; ++i)
    if (app.got_subcommand(names[i])) cmd = names[i];

  RunConfig c;
  try {
    c.workers = default_workers();
    KeyValues kv;
    if (!config_path.empty())
      for (auto& p : parse_key_values(read_text_file(config_path))) kv.push_back(p);
    auto flag = [&](const char* k, const std::string& v) {
      if (!v.empty()) kv.emplace_back(k, v);
    };
    flag("mass", mass);
    flag("t", t);
    flag("origin", origin);
    flag("masses", masses);
    flag("L", L);
    flag("suite", suite);
    flag("out", out_path);
    if (workers) kv.emplace_back("workers", std::to_string(workers));
    if (text) kv.emplace_back("text_export", "true");
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      kv.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    for (const auto& [k, v] : kv) apply_key(c, k, v);
    validate(c);
    c.grid();
  } catch (const ConfigError& e) {
    err << "usage error: " << e.what() << '\n';
    return exit_usage;
  }

  try {
    if (cmd == "exact") return cmd_slice(c, Route::exact, out);
    if (cmd == "semiclassical") return cmd_slice(c, Route::semiclassical, out);
    if (cmd == "classical") return cmd_slice(c, Route::classical, out);
    if (cmd == "evolve") return cmd_evolve(c, out);
    if (cmd == "expectation") return cmd_expectation(c, out);
    if (cmd == "modular") return cmd_modular(c, out);
    if (cmd == "verify") return cmd_verify(c, out);
    return cmd_sweep(c, out);
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return exit_numeric;
  } catch (const ConfigError& e) {
    err << "usage error: " << e.what() << '\n';
    return exit_usage;
  } catch (const std::exception& e) {
    err << "numeric failure: " << e.what() << '\n';
    return exit_numeric;
  }
}

}  // namespace wigprop
