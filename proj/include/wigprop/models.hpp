#pragma once

#include <cmath>
#include <sstream>
#include <string>

#include "phase.hpp"

namespace wigprop {

enum class PotentialKind { morse, harmonic, free };

struct PotentialModel {
  PotentialKind kind = PotentialKind::morse;
  double D0 = 1.0;
  double alpha = 1.25;
  double qe = 0.0;
  double omega = 0.0;  // harmonic only

  void validate() const {
    if (kind == PotentialKind::morse && !(D0 > 0.0 && alpha > 0.0))
      throw ConfigError("morse potential needs D0 > 0 and alpha > 0");
    if (kind == PotentialKind::harmonic && !(omega >= 0.0)) throw ConfigError("harmonic potential needs omega >= 0");
  }
};

struct SystemParams {
  double mass = 0.5;
  WeylConventions conv{};
  PotentialModel potential{};

  void validate() const {
    if (!(mass > 0.0) || !std::isfinite(mass)) throw ConfigError("mass must be positive");
    potential.validate();
  }
};

inline const char* kind_name(PotentialKind k) {
  switch (k) {
    case PotentialKind::morse: return "morse";
    case PotentialKind::harmonic: return "harmonic";
    default: return "free";
  }
}

inline std::string describe(const SystemParams& s) {
  std::ostringstream os;
  os.precision(17);
  os << kind_name(s.potential.kind) << ";m=" << s.mass << ";hbar=" << s.conv.hbar();
  if (s.potential.kind == PotentialKind::morse)
    os << ";D0=" << s.potential.D0 << ";alpha=" << s.potential.alpha << ";qe=" << s.potential.qe;
  if (s.potential.kind == PotentialKind::harmonic) os << ";omega=" << s.potential.omega << ";qe=" << s.potential.qe;
  return os.str();
}

// V, V', V'' in closed form; harmonic needs the mass, hence SystemParams
inline double potential(const SystemParams& s, double q) {
  const auto& v = s.potential;
  switch (v.kind) {
    case PotentialKind::morse: {
      const double e = 1.0 - std::exp(-v.alpha * (q - v.qe));
      return v.D0 * e * e;
    }
    case PotentialKind::harmonic: return 0.5 * s.mass * v.omega * v.omega * (q - v.qe) * (q - v.qe);
    default: return 0.0;
  }
}

inline double dpotential(const SystemParams& s, double q) {
  const auto& v = s.potential;
  switch (v.kind) {
    case PotentialKind::morse: {
      const double x = std::exp(-v.alpha * (q - v.qe));
      return 2.0 * v.D0 * v.alpha * x * (1.0 - x);
    }
    case PotentialKind::harmonic: return s.mass * v.omega * v.omega * (q - v.qe);
    default: return 0.0;
  }
}

inline double d2potential(const SystemParams& s, double q) {
  const auto& v = s.potential;
  switch (v.kind) {
    case PotentialKind::morse: {
      const double x = std::exp(-v.alpha * (q - v.qe));
      return 2.0 * v.D0 * v.alpha * v.alpha * x * (2.0 * x - 1.0);
    }
    case PotentialKind::harmonic: return s.mass * v.omega * v.omega;
    default: return 0.0;
  }
}

inline double force(const SystemParams& s, double q) { return -dpotential(s, q); }

inline double hamiltonian(const SystemParams& s, PhasePoint r) {
  return r.p * r.p / (2.0 * s.mass) + potential(s, r.q);
}

inline double morse_frequency(const SystemParams& s) {
  if (s.potential.kind != PotentialKind::morse) throw ConfigError("morse_frequency needs a morse potential");
  return std::sqrt(2.0 * s.potential.alpha * s.potential.alpha * s.potential.D0 / s.mass);
}

// characteristic angular frequency: omega_M for morse, omega for harmonic
inline double natural_frequency(const SystemParams& s) {
  switch (s.potential.kind) {
    case PotentialKind::morse: return morse_frequency(s);
    case PotentialKind::harmonic: return s.potential.omega;
    default: throw ConfigError("free particle has no natural frequency");
  }
}

inline double quarter_period(const SystemParams& s) { return 2.0 * pi / (4.0 * natural_frequency(s)); }

struct BoundStateInfo {
  double lambda;
  int count;
};

inline BoundStateInfo bound_state_parameter(const SystemParams& s) {
  if (s.potential.kind != PotentialKind::morse) throw ConfigError("bound_state_parameter needs a morse potential");
  const double lam = std::sqrt(2.0 * s.mass * s.potential.D0) / (s.potential.alpha * s.conv.hbar());
  const int count = lam > 0.5 ? static_cast<int>(std::floor(lam - 0.5)) + 1 : 0;
  return {lam, count};
}

// Harmonic companion: same mass, omega = omega_M, centered at qe.
inline SystemParams harmonic_of(const SystemParams& s) {
  SystemParams h = s;
  h.potential.kind = PotentialKind::harmonic;
  h.potential.omega = natural_frequency(s);
  return h;
}

struct ActionTerms {
  double nonlocal;  // V(q + qt/2) - V(q - qt/2)
  double local;     // qt V'(q)
};

inline ActionTerms action_integrand(const SystemParams& s, double q, double qt) {
  return {potential(s, q + 0.5 * qt) - potential(s, q - 0.5 * qt), qt * dpotential(s, q)};
}

}  // namespace wigprop
