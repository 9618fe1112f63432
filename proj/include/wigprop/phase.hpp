#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace wigprop {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using RMatrix = Eigen::MatrixXd;

inline constexpr double pi = 3.14159265358979323846;

// bad input or mismatched shapes; the CLI maps it to exit 2
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// non-finite values, box leaks, endpoints off the grid; exit 3
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class SymbolNorm { weyl, wigner };

class WeylConventions {
 public:
  explicit WeylConventions(double hbar = 1.0, SymbolNorm norm = SymbolNorm::weyl)
      : hbar_(hbar), norm_(norm) {
    if (!(hbar > 0.0) || !std::isfinite(hbar)) throw ConfigError("hbar must be positive");
  }
  double hbar() const { return hbar_; }
  double h() const { return 2.0 * pi * hbar_; }
  SymbolNorm norm() const { return norm_; }
  WeylConventions with_norm(SymbolNorm n) const { return WeylConventions(hbar_, n); }
  // synthesis e^{+ipq/hbar}, analysis e^{-ipq/hbar}
  static constexpr int synthesis_sign = +1;
  static constexpr int analysis_sign = -1;

 private:
  double hbar_;
  SymbolNorm norm_;
};

struct PhasePoint {
  double p = 0.0;
  double q = 0.0;
};

inline PhasePoint operator+(PhasePoint a, PhasePoint b) { return {a.p + b.p, a.q + b.q}; }
inline PhasePoint operator-(PhasePoint a, PhasePoint b) { return {a.p - b.p, a.q - b.q}; }
inline PhasePoint operator*(double s, PhasePoint a) { return {s * a.p, s * a.q}; }

// a^b = a.p b.q - a.q b.p
inline double symplectic_product(PhasePoint a, PhasePoint b) { return a.p * b.q - a.q * b.p; }

// twice the oriented area of the triangle abc
// The three terms are summed in sorted order so the result is exactly cyclic.
inline double triangle_area(PhasePoint a, PhasePoint b, PhasePoint c) {
  std::array<double, 3> t{symplectic_product(a, b), symplectic_product(b, c), symplectic_product(c, a)};
  std::sort(t.begin(), t.end());
  return 2.0 * (t[0] + t[1] + t[2]);
}

// Nodes sit at min + i*step, step = (max-min)/n, so max itself is excluded.
struct Axis {
  double min = 0.0, max = 1.0;
  int n = 2;
  double step() const { return (max - min) / n; }
  double node(int i) const { return min + i * step(); }
  // index of the nearest node, may fall outside [0, n)
  long nearest(double x) const { return std::lround((x - min) / step()); }
  bool contains(double x) const {
    long i = nearest(x);
    return i >= 0 && i < n;
  }
};

struct PhaseGrid {
  Axis p, q;

  PhaseGrid() = default;
  PhaseGrid(double pmin, double pmax, int np, double qmin, double qmax, int nq)
      : p{pmin, pmax, np}, q{qmin, qmax, nq} {
    validate();
  }
  void validate() const {
    if (!(p.max > p.min) || !(q.max > q.min)) throw ConfigError("grid bounds must be increasing");
    if (p.n < 2 || q.n < 2) throw ConfigError("grid needs at least 2 cells per axis");
    if (!std::isfinite(p.min + p.max + q.min + q.max)) throw ConfigError("grid bounds must be finite");
  }
  int np() const { return p.n; }
  int nq() const { return q.n; }
  double dp() const { return p.step(); }
  double dq() const { return q.step(); }
  double cell_area() const { return dp() * dq(); }
  std::size_t size() const { return static_cast<std::size_t>(p.n) * q.n; }
  std::size_t index(int ip, int iq) const { return static_cast<std::size_t>(ip) * q.n + iq; }
  PhasePoint node(int ip, int iq) const { return {p.node(ip), q.node(iq)}; }
  bool contains(PhasePoint r) const { return p.contains(r.p) && q.contains(r.q); }
  bool same_as(const PhaseGrid& o) const {
    return p.n == o.p.n && q.n == o.q.n && p.min == o.p.min && p.max == o.p.max &&
           q.min == o.q.min && q.max == o.q.max;
  }
};

template <class T>
struct Field {
  PhaseGrid grid;
  std::vector<T> values;

  Field() = default;
  explicit Field(const PhaseGrid& g, T fill = T{}) : grid(g), values(g.size(), fill) {}
  Field(const PhaseGrid& g, std::vector<T> v) : grid(g), values(std::move(v)) {
    if (values.size() != grid.size()) throw ConfigError("field length does not match grid");
  }
  T& at(int ip, int iq) { return values[grid.index(ip, iq)]; }
  const T& at(int ip, int iq) const { return values[grid.index(ip, iq)]; }
};

using ScalarField = Field<double>;
using ComplexField = Field<cplx>;

inline bool all_finite(const ScalarField& f) {
  for (double v : f.values)
    if (!std::isfinite(v)) return false;
  return true;
}

inline double integral(const ScalarField& f) {
  double s = 0.0;
  for (double v : f.values) s += v;
  return s * f.grid.cell_area();
}

inline ScalarField real_part(const ComplexField& c) {
  ScalarField f(c.grid);
  for (std::size_t i = 0; i < f.values.size(); ++i) f.values[i] = c.values[i].real();
  return f;
}

// Position grid of a periodic box: x_i = min + i*dx, dx = (max-min)/n.
struct QGrid {
  double min = 0.0, max = 1.0;
  int n = 2;
  double dx() const { return (max - min) / n; }
  double x(int i) const { return min + i * dx(); }
  double length() const { return max - min; }
  bool operator==(const QGrid& o) const { return min == o.min && max == o.max && n == o.n; }
};

// entries are kernel values <q_i|A|q_j>; Tr A = dx * sum_i A_ii
struct OperatorMatrix {
  QGrid qgrid;
  CMatrix m;

  OperatorMatrix() = default;
  OperatorMatrix(const QGrid& g, CMatrix mat) : qgrid(g), m(std::move(mat)) {
    if (m.rows() != g.n || m.cols() != g.n) throw ConfigError("operator matrix does not match its position grid");
  }
  cplx trace() const { return m.trace() * qgrid.dx(); }
};

// kernel product (A B)(x,y) = sum_z A(x,z) B(z,y) dz
inline OperatorMatrix compose(const OperatorMatrix& a, const OperatorMatrix& b) {
  if (!(a.qgrid == b.qgrid)) throw ConfigError("operators live on different position grids");
  return OperatorMatrix(a.qgrid, a.m * b.m * a.qgrid.dx());
}

}  // namespace wigprop
