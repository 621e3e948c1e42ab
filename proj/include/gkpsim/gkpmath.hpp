#ifndef GKPSIM_GKPMATH_HPP
#define GKPSIM_GKPMATH_HPP

#include <limits>
#include <map>
#include <string>

#include "fockcore.hpp"

namespace gkpsim {

struct CodeParams {
  double l = kLattice;
  int d = 1;
  double kappa = 0.37;
  double length() const { return l * std::sqrt(double(d)); }
};

// phase-space displacement amplitudes of both modes
struct DisplacementLabel {
  double uq1 = 0, up1 = 0, uq2 = 0, up2 = 0;

  DisplacementLabel operator+(const DisplacementLabel& o) const {
    return {uq1 + o.uq1, up1 + o.up1, uq2 + o.uq2, up2 + o.up2};
  }
  DisplacementLabel operator-() const { return {-uq1, -up1, -uq2, -up2}; }
  double coord(int k) const { return k == 0 ? uq1 : k == 1 ? up1 : k == 2 ? uq2 : up2; }
  void set_coord(int k, double v) { (k == 0 ? uq1 : k == 1 ? up1 : k == 2 ? uq2 : up2) = v; }
  static DisplacementLabel on_mode(int mode, double uq, double up) {
    return mode == 1 ? DisplacementLabel{uq, up, 0, 0} : DisplacementLabel{0, 0, uq, up};
  }
};

// symplectic form: D(u)D(v)D(u)^dag D(v)^dag = e^{i omega(u,v)}
inline double symplectic(const DisplacementLabel& u, const DisplacementLabel& v) {
  return (u.up1 * v.uq1 - u.uq1 * v.up1) + (u.up2 * v.uq2 - u.uq2 * v.up2);
}
// D(u)D(v) = e^{i weyl_phase(u,v)} D(u+v)
inline double weyl_phase(const DisplacementLabel& u, const DisplacementLabel& v) { return 0.5 * symplectic(u, v); }

enum class Qunaught { plain, q, p, qp };

inline const char* qunaught_name(Qunaught v) {
  switch (v) {
    case Qunaught::plain: return "empty";
    case Qunaught::q: return "empty_q";
    case Qunaught::p: return "empty_p";
    case Qunaught::qp: return "empty_qp";
  }
  return "?";
}
inline Qunaught qunaught_from_name(const std::string& s) {
  if (s == "empty") return Qunaught::plain;
  if (s == "empty_q") return Qunaught::q;
  if (s == "empty_p") return Qunaught::p;
  if (s == "empty_qp") return Qunaught::qp;
  throw Error(ErrorKind::invalid_config, "unknown qunaught variant '" + s + "'");
}
// expected signs of (S_q, S_p). The q variant is the comb shifted by l/2 in q
// (e^{i l q} = -1), the p variant the comb with alternating peak signs (e^{i l p} = -1).
inline std::pair<int, int> qunaught_signs(Qunaught v) {
  switch (v) {
    case Qunaught::plain: return {+1, +1};
    case Qunaught::q: return {+1, -1};
    case Qunaught::p: return {-1, +1};
    case Qunaught::qp: return {-1, -1};
  }
  return {0, 0};
}

enum class Bell { phi_plus, phi_minus, psi_plus, psi_minus };

inline const char* bell_name(Bell b) {
  switch (b) {
    case Bell::phi_plus: return "phi_plus";
    case Bell::phi_minus: return "phi_minus";
    case Bell::psi_plus: return "psi_plus";
    case Bell::psi_minus: return "psi_minus";
  }
  return "?";
}
inline Bell bell_from_name(const std::string& s) {
  if (s == "phi_plus") return Bell::phi_plus;
  if (s == "phi_minus") return Bell::phi_minus;
  if (s == "psi_plus") return Bell::psi_plus;
  if (s == "psi_minus") return Bell::psi_minus;
  throw Error(ErrorKind::invalid_config, "unknown Bell state '" + s + "'");
}
inline Qunaught bell_input(Bell b) {
  switch (b) {
    case Bell::phi_plus: return Qunaught::plain;
    case Bell::phi_minus: return Qunaught::p;
    case Bell::psi_plus: return Qunaught::q;
    case Bell::psi_minus: return Qunaught::qp;
  }
  return Qunaught::plain;
}

// ---------------------------------------------------------------- labels

struct OperatorSet {
  DisplacementLabel S_q, S_p;
  std::optional<DisplacementLabel> X, Y, Z;
};

// S_q = e^{i l sqrt(d) p}, S_p = e^{i l sqrt(d) q}; Z = e^{i sqrt(pi) q}, X = e^{-i sqrt(pi) p}, Y = iXZ
inline OperatorSet stabilizers_and_logicals(const CodeParams& code, int mode) {
  if (code.d != 1 && code.d != 2) throw Error(ErrorKind::invalid_config, "code dimension must be 1 or 2");
  const double L = code.length();
  OperatorSet s;
  s.S_q = DisplacementLabel::on_mode(mode, -L, 0);
  s.S_p = DisplacementLabel::on_mode(mode, 0, L);
  if (code.d == 2) {
    s.X = DisplacementLabel::on_mode(mode, kSqrtPi, 0);
    s.Z = DisplacementLabel::on_mode(mode, 0, kSqrtPi);
    s.Y = DisplacementLabel::on_mode(mode, kSqrtPi, kSqrtPi);
  }
  return s;
}

enum class Pauli { I, X, Y, Z };
inline char pauli_char(Pauli p) { return "IXYZ"[int(p)]; }

inline DisplacementLabel logical_label(Pauli p, int mode) {
  switch (p) {
    case Pauli::I: return {};
    case Pauli::X: return DisplacementLabel::on_mode(mode, kSqrtPi, 0);
    case Pauli::Y: return DisplacementLabel::on_mode(mode, kSqrtPi, kSqrtPi);
    case Pauli::Z: return DisplacementLabel::on_mode(mode, 0, kSqrtPi);
  }
  return {};
}

// B^dag D(u) B = D(M u) for B = exp(-i angle (q1 p2 - p1 q2))
inline DisplacementLabel beamsplitter_label(const DisplacementLabel& u, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * u.uq1 + s * u.uq2, c * u.up1 + s * u.up2, -s * u.uq1 + c * u.uq2, -s * u.up1 + c * u.up2};
}
// where a characteristic-function feature at u moves to after B (inverse of the above)
inline DisplacementLabel beamsplitter_peak_map(const DisplacementLabel& u, double angle) {
  return beamsplitter_label(u, -angle);
}

// ---------------------------------------------------------------- operators

inline void check_displacement_guard(double uq, double up, int n_max, int mode) {
  const double r = std::hypot(uq, up);
  if (r > 0.5 * std::sqrt(double(n_max)))
    throw TruncationError(mode, 0.0,
                          "displacement |u|=" + std::to_string(r) + " exceeds guard 0.5*sqrt(n_max) on mode " +
                              std::to_string(mode));
}

inline JointMatrix displacement_op(const DisplacementLabel& u, const HilbertConfig& c) {
  c.validate();
  check_displacement_guard(u.uq1, u.up1, c.n_max_1, 1);
  check_displacement_guard(u.uq2, u.up2, c.n_max_2, 2);
  ModeKernel k1(c.dim1()), k2(c.dim2());
  return JointMatrix::term(c, 1.0, std::nullopt, k1.displacement(u.uq1, u.up1), k2.displacement(u.uq2, u.up2));
}

inline JointMatrix beamsplitter_generator(const HilbertConfig& c) {
  const CMat q1 = position_op(c.dim1()), p1 = momentum_op(c.dim1());
  const CMat q2 = position_op(c.dim2()), p2 = momentum_op(c.dim2());
  return JointMatrix::term(c, 1.0, std::nullopt, q1, p2) - JointMatrix::term(c, 1.0, std::nullopt, p1, q2);
}

// ---------------------------------------------------------------- states

// Hermite functions psi_n(x), n < dim, by the stable three-term recurrence
inline RVec hermite_functions(double x, int dim) {
  RVec h(dim);
  h(0) = std::pow(kPi, -0.25) * std::exp(-0.5 * x * x);
  if (dim > 1) h(1) = std::sqrt(2.0) * x * h(0);
  for (int n = 2; n < dim; ++n) h(n) = std::sqrt(2.0 / n) * x * h(n - 1) - std::sqrt((n - 1.0) / n) * h(n - 2);
  return h;
}

// e^{-kappa^2 n} applied to sum_k e^{i kick x_k} |q = x_k>, x_k = spacing*k + shift; normalized
inline CVec comb_fock(double spacing, double shift, double kick, double kappa, int dim) {
  CVec c = CVec::Zero(dim);
  const double reach = std::sqrt(2.0 * dim + 1.0) + 10.0;
  const int kmax = int(std::ceil((reach + std::abs(shift)) / spacing));
  for (int k = -kmax; k <= kmax; ++k) {
    const double x = spacing * k + shift;
    if (std::abs(x) > reach) continue;
    RVec h = hermite_functions(x, dim);
    c += std::exp(kI * kick * x) * h.cast<cplx>();
  }
  for (int n = 0; n < dim; ++n) c(n) *= std::exp(-kappa * kappa * n);
  return c / c.norm();
}

inline void check_kappa(double kappa) {
  if (!(kappa > 0.0 && kappa < 1.0)) throw Error(ErrorKind::invalid_config, "kappa must lie in (0,1)");
}

inline CVec qunaught_fock(Qunaught v, double kappa, int dim) {
  check_kappa(kappa);
  const double l = kLattice;
  const bool shift = v == Qunaught::q || v == Qunaught::qp;  // e^{-i l p/2}: q -> q + l/2
  const bool kick = v == Qunaught::p || v == Qunaught::qp;   // e^{i l q/2}
  return comb_fock(l, shift ? l / 2 : 0.0, kick ? l / 2 : 0.0, kappa, dim);
}

// finite-energy GKP qubit |0_L> (logical 0) or |1_L>
inline CVec gkp_fock(int logical, double kappa, int dim) {
  check_kappa(kappa);
  return comb_fock(2.0 * kSqrtPi, logical ? kSqrtPi : 0.0, 0.0, kappa, dim);
}

inline HybridState place_modes(const HilbertConfig& c, const CVec& m1, const CVec& m2) {
  Eigen::Vector2cd spin(0.0, 1.0);
  HybridState s = HybridState::product(c, spin, m1, m2);
  s.check_leakage();
  return s;
}

inline CVec fock_vacuum(int dim) {
  CVec v = CVec::Zero(dim);
  v(0) = 1.0;
  return v;
}

inline HybridState ideal_qunaught(Qunaught v, double kappa, const HilbertConfig& c, int mode = 1) {
  c.validate();
  CVec q = qunaught_fock(v, kappa, c.mode_dim(mode));
  return mode == 1 ? place_modes(c, q, fock_vacuum(c.dim2())) : place_modes(c, fock_vacuum(c.dim1()), q);
}

inline HybridState ideal_bell(Bell which, double kappa, const HilbertConfig& c) {
  c.validate();
  Qunaught v = bell_input(which);
  HybridState in = place_modes(c, qunaught_fock(v, kappa, c.dim1()), qunaught_fock(v, kappa, c.dim2()));
  Propagator B(beamsplitter_generator(c));
  HybridState out{c, B.apply(in.amp, kPi / 4)};
  out.check_leakage();
  return out;
}

// ---------------------------------------------------------------- characteristic functions

struct CharGrid {
  int axis_a = 0, axis_b = 1;  // coordinate indices: 0 uq1, 1 up1, 2 uq2, 3 up2
  RVec a, b;
  CMat values;  // values(i, j) at (a_i, b_j)
  DisplacementLabel base;
  long shots_per_point = 0;
};

inline const char* coord_name(int k) {
  static const char* n[] = {"u_q1", "u_p1", "u_q2", "u_p2"};
  return n[k];
}

// <D1(u1) D2(u2)> computed from cached mode kernels
class CharEvaluator {
 public:
  explicit CharEvaluator(const HilbertConfig& c) : c_(c), k1_(c.dim1()), k2_(c.dim2()) {}
  cplx operator()(const HybridState& s, const DisplacementLabel& u) const {
    check_displacement_guard(u.uq1, u.up1, c_.n_max_1, 1);
    check_displacement_guard(u.uq2, u.up2, c_.n_max_2, 2);
    CVec w = s.amp;
    if (u.uq1 != 0 || u.up1 != 0) apply_mode(w, c_, 1, k1_.displacement(u.uq1, u.up1));
    if (u.uq2 != 0 || u.up2 != 0) apply_mode(w, c_, 2, k2_.displacement(u.uq2, u.up2));
    return s.amp.dot(w);
  }

 private:
  HilbertConfig c_;
  ModeKernel k1_, k2_;
};

inline cplx char_value(const HybridState& s, const DisplacementLabel& u) { return CharEvaluator(s.config)(s, u); }

inline CharGrid char_function(const HybridState& s, int axis_a, const RVec& a, int axis_b, const RVec& b,
                              const DisplacementLabel& base = {}) {
  if (axis_a == axis_b || axis_a < 0 || axis_a > 3 || axis_b < 0 || axis_b > 3)
    throw Error(ErrorKind::invalid_config, "grid axes must be two distinct coordinates");
  CharEvaluator ev(s.config);
  CharGrid g;
  g.axis_a = axis_a;
  g.axis_b = axis_b;
  g.a = a;
  g.b = b;
  g.base = base;
  g.values.resize(a.size(), b.size());
  for (long i = 0; i < a.size(); ++i)
    for (long j = 0; j < b.size(); ++j) {
      DisplacementLabel u = base;
      u.set_coord(axis_a, a(i));
      u.set_coord(axis_b, b(j));
      g.values(i, j) = ev(s, u);
    }
  return g;
}

// ---------------------------------------------------------------- effective squeezing

struct Squeezing {
  double delta = 0;
  double dB = 0;
  bool saturated = false;
};

inline Squeezing effective_squeezing(double stab_expectation) {
  if (!(stab_expectation > 0.0))
    throw Error(ErrorKind::undefined_squeezing, "stabilizer expectation <= 0 has no real Delta");
  Squeezing s;
  if (stab_expectation >= 1.0) {
    s.saturated = true;
    s.dB = std::numeric_limits<double>::infinity();
    return s;
  }
  s.delta = std::sqrt(std::log(1.0 / (stab_expectation * stab_expectation)) / kPi);
  s.dB = 10.0 * std::log10(2.0 / (s.delta * s.delta));
  return s;
}

// inverse: <S> = exp(-pi Delta^2 / 2)
inline double stabilizer_from_delta(double delta) { return std::exp(-kPi * delta * delta / 2.0); }

// two common r -> dB conventions; neither matches every quoted figure
inline std::pair<double, double> squeeze_db_conventions(double r) {
  return {10.0 * std::log10(std::exp(2.0 * r)), 10.0 * std::log10(std::exp(4.0 * r))};
}

}  // namespace gkpsim

#endif
