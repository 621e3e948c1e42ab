#ifndef GKPSIM_CIRCUITS_HPP
#define GKPSIM_CIRCUITS_HPP

#include <map>
#include <memory>
#include <tuple>

#include "gkpmath.hpp"
#include "noise.hpp"
#include "ops.hpp"

namespace gkpsim {

// ---------------------------------------------------------------- execution

// Immutable per-space data shared by all executors.
struct SpaceKernels {
  HilbertConfig config;
  ModeKernel mode1, mode2;
  std::shared_ptr<const Propagator> beamsplitter;  // built on first use

  explicit SpaceKernels(const HilbertConfig& c) : config(c), mode1(c.dim1()), mode2(c.dim2()) { c.validate(); }
  const ModeKernel& mode(int m) const { return m == 1 ? mode1 : mode2; }
};

struct Branch {
  double weight = 1.0;
  CVec amp;
};

// weighted mixture of pure branches; resets split branches until max_branches, then sample
struct Ensemble {
  HilbertConfig config;
  std::vector<Branch> branches;

  static Ensemble pure(const HybridState& s) { return Ensemble{s.config, {Branch{1.0, s.amp}}}; }
  double total_weight() const {
    double w = 0;
    for (const auto& b : branches) w += b.weight;
    return w;
  }
  // weighted mean of sign * <sigma_z>
  double spin_z_mean() const {
    double v = 0;
    for (const auto& b : branches) v += b.weight * spin_z(b.amp, config);
    return v / total_weight();
  }
  template <class F>
  double mean(F&& f) const {
    double v = 0;
    for (const auto& b : branches) v += b.weight * f(b.amp);
    return v / total_weight();
  }
};

class Executor {
 public:
  explicit Executor(std::shared_ptr<SpaceKernels> k) : k_(std::move(k)) {}
  explicit Executor(const HilbertConfig& c) : k_(std::make_shared<SpaceKernels>(c)) {}

  const HilbertConfig& config() const { return k_->config; }
  const SpaceKernels& kernels() const { return *k_; }
  std::shared_ptr<SpaceKernels> shared_kernels() const { return k_; }

  bool check_leakage = true;
  // running maximum of the weighted buffer population per mode, tracked even when not checking
  std::array<double, 2> leak_peak{0.0, 0.0};

  // unitary ops; returns false for Reset (handled by the caller)
  bool apply_unitary(CVec& amp, const PulseOp& op) {
    const HilbertConfig& c = k_->config;
    if (auto* o = std::get_if<SdfOp>(&op)) {
      if (o->u != 0.0) {
        const cplx e = std::exp(kI * o->phi_s) / std::sqrt(2.0);
        Mat2 E;
        E << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0), e, -e;  // columns: sigma_phi = +1, -1
        const CMat& Up = quad(o->mode, o->u, o->phi_m);
        const CMat& Um = quad(o->mode, -o->u, o->phi_m);
        apply_spin_conditional(amp, c, o->mode, E, {&Up, &Um});
      }
      if (o->stark_phase != 0.0) apply_spin(amp, c, spin_rot('z', o->stark_phase));
    } else if (auto* o = std::get_if<SqueezeOp>(&op)) {
      apply_mode(amp, c, o->mode, k_->mode(o->mode).squeeze(o->r, o->phi));
    } else if (auto* o = std::get_if<BeamsplitterOp>(&op)) {
      apply_beamsplitter(amp, o->angle, o->phase);
    } else if (std::holds_alternative<ResetOp>(op)) {
      return false;
    } else if (std::holds_alternative<DelayOp>(op)) {
    } else if (auto* o = std::get_if<SpinRotationOp>(&op)) {
      if (o->angle != 0.0) apply_spin(amp, c, spin_rot(o->axis, o->angle));
    } else if (auto* o = std::get_if<PhaseRotationOp>(&op)) {
      if (o->theta != 0.0) apply_mode_diag(amp, c, o->mode, k_->mode(o->mode).phase_rotation(o->theta));
    } else if (auto* o = std::get_if<DisplaceOp>(&op)) {
      if (o->uq != 0.0 || o->up != 0.0) apply_mode(amp, c, o->mode, k_->mode(o->mode).displacement(o->uq, o->up));
    }
    return true;
  }

  void apply_beamsplitter(CVec& amp, double angle, double phase) {
    const HilbertConfig& c = k_->config;
    if (!k_->beamsplitter) k_->beamsplitter = std::make_shared<Propagator>(beamsplitter_generator(c));
    if (phase != 0.0) apply_mode_diag(amp, c, 1, k_->mode1.phase_rotation(-phase));
    amp = k_->beamsplitter->apply(amp, angle);
    if (phase != 0.0) apply_mode_diag(amp, c, 1, k_->mode1.phase_rotation(phase));
  }

  // Born-rule reset of one branch given outcome; flips |up> to |down>
  static void collapse_reset(CVec& amp, const HilbertConfig& c, Spin outcome) {
    const long h = c.half();
    if (outcome == down) {
      amp.head(h).setZero();
    } else {
      amp.tail(h) = amp.head(h);
      amp.head(h).setZero();
    }
    amp.normalize();
  }

  void recoil(CVec& amp, double sigma, Rng& rng) {
    if (sigma <= 0) return;
    std::normal_distribution<double> g(0.0, sigma);
    for (int m = 1; m <= 2; ++m) {
      const double uq = g(rng), up = g(rng);
      apply_mode(amp, k_->config, m, k_->mode(m).displacement(uq, up));
    }
  }

  void run(const Circuit& circ, Ensemble& ens, Rng& rng, size_t max_branches = 64, bool* sampled = nullptr) {
    const HilbertConfig& c = k_->config;
    for (size_t i = 0; i < circ.ops.size(); ++i) {
      const PulseOp& op = circ.ops[i];
      if (auto* r = std::get_if<ResetOp>(&op)) {
        std::vector<Branch> next;
        for (auto& b : ens.branches) {
          const long h = c.half();
          const double p_up = b.amp.head(h).squaredNorm() / b.amp.squaredNorm();
          if (p_up < 1e-15) {
            collapse_reset(b.amp, c, down);
            next.push_back(std::move(b));
          } else if (p_up > 1.0 - 1e-15) {
            collapse_reset(b.amp, c, up);
            next.push_back(std::move(b));
          } else if (ens.branches.size() * 2 <= max_branches) {
            Branch u{b.weight * p_up, b.amp};
            collapse_reset(u.amp, c, up);
            b.weight *= 1.0 - p_up;
            collapse_reset(b.amp, c, down);
            next.push_back(std::move(b));
            next.push_back(std::move(u));
          } else {
            std::uniform_real_distribution<double> U(0.0, 1.0);
            collapse_reset(b.amp, c, U(rng) < p_up ? up : down);
            if (sampled) *sampled = true;
            next.push_back(std::move(b));
          }
        }
        ens.branches.swap(next);
        for (auto& b : ens.branches) recoil(b.amp, r->recoil_sigma, rng);
      } else {
        for (auto& b : ens.branches) apply_unitary(b.amp, op);
      }
      check_ensemble_leakage(ens, int(i));
    }
  }

  // weighted buffer population of the mixture; rare branches may wander further
  void check_ensemble_leakage(const Ensemble& ens, int op_index) {
    const HilbertConfig& c = k_->config;
    for (int m = 1; m <= 2; ++m) {
      double pop = 0;
      for (const auto& b : ens.branches) pop += b.weight * HybridState(c, b.amp).buffer_population(m);
      pop /= ens.total_weight();
      leak_peak[size_t(m - 1)] = std::max(leak_peak[size_t(m - 1)], pop);
      if (check_leakage && pop > c.leak_tol) {
        TruncationError e(m, pop, "mode " + std::to_string(m) + " buffer population " + std::to_string(pop) +
                                      " exceeds leak_tol at op " + std::to_string(op_index));
        e.op_index = op_index;
        throw e;
      }
    }
  }

  static Mat2 spin_rot(char axis, double angle) {
    const Mat2 s = axis == 'x' ? pauli_x() : axis == 'y' ? pauli_y() : pauli_z();
    return std::cos(angle / 2) * Mat2::Identity() - kI * std::sin(angle / 2) * s;
  }

 private:
  const CMat& quad(int mode, double u, double phi) {
    auto key = std::make_tuple(mode, u, phi);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    if (cache_.size() > 1024) cache_.clear();
    return cache_.emplace(key, k_->mode(mode).exp_quadrature(u, phi)).first->second;
  }

  std::shared_ptr<SpaceKernels> k_;
  std::map<std::tuple<int, double, double>, CMat> cache_;
};

// single trajectory; resets sampled by the Born rule, noise decorated per the schedule
inline HybridState run(const Circuit& circ, const HybridState& initial, const std::optional<NoiseParams>& noise,
                       std::uint64_t seed) {
  Executor ex(initial.config);
  Rng rng = make_rng(seed, streams::trajectory, 0);
  Circuit c = circ;
  if (noise) {
    noise->validate();
    NoiseRealization real = sample_realization(*noise, rng);
    c = sample_channel_schedule(circ, *noise, real, rng);
  }
  Ensemble e = Ensemble::pure(initial);
  ex.run(c, e, rng, 1);
  return HybridState(initial.config, e.branches[0].amp);
}

// exact mixture over reset outcomes (no noise)
inline Ensemble run_exact(const Circuit& circ, const Ensemble& initial, size_t max_branches = 1024) {
  Executor ex(initial.config);
  Rng rng = make_rng(0, streams::misc, 0);
  Ensemble e = initial;
  bool sampled = false;
  ex.run(circ, e, rng, max_branches, &sampled);
  if (sampled) throw Error(ErrorKind::invalid_config, "exact mixture exceeded the branch cap");
  return e;
}

// ---------------------------------------------------------------- builders

inline void check_eps(double eps, bool allow_zero, const char* what) {
  const bool ok = (allow_zero ? eps >= 0.0 : eps > 0.0) && eps < kLattice / 4;
  if (!ok) throw Error(ErrorKind::invalid_epsilon, std::string(what) + " must lie in " + (allow_zero ? "[0" : "(0") + ", l/4)");
}

struct PrepParams {
  double r = 0.5;
  double eps = 0.18;  // envelope trim after the grid pulses
  double sdf_duration = 60e-6;
  double squeeze_duration = 75e-6;
  double reset_duration = 61e-6;
  double rotation_duration = 5e-6;
};

// Squeeze, grid SDFs l and l/2 along q with disentangling kicks pi/(4l), pi/(2l) along p and
// an envelope trim eps. That yields the q-shifted comb; the other variants add unconditional
// half-period translations (ancilla rotated into a sigma_x eigenstate and back) before the Reset.
inline Circuit prepare_qunaught(Qunaught v, int mode, const PrepParams& p) {
  const double l = kLattice;
  check_eps(p.eps, false, "prep eps");
  const bool shift = v == Qunaught::plain || v == Qunaught::p;  // undo the l/2 offset in q
  const bool kick = v == Qunaught::p || v == Qunaught::qp;      // alternate the peak signs
  const double qdir = kPi / 2;  // q_{pi/2} = -p generates q translations
  const double pdir = 0.0;
  Circuit c;
  c.name = std::string("prepare_") + qunaught_name(v) + "_mode" + std::to_string(mode);
  c.add(SqueezeOp{mode, p.r, 0.0, p.squeeze_duration});
  c.add(SdfOp{mode, l, 0.0, qdir, 0.0, p.sdf_duration});
  c.add(SdfOp{mode, kPi / (4 * l), kPi / 2, pdir, 0.0, p.sdf_duration});
  c.add(SdfOp{mode, l / 2, 0.0, qdir, 0.0, p.sdf_duration});
  c.add(SdfOp{mode, kPi / (2 * l), kPi / 2, pdir, 0.0, p.sdf_duration});
  c.add(SdfOp{mode, p.eps, 0.0, -qdir, 0.0, p.sdf_duration});
  if (shift || kick) {
    c.add(SpinRotationOp{'y', kPi / 2, p.rotation_duration});
    if (shift) c.add(SdfOp{mode, l / 2, 0.0, qdir, 0.0, p.sdf_duration});
    if (kick) c.add(SdfOp{mode, l / 2, 0.0, kPi, 0.0, p.sdf_duration});
    c.add(SpinRotationOp{'y', -kPi / 2, p.rotation_duration});
  }
  c.add(ResetOp{0.0, p.reset_duration});
  return c;
}

// wrapped to (-pi, pi]
inline double wrap_phase(double x) {
  double y = std::fmod(x + kPi, 2 * kPi);
  if (y <= 0) y += 2 * kPi;
  return y - kPi;
}

inline double beamsplitter_phase_from_delay(double t_delay, double omega1, double omega2) {
  return wrap_phase(t_delay * (omega1 - omega2));
}

// fraction of the total rotation reached at normalized time s with sin^2 ramps
// covering ramp_fraction of the pulse (half at each end)
inline double ramp_progress(double ramp_fraction, double s) {
  const double f = ramp_fraction / 2;
  auto area = [&](double x) {
    if (f <= 0) return x;
    if (x <= f) return 0.5 * (x - f / kPi * std::sin(kPi * x / f));
    const double a1 = 0.5 * f;
    if (x <= 1 - f) return a1 + (x - f);
    const double y = x - (1 - f);
    return a1 + (1 - 2 * f) + 0.5 * (y + f / kPi * std::sin(kPi * y / f));
  };
  return area(std::clamp(s, 0.0, 1.0)) / area(1.0);
}

// ---------------------------------------------------------------- readout

// value = sign * <sigma_z> after running circuit from an ancilla in |down>
struct Readout {
  std::string name;
  Circuit circuit;
  double sign = -1.0;
};

// SDF area and direction realizing Re<D(u)> on one mode: exp(-i |u|/2 sigma_x q_phi)
inline std::pair<double, double> readout_pulse(double uq, double up) { return {std::hypot(uq, up) / 2, std::atan2(uq, up)}; }

struct ReadoutParams {
  double eps = 0.13;    // bias area for X and Z
  double eps_y = 0.16;  // bias area for Y
  double bias_duration = 10e-6;
  double sdf_duration = 40e-6;
};

// Pauli string readout with per-mode finite-energy bias pulses before the logical pulses
inline Readout fe_logical_readout(Pauli p1, Pauli p2, const ReadoutParams& rp) {
  Readout r;
  r.name = std::string(1, pauli_char(p1)) + pauli_char(p2);
  r.circuit.name = "readout_" + r.name;
  std::array<Pauli, 2> ps{p1, p2};
  for (int m = 1; m <= 2; ++m) {
    Pauli p = ps[m - 1];
    if (p == Pauli::I) continue;
    const double eps = p == Pauli::Y ? rp.eps_y : rp.eps;
    check_eps(eps, true, "readout eps");
    DisplacementLabel u = logical_label(p, m);
    auto [area, phi] = m == 1 ? readout_pulse(u.uq1, u.up1) : readout_pulse(u.uq2, u.up2);
    (void)area;
    if (eps > 0) r.circuit.add(SdfOp{m, eps, kPi / 2, phi + kPi / 2, 0.0, rp.bias_duration});
  }
  for (int m = 1; m <= 2; ++m) {
    Pauli p = ps[m - 1];
    if (p == Pauli::I) continue;
    DisplacementLabel u = logical_label(p, m);
    auto [area, phi] = m == 1 ? readout_pulse(u.uq1, u.up1) : readout_pulse(u.uq2, u.up2);
    r.circuit.add(SdfOp{m, area, 0.0, phi, 0.0, rp.sdf_duration});
  }
  return r;
}

enum class Quadrature { none, q, p };

// stabilizer S_q (q) or S_p (p) of a code with dimension d on each selected mode
inline Readout fe_stabilizer_readout(Quadrature q1, Quadrature q2, double eps, int d, const ReadoutParams& rp = {}) {
  check_eps(eps, true, "readout eps");
  Readout r;
  auto tag = [](Quadrature q) { return q == Quadrature::q ? 'q' : q == Quadrature::p ? 'p' : '-'; };
  r.name = std::string("S") + tag(q1) + tag(q2);
  r.circuit.name = "stabilizer_readout_" + r.name;
  const CodeParams code{kLattice, d, 0.0};
  std::array<Quadrature, 2> qs{q1, q2};
  std::array<std::pair<double, double>, 2> pulse{};
  for (int m = 1; m <= 2; ++m) {
    if (qs[m - 1] == Quadrature::none) continue;
    OperatorSet s = stabilizers_and_logicals(code, m);
    DisplacementLabel u = qs[m - 1] == Quadrature::q ? s.S_q : s.S_p;
    pulse[m - 1] = m == 1 ? readout_pulse(u.uq1, u.up1) : readout_pulse(u.uq2, u.up2);
    if (eps > 0) r.circuit.add(SdfOp{m, eps, kPi / 2, pulse[m - 1].second + kPi / 2, 0.0, rp.bias_duration});
  }
  for (int m = 1; m <= 2; ++m)
    if (qs[m - 1] != Quadrature::none)
      r.circuit.add(SdfOp{m, pulse[m - 1].first, 0.0, pulse[m - 1].second, 0.0, rp.sdf_duration});
  return r;
}

// Re (imag=false) or Im of chi(u) via conditional displacements and an optional x rotation
inline Readout char_readout(const DisplacementLabel& u, bool imag, double sdf_duration = 40e-6) {
  Readout r;
  r.name = imag ? "im_chi" : "re_chi";
  r.circuit.name = r.name;
  for (int m = 1; m <= 2; ++m) {
    const double uq = m == 1 ? u.uq1 : u.uq2, up = m == 1 ? u.up1 : u.up2;
    if (uq == 0 && up == 0) continue;
    auto [area, phi] = readout_pulse(uq, up);
    r.circuit.add(SdfOp{m, area, 0.0, phi, 0.0, sdf_duration});
  }
  if (imag) {
    r.circuit.add(SpinRotationOp{'x', kPi / 2, 0.0});
    r.sign = 1.0;
  }
  return r;
}

// value of a readout on every branch (readout circuits contain no resets)
inline double readout_value(Executor& ex, const Ensemble& ens, const Readout& r) {
  double v = 0, w = 0;
  for (const auto& b : ens.branches) {
    CVec a = b.amp;
    for (const auto& op : r.circuit.ops)
      if (!ex.apply_unitary(a, op)) throw Error(ErrorKind::invalid_config, "readout circuits cannot reset");
    v += b.weight * r.sign * spin_z(a, ens.config);
    w += b.weight;
  }
  return v / w;
}

// ---------------------------------------------------------------- sBs

struct SbsParams {
  int d = 2;
  double eps = 0.20;
  double mu = 0.05;
  bool rotations = false;  // bracket the big pulse with R_y(+-pi/2)
  double small_duration = 10e-6;
  double big_duration = 50e-6;
  double feedback_duration = 15e-6;
  double reset_duration = 40e-6;
  double rotation_duration = 0.0;
  double round_duration() const { return 2 * small_duration + big_duration + feedback_duration + reset_duration + (rotations ? 2 * rotation_duration : 0); }
};

// small (eps/2) - big (l sqrt(d)/2) - small (eps/2) conditional displacements, feedback mu, reset.
// q rounds kick along p with the big pulse (phi_m = 0) and correct along q; p rounds are rotated by -pi/2.
inline Circuit sbs_round(int mode, Quadrature quad, const SbsParams& p, int feedback_sign = +1) {
  check_eps(p.eps, true, "sbs eps");
  if (!(p.mu >= 0 && p.mu < kLattice / 4)) throw Error(ErrorKind::invalid_mu, "mu must lie in [0, l/4)");
  if (p.d != 1 && p.d != 2) throw Error(ErrorKind::invalid_config, "code dimension must be 1 or 2");
  const double th = quad == Quadrature::q ? 0.0 : -kPi / 2;
  const double L = kLattice * std::sqrt(double(p.d));
  Circuit c;
  c.name = std::string("sbs_") + (quad == Quadrature::q ? "q" : "p") + std::to_string(mode);
  c.add(SdfOp{mode, p.eps / 2, kPi / 2, th + kPi / 2, 0.0, p.small_duration});
  if (p.rotations) c.add(SpinRotationOp{'y', kPi / 2, p.rotation_duration});
  c.add(SdfOp{mode, L / 2, 0.0, th, 0.0, p.big_duration});
  if (p.rotations) c.add(SpinRotationOp{'y', -kPi / 2, p.rotation_duration});
  c.add(SdfOp{mode, p.eps / 2, kPi / 2, th + kPi / 2, 0.0, p.small_duration});
  c.add(SdfOp{mode, p.mu, kPi / 2, th + kPi / 2 + (feedback_sign < 0 ? kPi : 0.0), 0.0, p.feedback_duration});
  c.add(ResetOp{0.0, p.reset_duration});
  return c;
}

enum class QecOrder { sequential, interleaved };

inline Circuit full_qec_round(QecOrder order, const SbsParams& p) {
  Circuit c;
  c.name = order == QecOrder::sequential ? "qec_round_sequential" : "qec_round_interleaved";
  if (order == QecOrder::sequential) {
    c.append(sbs_round(1, Quadrature::q, p)).append(sbs_round(1, Quadrature::p, p));
    c.append(sbs_round(2, Quadrature::q, p)).append(sbs_round(2, Quadrature::p, p));
  } else {
    c.append(sbs_round(1, Quadrature::q, p)).append(sbs_round(2, Quadrature::q, p));
    c.append(sbs_round(1, Quadrature::p, p)).append(sbs_round(2, Quadrature::p, p));
  }
  return c;
}

// alternating q/p rounds on one mode; for d = 1 the feedback sign alternates with the round
// index because each half-stabilizer kick flips the conjugate stabilizer
inline Circuit sbs_schedule(int mode, int pairs, const SbsParams& p) {
  Circuit c;
  c.name = "sbs_schedule";
  for (int k = 0; k < pairs; ++k) {
    const int s = p.d == 1 && (k % 2) ? -1 : +1;
    c.append(sbs_round(mode, Quadrature::q, p, s));
    c.append(sbs_round(mode, Quadrature::p, p, p.d == 1 ? -s : s));
  }
  return c;
}

}  // namespace gkpsim

#endif
