#ifndef GKPSIM_PIPELINES_HPP
#define GKPSIM_PIPELINES_HPP

#include "config.hpp"
#include "io.hpp"
#include "tomography.hpp"

namespace gkpsim {

struct Artifact {
  std::string name;  // relative to the output directory
  std::string content;
};

struct RunOutput {
  std::vector<Artifact> files;
  nlohmann::ordered_json summary;
};

namespace detail {

inline std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t k) { return splitmix64(seed * 1000003ULL + k); }

inline TrajectoryPlan plan_for(const RunConfig& c, std::uint64_t seed) {
  TrajectoryPlan p = c.trajectories;
  p.seed = seed;
  if (!c.noise()) {
    // deterministic: one exact mixture
    p.n_trajectories = 1;
    p.max_branches = std::max<size_t>(p.max_branches, 64);
  }
  return p;
}

inline nlohmann::ordered_json run_record(const RunConfig& c) { return config_to_json(c); }

// last Reset of a circuit splits it for the pre-reset spin witness
inline std::pair<Circuit, Circuit> split_at_last_reset(const Circuit& c) {
  size_t k = c.ops.size();
  for (size_t i = c.ops.size(); i-- > 0;)
    if (std::holds_alternative<ResetOp>(c.ops[i])) {
      k = i;
      break;
    }
  Circuit a, b;
  a.name = c.name + "_body";
  b.name = c.name + "_reset";
  a.ops.assign(c.ops.begin(), c.ops.begin() + long(k));
  b.ops.assign(c.ops.begin() + long(k), c.ops.end());
  return {a, b};
}

inline Probe spin_probe() {
  return Probe{"sigma_z", 1, [](const Ensemble& e) { return std::vector<double>{e.spin_z_mean()}; }};
}

// reduced density matrix of one mode, flattened as (re, im) column-major
inline Probe mode_density_probe(const HilbertConfig& c, int mode) {
  const long d = c.mode_dim(mode);
  return Probe{"rho" + std::to_string(mode), size_t(2 * d * d), [mode, d](const Ensemble& e) {
                 CMat rho = CMat::Zero(d, d);
                 for (const auto& b : e.branches) rho += b.weight * HybridState(e.config, b.amp).mode_density(mode);
                 rho /= e.total_weight();
                 std::vector<double> v;
                 v.reserve(size_t(2 * d * d));
                 for (long k = 0; k < d * d; ++k) {
                   v.push_back(rho.data()[k].real());
                   v.push_back(rho.data()[k].imag());
                 }
                 return v;
               }};
}

inline CMat unflatten(const std::vector<double>& row, size_t off, long d) {
  CMat rho(d, d);
  for (long k = 0; k < d * d; ++k) rho.data()[k] = cplx(row[off + size_t(2 * k)], row[off + size_t(2 * k + 1)]);
  return rho;
}

}  // namespace detail

// chi over a plane with one coordinate per mode, for a mixture of branches:
// <D1(a) D2(b)> = <D1(a)^dag psi | D2(b) psi>
inline CharGrid cross_mode_grid(const Ensemble& e, int axis_a, const RVec& a, int axis_b, const RVec& b) {
  if (axis_a > 1 || axis_b < 2) throw Error(ErrorKind::invalid_config, "cross grid needs a mode-1 and a mode-2 axis");
  const HilbertConfig& c = e.config;
  ModeKernel k1(c.dim1()), k2(c.dim2());
  CharGrid g;
  g.axis_a = axis_a;
  g.axis_b = axis_b;
  g.a = a;
  g.b = b;
  g.values = CMat::Zero(a.size(), b.size());
  std::vector<CMat> D1, D2;
  for (long i = 0; i < a.size(); ++i) {
    DisplacementLabel u;
    u.set_coord(axis_a, a(i));
    check_displacement_guard(u.uq1, u.up1, c.n_max_1, 1);
    D1.push_back(k1.displacement(u.uq1, u.up1).adjoint());
  }
  for (long j = 0; j < b.size(); ++j) {
    DisplacementLabel u;
    u.set_coord(axis_b, b(j));
    check_displacement_guard(u.uq2, u.up2, c.n_max_2, 2);
    D2.push_back(k2.displacement(u.uq2, u.up2));
  }
  const double W = e.total_weight();
  for (const auto& br : e.branches) {
    std::vector<CVec> left, right;
    for (const auto& M : D1) {
      CVec w = br.amp;
      apply_mode(w, c, 1, M);
      left.push_back(std::move(w));
    }
    for (const auto& M : D2) {
      CVec w = br.amp;
      apply_mode(w, c, 2, M);
      right.push_back(std::move(w));
    }
    for (long i = 0; i < a.size(); ++i)
      for (long j = 0; j < b.size(); ++j) g.values(i, j) += br.weight / W * left[size_t(i)].dot(right[size_t(j)]);
  }
  return g;
}

// chi of a single-mode density matrix over two coordinates of that mode
inline CharGrid density_grid(const CMat& rho, int mode, const RVec& a, const RVec& b) {
  const int base = mode == 1 ? 0 : 2;
  ModeKernel k(int(rho.rows()));
  CharGrid g;
  g.axis_a = base;
  g.axis_b = base + 1;
  g.a = a;
  g.b = b;
  g.values.resize(a.size(), b.size());
  for (long i = 0; i < a.size(); ++i)
    for (long j = 0; j < b.size(); ++j) {
      check_displacement_guard(a(i), b(j), int(rho.rows()) - 1, mode);
      g.values(i, j) = (rho * k.displacement(a(i), b(j))).trace();
    }
  return g;
}

inline cplx density_char(const CMat& rho, double uq, double up) {
  check_displacement_guard(uq, up, int(rho.rows()) - 1, 1);
  return (rho * ModeKernel(int(rho.rows())).displacement(uq, up)).trace();
}

// ---------------------------------------------------------------- qunaught

struct QunaughtReport {
  Qunaught variant{};
  double duration = 0;
  double sigma_z_before_reset = 0;
  double S_q = 0, S_p = 0;
  std::pair<int, int> expected{};
  bool signs_ok = false;
  std::optional<Squeezing> sq_q, sq_p;
  CharGrid grid;
  std::array<double, 2> mean_leak_peak{};
};

inline QunaughtReport run_qunaught_variant(const RunConfig& cfg, Qunaught v, std::uint64_t seed) {
  const HilbertConfig& c = cfg.hilbert;
  Circuit prep = prepare_qunaught(v, 1, cfg.prep);
  auto [body, reset] = detail::split_at_last_reset(prep);
  std::vector<Segment> segs(2);
  segs[0].circuit = body;
  segs[0].readouts = false;
  segs[1].circuit = reset;
  segs[1].readouts = false;
  // sigma_z is probed on both, density only matters after the reset
  std::vector<Probe> probes{detail::spin_probe(), detail::mode_density_probe(c, 1)};
  EstimateTable tab = estimate(detail::plan_for(cfg, seed), segs, {}, HybridState::vacuum(c), cfg.noise(), probes);
  const CMat rho = detail::unflatten(tab.mean[1], 1, c.dim1());

  QunaughtReport r;
  r.variant = v;
  r.duration = prep.duration();
  r.sigma_z_before_reset = tab.mean[0][0];
  const OperatorSet s = stabilizers_and_logicals(CodeParams{kLattice, 1, 0.37}, 1);
  r.S_q = density_char(rho, s.S_q.uq1, s.S_q.up1).real();
  r.S_p = density_char(rho, s.S_p.uq1, s.S_p.up1).real();
  r.expected = qunaught_signs(v);
  r.signs_ok = r.S_q * r.expected.first > 0 && r.S_p * r.expected.second > 0;
  try {
    r.sq_q = effective_squeezing(r.expected.first * r.S_q);
  } catch (const Error&) {
  }
  try {
    r.sq_p = effective_squeezing(r.expected.second * r.S_p);
  } catch (const Error&) {
  }
  r.grid = density_grid(rho, 1, cfg.qunaught.grid.axis(), cfg.qunaught.grid.axis());
  r.mean_leak_peak = tab.mean_leak_peak;
  return r;
}

inline nlohmann::ordered_json squeezing_json(const std::optional<Squeezing>& s) {
  if (!s) return {{"delta", nullptr}, {"dB", nullptr}, {"undefined", true}};
  nlohmann::ordered_json j = {{"delta", s->delta}, {"undefined", false}, {"saturated", s->saturated}};
  if (std::isfinite(s->dB)) j["dB"] = s->dB;
  else j["dB"] = nullptr;
  return j;
}

inline RunOutput cmd_qunaught(const RunConfig& cfg) {
  RunOutput out;
  const auto rec = detail::run_record(cfg);
  nlohmann::ordered_json variants = nlohmann::ordered_json::array();
  for (size_t k = 0; k < cfg.qunaught.variants.size(); ++k) {
    const Qunaught v = cfg.qunaught.variants[k];
    const QunaughtReport r = run_qunaught_variant(cfg, v, detail::sub_seed(cfg.seed, k));
    const std::string name = qunaught_name(v);
    out.files.push_back({"qunaught_" + name + "_grid.csv", csv_preamble("char-grid " + name, rec) + grid_csv(r.grid)});
    out.files.push_back({"qunaught_" + name + "_circuit.json", json_text(circuit_to_json(prepare_qunaught(v, 1, cfg.prep)))});
    variants.push_back({{"variant", name},
                        {"duration", r.duration},
                        {"sigma_z_before_reset", r.sigma_z_before_reset},
                        {"S_q", r.S_q},
                        {"S_p", r.S_p},
                        {"expected_signs", {r.expected.first, r.expected.second}},
                        {"signs_ok", r.signs_ok},
                        {"squeezing_q", squeezing_json(r.sq_q)},
                        {"squeezing_p", squeezing_json(r.sq_p)},
                        {"mean_leak_peak", r.mean_leak_peak}});
  }
  out.summary = {{"run", rec}, {"variants", variants}};
  out.files.push_back({"qunaught.json", json_text(out.summary)});
  return out;
}

// ---------------------------------------------------------------- Bell

struct BellSetup {
  HybridState initial;
  Circuit prep;  // empty for the ideal source
};

inline BellSetup bell_setup(const RunConfig& cfg, Bell b) {
  const Qunaught v = bell_input(b);
  BellSetup s;
  if (cfg.bell.source == "ideal") {
    s.initial = place_modes(cfg.hilbert, qunaught_fock(v, cfg.bell.kappa, cfg.hilbert.dim1()),
                            qunaught_fock(v, cfg.bell.kappa, cfg.hilbert.dim2()));
    s.prep.name = "ideal_source";
  } else {
    s.initial = HybridState::vacuum(cfg.hilbert);
    s.prep.name = std::string("prepare_") + bell_name(b);
    s.prep.append(prepare_qunaught(v, 1, cfg.prep)).append(prepare_qunaught(v, 2, cfg.prep));
  }
  return s;
}

inline std::vector<Readout> pauli_readouts(const ReadoutParams& rp) {
  std::vector<Readout> obs;
  for (int k = 1; k < 16; ++k) obs.push_back(fe_logical_readout(Pauli(k / 4), Pauli(k % 4), rp));
  return obs;
}

// sign of <P P> in the target Bell state
inline double bell_sign(Bell b, Pauli p) { return (bell_dm(b) * pauli_pair(p, p)).trace().real(); }

struct BellReport {
  Bell which{};
  PauliTable table;
  LogicalDM dm;
  std::array<double, 4> fidelity{};  // against phi+, phi-, psi+, psi-
  BootstrapResult bootstrap;
  CharGrid pre, post;
  long n_trajectories = 0;
  std::array<double, 2> mean_leak_peak{};
};

inline BellReport run_bell(const RunConfig& cfg, Bell b, std::uint64_t seed) {
  BellSetup s = bell_setup(cfg, b);
  const RVec ax = cfg.bell.grid.axis();
  const int pa = 1, pb = 3;  // (u_p1, u_p2)
  const long P = ax.size();
  Probe grid{"chi", size_t(2 * P * P), [&ax](const Ensemble& e) {
               CharGrid g = cross_mode_grid(e, pa, ax, pb, ax);
               std::vector<double> v;
               for (long i = 0; i < g.values.size(); ++i) {
                 v.push_back(g.values.data()[i].real());
                 v.push_back(g.values.data()[i].imag());
               }
               return v;
             }};
  std::vector<Segment> segs(2);
  segs[0].circuit = s.prep;
  segs[0].readouts = false;
  segs[0].label = "pre_beamsplitter";
  segs[1].circuit.add(cfg.beamsplitter.op(s.prep.duration()));
  segs[1].label = "post_beamsplitter";
  const std::vector<Readout> obs = pauli_readouts(cfg.readout);
  EstimateTable tab = estimate(detail::plan_for(cfg, seed), segs, obs, s.initial, cfg.noise(), {grid});

  BellReport r;
  r.which = b;
  r.n_trajectories = tab.n_trajectories;
  r.mean_leak_peak = tab.mean_leak_peak;
  for (int k = 1; k < 16; ++k)
    r.table.e[size_t(k)] = {tab.mean[1][size_t(k - 1)], cfg.bell.shots, tab.stderr_[1][size_t(k - 1)]};
  r.dm = reconstruct(r.table);
  for (int t = 0; t < 4; ++t) r.fidelity[size_t(t)] = fidelity(r.dm.rho, bell_dm(Bell(t)));
  r.bootstrap = bootstrap_fidelity(r.table, bell_dm(b), cfg.bell.bootstrap, seed);
  auto to_grid = [&](size_t row) {
    CharGrid g;
    g.axis_a = pa;
    g.axis_b = pb;
    g.a = ax;
    g.b = ax;
    g.values.resize(P, P);
    for (long i = 0; i < P * P; ++i)
      g.values.data()[i] = cplx(tab.mean[row][15 + size_t(2 * i)], tab.mean[row][16 + size_t(2 * i)]);
    return g;
  };
  r.pre = to_grid(0);
  r.post = to_grid(1);
  return r;
}

inline RunOutput cmd_bell(const RunConfig& cfg) {
  RunOutput out;
  const auto rec = detail::run_record(cfg);
  nlohmann::ordered_json states = nlohmann::ordered_json::array();
  double fsum = 0;
  for (size_t k = 0; k < cfg.bell.which.size(); ++k) {
    const Bell b = cfg.bell.which[k];
    const BellReport r = run_bell(cfg, b, detail::sub_seed(cfg.seed, k));
    const std::string name = bell_name(b);
    out.files.push_back({"bell_" + name + "_pre_grid.csv", csv_preamble("char-grid pre " + name, rec) + grid_csv(r.pre)});
    out.files.push_back({"bell_" + name + "_post_grid.csv", csv_preamble("char-grid post " + name, rec) + grid_csv(r.post)});
    nlohmann::ordered_json f;
    for (int t = 0; t < 4; ++t) f[bell_name(Bell(t))] = r.fidelity[size_t(t)];
    nlohmann::ordered_json j = {{"which", name},
                                {"n_trajectories", r.n_trajectories},
                                {"pauli_table", table_to_json(r.table)},
                                {"density_matrix", dm_to_json(r.dm)},
                                {"fidelity", r.fidelity[size_t(b)]},
                                {"fidelity_to", f},
                                {"bootstrap", {{"mean", r.bootstrap.mean}, {"sigma", r.bootstrap.sigma},
                                               {"n_resamples", cfg.bell.bootstrap}, {"shots", cfg.bell.shots}}},
                                {"mean_leak_peak", r.mean_leak_peak}};
    out.files.push_back({"bell_" + name + ".json", json_text({{"run", rec}, {"result", j}})});
    states.push_back(j);
    fsum += r.fidelity[size_t(b)];
  }
  out.summary = {{"run", rec}, {"states", states}, {"average_fidelity", fsum / double(cfg.bell.which.size())}};
  out.files.push_back({"bell_summary.json", json_text(out.summary)});
  return out;
}

// ---------------------------------------------------------------- QEC lifetime

struct DecayCurve {
  std::vector<double> t;                  // since the state was made
  std::array<std::vector<double>, 3> y;   // sign-corrected XX, YY, ZZ
  std::array<std::vector<double>, 3> err;
  std::array<double, 2> mean_leak_peak{};
};

inline const std::array<Pauli, 3>& lifetime_paulis() {
  static const std::array<Pauli, 3> p{Pauli::X, Pauli::Y, Pauli::Z};
  return p;
}

inline DecayCurve run_decay(const RunConfig& cfg, Bell b, bool qec, QecOrder order, std::uint64_t seed) {
  BellSetup s = bell_setup(cfg, b);
  std::vector<Segment> segs;
  Segment s0;
  s0.circuit = s.prep;
  s0.circuit.add(cfg.beamsplitter.op(s.prep.duration()));
  s0.label = "t0";
  segs.push_back(s0);
  const Circuit round = full_qec_round(order, cfg.sbs);
  Circuit idle;
  idle.name = "idle";
  idle.add(DelayOp{round.duration()});
  for (int k = 1; k <= cfg.qec.rounds; ++k) {
    Segment sk;
    sk.circuit = qec ? round : idle;
    sk.observe = k % cfg.qec.every == 0;
    sk.label = "round_" + std::to_string(k);
    segs.push_back(sk);
  }
  std::vector<Readout> obs;
  for (Pauli p : lifetime_paulis()) obs.push_back(fe_logical_readout(p, p, cfg.readout));
  EstimateTable tab = estimate(detail::plan_for(cfg, seed), segs, obs, s.initial, cfg.noise());
  DecayCurve d;
  d.mean_leak_peak = tab.mean_leak_peak;
  for (size_t c = 0; c < tab.times.size(); ++c) {
    d.t.push_back(tab.times[c] - tab.times[0]);
    for (size_t o = 0; o < 3; ++o) {
      d.y[o].push_back(bell_sign(b, lifetime_paulis()[o]) * tab.mean[c][o]);
      d.err[o].push_back(tab.stderr_[c][o]);
    }
  }
  return d;
}

// fit weights: trajectory standard errors, floored so exact runs stay well posed
inline std::vector<double> fit_errors(const std::vector<double>& e) {
  std::vector<double> out;
  for (double x : e) out.push_back(std::max(x, 1e-3));
  return out;
}

struct LifetimeSet {
  std::array<LifetimeFit, 3> exponential;
  std::array<std::optional<LifetimeFit>, 3> stretched;
};

inline LifetimeSet fit_curve(const DecayCurve& d) {
  LifetimeSet s;
  for (size_t o = 0; o < 3; ++o) {
    s.exponential[o] = fit_lifetime(d.t, d.y[o], fit_errors(d.err[o]), LifetimeModel::exponential);
    try {
      s.stretched[o] = fit_lifetime(d.t, d.y[o], fit_errors(d.err[o]), LifetimeModel::stretched);
    } catch (const Error&) {
    }
  }
  return s;
}

inline std::string curve_csv(const DecayCurve& d, const std::string& what, const nlohmann::ordered_json& rec) {
  CsvTable t({"time", "XX", "XX_err", "YY", "YY_err", "ZZ", "ZZ_err"});
  for (size_t k = 0; k < d.t.size(); ++k)
    t.row({d.t[k], d.y[0][k], d.err[0][k], d.y[1][k], d.err[1][k], d.y[2][k], d.err[2][k]});
  return csv_preamble(what, rec) + t.str();
}

inline nlohmann::ordered_json lifetimes_json(const LifetimeSet& s) {
  nlohmann::ordered_json j;
  for (size_t o = 0; o < 3; ++o) {
    const std::string n = std::string(2, pauli_char(lifetime_paulis()[o]));
    j[n] = {{"exponential", fit_to_json(s.exponential[o])},
            {"stretched", s.stretched[o] ? fit_to_json(*s.stretched[o]) : nlohmann::ordered_json(nullptr)}};
  }
  return j;
}

inline RunOutput cmd_qec_lifetime(const RunConfig& cfg) {
  RunOutput out;
  const auto rec = detail::run_record(cfg);
  const Bell b = cfg.qec.bell;
  out.files.push_back({"qec_round_circuit.json", json_text(circuit_to_json(full_qec_round(cfg.qec.order, cfg.sbs)))});
  nlohmann::ordered_json summary = {{"run", rec}, {"bell", bell_name(b)}};
  std::optional<LifetimeSet> on, off;
  for (int pass = 0; pass < 2; ++pass) {
    const bool qec = pass == 0;
    if (qec ? cfg.qec.mode == "off" : cfg.qec.mode == "on") continue;
    const std::string tag = qec ? "on" : "off";
    const DecayCurve d = run_decay(cfg, b, qec, cfg.qec.order, detail::sub_seed(cfg.seed, std::uint64_t(pass)));
    out.files.push_back({"qec_" + tag + ".csv", curve_csv(d, "qec-" + tag + " " + bell_name(b), rec)});
    LifetimeSet s = fit_curve(d);
    summary["qec_" + tag] = {{"lifetimes", lifetimes_json(s)}, {"mean_leak_peak", d.mean_leak_peak}};
    (qec ? on : off) = s;
  }
  if (on && off) {
    nlohmann::ordered_json ext;
    double sum = 0;
    std::array<double, 3> f{};
    for (size_t o = 0; o < 3; ++o) {
      const auto& a = on->exponential[o];
      const auto& z = off->exponential[o];
      f[o] = a.tau / z.tau;
      const double err = f[o] * std::hypot(a.tau_err / a.tau, z.tau_err / z.tau);
      ext[std::string(2, pauli_char(lifetime_paulis()[o]))] = {{"factor", f[o]}, {"err", err}};
      sum += f[o];
    }
    ext["mean_factor"] = sum / 3;
    ext["yy_not_above_zz"] = f[1] <= f[2];
    summary["extension"] = ext;
  }
  out.summary = summary;
  out.files.push_back({"qec_lifetime.json", json_text(summary)});
  return out;
}

// ---------------------------------------------------------------- phonon swap

inline RunOutput cmd_phonon_swap(const RunConfig& cfg) {
  RunOutput out;
  const auto rec = detail::run_record(cfg);
  const HilbertConfig& c = cfg.hilbert;
  const long d2 = c.dim2();
  auto pop = [d2](const Ensemble& e, int n1, int n2) {
    return e.mean([&](const CVec& a) { return std::norm(a((long(down) * (a.size() / 2 / d2) + n1) * d2 + n2)); });
  };
  Probe populations{"populations", 2, [pop](const Ensemble& e) { return std::vector<double>{pop(e, 1, 0), pop(e, 0, 1)}; }};
  CsvTable t({"gt", "from10_P10", "from10_P01", "from01_P10", "from01_P01", "sin2"});
  std::vector<double> gts, transfer;
  double max_dev = 0;
  const int n = cfg.phonon_swap.points;
  for (int i = 0; i < n; ++i) {
    const double gt = cfg.phonon_swap.gt_max * i / (n - 1);
    std::array<double, 4> v{};
    for (int init = 0; init < 2; ++init) {
      Segment s;
      // wall-clock cost scales with the rotation; a 50/50 splitter takes the configured duration
      s.circuit.add(BeamsplitterOp{gt, 0.0, cfg.beamsplitter.ramp_fraction, cfg.beamsplitter.duration * gt / (kPi / 4)});
      s.readouts = false;
      const HybridState in = init == 0 ? HybridState::basis(c, down, 1, 0) : HybridState::basis(c, down, 0, 1);
      EstimateTable tab = estimate(detail::plan_for(cfg, detail::sub_seed(cfg.seed, std::uint64_t(2 * i + init))), {s}, {},
                                   in, cfg.noise(), {populations});
      v[size_t(2 * init)] = tab.mean[0][0];
      v[size_t(2 * init + 1)] = tab.mean[0][1];
    }
    const double ref = std::pow(std::sin(gt), 2);
    t.row({gt, v[0], v[1], v[2], v[3], ref});
    gts.push_back(gt);
    transfer.push_back(v[1]);
    max_dev = std::max({max_dev, std::abs(v[1] - ref), std::abs(v[2] - ref)});
  }
  const SinSqFit fit = fit_sin_squared(gts, transfer, 1.0);
  out.summary = {{"run", rec},
                 {"fit", {{"amplitude", fit.amplitude}, {"rate", fit.rate}, {"rms", fit.rms}}},
                 {"max_deviation_from_sin2", max_dev}};
  out.files.push_back({"phonon_swap.csv", csv_preamble("phonon-swap", rec) + t.str()});
  out.files.push_back({"phonon_swap.json", json_text(out.summary)});
  return out;
}

// ---------------------------------------------------------------- beamsplitter phase calibration

struct PhaseScan {
  Bell target{};
  double t_prep = 0;
  std::vector<double> t_delay, value;  // value = target sign * <ZZ>
  std::optional<double> best_delay;
  bool flat = false;
};

// parabolic refinement of a sampled maximum at index i
inline double refine_peak(const std::vector<double>& x, const std::vector<double>& y, size_t i) {
  if (i == 0 || i + 1 >= y.size()) return x[i];
  const double a = y[i - 1], b = y[i], c = y[i + 1];
  const double den = a - 2 * b + c;
  if (den >= 0) return x[i];
  return x[i] + 0.5 * (a - c) / den * (x[i + 1] - x[i]);
}

namespace detail {
// sum of (y - mean) e^{-2 pi i x / P}
inline cplx harmonic(const std::vector<double>& x, const std::vector<double>& y, double P) {
  const double m = std::accumulate(y.begin(), y.end(), 0.0) / double(y.size());
  cplx s = 0;
  for (size_t i = 0; i < x.size(); ++i) s += (y[i] - m) * std::exp(-2 * kPi * kI * x[i] / P);
  return s;
}
}  // namespace detail

// delay period of the beamsplitter phase
inline double beamsplitter_period(const BeamsplitterParams& p) {
  const double dw = std::abs(p.omega1 - p.omega2);
  return dw > 0 ? 2 * kPi / dw : std::numeric_limits<double>::infinity();
}

// B at phase theta + pi is B^dag, and parity-symmetric inputs cannot tell the two apart,
// so joint logicals repeat every half phase period
inline double logical_scan_period(const BeamsplitterParams& p) { return beamsplitter_period(p) / 2; }

// noiseless: the scan probes the coherent frame, the quantity the delay compensates
inline PhaseScan scan_bs_phase(const RunConfig& cfg, Bell b) {
  BellSetup s = bell_setup(cfg, b);
  Ensemble pre = run_exact(s.prep, Ensemble::pure(s.initial));
  Executor ex(cfg.hilbert);
  const Readout zz = fe_logical_readout(Pauli::Z, Pauli::Z, cfg.readout);
  const double sign = bell_sign(b, Pauli::Z);
  const double T = beamsplitter_period(cfg.beamsplitter);
  const double span = std::isfinite(T) ? cfg.calibrate.periods * T : 1e-5;
  PhaseScan sc;
  sc.target = b;
  sc.t_prep = s.prep.duration();
  const int n = cfg.calibrate.points;
  for (int i = 0; i < n; ++i) {
    const double td = span * i / n;
    const double phase = beamsplitter_phase_from_delay(td + sc.t_prep, cfg.beamsplitter.omega1, cfg.beamsplitter.omega2);
    Ensemble e = pre;
    for (auto& br : e.branches) ex.apply_beamsplitter(br.amp, cfg.beamsplitter.angle, phase);
    sc.t_delay.push_back(td);
    sc.value.push_back(sign * readout_value(ex, e, zz));
  }
  const auto [lo, hi] = std::minmax_element(sc.value.begin(), sc.value.end());
  sc.flat = *hi - *lo < 1e-9;
  if (!sc.flat) {
    const double TL = logical_scan_period(cfg.beamsplitter);
    if (std::isfinite(TL)) {
      // peaks are symmetric, so the fundamental's phase sits on them
      const cplx S = detail::harmonic(sc.t_delay, sc.value, TL);
      sc.best_delay = std::fmod(-std::arg(S) / (2 * kPi) * TL + TL, TL);
    } else {
      sc.best_delay = refine_peak(sc.t_delay, sc.value, size_t(hi - sc.value.begin()));
    }
  }
  return sc;
}

namespace detail {
// residual of a least-squares Fourier series with H harmonics at period P
inline double periodic_residual(const std::vector<double>& x, const std::vector<double>& y, double P, int H) {
  const long n = long(x.size());
  Eigen::MatrixXd A(n, 1 + 2 * H);
  Eigen::VectorXd b(n);
  for (long i = 0; i < n; ++i) {
    A(i, 0) = 1.0;
    for (int h = 1; h <= H; ++h) {
      A(i, 2 * h - 1) = std::cos(2 * kPi * h * x[size_t(i)] / P);
      A(i, 2 * h) = std::sin(2 * kPi * h * x[size_t(i)] / P);
    }
    b(i) = y[size_t(i)];
  }
  const Eigen::VectorXd c = A.colPivHouseholderQr().solve(b);
  return (A * c - b).squaredNorm();
}
}  // namespace detail

// Period of the scan: seeded by the spacing of maxima above half height (small ripples in the
// flat regions are ignored), then the period minimizing a truncated Fourier-series fit.
inline std::optional<double> scan_period(const PhaseScan& sc) {
  const auto& y = sc.value;
  const auto& x = sc.t_delay;
  if (sc.flat || y.size() < 5) return std::nullopt;
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  const double half = 0.5 * (*lo + *hi);
  std::vector<double> peaks;
  for (size_t i = 1; i + 1 < y.size(); ++i)
    if (y[i] > half && y[i] > y[i - 1] && y[i] >= y[i + 1]) peaks.push_back(refine_peak(x, y, i));
  if (peaks.size() < 2) return std::nullopt;
  const double seed = (peaks.back() - peaks.front()) / double(peaks.size() - 1);
  const double dx = x[1] - x[0];
  const int H = std::clamp(int((seed / dx - 1) / 2), 1, 4);
  auto cost = [&](double P) { return detail::periodic_residual(x, y, P, H); };
  // coarse grid, then golden section around the best cell
  const int G = 200;
  double best = 0.8 * seed, fbest = cost(best);
  for (int k = 1; k <= G; ++k) {
    const double P = seed * (0.8 + 0.45 * k / G);
    const double f = cost(P);
    if (f < fbest) {
      fbest = f;
      best = P;
    }
  }
  const double step = 0.45 * seed / G;
  double a = best - step, b = best + step;
  const double g = (std::sqrt(5.0) - 1) / 2;
  double c = b - g * (b - a), d = a + g * (b - a), fc = cost(c), fd = cost(d);
  for (int it = 0; it < 60; ++it) {
    if (fc < fd) {
      b = d; d = c; fd = fc;
      c = b - g * (b - a); fc = cost(c);
    } else {
      a = c; c = d; fc = fd;
      d = a + g * (b - a); fd = cost(d);
    }
  }
  return 0.5 * (a + b);
}

inline RunOutput cmd_calibrate_bs_phase(const RunConfig& cfg) {
  RunOutput out;
  const auto rec = detail::run_record(cfg);
  std::vector<std::string> header{"t_delay"};
  std::vector<PhaseScan> scans;
  for (Bell b : cfg.calibrate.targets) {
    scans.push_back(scan_bs_phase(cfg, b));
    header.push_back(bell_name(b));
  }
  CsvTable t(header);
  for (size_t i = 0; i < scans[0].t_delay.size(); ++i) {
    std::vector<double> row{scans[0].t_delay[i]};
    for (const auto& s : scans) row.push_back(s.value[i]);
    t.row(row);
  }
  const double T = beamsplitter_period(cfg.beamsplitter);
  const double TL = logical_scan_period(cfg.beamsplitter);
  auto num_or_null = [](std::optional<double> x) {
    return x && std::isfinite(*x) ? nlohmann::ordered_json(*x) : nlohmann::ordered_json(nullptr);
  };
  nlohmann::ordered_json js = nlohmann::ordered_json::array();
  for (const auto& s : scans) {
    auto per = scan_period(s);
    js.push_back({{"target", bell_name(s.target)},
                  {"prep_duration", s.t_prep},
                  {"flat", s.flat},
                  {"best_delay", num_or_null(s.best_delay)},
                  {"measured_period", num_or_null(per)},
                  {"period_rel_error", per && std::isfinite(TL) ? nlohmann::ordered_json(std::abs(*per / TL - 1))
                                                                : nlohmann::ordered_json(nullptr)},
                  {"max_value", *std::max_element(s.value.begin(), s.value.end())}});
  }
  out.summary = {{"run", rec},
                 {"noise_applied", false},
                 {"phase_period", num_or_null(T)},
                 {"logical_period", num_or_null(TL)},
                 {"scans", js}};
  out.files.push_back({"calibrate_bs_phase.csv", csv_preamble("calibrate-bs-phase", rec) + t.str()});
  out.files.push_back({"calibrate_bs_phase.json", json_text(out.summary)});
  return out;
}

inline RunOutput run_experiment(const RunConfig& cfg) {
  if (cfg.experiment == "qunaught") return cmd_qunaught(cfg);
  if (cfg.experiment == "bell") return cmd_bell(cfg);
  if (cfg.experiment == "qec-lifetime") return cmd_qec_lifetime(cfg);
  if (cfg.experiment == "phonon-swap") return cmd_phonon_swap(cfg);
  if (cfg.experiment == "calibrate-bs-phase") return cmd_calibrate_bs_phase(cfg);
  throw Error(ErrorKind::invalid_config, "unknown experiment '" + cfg.experiment + "'");
}

}  // namespace gkpsim

#endif
