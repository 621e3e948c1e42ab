#ifndef GKPSIM_CONFIG_HPP
#define GKPSIM_CONFIG_HPP

#include <fstream>
#include <set>
#include <sstream>

#include "trajectory.hpp"

namespace gkpsim {

inline constexpr int kConfigSchemaVersion = 1;

// calibrated defaults; data/calibration.json mirrors these and a test keeps them in sync
namespace calibration {
inline constexpr double sbs_eps_d2 = 0.20, sbs_mu_d2 = 0.05;
inline constexpr double sbs_eps_d1 = 0.05, sbs_mu_d1 = 0.10;
inline constexpr double prep_eps = 0.18;
inline constexpr double readout_eps = 0.13, readout_eps_y = 0.16;
inline constexpr double detuning_offset = 90.0;  // rad/s, opposite sign on the two modes
}  // namespace calibration

enum class NoiseMode { off, standard, custom };

inline NoiseMode noise_mode_from_name(const std::string& s) {
  if (s == "off") return NoiseMode::off;
  if (s == "default") return NoiseMode::standard;
  if (s == "custom") return NoiseMode::custom;
  throw Error(ErrorKind::invalid_config, "--noise must be off, default or custom");
}
inline const char* noise_mode_name(NoiseMode m) {
  return m == NoiseMode::off ? "off" : m == NoiseMode::standard ? "default" : "custom";
}

inline NoiseParams default_noise() {
  NoiseParams n;
  n.detuning_offset = {calibration::detuning_offset, -calibration::detuning_offset};
  return n;
}

struct BeamsplitterParams {
  double angle = kPi / 4;
  double ramp_fraction = 0.5;
  double duration = 400e-6;
  double omega1 = 2 * kPi * 2.42e6, omega2 = 2 * kPi * 2.57e6;
  std::optional<double> t_delay;  // unset: cancel the phase accumulated during preparation

  // phase seen by the beamsplitter when it starts t_start after the modes were prepared
  double phase(double t_start) const {
    if (!t_delay) return 0.0;
    return beamsplitter_phase_from_delay(*t_delay + t_start, omega1, omega2);
  }
  BeamsplitterOp op(double t_start) const { return BeamsplitterOp{angle, phase(t_start), ramp_fraction, duration}; }
};

struct GridSpec {
  double extent = 3.5;
  int points = 29;
  RVec axis() const { return RVec::LinSpaced(points, -extent, extent); }
};

struct QunaughtSection {
  std::vector<Qunaught> variants{Qunaught::plain, Qunaught::q, Qunaught::p, Qunaught::qp};
  GridSpec grid{3.5, 29};
};

struct BellSection {
  std::string source = "prepared";  // prepared | ideal
  double kappa = 0.37;
  long shots = 300;
  int bootstrap = 1000;
  std::vector<Bell> which{Bell::phi_plus, Bell::phi_minus, Bell::psi_plus, Bell::psi_minus};
  GridSpec grid{2.5, 21};
};

struct QecSection {
  Bell bell = Bell::psi_plus;
  int rounds = 24;
  int every = 2;
  QecOrder order = QecOrder::sequential;
  std::string mode = "both";  // on | off | both
};

struct PhononSwapSection {
  int points = 41;
  double gt_max = kPi;
};

struct CalibrateSection {
  int points = 81;
  double periods = 2.0;
  std::vector<Bell> targets{Bell::phi_plus, Bell::phi_minus, Bell::psi_plus, Bell::psi_minus};
};

struct RunConfig {
  std::string experiment;
  std::uint64_t seed = 1;
  bool smoke = false;
  NoiseMode noise_mode = NoiseMode::standard;
  HilbertConfig hilbert;
  PrepParams prep;
  SbsParams sbs;
  ReadoutParams readout;
  NoiseParams noise_params = default_noise();
  TrajectoryPlan trajectories;
  BeamsplitterParams beamsplitter;
  QunaughtSection qunaught;
  BellSection bell;
  QecSection qec;
  PhononSwapSection phonon_swap;
  CalibrateSection calibrate;

  std::optional<NoiseParams> noise() const {
    if (noise_mode == NoiseMode::off) return std::nullopt;
    return noise_params;
  }
};

inline const std::vector<std::string>& experiments() {
  static const std::vector<std::string> e{"qunaught", "bell", "qec-lifetime", "phonon-swap", "calibrate-bs-phase"};
  return e;
}

// experiment-dependent defaults before the file is applied
inline RunConfig default_config(const std::string& experiment, bool smoke) {
  RunConfig c;
  c.experiment = experiment;
  c.smoke = smoke;
  if (experiment == "qunaught") {
    c.hilbert.n_max_1 = smoke ? 60 : 100;
    c.hilbert.n_max_2 = 6;
    c.trajectories.n_trajectories = smoke ? 4 : 20;
    if (smoke) c.qunaught.grid = {2.7, 15};
  } else if (experiment == "bell" || experiment == "qec-lifetime") {
    c.hilbert.n_max_1 = c.hilbert.n_max_2 = 50;
    c.trajectories.n_trajectories = smoke ? 4 : 100;
    if (smoke) {
      c.bell.grid = {2.5, 9};
      c.bell.bootstrap = 200;
      // long enough that corrected curves show a resolvable decay
      c.qec.rounds = 16;
      c.qec.every = 2;
      if (experiment == "qec-lifetime") c.trajectories.n_trajectories = 16;
    }
  } else if (experiment == "phonon-swap") {
    c.hilbert.n_max_1 = c.hilbert.n_max_2 = 8;
    c.hilbert.leak_guard = 2;
    c.phonon_swap.points = smoke ? 11 : 41;
  } else if (experiment == "calibrate-bs-phase") {
    c.hilbert.n_max_1 = c.hilbert.n_max_2 = smoke ? 30 : 40;
    c.calibrate.points = smoke ? 33 : 81;
    if (smoke) c.calibrate.targets = {Bell::phi_plus, Bell::psi_minus};
  } else {
    throw Error(ErrorKind::invalid_config, "unknown experiment '" + experiment + "'");
  }
  return c;
}

namespace detail {

using Json = nlohmann::ordered_json;

// reads keys of one object and rejects whatever is left over
class Section {
 public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw Error(ErrorKind::invalid_config, path_ + " must be an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw Error(ErrorKind::invalid_config, "unknown key '" + path_ + it.key() + "'");
  }
  bool has(const std::string& k) {
    seen_.insert(k);
    return j_.contains(k);
  }
  const Json& at(const std::string& k) { return j_.at(k); }
  std::string sub(const std::string& k) const { return path_ + k + "."; }

  template <class T>
  void get(const std::string& k, T& out) {
    if (!has(k)) return;
    try {
      out = j_.at(k).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorKind::invalid_config, "bad value for '" + path_ + k + "'");
    }
  }
  void get_mode_pair(const std::string& k, std::array<double, 2>& out) {
    if (!has(k)) return;
    const Json& v = j_.at(k);
    if (v.is_number()) {
      out = {v.get<double>(), v.get<double>()};
    } else if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
      out = {v[0].get<double>(), v[1].get<double>()};
    } else {
      throw Error(ErrorKind::invalid_config, "'" + path_ + k + "' must be a number or a pair");
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline std::vector<Bell> bells_from(const Json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw Error(ErrorKind::invalid_config, what + " must be a non-empty list");
  std::vector<Bell> out;
  for (const auto& x : j) out.push_back(bell_from_name(x.get<std::string>()));
  return out;
}

inline void read_grid(Section& s, const std::string& k, GridSpec& g) {
  if (!s.has(k)) return;
  Section t(s.at(k), s.sub(k));
  t.get("extent", g.extent);
  t.get("points", g.points);
  if (!(g.extent > 0) || g.points < 2) throw Error(ErrorKind::invalid_config, "grid needs extent > 0 and >= 2 points");
}

inline QecOrder order_from_name(const std::string& s) {
  if (s == "sequential") return QecOrder::sequential;
  if (s == "interleaved") return QecOrder::interleaved;
  throw Error(ErrorKind::invalid_config, "qec.order must be sequential or interleaved");
}
inline const char* order_name(QecOrder o) { return o == QecOrder::sequential ? "sequential" : "interleaved"; }

inline NoiseParams read_noise(const Json& j) {
  NoiseParams n = default_noise();
  Section s(j, "noise.");
  s.get_mode_pair("motional_dephasing_tau", n.motional_dephasing_tau);
  if (s.has("detuning_sigma") && !s.at("detuning_sigma").is_null()) {
    std::array<double, 2> d{};
    s.get_mode_pair("detuning_sigma", d);
    n.detuning_sigma = d;
  }
  s.get_mode_pair("detuning_offset", n.detuning_offset);
  s.get("spin_dephasing_tau", n.spin_dephasing_tau);
  s.get_mode_pair("heating_rate", n.heating_rate);
  s.get("recoil_sigma", n.recoil_sigma);
  return n;
}

}  // namespace detail

inline void validate(const RunConfig& c) {
  c.hilbert.validate();
  c.trajectories.validate();
  c.noise_params.validate();
  check_eps(c.prep.eps, false, "prep.eps");
  check_eps(c.readout.eps, true, "readout.eps");
  check_eps(c.readout.eps_y, true, "readout.eps_y");
  check_eps(c.sbs.eps, true, "sbs.eps");
  if (!(c.sbs.mu >= 0 && c.sbs.mu < kLattice / 4)) throw Error(ErrorKind::invalid_mu, "sbs.mu must lie in [0, l/4)");
  if (c.sbs.d != 1 && c.sbs.d != 2) throw Error(ErrorKind::invalid_config, "sbs.d must be 1 or 2");
  if (c.bell.source != "prepared" && c.bell.source != "ideal")
    throw Error(ErrorKind::invalid_config, "bell.source must be prepared or ideal");
  check_kappa(c.bell.kappa);
  if (c.bell.shots < 1) throw Error(ErrorKind::invalid_config, "bell.shots must be >= 1");
  if (c.bell.bootstrap < 2) throw Error(ErrorKind::invalid_config, "bell.bootstrap must be >= 2");
  if (c.qec.rounds < 1 || c.qec.every < 1) throw Error(ErrorKind::invalid_config, "qec.rounds and qec.every must be >= 1");
  if (c.qec.rounds / c.qec.every < 3)
    throw Error(ErrorKind::invalid_config, "qec needs at least 3 observed checkpoints after t = 0");
  if (c.qec.mode != "on" && c.qec.mode != "off" && c.qec.mode != "both")
    throw Error(ErrorKind::invalid_config, "qec.mode must be on, off or both");
  if (c.phonon_swap.points < 3) throw Error(ErrorKind::invalid_config, "phonon_swap.points must be >= 3");
  if (c.calibrate.points < 8 || !(c.calibrate.periods >= 1.0))
    throw Error(ErrorKind::invalid_config, "calibrate needs >= 8 points over >= 1 period");
  if (!(c.beamsplitter.ramp_fraction >= 0 && c.beamsplitter.ramp_fraction < 1))
    throw Error(ErrorKind::invalid_config, "beamsplitter.ramp_fraction must lie in [0, 1)");
  if (!(c.beamsplitter.duration >= 0)) throw Error(ErrorKind::invalid_config, "beamsplitter.duration must be >= 0");
}

// overlays a parsed document onto the experiment defaults
inline RunConfig config_from_json(const nlohmann::ordered_json& j, const std::string& experiment, bool smoke,
                                  NoiseMode noise_mode) {
  using detail::Section;
  RunConfig c = default_config(experiment, smoke);
  c.noise_mode = noise_mode;
  Section top(j, "");
  int version = 0;
  top.get("schema_version", version);
  if (version != kConfigSchemaVersion)
    throw Error(ErrorKind::invalid_config, "schema_version must be " + std::to_string(kConfigSchemaVersion));
  if (top.has("experiment") && top.at("experiment").get<std::string>() != experiment)
    throw Error(ErrorKind::invalid_config, "config is for experiment '" + top.at("experiment").get<std::string>() + "'");
  top.get("seed", c.seed);
  if (top.has("hilbert")) {
    Section s(top.at("hilbert"), "hilbert.");
    s.get("n_max_1", c.hilbert.n_max_1);
    s.get("n_max_2", c.hilbert.n_max_2);
    s.get("leak_guard", c.hilbert.leak_guard);
    s.get("leak_tol", c.hilbert.leak_tol);
  }
  if (top.has("prep")) {
    Section s(top.at("prep"), "prep.");
    s.get("r", c.prep.r);
    s.get("eps", c.prep.eps);
    s.get("sdf_duration", c.prep.sdf_duration);
    s.get("squeeze_duration", c.prep.squeeze_duration);
    s.get("reset_duration", c.prep.reset_duration);
    s.get("rotation_duration", c.prep.rotation_duration);
  }
  if (top.has("sbs")) {
    Section s(top.at("sbs"), "sbs.");
    s.get("d", c.sbs.d);
    if (c.sbs.d == 1) {
      c.sbs.eps = calibration::sbs_eps_d1;
      c.sbs.mu = calibration::sbs_mu_d1;
    }
    s.get("eps", c.sbs.eps);
    s.get("mu", c.sbs.mu);
    s.get("rotations", c.sbs.rotations);
    s.get("small_duration", c.sbs.small_duration);
    s.get("big_duration", c.sbs.big_duration);
    s.get("feedback_duration", c.sbs.feedback_duration);
    s.get("reset_duration", c.sbs.reset_duration);
    s.get("rotation_duration", c.sbs.rotation_duration);
  }
  if (top.has("readout")) {
    Section s(top.at("readout"), "readout.");
    s.get("eps", c.readout.eps);
    s.get("eps_y", c.readout.eps_y);
    s.get("bias_duration", c.readout.bias_duration);
    s.get("sdf_duration", c.readout.sdf_duration);
  }
  if (top.has("noise")) {
    if (noise_mode == NoiseMode::custom) c.noise_params = detail::read_noise(top.at("noise"));
    else detail::read_noise(top.at("noise"));  // still validated for unknown keys
  } else if (noise_mode == NoiseMode::custom) {
    throw Error(ErrorKind::invalid_config, "--noise custom needs a 'noise' section");
  }
  if (top.has("trajectories")) {
    Section s(top.at("trajectories"), "trajectories.");
    s.get("n_trajectories", c.trajectories.n_trajectories);
    s.get("max_branches", c.trajectories.max_branches);
    s.get("threads", c.trajectories.threads);
  }
  if (top.has("beamsplitter")) {
    Section s(top.at("beamsplitter"), "beamsplitter.");
    s.get("angle", c.beamsplitter.angle);
    s.get("ramp_fraction", c.beamsplitter.ramp_fraction);
    s.get("duration", c.beamsplitter.duration);
    s.get("omega1", c.beamsplitter.omega1);
    s.get("omega2", c.beamsplitter.omega2);
    if (s.has("t_delay")) {
      const auto& v = s.at("t_delay");
      if (v.is_number()) c.beamsplitter.t_delay = v.get<double>();
      else if (!(v.is_string() && v.get<std::string>() == "auto"))
        throw Error(ErrorKind::invalid_config, "beamsplitter.t_delay must be a number or \"auto\"");
    }
  }
  if (top.has("qunaught")) {
    Section s(top.at("qunaught"), "qunaught.");
    if (s.has("variants")) {
      c.qunaught.variants.clear();
      for (const auto& v : s.at("variants")) c.qunaught.variants.push_back(qunaught_from_name(v.get<std::string>()));
      if (c.qunaught.variants.empty()) throw Error(ErrorKind::invalid_config, "qunaught.variants is empty");
    }
    detail::read_grid(s, "grid", c.qunaught.grid);
  }
  if (top.has("bell")) {
    Section s(top.at("bell"), "bell.");
    s.get("source", c.bell.source);
    s.get("kappa", c.bell.kappa);
    s.get("shots", c.bell.shots);
    s.get("bootstrap", c.bell.bootstrap);
    if (s.has("which")) c.bell.which = detail::bells_from(s.at("which"), "bell.which");
    detail::read_grid(s, "grid", c.bell.grid);
  }
  if (top.has("qec")) {
    Section s(top.at("qec"), "qec.");
    if (s.has("bell")) c.qec.bell = bell_from_name(s.at("bell").get<std::string>());
    s.get("rounds", c.qec.rounds);
    s.get("every", c.qec.every);
    if (s.has("order")) c.qec.order = detail::order_from_name(s.at("order").get<std::string>());
    s.get("mode", c.qec.mode);
  }
  if (top.has("phonon_swap")) {
    Section s(top.at("phonon_swap"), "phonon_swap.");
    s.get("points", c.phonon_swap.points);
    s.get("gt_max", c.phonon_swap.gt_max);
  }
  if (top.has("calibrate")) {
    Section s(top.at("calibrate"), "calibrate.");
    s.get("points", c.calibrate.points);
    s.get("periods", c.calibrate.periods);
    if (s.has("targets")) c.calibrate.targets = detail::bells_from(s.at("targets"), "calibrate.targets");
  }
  validate(c);
  return c;
}

inline RunConfig load_config(const std::string& path, const std::string& experiment, bool smoke, NoiseMode mode) {
  if (path.empty()) {
    RunConfig c = default_config(experiment, smoke);
    c.noise_mode = mode;
    if (mode == NoiseMode::custom) throw Error(ErrorKind::invalid_config, "--noise custom needs --config");
    validate(c);
    return c;
  }
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::invalid_config, "cannot read config '" + path + "'");
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::invalid_config, std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j, experiment, smoke, mode);
}

// fully resolved record echoed into every artifact
inline nlohmann::ordered_json config_to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["experiment"] = c.experiment;
  j["seed"] = c.seed;
  j["smoke"] = c.smoke;
  j["noise_mode"] = noise_mode_name(c.noise_mode);
  j["hilbert"] = {{"n_max_1", c.hilbert.n_max_1}, {"n_max_2", c.hilbert.n_max_2},
                  {"leak_guard", c.hilbert.leak_guard}, {"leak_tol", c.hilbert.leak_tol}};
  j["prep"] = {{"r", c.prep.r}, {"eps", c.prep.eps}, {"sdf_duration", c.prep.sdf_duration},
               {"squeeze_duration", c.prep.squeeze_duration}, {"reset_duration", c.prep.reset_duration},
               {"rotation_duration", c.prep.rotation_duration}};
  j["sbs"] = {{"d", c.sbs.d}, {"eps", c.sbs.eps}, {"mu", c.sbs.mu}, {"rotations", c.sbs.rotations},
              {"small_duration", c.sbs.small_duration}, {"big_duration", c.sbs.big_duration},
              {"feedback_duration", c.sbs.feedback_duration}, {"reset_duration", c.sbs.reset_duration},
              {"rotation_duration", c.sbs.rotation_duration}};
  j["readout"] = {{"eps", c.readout.eps}, {"eps_y", c.readout.eps_y}, {"bias_duration", c.readout.bias_duration},
                  {"sdf_duration", c.readout.sdf_duration}};
  if (c.noise()) j["noise"] = noise_to_json(*c.noise());
  else j["noise"] = nullptr;
  j["trajectories"] = {{"n_trajectories", c.trajectories.n_trajectories},
                       {"max_branches", c.trajectories.max_branches}, {"threads", c.trajectories.threads}};
  nlohmann::ordered_json bs = {{"angle", c.beamsplitter.angle}, {"ramp_fraction", c.beamsplitter.ramp_fraction},
                               {"duration", c.beamsplitter.duration}, {"omega1", c.beamsplitter.omega1},
                               {"omega2", c.beamsplitter.omega2}};
  if (c.beamsplitter.t_delay) bs["t_delay"] = *c.beamsplitter.t_delay;
  else bs["t_delay"] = "auto";
  j["beamsplitter"] = bs;
  auto grid = [](const GridSpec& g) { return nlohmann::ordered_json{{"extent", g.extent}, {"points", g.points}}; };
  auto bells = [](const std::vector<Bell>& v) {
    nlohmann::ordered_json a = nlohmann::ordered_json::array();
    for (Bell b : v) a.push_back(bell_name(b));
    return a;
  };
  if (c.experiment == "qunaught") {
    nlohmann::ordered_json v = nlohmann::ordered_json::array();
    for (Qunaught q : c.qunaught.variants) v.push_back(qunaught_name(q));
    j["qunaught"] = {{"variants", v}, {"grid", grid(c.qunaught.grid)}};
  }
  if (c.experiment == "bell" || c.experiment == "qec-lifetime")
    j["bell"] = {{"source", c.bell.source}, {"kappa", c.bell.kappa}, {"shots", c.bell.shots},
                 {"bootstrap", c.bell.bootstrap}, {"which", bells(c.bell.which)}, {"grid", grid(c.bell.grid)}};
  if (c.experiment == "qec-lifetime")
    j["qec"] = {{"bell", bell_name(c.qec.bell)}, {"rounds", c.qec.rounds}, {"every", c.qec.every},
                {"order", detail::order_name(c.qec.order)}, {"mode", c.qec.mode}};
  if (c.experiment == "phonon-swap") j["phonon_swap"] = {{"points", c.phonon_swap.points}, {"gt_max", c.phonon_swap.gt_max}};
  if (c.experiment == "calibrate-bs-phase")
    j["calibrate"] = {{"points", c.calibrate.points}, {"periods", c.calibrate.periods},
                      {"targets", bells(c.calibrate.targets)}};
  return j;
}

}  // namespace gkpsim

#endif
