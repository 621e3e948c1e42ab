#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <set>

#include "test_util.hpp"

using namespace gkpsim;
using namespace gkpsim::testing;
namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

RunConfig parse(const std::string& text, const std::string& exp = "bell", NoiseMode m = NoiseMode::standard) {
  return config_from_json(Json::parse(text), exp, false, m);
}

ErrorKind parse_error(const std::string& text, const std::string& exp = "bell", NoiseMode m = NoiseMode::standard) {
  try {
    parse(text, exp, m);
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error for " << text;
  return ErrorKind::truncation;
}

fs::path scratch_dir(const std::string& name) {
  fs::path p = fs::path(::testing::TempDir()) / ("gkpsim_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + GKPSIM_CLI + "\" " + args + " > /dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

fs::path write_config(const fs::path& dir, const std::string& name, const std::string& text) {
  fs::path p = dir / name;
  write_atomic(p, text);
  return p;
}

std::map<std::string, std::string> read_tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_file(e.path());
  return out;
}

double circ_dist(double a, double period) {
  double r = std::fmod(std::fmod(a, period) + period, period);
  return std::min(r, period - r);
}

}  // namespace

// ---------------------------------------------------------------- config

TEST(Config, DefaultsValidForEveryExperiment) {
  for (const auto& e : experiments())
    for (bool smoke : {false, true}) EXPECT_NO_THROW(validate(default_config(e, smoke))) << e;
  EXPECT_THROW(default_config("nope", false), Error);
}

TEST(Config, SchemaVersionRequired) {
  EXPECT_EQ(parse_error("{}"), ErrorKind::invalid_config);
  EXPECT_EQ(parse_error(R"({"schema_version": 2})"), ErrorKind::invalid_config);
  EXPECT_NO_THROW(parse(R"({"schema_version": 1})"));
}

TEST(Config, UnknownKeysRejected) {
  EXPECT_EQ(parse_error(R"({"schema_version": 1, "colour": 3})"), ErrorKind::invalid_config);
  EXPECT_EQ(parse_error(R"({"schema_version": 1, "hilbert": {"n_max": 3}})"), ErrorKind::invalid_config);
  EXPECT_EQ(parse_error(R"({"schema_version": 1, "noise": {"t1": 3}})"), ErrorKind::invalid_config);
  EXPECT_EQ(parse_error(R"({"schema_version": 1, "bell": {"grid": {"extent": 2, "pts": 3}}})"), ErrorKind::invalid_config);
}

TEST(Config, BadValues) {
  EXPECT_EQ(parse_error(R"({"schema_version": 1, "experiment": "qunaught"})"), ErrorKind::invalid_config);
  EXPECT_EQ(parse_error(R"({"schema_version": 1, "hilbert": {"n_max_1": "big"}})"), ErrorKind::invalid_config);
  EXPECT_EQ(parse_error(R"({"schema_version": 1, "readout": {"eps": -0.1}})"), ErrorKind::invalid_epsilon);
  EXPECT_EQ(parse_error(R"({"schema_version": 1, "sbs": {"mu": 5}})"), ErrorKind::invalid_mu);
  EXPECT_EQ(parse_error(R"({"schema_version": 1, "sbs": {"d": 3}})"), ErrorKind::invalid_config);
  EXPECT_EQ(parse_error(R"({"schema_version": 1, "bell": {"source": "magic"}})"), ErrorKind::invalid_config);
  EXPECT_EQ(parse_error(R"({"schema_version": 1, "noise": {"heating_rate": [1, 2, 3]}})"), ErrorKind::invalid_config);
  EXPECT_EQ(parse_error(R"({"schema_version": 1, "beamsplitter": {"t_delay": "soon"}})"), ErrorKind::invalid_config);
  EXPECT_EQ(parse_error(R"({"schema_version": 1, "qec": {"rounds": 4, "every": 2}})", "qec-lifetime"),
            ErrorKind::invalid_config);
}

TEST(Config, OverlaysOntoDefaults) {
  const RunConfig c = parse(R"({"schema_version": 1, "seed": 77, "hilbert": {"n_max_2": 30},
                                "beamsplitter": {"t_delay": 1.5e-6}, "bell": {"which": ["psi_minus"]}})");
  EXPECT_EQ(c.seed, 77u);
  EXPECT_EQ(c.hilbert.n_max_1, 50);
  EXPECT_EQ(c.hilbert.n_max_2, 30);
  ASSERT_TRUE(c.beamsplitter.t_delay);
  EXPECT_EQ(*c.beamsplitter.t_delay, 1.5e-6);
  ASSERT_EQ(c.bell.which.size(), 1u);
  EXPECT_EQ(c.bell.which[0], Bell::psi_minus);
  EXPECT_FALSE(parse(R"({"schema_version": 1, "beamsplitter": {"t_delay": "auto"}})").beamsplitter.t_delay);
}

TEST(Config, SbsDimensionOneSwitchesCalibration) {
  const RunConfig c = parse(R"({"schema_version": 1, "sbs": {"d": 1}})");
  EXPECT_EQ(c.sbs.eps, calibration::sbs_eps_d1);
  EXPECT_EQ(c.sbs.mu, calibration::sbs_mu_d1);
  const RunConfig c2 = parse(R"({"schema_version": 1, "sbs": {"d": 1, "eps": 0.07}})");
  EXPECT_EQ(c2.sbs.eps, 0.07);
}

TEST(Config, NoiseModes) {
  const std::string text = R"({"schema_version": 1, "noise": {"heating_rate": 5, "detuning_offset": [1, 2]}})";
  const RunConfig custom = parse(text, "bell", NoiseMode::custom);
  ASSERT_TRUE(custom.noise());
  EXPECT_EQ(custom.noise()->heating_rate, (std::array<double, 2>{5, 5}));
  EXPECT_EQ(custom.noise()->detuning_offset, (std::array<double, 2>{1, 2}));
  EXPECT_EQ(custom.noise()->spin_dephasing_tau, 3e-3);  // unspecified keys keep defaults
  const RunConfig def = parse(text, "bell", NoiseMode::standard);
  EXPECT_EQ(def.noise()->heating_rate, (std::array<double, 2>{0, 0}));
  EXPECT_EQ(def.noise()->detuning_offset, (std::array<double, 2>{calibration::detuning_offset, -calibration::detuning_offset}));
  EXPECT_FALSE(parse(text, "bell", NoiseMode::off).noise());
  EXPECT_EQ(parse_error(R"({"schema_version": 1})", "bell", NoiseMode::custom), ErrorKind::invalid_config);
  EXPECT_THROW(load_config("", "bell", false, NoiseMode::custom), Error);
  EXPECT_EQ(noise_mode_from_name("default"), NoiseMode::standard);
  EXPECT_THROW(noise_mode_from_name("loud"), Error);
}

TEST(Config, EchoCarriesSeedAndNoise) {
  RunConfig c = default_config("qec-lifetime", true);
  c.seed = 9;
  const Json j = config_to_json(c);
  EXPECT_EQ(j["seed"].get<int>(), 9);
  EXPECT_EQ(j["noise"]["detuning_offset"][1].get<double>(), -calibration::detuning_offset);
  EXPECT_EQ(j["qec"]["rounds"].get<int>(), c.qec.rounds);
  c.noise_mode = NoiseMode::off;
  EXPECT_TRUE(config_to_json(c)["noise"].is_null());
}

TEST(Config, CalibrationFileMatchesConstants) {
  const Json j = Json::parse(read_file(fs::path(source_dir()) / "data" / "calibration.json"));
  EXPECT_EQ(j["schema_version"].get<int>(), 1);
  EXPECT_EQ(j["sbs"]["d2"]["eps"].get<double>(), calibration::sbs_eps_d2);
  EXPECT_EQ(j["sbs"]["d2"]["mu"].get<double>(), calibration::sbs_mu_d2);
  EXPECT_EQ(j["sbs"]["d1"]["eps"].get<double>(), calibration::sbs_eps_d1);
  EXPECT_EQ(j["sbs"]["d1"]["mu"].get<double>(), calibration::sbs_mu_d1);
  EXPECT_EQ(j["prep"]["eps"].get<double>(), calibration::prep_eps);
  EXPECT_EQ(j["readout"]["eps"].get<double>(), calibration::readout_eps);
  EXPECT_EQ(j["readout"]["eps_y"].get<double>(), calibration::readout_eps_y);
  EXPECT_EQ(j["noise"]["detuning_offset"].get<double>(), calibration::detuning_offset);

  // built-in defaults agree with the calibration record
  const SbsParams sbs;
  const PrepParams prep;
  const ReadoutParams ro;
  const NoiseParams n = default_noise();
  EXPECT_EQ(sbs.eps, calibration::sbs_eps_d2);
  EXPECT_EQ(sbs.mu, calibration::sbs_mu_d2);
  EXPECT_EQ(prep.eps, calibration::prep_eps);
  EXPECT_EQ(ro.eps, calibration::readout_eps);
  EXPECT_EQ(ro.eps_y, calibration::readout_eps_y);
  EXPECT_EQ(n.motional_dephasing_tau[0], j["noise"]["motional_dephasing_tau"].get<double>());
  EXPECT_EQ(n.spin_dephasing_tau, j["noise"]["spin_dephasing_tau"].get<double>());
  EXPECT_EQ(n.recoil_sigma, j["noise"]["recoil_sigma"].get<double>());
  EXPECT_EQ(n.heating_rate[0], j["noise"]["heating_rate"].get<double>());

  // the chosen point is in the recorded grid, leak-free, and best by the recorded metric
  for (const char* key : {"d1", "d2"}) {
    const auto& sec = j["sbs"][key];
    const double eps = sec["eps"].get<double>(), mu = sec["mu"].get<double>();
    bool found = false;
    double chosen = 0, best = 1e9;
    for (const auto& row : sec["grid"]) {
      if (row["leaked"].get<bool>()) continue;
      const double m = std::max(row["delta_q"].get<double>(), row["delta_p"].get<double>());
      best = std::min(best, m);
      if (std::abs(row["eps"].get<double>() - eps) < 1e-12 && std::abs(row["mu"].get<double>() - mu) < 1e-12) {
        found = true;
        chosen = m;
      }
    }
    ASSERT_TRUE(found) << key;
    EXPECT_LE(chosen, best + 0.02) << key;
  }
}

// ---------------------------------------------------------------- commands

TEST(PhononSwap, SinSquaredTransfer) {
  RunConfig c = default_config("phonon-swap", false);
  c.noise_mode = NoiseMode::off;
  c.phonon_swap.points = 9;  // gt = k pi / 8
  const RunOutput r = cmd_phonon_swap(c);
  EXPECT_LT(r.summary["max_deviation_from_sin2"].get<double>(), 1e-6);
  EXPECT_NEAR(r.summary["fit"]["rate"].get<double>(), 1.0, 1e-6);
  EXPECT_NEAR(r.summary["fit"]["amplitude"].get<double>(), 1.0, 1e-6);
  // rows: gt, from10_P10, from10_P01, from01_P10, from01_P01, sin2
  std::istringstream in(r.files[0].content);
  std::string line;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line[0] == 'g') continue;
    std::vector<double> v;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) v.push_back(std::stod(cell));
    rows.push_back(v);
  }
  ASSERT_EQ(rows.size(), 9u);
  EXPECT_NEAR(rows[2][0], kPi / 4, 1e-9);
  EXPECT_NEAR(rows[2][1], 0.5, 1e-6);
  EXPECT_NEAR(rows[2][2], 0.5, 1e-6);
  EXPECT_NEAR(rows[4][0], kPi / 2, 1e-9);
  EXPECT_NEAR(rows[4][2], 1.0, 1e-6);
  EXPECT_NEAR(rows[4][3], 1.0, 1e-6);
  EXPECT_NEAR(rows[4][1], 0.0, 1e-6);
}

TEST(CalibrateBsPhase, PeriodAndRecommendation) {
  RunConfig c = default_config("calibrate-bs-phase", true);
  c.calibrate.targets = {Bell::phi_plus};
  const RunOutput r = cmd_calibrate_bs_phase(c);
  const double T = 2 * kPi / std::abs(c.beamsplitter.omega1 - c.beamsplitter.omega2);
  EXPECT_NEAR(r.summary["phase_period"].get<double>(), T, 1e-15);
  EXPECT_NEAR(r.summary["logical_period"].get<double>(), T / 2, 1e-15);
  const auto& s = r.summary["scans"][0];
  EXPECT_LT(std::abs(s["measured_period"].get<double>() / (T / 2) - 1), 0.01);
  EXPECT_FALSE(s["flat"].get<bool>());
  // running the Bell pipeline at the recommended delay reaches the scan maximum
  const PhaseScan sc = scan_bs_phase(c, Bell::phi_plus);
  ASSERT_TRUE(sc.best_delay);
  const double best_val = *std::max_element(sc.value.begin(), sc.value.end());
  RunConfig at = c;
  at.calibrate.points = 8;
  at.calibrate.periods = 1;
  BeamsplitterParams bp = c.beamsplitter;
  bp.t_delay = *sc.best_delay;
  Ensemble e = run_exact(bell_setup(c, Bell::phi_plus).prep, Ensemble::pure(bell_setup(c, Bell::phi_plus).initial));
  Executor ex(c.hilbert);
  for (auto& b : e.branches) ex.apply_beamsplitter(b.amp, bp.angle, bp.phase(sc.t_prep));
  const double v = readout_value(ex, e, fe_logical_readout(Pauli::Z, Pauli::Z, c.readout));
  EXPECT_GE(v, best_val - 0.02);
}

TEST(CalibrateBsPhase, OptimaShiftWithPrepDuration) {
  RunConfig c = default_config("calibrate-bs-phase", true);
  const double TL = logical_scan_period(c.beamsplitter);
  // default preps: phi+ and psi- take equally long, so their optima agree
  const PhaseScan a = scan_bs_phase(c, Bell::phi_plus), b = scan_bs_phase(c, Bell::psi_minus);
  EXPECT_EQ(a.t_prep, b.t_prep);
  EXPECT_LT(circ_dist(*a.best_delay - *b.best_delay, TL), 0.02 * TL);
  // both modes get the variant prep, four extra pulses in total; a 1 us longer pulse moves the optima apart
  c.prep.sdf_duration = 61e-6;
  c.hilbert.n_max_1 = c.hilbert.n_max_2 = 40;
  const PhaseScan m = scan_bs_phase(c, Bell::phi_minus), p = scan_bs_phase(c, Bell::psi_plus);
  const double dt = m.t_prep - p.t_prep;
  EXPECT_NEAR(dt, 264e-6, 1e-12);
  const double shift = *m.best_delay - *p.best_delay;
  EXPECT_GT(circ_dist(shift, TL), 0.15 * TL);
  // optimum + prep time is the same phase for every target
  EXPECT_LT(circ_dist(shift + dt, TL), 0.02 * TL);
}

TEST(CalibrateBsPhase, ZeroDetuningIsFlat) {
  RunConfig c = default_config("calibrate-bs-phase", true);
  c.beamsplitter.omega2 = c.beamsplitter.omega1;
  c.calibrate.targets = {Bell::phi_plus, Bell::psi_plus};
  const RunOutput r = cmd_calibrate_bs_phase(c);
  EXPECT_TRUE(r.summary["phase_period"].is_null());
  for (const auto& s : r.summary["scans"]) {
    EXPECT_TRUE(s["flat"].get<bool>());
    EXPECT_TRUE(s["best_delay"].is_null());
    EXPECT_TRUE(s["measured_period"].is_null());
  }
}

TEST(Bell, BeamsplitterRotatesLattice) {
  // qunaught stabilizer (l, 0) before, joint logical (sqrt pi, sqrt pi) after
  RunConfig c = default_config("bell", false);
  c.noise_mode = NoiseMode::off;
  c.bell.source = "ideal";
  c.bell.bootstrap = 10;
  c.bell.grid = {kLattice, 3};
  BellReport r = run_bell(c, Bell::phi_plus, 1);
  EXPECT_GT(std::abs(r.pre.values(2, 1)), 0.5);
  EXPECT_LT(std::abs(r.post.values(2, 1)), 0.15);
  c.bell.grid = {kSqrtPi, 3};
  r = run_bell(c, Bell::phi_plus, 1);
  EXPECT_LT(std::abs(r.pre.values(2, 2)), 0.15);
  EXPECT_GT(std::abs(r.post.values(2, 2)), 0.5);
  EXPECT_GT(std::abs(r.post.values(0, 0)), 0.5);
}

TEST(Qunaught, NoiselessReport) {
  RunConfig c = default_config("qunaught", true);
  c.noise_mode = NoiseMode::off;
  c.qunaught.grid = {2.5, 3};
  const RunOutput r = cmd_qunaught(c);
  const auto& vs = r.summary["variants"];
  ASSERT_EQ(vs.size(), 4u);
  std::set<std::pair<int, int>> seen;
  for (size_t i = 0; i < 4; ++i) {
    const auto want = qunaught_signs(c.qunaught.variants[i]);
    const std::array<int, 2> signs_i{want.first, want.second};
    seen.insert(want);
    SCOPED_TRACE(vs[i].dump());
    EXPECT_EQ(vs[i]["expected_signs"][0].get<int>(), signs_i[0]);
    EXPECT_EQ(vs[i]["expected_signs"][1].get<int>(), signs_i[1]);
    EXPECT_TRUE(vs[i]["signs_ok"].get<bool>());
    EXPECT_GT(vs[i]["S_q"].get<double>() * signs_i[0], 0.0);
    EXPECT_GT(vs[i]["S_p"].get<double>() * signs_i[1], 0.0);
    EXPECT_LE(vs[i]["squeezing_q"]["delta"].get<double>(), 0.60);
    EXPECT_LE(vs[i]["squeezing_p"]["delta"].get<double>(), 0.60);
    EXPECT_GE(std::abs(vs[i]["sigma_z_before_reset"].get<double>()), 0.95);
  }
  EXPECT_EQ(seen.size(), 4u);
}

// ---------------------------------------------------------------- binary

TEST(Cli, ExitCodes) {
  const fs::path d = scratch_dir("exit");
  EXPECT_EQ(run_cli("phonon-swap --smoke --out \"" + (d / "ok").string() + "\""), 0);
  EXPECT_TRUE(fs::exists(d / "ok" / "phonon_swap.csv"));
  EXPECT_EQ(run_cli(""), 2);
  EXPECT_EQ(run_cli("teleport"), 2);
  EXPECT_EQ(run_cli("bell --noise loud"), 2);
  EXPECT_EQ(run_cli("bell --noise custom"), 2);
  EXPECT_EQ(run_cli("bell --config \"" + (d / "missing.json").string() + "\""), 2);
  const fs::path bad = write_config(d, "bad.json", R"({"schema_version": 1, "hilbert": {"nmax": 3}})");
  EXPECT_EQ(run_cli("bell --config \"" + bad.string() + "\" --out \"" + (d / "bad").string() + "\""), 2);
  const fs::path junk = write_config(d, "junk.json", "{ not json");
  EXPECT_EQ(run_cli("bell --config \"" + junk.string() + "\""), 2);
  // prep squeezing does not fit a 20-level cutoff
  const fs::path small = write_config(d, "small.json", R"({"schema_version": 1, "hilbert": {"n_max_1": 20, "leak_guard": 3}})");
  EXPECT_EQ(run_cli("qunaught --smoke --noise off --config \"" + small.string() + "\" --out \"" + (d / "tr").string() + "\""), 3);
  // noiseless idle curve never decays, so no lifetime can be fitted
  const fs::path flat = write_config(d, "flat.json", R"({"schema_version": 1, "bell": {"source": "ideal"}, "qec": {"mode": "off"}})");
  EXPECT_EQ(run_cli("qec-lifetime --smoke --noise off --config \"" + flat.string() + "\" --out \"" + (d / "fit").string() + "\""), 4);
  fs::remove_all(d);
}

TEST(Cli, RerunIsByteIdentical) {
  const fs::path d = scratch_dir("rerun");
  for (const char* cmd : {"qunaught", "phonon-swap"}) {
    for (const char* sub : {"a", "b"})
      ASSERT_EQ(run_cli(std::string(cmd) + " --smoke --seed 5 --out \"" + (d / cmd / sub).string() + "\""), 0);
    EXPECT_EQ(read_tree(d / cmd / "a"), read_tree(d / cmd / "b")) << cmd;
  }
  ASSERT_EQ(run_cli("phonon-swap --smoke --seed 6 --noise default --out \"" + (d / "c").string() + "\""), 0);
  fs::remove_all(d);
}

TEST(Cli, SeedOverrideIsEchoed) {
  const fs::path d = scratch_dir("seed");
  ASSERT_EQ(run_cli("phonon-swap --smoke --seed 123 --out \"" + d.string() + "\""), 0);
  const Json j = Json::parse(read_file(d / "phonon_swap.json"));
  EXPECT_EQ(j["run"]["seed"].get<int>(), 123);
  EXPECT_EQ(j["run"]["smoke"].get<bool>(), true);
  fs::remove_all(d);
}

// full smoke output set; GKPSIM_UPDATE_GOLDEN=1 rewrites it
TEST(Cli, SmokeGoldenSet) {
  const fs::path golden = fs::path(source_dir()) / "tests" / "golden" / "smoke";
  const fs::path d = scratch_dir("smoke");
  const bool update = std::getenv("GKPSIM_UPDATE_GOLDEN") != nullptr;
  for (const auto& e : experiments()) {
    ASSERT_EQ(run_cli(e + " --smoke --seed 1 --out \"" + (d / e).string() + "\""), 0) << e;
    if (update) {
      fs::remove_all(golden / e);
      fs::create_directories(golden / e);
      fs::copy(d / e, golden / e, fs::copy_options::recursive);
    }
    const auto got = read_tree(d / e);
    const auto want = read_tree(golden / e);
    ASSERT_EQ(got.size(), want.size()) << e;
    for (const auto& [name, content] : want) {
      ASSERT_TRUE(got.count(name)) << e << "/" << name;
      EXPECT_TRUE(got.at(name) == content) << e << "/" << name << " differs from the golden copy";
    }
  }
  fs::remove_all(d);
}
