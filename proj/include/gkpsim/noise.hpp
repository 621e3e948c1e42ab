#ifndef GKPSIM_NOISE_HPP
#define GKPSIM_NOISE_HPP

#include <cstdint>
#include <optional>
#include <random>

#include "ops.hpp"

namespace gkpsim {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// independent stream per (seed, purpose, index); same index -> same numbers regardless of scheduling
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return Rng(splitmix64(splitmix64(seed) ^ splitmix64(stream * 0x632be59bd9b4e019ULL + 1) ^ splitmix64(index + 0x1234567ULL)));
}

namespace streams {
inline constexpr std::uint64_t trajectory = 1, bootstrap = 2, shots = 3, misc = 4;
}

struct NoiseParams {
  // per mode; 1/e time of a (|0>+|1>)/sqrt2 coherence under static Gaussian detuning
  std::array<double, 2> motional_dephasing_tau{25e-3, 25e-3};
  // per mode; if unset, sqrt(2)/motional_dephasing_tau
  std::optional<std::array<double, 2>> detuning_sigma;
  // per mode coherent frame error (rad/s); mode frequency miscalibration
  std::array<double, 2> detuning_offset{0.0, 0.0};
  double spin_dephasing_tau = 3e-3;  // 0 or inf disables
  std::array<double, 2> heating_rate{0.0, 0.0};  // quanta / s
  double recoil_sigma = 0.05;

  double sigma(int mode) const {
    if (detuning_sigma) return (*detuning_sigma)[mode - 1];
    const double tau = motional_dephasing_tau[mode - 1];
    return tau > 0 && std::isfinite(tau) ? std::sqrt(2.0) / tau : 0.0;
  }
  bool spin_dephasing_on() const { return spin_dephasing_tau > 0 && std::isfinite(spin_dephasing_tau); }
  bool is_zero() const {
    return sigma(1) == 0 && sigma(2) == 0 && detuning_offset[0] == 0 && detuning_offset[1] == 0 &&
           !spin_dephasing_on() && heating_rate[0] == 0 && heating_rate[1] == 0 && recoil_sigma == 0;
  }
  void validate() const {
    for (int m = 1; m <= 2; ++m) {
      if (sigma(m) < 0 || heating_rate[m - 1] < 0 || motional_dephasing_tau[m - 1] < 0)
        throw Error(ErrorKind::invalid_config, "noise rates must be >= 0");
    }
    if (recoil_sigma < 0 || spin_dephasing_tau < 0) throw Error(ErrorKind::invalid_config, "noise rates must be >= 0");
  }

  static NoiseParams off() {
    NoiseParams n;
    n.motional_dephasing_tau = {0, 0};
    n.spin_dephasing_tau = 0;
    n.recoil_sigma = 0;
    return n;
  }
};

inline nlohmann::ordered_json noise_to_json(const NoiseParams& n) {
  nlohmann::ordered_json j;
  j["motional_dephasing_tau"] = n.motional_dephasing_tau;
  j["detuning_sigma"] = std::array<double, 2>{n.sigma(1), n.sigma(2)};
  j["detuning_offset"] = n.detuning_offset;
  j["spin_dephasing_tau"] = n.spin_dephasing_tau;
  j["heating_rate"] = n.heating_rate;
  j["recoil_sigma"] = n.recoil_sigma;
  return j;
}

// per-trajectory static draw
struct NoiseRealization {
  std::array<double, 2> detuning{0.0, 0.0};  // rad/s
};

inline NoiseRealization sample_realization(const NoiseParams& n, Rng& rng) {
  NoiseRealization r;
  std::normal_distribution<double> g(0.0, 1.0);
  for (int m = 0; m < 2; ++m) r.detuning[m] = n.detuning_offset[m] + n.sigma(m + 1) * g(rng);
  return r;
}

// Channels applied after each op of duration dt: free rotation e^{-i delta dt n} per mode,
// spin phase noise exp(-i phi sigma_z/2) with Var(phi) = 2 dt / T2, and heating kicks with
// per-quadrature variance heating_rate * dt. Resets carry the recoil sigma.
inline Circuit sample_channel_schedule(const Circuit& c, const NoiseParams& n, const NoiseRealization& real, Rng& rng) {
  if (n.is_zero()) return c;
  Circuit out;
  out.name = c.name;
  std::normal_distribution<double> g(0.0, 1.0);
  for (const auto& op : c.ops) {
    PulseOp o = op;
    if (auto* r = std::get_if<ResetOp>(&o)) r->recoil_sigma = n.recoil_sigma;
    out.ops.push_back(o);
    const double dt = op_duration(op);
    if (dt <= 0) continue;
    for (int m = 1; m <= 2; ++m)
      if (real.detuning[m - 1] != 0) out.ops.push_back(PhaseRotationOp{m, real.detuning[m - 1] * dt});
    if (n.spin_dephasing_on()) {
      const double phi = std::sqrt(2.0 * dt / n.spin_dephasing_tau) * g(rng);
      out.ops.push_back(SpinRotationOp{'z', phi, 0.0});
    }
    for (int m = 1; m <= 2; ++m)
      if (n.heating_rate[m - 1] > 0) {
        const double s = std::sqrt(n.heating_rate[m - 1] * dt);
        const double uq = s * g(rng), up = s * g(rng);
        out.ops.push_back(DisplaceOp{m, uq, up});
      }
  }
  return out;
}

// Gaussian coherence e^{-(sigma t)^2/2} reaches 1/e at t = sqrt(2)/sigma
inline double coherence_time_from_sigma(double sigma) { return std::sqrt(2.0) / sigma; }

}  // namespace gkpsim

#endif
