#ifndef GKPSIM_OPS_HPP
#define GKPSIM_OPS_HPP

#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "fockcore.hpp"

namespace gkpsim {

// exp(-i u sigma_phi_s q_phi_m) followed by the frame rotation exp(-i stark sigma_z / 2)
struct SdfOp {
  int mode = 1;
  double u = 0, phi_s = 0, phi_m = 0, stark_phase = 0;
  double duration = 60e-6;
};
// exp(i r/2 (q p + p q)) about axis phi
struct SqueezeOp {
  int mode = 1;
  double r = 0, phi = 0;
  double duration = 75e-6;
};
// exp(-i angle G_theta), G_theta = R1 (q1 p2 - p1 q2) R1^dag with R1 = e^{-i theta n1}
struct BeamsplitterOp {
  double angle = kPi / 4, phase = 0, ramp_fraction = 0.5;
  double duration = 400e-6;
};
// sigma_z measurement, |up> flipped to |down>, then Gaussian kicks of recoil_sigma on both modes
struct ResetOp {
  double recoil_sigma = 0;
  double duration = 61e-6;
};
struct DelayOp {
  double duration = 0;
};
// exp(-i angle sigma_axis / 2)
struct SpinRotationOp {
  char axis = 'x';
  double angle = 0;
  double duration = 0;
};
// e^{-i theta n}; inserted by the noise schedule
struct PhaseRotationOp {
  int mode = 1;
  double theta = 0;
};
// D(u_q, u_p); inserted by the noise schedule or used for error injection
struct DisplaceOp {
  int mode = 1;
  double uq = 0, up = 0;
};

using PulseOp =
    std::variant<SdfOp, SqueezeOp, BeamsplitterOp, ResetOp, DelayOp, SpinRotationOp, PhaseRotationOp, DisplaceOp>;

inline double op_duration(const PulseOp& op) {
  return std::visit(
      [](const auto& o) -> double {
        if constexpr (requires { o.duration; })
          return o.duration;
        else
          return 0.0;
      },
      op);
}

struct Circuit {
  std::string name;
  std::vector<PulseOp> ops;

  double duration() const {
    double t = 0;
    for (const auto& op : ops) t += op_duration(op);
    return t;
  }
  Circuit& add(const PulseOp& op) {
    ops.push_back(op);
    return *this;
  }
  Circuit& append(const Circuit& c) {
    ops.insert(ops.end(), c.ops.begin(), c.ops.end());
    return *this;
  }
  size_t resets() const {
    size_t n = 0;
    for (const auto& op : ops) n += std::holds_alternative<ResetOp>(op);
    return n;
  }
};

// ---------------------------------------------------------------- serialization

inline constexpr int kCircuitSchemaVersion = 1;

inline nlohmann::ordered_json op_to_json(const PulseOp& op) {
  using J = nlohmann::ordered_json;
  return std::visit(
      [](const auto& o) -> J {
        using T = std::decay_t<decltype(o)>;
        J j;
        if constexpr (std::is_same_v<T, SdfOp>) {
          j = {{"op", "sdf"}, {"mode", o.mode}, {"u", o.u}, {"phi_s", o.phi_s}, {"phi_m", o.phi_m},
               {"stark_phase", o.stark_phase}, {"duration", o.duration}};
        } else if constexpr (std::is_same_v<T, SqueezeOp>) {
          j = {{"op", "squeeze"}, {"mode", o.mode}, {"r", o.r}, {"phi", o.phi}, {"duration", o.duration}};
        } else if constexpr (std::is_same_v<T, BeamsplitterOp>) {
          j = {{"op", "beamsplitter"}, {"angle", o.angle}, {"phase", o.phase},
               {"ramp_fraction", o.ramp_fraction}, {"duration", o.duration}};
        } else if constexpr (std::is_same_v<T, ResetOp>) {
          j = {{"op", "reset"}, {"recoil_sigma", o.recoil_sigma}, {"duration", o.duration}};
        } else if constexpr (std::is_same_v<T, DelayOp>) {
          j = {{"op", "delay"}, {"duration", o.duration}};
        } else if constexpr (std::is_same_v<T, SpinRotationOp>) {
          j = {{"op", "spin_rotation"}, {"axis", std::string(1, o.axis)}, {"angle", o.angle},
               {"duration", o.duration}};
        } else if constexpr (std::is_same_v<T, PhaseRotationOp>) {
          j = {{"op", "phase_rotation"}, {"mode", o.mode}, {"theta", o.theta}};
        } else if constexpr (std::is_same_v<T, DisplaceOp>) {
          j = {{"op", "displace"}, {"mode", o.mode}, {"uq", o.uq}, {"up", o.up}};
        }
        return j;
      },
      op);
}

inline nlohmann::ordered_json circuit_to_json(const Circuit& c) {
  nlohmann::ordered_json j;
  j["schema"] = "gkpsim.circuit";
  j["version"] = kCircuitSchemaVersion;
  j["name"] = c.name;
  j["duration"] = c.duration();
  j["ops"] = nlohmann::ordered_json::array();
  for (const auto& op : c.ops) j["ops"].push_back(op_to_json(op));
  return j;
}

namespace detail {
template <class J>
double num(const J& j, const char* k) {
  if (!j.contains(k) || !j.at(k).is_number()) throw Error(ErrorKind::invalid_config, std::string("missing number '") + k + "'");
  return j.at(k).template get<double>();
}
template <class J>
int mode_of(const J& j) {
  int m = int(num(j, "mode"));
  if (m != 1 && m != 2) throw Error(ErrorKind::invalid_config, "mode must be 1 or 2");
  return m;
}
}  // namespace detail

template <class J>
PulseOp op_from_json(const J& j) {
  using detail::num;
  const std::string kind = j.at("op").template get<std::string>();
  if (kind == "sdf") return SdfOp{detail::mode_of(j), num(j, "u"), num(j, "phi_s"), num(j, "phi_m"), num(j, "stark_phase"), num(j, "duration")};
  if (kind == "squeeze") return SqueezeOp{detail::mode_of(j), num(j, "r"), num(j, "phi"), num(j, "duration")};
  if (kind == "beamsplitter")
    return BeamsplitterOp{num(j, "angle"), num(j, "phase"), num(j, "ramp_fraction"), num(j, "duration")};
  if (kind == "reset") return ResetOp{num(j, "recoil_sigma"), num(j, "duration")};
  if (kind == "delay") return DelayOp{num(j, "duration")};
  if (kind == "spin_rotation") {
    std::string ax = j.at("axis").template get<std::string>();
    if (ax != "x" && ax != "y" && ax != "z") throw Error(ErrorKind::invalid_config, "spin axis must be x, y or z");
    return SpinRotationOp{ax[0], num(j, "angle"), num(j, "duration")};
  }
  if (kind == "phase_rotation") return PhaseRotationOp{detail::mode_of(j), num(j, "theta")};
  if (kind == "displace") return DisplaceOp{detail::mode_of(j), num(j, "uq"), num(j, "up")};
  throw Error(ErrorKind::invalid_config, "unknown op '" + kind + "'");
}

template <class J>
Circuit circuit_from_json(const J& j) {
  if (j.value("schema", std::string()) != "gkpsim.circuit")
    throw Error(ErrorKind::invalid_config, "not a circuit document");
  if (j.value("version", 0) != kCircuitSchemaVersion)
    throw Error(ErrorKind::invalid_config, "unsupported circuit schema version");
  Circuit c;
  c.name = j.value("name", std::string());
  for (const auto& o : j.at("ops")) c.ops.push_back(op_from_json(o));
  return c;
}

}  // namespace gkpsim

#endif
