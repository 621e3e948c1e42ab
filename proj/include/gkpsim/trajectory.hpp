#ifndef GKPSIM_TRAJECTORY_HPP
#define GKPSIM_TRAJECTORY_HPP

#include <functional>
#include <limits>
#include <mutex>
#include <thread>

#include "circuits.hpp"

namespace gkpsim {

struct TrajectoryPlan {
  long n_trajectories = 100;
  std::uint64_t seed = 1;
  // branches kept per trajectory before reset outcomes are sampled; 1 = pure trajectories
  size_t max_branches = 1;
  int threads = 1;

  void validate() const {
    if (n_trajectories < 1) throw Error(ErrorKind::invalid_config, "n_trajectories must be >= 1");
    if (max_branches < 1) throw Error(ErrorKind::invalid_config, "max_branches must be >= 1");
    if (threads < 1) throw Error(ErrorKind::invalid_config, "threads must be >= 1");
  }
};

// a chunk of the protocol; observables are read out after it if observe is set
struct Segment {
  Circuit circuit;
  bool observe = true;
  std::string label;
  bool readouts = true;  // skipped columns are NaN
  bool probes = true;
};

// exact expectation values taken on the trajectory state, appended after the readout columns
struct Probe {
  std::string name;
  size_t width = 1;
  std::function<std::vector<double>(const Ensemble&)> f;
};

struct EstimateTable {
  std::array<double, 2> mean_leak_peak{0.0, 0.0};  // trajectory mean of the per-trajectory peak
  std::vector<std::string> observables;
  std::vector<std::string> labels;
  std::vector<double> times;               // elapsed protocol time at each checkpoint
  std::vector<std::vector<double>> mean;   // [checkpoint][observable]
  std::vector<std::vector<double>> stderr_;
  long n_trajectories = 0;
};

namespace detail {
inline void ensure_beamsplitter(SpaceKernels& k) {
  if (!k.beamsplitter) k.beamsplitter = std::make_shared<Propagator>(beamsplitter_generator(k.config));
}
inline bool uses_beamsplitter(const std::vector<Segment>& segs) {
  for (const auto& s : segs)
    for (const auto& op : s.circuit.ops)
      if (std::holds_alternative<BeamsplitterOp>(op)) return true;
  return false;
}
}  // namespace detail

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct TrajectoryResult {
  std::vector<std::vector<double>> values;  // [checkpoint][observable]
  std::array<double, 2> leak_peak{0.0, 0.0};
};

// Leakage is not enforced per trajectory: a pure trajectory is one sample of the mixture, so
// estimate() enforces leak_tol on the trajectory mean of the peak buffer population.
inline TrajectoryResult run_trajectory(Executor& ex, long index, const TrajectoryPlan& plan,
                                                       const std::vector<Segment>& segs,
                                     const std::vector<Readout>& obs, const HybridState& initial,
                                     const std::optional<NoiseParams>& noise, const std::vector<Probe>& probes = {}) {
  Rng rng = make_rng(plan.seed, streams::trajectory, std::uint64_t(index));
  Rng ro_rng = make_rng(plan.seed, streams::misc, std::uint64_t(index));
  NoiseRealization real;
  const bool noisy = noise && !noise->is_zero();
  if (noisy) real = sample_realization(*noise, rng);
  Ensemble e = Ensemble::pure(initial);
  TrajectoryResult out;
  ex.check_leakage = false;
  ex.leak_peak = {0.0, 0.0};
  try {
    for (const auto& s : segs) {
      ex.run(noisy ? sample_channel_schedule(s.circuit, *noise, real, rng) : s.circuit, e, rng, plan.max_branches);
      if (!s.observe) continue;
      std::vector<double> row;
      for (const auto& r : obs) {
        Readout rr = r;
        if (noisy) rr.circuit = sample_channel_schedule(r.circuit, *noise, real, ro_rng);
        row.push_back(s.readouts ? readout_value(ex, e, rr) : kNaN);
      }
      for (const auto& p : probes) {
        std::vector<double> v = s.probes ? p.f(e) : std::vector<double>(p.width, kNaN);
        if (v.size() != p.width) throw Error(ErrorKind::dimension_mismatch, "probe '" + p.name + "' width mismatch");
        row.insert(row.end(), v.begin(), v.end());
      }
      out.values.push_back(std::move(row));
    }
  } catch (TruncationError& err) {
    err.trajectory = index;
    throw;
  }
  out.leak_peak = ex.leak_peak;
  return out;
}

// Mean and standard error over trajectories; trajectory j always uses stream j, so the
// result does not depend on the thread count.
inline EstimateTable estimate(const TrajectoryPlan& plan, const std::vector<Segment>& segs,
                              const std::vector<Readout>& obs, const HybridState& initial,
                              const std::optional<NoiseParams>& noise, const std::vector<Probe>& probes = {}) {
  plan.validate();
  if (noise) noise->validate();
  auto kernels = std::make_shared<SpaceKernels>(initial.config);
  if (detail::uses_beamsplitter(segs)) detail::ensure_beamsplitter(*kernels);

  const long n = plan.n_trajectories;
  std::vector<TrajectoryResult> vals(static_cast<size_t>(n));
  std::exception_ptr failure;
  std::mutex mu;
  auto worker = [&](int tid) {
    Executor ex(kernels);
    for (long j = tid; j < n; j += plan.threads) {
      {
        std::lock_guard<std::mutex> g(mu);
        if (failure) return;
      }
      try {
        vals[size_t(j)] = run_trajectory(ex, j, plan, segs, obs, initial, noise, probes);
      } catch (...) {
        std::lock_guard<std::mutex> g(mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  if (plan.threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < plan.threads; ++t) pool.emplace_back(worker, t);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  EstimateTable tab;
  for (int m = 0; m < 2; ++m) {
    long worst = 0;
    double sum = 0;
    for (long j = 0; j < n; ++j) {
      sum += vals[size_t(j)].leak_peak[size_t(m)];
      if (vals[size_t(j)].leak_peak[size_t(m)] > vals[size_t(worst)].leak_peak[size_t(m)]) worst = j;
    }
    tab.mean_leak_peak[size_t(m)] = sum / double(n);
    if (tab.mean_leak_peak[size_t(m)] > initial.config.leak_tol) {
      TruncationError e(m + 1, tab.mean_leak_peak[size_t(m)],
                        "mode " + std::to_string(m + 1) + " mean peak buffer population " +
                            std::to_string(tab.mean_leak_peak[size_t(m)]) + " exceeds leak_tol (worst trajectory " +
                            std::to_string(worst) + ")");
      e.trajectory = worst;
      throw e;
    }
  }
  tab.n_trajectories = n;
  for (const auto& r : obs) tab.observables.push_back(r.name);
  for (const auto& p : probes)
    for (size_t k = 0; k < p.width; ++k) tab.observables.push_back(p.name + "[" + std::to_string(k) + "]");
  double t = 0;
  for (const auto& s : segs) {
    t += s.circuit.duration();
    if (!s.observe) continue;
    tab.times.push_back(t);
    tab.labels.push_back(s.label);
  }
  const size_t nc = tab.times.size(), no = tab.observables.size();
  tab.mean.assign(nc, std::vector<double>(no, 0.0));
  tab.stderr_.assign(nc, std::vector<double>(no, 0.0));
  for (size_t c = 0; c < nc; ++c)
    for (size_t o = 0; o < no; ++o) {
      // shifted by the first sample: identical values give exactly zero spread
      const double v0 = vals[0].values[c][o];
      double s1 = 0, s2 = 0;
      for (long j = 0; j < n; ++j) {
        const double d = vals[size_t(j)].values[c][o] - v0;
        s1 += d;
        s2 += d * d;
      }
      tab.mean[c][o] = v0 + s1 / double(n);
      tab.stderr_[c][o] = n > 1 ? std::sqrt(std::max(0.0, s2 - s1 * s1 / double(n)) / double(n - 1) / double(n)) : 0.0;
    }
  return tab;
}

}  // namespace gkpsim

#endif
