#ifndef GKPSIM_TOMOGRAPHY_HPP
#define GKPSIM_TOMOGRAPHY_HPP

#include <algorithm>
#include <array>
#include <numeric>
#include <random>

#include <unsupported/Eigen/LevenbergMarquardt>

#include "gkpmath.hpp"
#include "noise.hpp"

namespace gkpsim {

using Mat4 = Eigen::Matrix<cplx, 4, 4>;

inline Mat2 pauli_matrix(Pauli p) {
  switch (p) {
    case Pauli::I: return Mat2::Identity();
    case Pauli::X: return pauli_x();
    case Pauli::Y: return pauli_y();
    case Pauli::Z: return pauli_z();
  }
  return Mat2::Identity();
}

// logical |0> is the +1 eigenstate of Z
inline Mat4 pauli_pair(Pauli a, Pauli b) {
  const Mat2 A = pauli_matrix(a), B = pauli_matrix(b);
  Mat4 out;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) out(2 * i + k, 2 * j + l) = A(i, j) * B(k, l);
  return out;
}

inline Mat4 bell_dm(Bell b) {
  Eigen::Matrix<cplx, 4, 1> v = Eigen::Matrix<cplx, 4, 1>::Zero();
  const double s = 1 / std::sqrt(2.0);
  switch (b) {
    case Bell::phi_plus: v << s, 0, 0, s; break;
    case Bell::phi_minus: v << s, 0, 0, -s; break;
    case Bell::psi_plus: v << 0, s, s, 0; break;
    case Bell::psi_minus: v << 0, s, -s, 0; break;
  }
  return v * v.adjoint();
}

struct PauliEntry {
  double estimate = 0;
  long shots = 0;  // 0 = exact (infinite shots)
  double stderr_ = 0;
};

// index 4*i + j over (I,X,Y,Z)^2; entry 0 (II) is fixed to 1
struct PauliTable {
  std::array<PauliEntry, 16> e{};

  PauliTable() { e[0] = {1.0, 0, 0.0}; }
  static int index(Pauli a, Pauli b) { return 4 * int(a) + int(b); }
  PauliEntry& at(Pauli a, Pauli b) { return e[size_t(index(a, b))]; }
  const PauliEntry& at(Pauli a, Pauli b) const { return e[size_t(index(a, b))]; }
  static std::string label(int k) { return std::string(1, pauli_char(Pauli(k / 4))) + pauli_char(Pauli(k % 4)); }
};

inline PauliTable pauli_table_of(const Mat4& rho) {
  PauliTable t;
  for (int k = 1; k < 16; ++k) t.e[size_t(k)].estimate = (rho * pauli_pair(Pauli(k / 4), Pauli(k % 4))).trace().real();
  return t;
}

// estimates from shot counts with est = 2k/n - 1
inline PauliTable sample_table(const PauliTable& exact, long shots, Rng& rng) {
  if (shots <= 0) throw Error(ErrorKind::invalid_table, "shots must be > 0");
  PauliTable t;
  for (int k = 1; k < 16; ++k) {
    const double p = std::clamp((1 + exact.e[size_t(k)].estimate) / 2, 0.0, 1.0);
    std::binomial_distribution<long> b(shots, p);
    const double est = 2.0 * double(b(rng)) / double(shots) - 1.0;
    t.e[size_t(k)] = {est, shots, std::sqrt(std::max(0.0, 1 - est * est) / double(shots))};
  }
  return t;
}

struct LogicalDM {
  Mat4 rho;
  Mat4 raw;
  bool projected = false;
  double trace() const { return rho.trace().real(); }
};

// Euclidean projection of a real vector onto the probability simplex
inline Eigen::Vector4d project_simplex(const Eigen::Vector4d& v) {
  std::array<double, 4> u{v[0], v[1], v[2], v[3]};
  std::sort(u.begin(), u.end(), std::greater<double>());
  double css = 0, theta = 0;
  for (int k = 0; k < 4; ++k) {
    css += u[size_t(k)];
    const double t = (css - 1.0) / (k + 1);
    if (u[size_t(k)] - t > 0) theta = t;
  }
  Eigen::Vector4d out;
  for (int k = 0; k < 4; ++k) out[k] = std::max(v[k] - theta, 0.0);
  return out;
}

// closest unit-trace PSD matrix in Frobenius norm
inline Mat4 project_physical(const Mat4& h) {
  Eigen::SelfAdjointEigenSolver<Mat4> es(0.5 * (h + h.adjoint()));
  const Eigen::Vector4d lam = project_simplex(es.eigenvalues());
  return es.eigenvectors() * lam.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
}

inline bool is_physical(const Mat4& r, double tol = 1e-10) {
  if ((r - r.adjoint()).norm() > tol) return false;
  if (std::abs(r.trace() - 1.0) > tol) return false;
  Eigen::SelfAdjointEigenSolver<Mat4> es(r);
  return es.eigenvalues().minCoeff() >= -tol;
}

inline LogicalDM reconstruct(const PauliTable& t) {
  LogicalDM out;
  out.raw = Mat4::Zero();
  for (int k = 0; k < 16; ++k) out.raw += t.e[size_t(k)].estimate * pauli_pair(Pauli(k / 4), Pauli(k % 4));
  out.raw /= 4.0;
  if (is_physical(out.raw)) {
    out.rho = out.raw;
  } else {
    out.rho = project_physical(out.raw);
    out.projected = true;
  }
  return out;
}

inline Mat4 psd_sqrt(const Mat4& r) {
  Eigen::SelfAdjointEigenSolver<Mat4> es(r);
  Eigen::Vector4d s = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * s.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
}

// (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2, taken as the squared nuclear norm of sqrt(rho) sqrt(sigma);
// singular values of M and M^dag agree, so the result is symmetric to rounding
inline double fidelity(const Mat4& rho, const Mat4& sigma) {
  if (!is_physical(rho, 1e-9) || !is_physical(sigma, 1e-9))
    throw Error(ErrorKind::must_project, "fidelity needs physical density matrices");
  const Mat4 m = psd_sqrt(rho) * psd_sqrt(sigma);
  Eigen::JacobiSVD<Mat4> svd(m);
  const double tr = svd.singularValues().sum();
  return tr * tr;
}

struct BootstrapResult {
  double mean = 0, sigma = 0;
  std::vector<double> samples;
};

inline BootstrapResult bootstrap_fidelity(const PauliTable& t, const Mat4& target, int n_resamples, std::uint64_t seed) {
  for (int k = 1; k < 16; ++k)
    if (t.e[size_t(k)].shots <= 0) throw Error(ErrorKind::invalid_table, "bootstrap needs shot counts > 0 for " + PauliTable::label(k));
  if (n_resamples < 2) throw Error(ErrorKind::invalid_config, "n_resamples must be >= 2");
  BootstrapResult r;
  r.samples.reserve(size_t(n_resamples));
  for (int i = 0; i < n_resamples; ++i) {
    Rng rng = make_rng(seed, streams::bootstrap, std::uint64_t(i));
    PauliTable s;
    for (int k = 1; k < 16; ++k) {
      const auto& e = t.e[size_t(k)];
      const double p = std::clamp((1 + e.estimate) / 2, 0.0, 1.0);
      std::binomial_distribution<long> b(e.shots, p);
      s.e[size_t(k)] = {2.0 * double(b(rng)) / double(e.shots) - 1.0, e.shots, 0.0};
    }
    r.samples.push_back(fidelity(reconstruct(s).rho, target));
  }
  const double n = double(n_resamples);
  r.mean = std::accumulate(r.samples.begin(), r.samples.end(), 0.0) / n;
  double v = 0;
  for (double x : r.samples) v += (x - r.mean) * (x - r.mean);
  r.sigma = std::sqrt(v / (n - 1));
  return r;
}

// ---------------------------------------------------------------- fits

enum class LifetimeModel { exponential, stretched };

struct LifetimeFit {
  LifetimeModel model = LifetimeModel::exponential;
  double amplitude = 0, tau = 0, beta = 1;
  double amplitude_err = 0, tau_err = 0, beta_err = 0;
  Eigen::MatrixXd covariance;  // in (A, log tau[, beta])
  double chi2 = 0;
  int dof = 0;
  int iterations = 0;
  std::vector<double> residuals;  // weighted
};

namespace detail {
// A exp(-(t/tau)^beta) with x = (A, log tau[, beta]); weighted residuals
struct DecayFunctor : Eigen::DenseFunctor<double> {
  const std::vector<double>&t, &y, &s;
  bool stretched;
  DecayFunctor(const std::vector<double>& t, const std::vector<double>& y, const std::vector<double>& s, bool st)
      : Eigen::DenseFunctor<double>(st ? 3 : 2, int(t.size())), t(t), y(y), s(s), stretched(st) {}
  int operator()(const InputType& x, ValueType& f) const {
    const double tau = std::exp(x[1]), beta = stretched ? x[2] : 1.0;
    for (size_t i = 0; i < t.size(); ++i) f[long(i)] = (x[0] * std::exp(-std::pow(t[i] / tau, beta)) - y[i]) / s[i];
    return 0;
  }
  int df(const InputType& x, JacobianType& J) const {
    const double tau = std::exp(x[1]), beta = stretched ? x[2] : 1.0;
    for (size_t i = 0; i < t.size(); ++i) {
      const double z = t[i] / tau, zb = z > 0 ? std::pow(z, beta) : 0.0, e = std::exp(-zb);
      J(long(i), 0) = e / s[i];
      J(long(i), 1) = x[0] * e * zb * beta / s[i];
      if (stretched) J(long(i), 2) = z > 0 ? -x[0] * e * zb * std::log(z) / s[i] : 0.0;
    }
    return 0;
  }
};

struct SinSqFunctor : Eigen::DenseFunctor<double> {
  const std::vector<double>&x, &y;
  SinSqFunctor(const std::vector<double>& x, const std::vector<double>& y)
      : Eigen::DenseFunctor<double>(2, int(x.size())), x(x), y(y) {}
  int operator()(const InputType& p, ValueType& f) const {
    for (size_t i = 0; i < x.size(); ++i) f[long(i)] = p[0] * std::pow(std::sin(p[1] * x[i]), 2) - y[i];
    return 0;
  }
  int df(const InputType& p, JacobianType& J) const {
    for (size_t i = 0; i < x.size(); ++i) {
      const double a = p[1] * x[i];
      J(long(i), 0) = std::pow(std::sin(a), 2);
      J(long(i), 1) = p[0] * std::sin(2 * a) * x[i];
    }
    return 0;
  }
};

inline bool lm_ok(Eigen::LevenbergMarquardtSpace::Status st) {
  using namespace Eigen::LevenbergMarquardtSpace;
  return st == RelativeReductionTooSmall || st == RelativeErrorTooSmall || st == RelativeErrorAndReductionTooSmall ||
         st == CosinusTooSmall || st == FtolTooSmall || st == XtolTooSmall || st == GtolTooSmall;
}
}  // namespace detail

// Weighted least squares of A exp(-(t/tau)^beta); beta = 1 for the exponential model.
// Errors are absolute, so the covariance is the unscaled (J^T J)^-1.
inline LifetimeFit fit_lifetime(const std::vector<double>& t, const std::vector<double>& y, const std::vector<double>& err,
                                LifetimeModel model) {
  const bool st = model == LifetimeModel::stretched;
  const size_t np = st ? 3 : 2;
  if (t.size() < 4 || y.size() != t.size() || err.size() != t.size())
    throw Error(ErrorKind::fit_failed, "lifetime fit needs >= 4 points with matching errors");
  for (double e : err)
    if (!(e > 0)) throw Error(ErrorKind::fit_failed, "lifetime fit errors must be > 0");

  // starting points: log-linear fit of the positive points, the 1/e crossing, fractions of the span
  std::vector<double> starts;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (size_t i = 0; i < t.size(); ++i)
    if (y[i] > 0) {
      const double ly = std::log(y[i]);
      sx += t[i]; sy += ly; sxx += t[i] * t[i]; sxy += t[i] * ly;
      ++n;
    }
  if (n >= 2) {
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    if (slope < 0) starts.push_back(-1 / slope);
  }
  for (size_t i = 1; i < t.size(); ++i)
    if (y[i] < y[0] / std::exp(1.0)) {
      starts.push_back(t[i] - t[0]);
      break;
    }
  const double span = std::max(t.back() - t.front(), 1e-12);
  for (double f : {0.25, 1.0, 4.0}) starts.push_back(f * span);

  detail::DecayFunctor f(t, y, err, st);
  LifetimeFit best;
  bool have = false;
  std::string last = "no start point";
  for (double tau0 : starts) {
    if (!(tau0 > 0) || !std::isfinite(tau0)) continue;
    Eigen::VectorXd x(static_cast<long>(np));
    x[0] = y[0] != 0 ? y[0] : 1.0;
    x[1] = std::log(tau0);
    if (st) x[2] = 1.0;
    Eigen::LevenbergMarquardt<detail::DecayFunctor> lm(f);
    lm.setMaxfev(4000);
    lm.setXtol(1e-14);
    lm.setFtol(1e-14);
    auto status = lm.minimize(x);
    Eigen::VectorXd r(static_cast<long>(t.size()));
    f(x, r);
    Eigen::MatrixXd J(static_cast<long>(t.size()), static_cast<long>(np));
    f.df(x, J);
    const Eigen::MatrixXd JtJ = J.transpose() * J;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(JtJ);
    const bool ok = detail::lm_ok(status) && x.allFinite() && std::isfinite(r.squaredNorm()) &&
                    ldlt.info() == Eigen::Success && ldlt.isPositive() && JtJ.determinant() > 0;
    if (!ok) {
      last = "status " + std::to_string(int(status)) + ", iterations " + std::to_string(int(lm.iterations())) +
             ", chi2 " + std::to_string(r.squaredNorm());
      continue;
    }
    if (have && r.squaredNorm() >= best.chi2) continue;
    have = true;
    best.model = model;
    best.iterations = int(lm.iterations());
    best.chi2 = r.squaredNorm();
    best.dof = int(t.size() - np);
    best.residuals.assign(r.data(), r.data() + r.size());
    best.covariance = JtJ.inverse();
    best.amplitude = x[0];
    best.tau = std::exp(x[1]);
    best.beta = st ? x[2] : 1.0;
  }
  if (!have) throw Error(ErrorKind::fit_failed, "lifetime fit did not converge (" + last + ")");
  LifetimeFit out = best;
  out.amplitude_err = std::sqrt(out.covariance(0, 0));
  out.tau_err = out.tau * std::sqrt(out.covariance(1, 1));
  out.beta_err = st ? std::sqrt(out.covariance(2, 2)) : 0.0;
  if (!(out.tau > 0) || (st && !(out.beta > 0))) throw Error(ErrorKind::fit_failed, "lifetime fit left the valid region");
  if (out.tau > 1e3 * span)
    throw Error(ErrorKind::fit_failed, "no decay resolved: tau " + std::to_string(out.tau) + " s against a " +
                                           std::to_string(span) + " s window");
  return out;
}

struct SinSqFit {
  double amplitude = 0, rate = 0, rms = 0;
};

// y = A sin^2(w x); w0 is the starting rate
inline SinSqFit fit_sin_squared(const std::vector<double>& x, const std::vector<double>& y, double w0) {
  if (x.size() < 3 || y.size() != x.size()) throw Error(ErrorKind::fit_failed, "sin^2 fit needs >= 3 points");
  detail::SinSqFunctor f(x, y);
  Eigen::VectorXd p(2);
  p << *std::max_element(y.begin(), y.end()), w0;
  Eigen::LevenbergMarquardt<detail::SinSqFunctor> lm(f);
  lm.setXtol(1e-14);
  lm.setFtol(1e-14);
  auto status = lm.minimize(p);
  Eigen::VectorXd r(static_cast<long>(x.size()));
  f(p, r);
  if (!detail::lm_ok(status) || !p.allFinite()) throw Error(ErrorKind::fit_failed, "sin^2 fit did not converge");
  return {p[0], p[1], std::sqrt(r.squaredNorm() / double(x.size()))};
}

// ---------------------------------------------------------------- serialization

inline nlohmann::ordered_json mat4_to_json(const Mat4& m) {
  nlohmann::ordered_json re = nlohmann::ordered_json::array(), im = nlohmann::ordered_json::array();
  for (int i = 0; i < 4; ++i) {
    nlohmann::ordered_json a = nlohmann::ordered_json::array(), b = nlohmann::ordered_json::array();
    for (int j = 0; j < 4; ++j) {
      a.push_back(m(i, j).real());
      b.push_back(m(i, j).imag());
    }
    re.push_back(a);
    im.push_back(b);
  }
  return {{"re", re}, {"im", im}};
}

inline nlohmann::ordered_json table_to_json(const PauliTable& t) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (int k = 1; k < 16; ++k)
    j[PauliTable::label(k)] = {{"estimate", t.e[size_t(k)].estimate}, {"shots", t.e[size_t(k)].shots},
                               {"stderr", t.e[size_t(k)].stderr_}};
  return j;
}

inline nlohmann::ordered_json dm_to_json(const LogicalDM& d) {
  return {{"rho", mat4_to_json(d.rho)}, {"raw", mat4_to_json(d.raw)}, {"projected", d.projected}, {"trace", d.trace()}};
}

inline nlohmann::ordered_json fit_to_json(const LifetimeFit& f) {
  nlohmann::ordered_json j;
  j["model"] = f.model == LifetimeModel::exponential ? "exponential" : "stretched";
  j["amplitude"] = f.amplitude;
  j["amplitude_err"] = f.amplitude_err;
  j["tau"] = f.tau;
  j["tau_err"] = f.tau_err;
  j["beta"] = f.beta;
  j["beta_err"] = f.beta_err;
  j["chi2"] = f.chi2;
  j["dof"] = f.dof;
  j["iterations"] = f.iterations;
  j["residuals"] = f.residuals;
  return j;
}

}  // namespace gkpsim

#endif
