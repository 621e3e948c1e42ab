#ifndef GKPSIM_FOCKCORE_HPP
#define GKPSIM_FOCKCORE_HPP

// Truncated spin (x) mode1 (x) mode2 state space.
// Spin basis order is (up, down); sigma_z = |up><up| - |down><down|.
// Amplitude index: (s * dim1 + n1) * dim2 + n2.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"

namespace gkpsim {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;
using Mat2 = Eigen::Matrix2cd;

inline constexpr double kPi = 3.14159265358979323846;
inline const double kSqrtPi = std::sqrt(kPi);
inline const double kLattice = std::sqrt(2.0 * kPi);  // l
inline constexpr cplx kI{0.0, 1.0};

enum Spin : int { up = 0, down = 1 };

struct HilbertConfig {
  int n_max_1 = 40;
  int n_max_2 = 40;
  int leak_guard = 5;
  double leak_tol = 1e-4;

  int dim1() const { return n_max_1 + 1; }
  int dim2() const { return n_max_2 + 1; }
  int mode_dim(int mode) const { return mode == 1 ? dim1() : dim2(); }
  long dim() const { return 2L * dim1() * dim2(); }
  long half() const { return long(dim1()) * dim2(); }

  void validate() const {
    if (n_max_1 < 2 || n_max_2 < 2)
      throw Error(ErrorKind::invalid_config, "Fock cutoff must be >= 2");
    if (leak_guard < 1 || leak_guard >= n_max_1 || leak_guard >= n_max_2)
      throw Error(ErrorKind::invalid_config, "leak_guard must satisfy 1 <= guard < n_max");
    if (!(leak_tol > 0.0 && leak_tol < 1.0))
      throw Error(ErrorKind::invalid_config, "leak_tol must lie in (0,1)");
  }
  bool operator==(const HilbertConfig&) const = default;
};

// ---------------------------------------------------------------- single mode

inline CMat lowering(int dim) {
  CMat a = CMat::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(double(n));
  return a;
}
inline CMat number_op(int dim) {
  CMat m = CMat::Zero(dim, dim);
  for (int n = 0; n < dim; ++n) m(n, n) = double(n);
  return m;
}
inline CMat position_op(int dim) {
  CMat a = lowering(dim);
  return (a + a.adjoint()) / std::sqrt(2.0);
}
inline CMat momentum_op(int dim) {
  CMat a = lowering(dim);
  return kI * (a.adjoint() - a) / std::sqrt(2.0);
}

inline Mat2 pauli_x() { Mat2 m; m << 0, 1, 1, 0; return m; }
inline Mat2 pauli_y() { Mat2 m; m << 0, -kI, kI, 0; return m; }
inline Mat2 pauli_z() { Mat2 m; m << 1, 0, 0, -1; return m; }
inline Mat2 pauli_phi(double phi_s) { return std::cos(phi_s) * pauli_x() + std::sin(phi_s) * pauli_y(); }

// ---------------------------------------------------------------- state

struct HybridState {
  HilbertConfig config;
  CVec amp;

  HybridState() = default;
  HybridState(const HilbertConfig& c, CVec a) : config(c), amp(std::move(a)) {}

  static HybridState basis(const HilbertConfig& c, Spin s, int n1, int n2) {
    c.validate();
    CVec a = CVec::Zero(c.dim());
    a((long(s) * c.dim1() + n1) * c.dim2() + n2) = 1.0;
    return {c, a};
  }
  static HybridState vacuum(const HilbertConfig& c) { return basis(c, down, 0, 0); }

  // spin (up, down) amplitudes times mode vectors; mode vectors may be shorter than the cutoff
  static HybridState product(const HilbertConfig& c, const Eigen::Vector2cd& spin, const CVec& m1,
                             const CVec& m2) {
    c.validate();
    CVec a = CVec::Zero(c.dim());
    const int d1 = c.dim1(), d2 = c.dim2();
    for (int s = 0; s < 2; ++s)
      for (int i = 0; i < std::min<int>(d1, m1.size()); ++i)
        for (int j = 0; j < std::min<int>(d2, m2.size()); ++j)
          a((long(s) * d1 + i) * d2 + j) = spin(s) * m1(i) * m2(j);
    a.normalize();
    return {c, a};
  }

  double norm() const { return amp.norm(); }

  // population in the top leak_guard Fock levels of a mode
  double buffer_population(int mode) const {
    const int d1 = config.dim1(), d2 = config.dim2();
    const int lo = config.mode_dim(mode) - config.leak_guard;
    double pop = 0.0;
    for (int s = 0; s < 2; ++s)
      for (int i = 0; i < d1; ++i)
        for (int j = 0; j < d2; ++j) {
          if ((mode == 1 ? i : j) < lo) continue;
          pop += std::norm(amp((long(s) * d1 + i) * d2 + j));
        }
    return pop / amp.squaredNorm();
  }

  void check_leakage() const {
    for (int m = 1; m <= 2; ++m) {
      double pop = buffer_population(m);
      if (pop > config.leak_tol)
        throw TruncationError(m, pop,
                              "mode " + std::to_string(m) + " buffer population " + std::to_string(pop) +
                                  " exceeds leak_tol");
    }
  }

  // reduced mode density matrix
  CMat mode_density(int mode) const {
    const int d1 = config.dim1(), d2 = config.dim2();
    CMat rho = CMat::Zero(config.mode_dim(mode), config.mode_dim(mode));
    for (int s = 0; s < 2; ++s) {
      Eigen::Map<const CMat> B(amp.data() + long(s) * d1 * d2, d2, d1);  // B(j,i)
      if (mode == 1)
        rho += B.transpose() * B.conjugate();
      else
        rho += B * B.adjoint();
    }
    return rho;
  }
};

// ---------------------------------------------------------------- raw kernels on amplitude vectors

// M acting on one mode factor
inline void apply_mode(CVec& amp, const HilbertConfig& c, int mode, const CMat& M) {
  const int d1 = c.dim1(), d2 = c.dim2();
  for (int s = 0; s < 2; ++s) {
    Eigen::Map<CMat> B(amp.data() + long(s) * d1 * d2, d2, d1);
    if (mode == 1)
      B = (B * M.transpose()).eval();
    else
      B = (M * B).eval();
  }
}

inline void apply_mode_diag(CVec& amp, const HilbertConfig& c, int mode, const CVec& diag) {
  const int d1 = c.dim1(), d2 = c.dim2();
  for (int s = 0; s < 2; ++s)
    for (int i = 0; i < d1; ++i)
      for (int j = 0; j < d2; ++j) amp((long(s) * d1 + i) * d2 + j) *= diag(mode == 1 ? i : j);
}

inline void apply_spin(CVec& amp, const HilbertConfig& c, const Mat2& S) {
  const long h = c.half();
  CVec a0 = amp.head(h), a1 = amp.tail(h);
  amp.head(h) = S(0, 0) * a0 + S(0, 1) * a1;
  amp.tail(h) = S(1, 0) * a0 + S(1, 1) * a1;
}

// sum_k P_k (x) U_k on (spin, mode) where P_k = |e_k><e_k|, E columns = e_k
inline void apply_spin_conditional(CVec& amp, const HilbertConfig& c, int mode, const Mat2& E,
                                   const std::array<const CMat*, 2>& U) {
  const long h = c.half();
  Mat2 Ed = E.adjoint();
  CVec a0 = amp.head(h), a1 = amp.tail(h);
  std::array<CVec, 2> b;
  const int d1 = c.dim1(), d2 = c.dim2();
  for (int k = 0; k < 2; ++k) {
    b[k] = Ed(k, 0) * a0 + Ed(k, 1) * a1;
    Eigen::Map<CMat> B(b[k].data(), d2, d1);
    if (mode == 1)
      B = (B * U[k]->transpose()).eval();
    else
      B = (*U[k] * B).eval();
  }
  amp.head(h) = E(0, 0) * b[0] + E(0, 1) * b[1];
  amp.tail(h) = E(1, 0) * b[0] + E(1, 1) * b[1];
}

// ---------------------------------------------------------------- structured joint operators

struct KronTerm {
  cplx coef{1.0, 0.0};
  std::optional<Mat2> spin;
  std::optional<CMat> m1;
  std::optional<CMat> m2;
};

// Sum of Kronecker products spin (x) mode1 (x) mode2; missing factors are identities.
class JointMatrix {
 public:
  JointMatrix() = default;
  explicit JointMatrix(const HilbertConfig& c) : config_(c) {}

  static JointMatrix identity(const HilbertConfig& c) {
    JointMatrix j(c);
    j.terms_.push_back(KronTerm{});
    return j;
  }
  static JointMatrix term(const HilbertConfig& c, cplx coef, std::optional<Mat2> s, std::optional<CMat> a,
                          std::optional<CMat> b) {
    if (a && a->rows() != c.dim1()) throw Error(ErrorKind::dimension_mismatch, "mode 1 factor size");
    if (b && b->rows() != c.dim2()) throw Error(ErrorKind::dimension_mismatch, "mode 2 factor size");
    JointMatrix j(c);
    j.terms_.push_back(KronTerm{coef, std::move(s), std::move(a), std::move(b)});
    return j;
  }

  const HilbertConfig& config() const { return config_; }
  const std::vector<KronTerm>& terms() const { return terms_; }

  JointMatrix operator+(const JointMatrix& o) const {
    check_same(o);
    JointMatrix r = *this;
    r.terms_.insert(r.terms_.end(), o.terms_.begin(), o.terms_.end());
    return r;
  }
  JointMatrix operator*(cplx s) const {
    JointMatrix r = *this;
    for (auto& t : r.terms_) t.coef *= s;
    return r;
  }
  JointMatrix operator-(const JointMatrix& o) const { return *this + o * cplx(-1.0); }
  JointMatrix operator*(const JointMatrix& o) const {
    check_same(o);
    JointMatrix r(config_);
    for (const auto& a : terms_)
      for (const auto& b : o.terms_) {
        KronTerm t;
        t.coef = a.coef * b.coef;
        t.spin = mul(a.spin, b.spin);
        t.m1 = mul(a.m1, b.m1);
        t.m2 = mul(a.m2, b.m2);
        r.terms_.push_back(std::move(t));
      }
    return r;
  }
  JointMatrix adjoint() const {
    JointMatrix r = *this;
    for (auto& t : r.terms_) {
      t.coef = std::conj(t.coef);
      if (t.spin) t.spin = t.spin->adjoint().eval();
      if (t.m1) t.m1 = t.m1->adjoint().eval();
      if (t.m2) t.m2 = t.m2->adjoint().eval();
    }
    return r;
  }

  CVec apply(const CVec& v) const {
    if (v.size() != config_.dim()) throw Error(ErrorKind::dimension_mismatch, "state length mismatch");
    CVec out = CVec::Zero(v.size());
    for (const auto& t : terms_) {
      CVec w = v;
      if (t.spin) apply_spin(w, config_, *t.spin);
      if (t.m1) apply_mode(w, config_, 1, *t.m1);
      if (t.m2) apply_mode(w, config_, 2, *t.m2);
      out += t.coef * w;
    }
    return out;
  }

  // bit 0 spin, bit 1 mode 1, bit 2 mode 2
  int involved() const {
    int m = 0;
    for (const auto& t : terms_) m |= (t.spin ? 1 : 0) | (t.m1 ? 2 : 0) | (t.m2 ? 4 : 0);
    return m;
  }

  // dense matrix on the factors selected by mask (ordered spin, mode1, mode2)
  CMat dense_on(int mask) const {
    long n = 1;
    if (mask & 1) n *= 2;
    if (mask & 2) n *= config_.dim1();
    if (mask & 4) n *= config_.dim2();
    CMat out = CMat::Zero(n, n);
    for (const auto& t : terms_) {
      CMat k = CMat::Identity(1, 1);
      if (mask & 1) k = kron(k, t.spin ? CMat(*t.spin) : CMat::Identity(2, 2));
      if (mask & 2) k = kron(k, t.m1 ? *t.m1 : CMat::Identity(config_.dim1(), config_.dim1()));
      if (mask & 4) k = kron(k, t.m2 ? *t.m2 : CMat::Identity(config_.dim2(), config_.dim2()));
      out += t.coef * k;
    }
    return out;
  }
  CMat dense() const { return dense_on(7); }

  bool is_hermitian(double tol = 1e-10) const {
    int mask = involved();
    if (mask == 0) {
      cplx s = 0;
      for (const auto& t : terms_) s += t.coef;
      return std::abs(s.imag()) <= tol;
    }
    CMat d = dense_on(mask);
    return (d - d.adjoint()).cwiseAbs().maxCoeff() <= tol;
  }

  static CMat kron(const CMat& a, const CMat& b) {
    CMat r(a.rows() * b.rows(), a.cols() * b.cols());
    for (long i = 0; i < a.rows(); ++i)
      for (long j = 0; j < a.cols(); ++j) r.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return r;
  }

 private:
  template <class M>
  static std::optional<M> mul(const std::optional<M>& a, const std::optional<M>& b) {
    if (a && b) return M((*a) * (*b));
    if (a) return a;
    return b;
  }
  void check_same(const JointMatrix& o) const {
    if (!(config_ == o.config_)) throw Error(ErrorKind::dimension_mismatch, "operators on different spaces");
  }

  HilbertConfig config_;
  std::vector<KronTerm> terms_;
};

inline JointMatrix commutator(const JointMatrix& a, const JointMatrix& b) { return a * b - b * a; }

struct QuadratureOperator {
  enum Kind { position, momentum, lowering, number };
  int mode = 1;
  Kind kind = position;
};

struct SpinOperator {
  enum Kind { x, y, z, phi, raising, lowering, proj_down, proj_up };
  Kind kind = z;
  double phi_s = 0.0;
};

inline CMat mode_matrix(QuadratureOperator::Kind k, int dim) {
  switch (k) {
    case QuadratureOperator::position: return position_op(dim);
    case QuadratureOperator::momentum: return momentum_op(dim);
    case QuadratureOperator::lowering: return lowering(dim);
    case QuadratureOperator::number: return number_op(dim);
  }
  return CMat::Identity(dim, dim);
}

inline Mat2 spin_matrix(const SpinOperator& op) {
  Mat2 m = Mat2::Zero();
  switch (op.kind) {
    case SpinOperator::x: return pauli_x();
    case SpinOperator::y: return pauli_y();
    case SpinOperator::z: return pauli_z();
    case SpinOperator::phi: return pauli_phi(op.phi_s);
    case SpinOperator::raising: m(0, 1) = 1; return m;   // |up><down|
    case SpinOperator::lowering: m(1, 0) = 1; return m;  // |down><up|
    case SpinOperator::proj_down: m(1, 1) = 1; return m;
    case SpinOperator::proj_up: m(0, 0) = 1; return m;
  }
  return m;
}

inline JointMatrix embed(const QuadratureOperator& op, const HilbertConfig& c) {
  c.validate();
  if (op.mode != 1 && op.mode != 2) throw Error(ErrorKind::invalid_config, "mode must be 1 or 2");
  CMat m = mode_matrix(op.kind, c.mode_dim(op.mode));
  return op.mode == 1 ? JointMatrix::term(c, 1.0, std::nullopt, m, std::nullopt)
                      : JointMatrix::term(c, 1.0, std::nullopt, std::nullopt, m);
}

inline JointMatrix embed(const SpinOperator& op, const HilbertConfig& c) {
  c.validate();
  return JointMatrix::term(c, 1.0, spin_matrix(op), std::nullopt, std::nullopt);
}

inline JointMatrix embed_mode(const CMat& m, int mode, const HilbertConfig& c) {
  return mode == 1 ? JointMatrix::term(c, 1.0, std::nullopt, m, std::nullopt)
                   : JointMatrix::term(c, 1.0, std::nullopt, std::nullopt, m);
}

inline cplx expectation(const HybridState& s, const JointMatrix& op) {
  if (!(s.config == op.config())) throw Error(ErrorKind::dimension_mismatch, "state/operator space mismatch");
  return s.amp.dot(op.apply(s.amp));
}

// ---------------------------------------------------------------- exact exponentials

// exp(-i angle G) for a Hermitian JointMatrix, by eigendecomposition of the connected
// blocks of G restricted to the factors it acts on.
class Propagator {
 public:
  Propagator() = default;
  explicit Propagator(const JointMatrix& G, double herm_tol = 1e-10) : config_(G.config()) {
    mask_ = G.involved();
    const HilbertConfig& c = config_;
    std::array<long, 3> dims{2, c.dim1(), c.dim2()};
    std::array<long, 3> strides{long(c.dim1()) * c.dim2(), c.dim2(), 1};
    // offsets of involved and remaining digits
    inv_off_ = {0};
    rest_off_ = {0};
    for (int f = 0; f < 3; ++f) {
      std::vector<long>& tgt = (mask_ >> f) & 1 ? inv_off_ : rest_off_;
      std::vector<long> next;
      next.reserve(tgt.size() * dims[f]);
      for (long o : tgt)
        for (long d = 0; d < dims[f]; ++d) next.push_back(o + d * strides[f]);
      tgt.swap(next);
    }
    if (mask_ == 0) {
      for (const auto& t : G.terms()) scalar_ += t.coef;
      if (std::abs(scalar_.imag()) > herm_tol) throw Error(ErrorKind::invalid_generator, "generator not Hermitian");
      return;
    }
    CMat H = G.dense_on(mask_);
    if ((H - H.adjoint()).cwiseAbs().maxCoeff() > herm_tol)
      throw Error(ErrorKind::invalid_generator, "generator not Hermitian");
    H = (0.5 * (H + H.adjoint())).eval();
    const long n = H.rows();
    // connected components of the sparsity graph
    std::vector<long> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](long x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (long j = 0; j < n; ++j)
      for (long i = j + 1; i < n; ++i)
        if (std::abs(H(i, j)) > 1e-14) parent[find(i)] = find(j);
    std::vector<std::vector<long>> groups(n);
    for (long i = 0; i < n; ++i) groups[find(i)].push_back(i);
    for (auto& g : groups) {
      if (g.empty()) continue;
      Block b;
      b.idx = g;
      CMat h(g.size(), g.size());
      for (size_t i = 0; i < g.size(); ++i)
        for (size_t j = 0; j < g.size(); ++j) h(i, j) = H(g[i], g[j]);
      Eigen::SelfAdjointEigenSolver<CMat> es(h);
      b.evals = es.eigenvalues();
      b.V = es.eigenvectors();
      blocks_.push_back(std::move(b));
    }
  }

  const HilbertConfig& config() const { return config_; }

  CVec apply(const CVec& v, double angle) const {
    if (v.size() != config_.dim()) throw Error(ErrorKind::dimension_mismatch, "state length mismatch");
    if (mask_ == 0) return v * std::exp(-kI * angle * scalar_);
    CVec out(v.size());
    for (const auto& b : blocks_) {
      const long m = b.idx.size();
      CVec ph(m);
      for (long k = 0; k < m; ++k) ph(k) = std::exp(-kI * angle * b.evals(k));
      CMat U = b.V * ph.asDiagonal() * b.V.adjoint();
      CVec x(m);
      for (long r : rest_off_) {
        for (long k = 0; k < m; ++k) x(k) = v(inv_off_[b.idx[k]] + r);
        CVec y = U * x;
        for (long k = 0; k < m; ++k) out(inv_off_[b.idx[k]] + r) = y(k);
      }
    }
    return out;
  }

 private:
  struct Block {
    std::vector<long> idx;
    RVec evals;
    CMat V;
  };
  HilbertConfig config_;
  int mask_ = 0;
  cplx scalar_{0.0, 0.0};
  std::vector<long> inv_off_, rest_off_;
  std::vector<Block> blocks_;
};

inline HybridState apply_unitary(const HybridState& s, const JointMatrix& generator, double angle) {
  if (!(s.config == generator.config())) throw Error(ErrorKind::dimension_mismatch, "state/generator mismatch");
  if (angle == 0.0) {
    if (!generator.is_hermitian()) throw Error(ErrorKind::invalid_generator, "generator not Hermitian");
    return s;
  }
  Propagator P(generator);
  HybridState out{s.config, P.apply(s.amp, angle)};
  out.check_leakage();
  return out;
}

// Single-mode kernels: one real eigendecomposition of truncated q per cutoff gives
// exp(-i u q_phi) = e^{-i phi n} V e^{-i u x} V^T e^{i phi n} exactly.
class ModeKernel {
 public:
  ModeKernel() = default;
  explicit ModeKernel(int dim) : dim_(dim) {
    RMat q = RMat::Zero(dim, dim);
    for (int n = 1; n < dim; ++n) q(n - 1, n) = q(n, n - 1) = std::sqrt(n / 2.0);
    Eigen::SelfAdjointEigenSolver<RMat> es(q);
    x_ = es.eigenvalues();
    V_ = es.eigenvectors();
    // squeeze generator (qp+pq)/2 = i(a^dag^2 - a^2)/2
    CMat a = lowering(dim);
    CMat g = 0.5 * kI * (a.adjoint() * a.adjoint() - a * a);
    Eigen::SelfAdjointEigenSolver<CMat> es2(g);
    sq_evals_ = es2.eigenvalues();
    sq_V_ = es2.eigenvectors();
  }
  int dim() const { return dim_; }

  // exp(-i u q_phi), q_phi = cos(phi) q - sin(phi) p
  CMat exp_quadrature(double u, double phi) const {
    Eigen::VectorXcd ph(dim_);
    for (int k = 0; k < dim_; ++k) ph(k) = std::exp(-kI * u * x_(k));
    CMat M = V_.cast<cplx>() * ph.asDiagonal() * V_.transpose().cast<cplx>();
    if (phi != 0.0) {
      for (int m = 0; m < dim_; ++m)
        for (int n = 0; n < dim_; ++n) M(m, n) *= std::exp(-kI * phi * double(m - n));
    }
    return M;
  }

  // D(u_q,u_p) = exp(i(u_p q - u_q p))
  CMat displacement(double uq, double up) const {
    double r = std::hypot(uq, up);
    if (r == 0.0) return CMat::Identity(dim_, dim_);
    // u_p q - u_q p = r q_phi with phi = atan2(u_q, u_p)
    return exp_quadrature(-r, std::atan2(uq, up));
  }

  // exp(i r/2 (q_phi p_phi + p_phi q_phi)); phi = 0 reduces q variance
  CMat squeeze(double r, double phi) const {
    Eigen::VectorXcd ph(dim_);
    for (int k = 0; k < dim_; ++k) ph(k) = std::exp(kI * r * sq_evals_(k));
    CMat M = sq_V_ * ph.asDiagonal() * sq_V_.adjoint();
    if (phi != 0.0) {
      for (int m = 0; m < dim_; ++m)
        for (int n = 0; n < dim_; ++n) M(m, n) *= std::exp(-kI * phi * double(m - n));
    }
    return M;
  }

  // e^{-i theta n}
  CVec phase_rotation(double theta) const {
    CVec d(dim_);
    for (int n = 0; n < dim_; ++n) d(n) = std::exp(-kI * theta * double(n));
    return d;
  }

 private:
  int dim_ = 0;
  RVec x_;
  RMat V_;
  RVec sq_evals_;
  CMat sq_V_;
};

// ---------------------------------------------------------------- measurement

struct SpinMeasurement {
  std::array<double, 2> probabilities{0.0, 0.0};  // outcomes ordered (-1, +1)
  std::array<std::optional<HybridState>, 2> post;
};

enum class SpinBasis { z, y, x };

inline Mat2 spin_eigvecs(SpinBasis b) {
  // columns: eigenvalue -1, eigenvalue +1; in (up, down) basis
  Mat2 E;
  const double r = 1.0 / std::sqrt(2.0);
  switch (b) {
    case SpinBasis::z: E << 0, 1, 1, 0; break;
    case SpinBasis::x: E << r, r, -r, r; break;
    case SpinBasis::y: E << r, r, -kI * r, kI * r; break;
  }
  return E;
}

inline SpinMeasurement partial_spin_measure(const HybridState& s, SpinBasis basis) {
  SpinMeasurement m;
  Mat2 E = spin_eigvecs(basis);
  const long h = s.config.half();
  double tot = 0.0;
  std::array<CVec, 2> comp;
  for (int k = 0; k < 2; ++k) {
    comp[k] = std::conj(E(0, k)) * s.amp.head(h) + std::conj(E(1, k)) * s.amp.tail(h);
    m.probabilities[k] = comp[k].squaredNorm();
    tot += m.probabilities[k];
  }
  for (int k = 0; k < 2; ++k) {
    m.probabilities[k] /= tot;
    if (m.probabilities[k] <= 0.0) continue;
    CVec a(s.config.dim());
    a.head(h) = E(0, k) * comp[k];
    a.tail(h) = E(1, k) * comp[k];
    a.normalize();
    m.post[k] = HybridState{s.config, a};
  }
  return m;
}

inline double spin_z(const CVec& amp, const HilbertConfig& c) {
  const long h = c.half();
  return (amp.head(h).squaredNorm() - amp.tail(h).squaredNorm()) / amp.squaredNorm();
}

}  // namespace gkpsim

#endif
