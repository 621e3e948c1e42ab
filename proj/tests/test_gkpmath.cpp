#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace gkpsim;
using gkpsim::testing::cfg;

namespace {
DisplacementLabel random_label(std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> U(-scale, scale);
  return {U(rng), U(rng), U(rng), U(rng)};
}
double chi_re(const HybridState& s, const DisplacementLabel& u) { return char_value(s, u).real(); }
}  // namespace

TEST(Displacement, ZeroIsIdentity) {
  const auto c = cfg(20, 20);
  EXPECT_EQ(gkpsim::testing::max_abs(displacement_op({}, c).dense() - CMat::Identity(c.dim(), c.dim())), 0.0);
}

TEST(Displacement, GuardRejectsLargeLabel) {
  const auto c = cfg(16, 16);
  EXPECT_THROW(displacement_op({2.5, 0, 0, 0}, c), TruncationError);
  EXPECT_NO_THROW(displacement_op({1.9, 0, 0, 0}, c));
}

TEST(Displacement, WeylComposition) {
  const auto c = cfg(60, 60);
  std::mt19937_64 rng(21);
  for (int k = 0; k < 10; ++k) {
    auto psi = gkpsim::testing::random_low_state(c, 3, rng);
    auto u = random_label(rng, 0.6), v = random_label(rng, 0.6);
    CVec lhs = displacement_op(u, c).apply(displacement_op(v, c).apply(psi.amp));
    CVec rhs = std::exp(kI * weyl_phase(u, v)) * displacement_op(u + v, c).apply(psi.amp);
    EXPECT_LT((lhs - rhs).norm(), 1e-8);
  }
}

TEST(Displacement, GroupCommutatorPhase) {
  const auto c = cfg(60, 60);
  std::mt19937_64 rng(22);
  for (int k = 0; k < 100; ++k) {
    auto psi = gkpsim::testing::random_low_state(c, 3, rng);
    auto u = random_label(rng, 0.5), v = random_label(rng, 0.5);
    auto Du = displacement_op(u, c), Dv = displacement_op(v, c);
    CVec w = Du.apply(Dv.apply(Du.adjoint().apply(Dv.adjoint().apply(psi.amp))));
    EXPECT_LT((w - std::exp(kI * symplectic(u, v)) * psi.amp).norm(), 1e-8);
  }
}

TEST(Labels, QubitAlgebra) {
  const auto ops = stabilizers_and_logicals(CodeParams{kLattice, 2, 0.37}, 1);
  ASSERT_TRUE(ops.X && ops.Z && ops.Y);
  EXPECT_DOUBLE_EQ(ops.Z->up1, kSqrtPi);
  EXPECT_DOUBLE_EQ(ops.Z->uq1, 0.0);
  // XZ = e^{i omega} ZX
  EXPECT_NEAR(std::cos(symplectic(*ops.X, *ops.Z)), -1.0, 1e-12);
  const auto c = cfg(60, 4, 2);
  std::mt19937_64 rng(4);
  auto psi = gkpsim::testing::random_low_state(c, 3, rng);
  auto X = displacement_op(*ops.X, c), Z = displacement_op(*ops.Z, c);
  EXPECT_LT((X.apply(Z.apply(psi.amp)) + Z.apply(X.apply(psi.amp))).norm(), 1e-8);
}

TEST(Labels, DifferentModesCommute) {
  const CodeParams code{kLattice, 2, 0.37};
  auto X1 = *stabilizers_and_logicals(code, 1).X, Z2 = *stabilizers_and_logicals(code, 2).Z;
  EXPECT_EQ(symplectic(X1, Z2), 0.0);
  const auto c = cfg(30, 30);
  EXPECT_EQ(gkpsim::testing::max_abs(commutator(displacement_op(X1, c), displacement_op(Z2, c)).dense()), 0.0);
}

TEST(Labels, QunaughtLatticeLength) {
  const auto s = stabilizers_and_logicals(CodeParams{kLattice, 1, 0.37}, 1);
  EXPECT_NEAR(std::hypot(s.S_q.uq1, s.S_q.up1), std::sqrt(2 * kPi), 1e-14);
  EXPECT_NEAR(kLattice * kLattice, 2 * kPi, 1e-12);
}

TEST(Qunaught, StabilizerSignsPerVariant) {
  const auto c = cfg(100, 2, 1);
  const auto s = stabilizers_and_logicals(CodeParams{kLattice, 1, 0.37}, 1);
  for (Qunaught v : {Qunaught::plain, Qunaught::q, Qunaught::p, Qunaught::qp}) {
    auto st = ideal_qunaught(v, 0.37, c);
    auto [eq, ep] = qunaught_signs(v);
    EXPECT_GT(eq * chi_re(st, s.S_q), 0.5) << qunaught_name(v);
    EXPECT_GT(ep * chi_re(st, s.S_p), 0.5) << qunaught_name(v);
  }
  auto plain = ideal_qunaught(Qunaught::plain, 0.37, c);
  EXPECT_NEAR(chi_re(plain, s.S_q), chi_re(plain, s.S_p), 1e-6);
}

TEST(Qunaught, EnvelopeShrinksStabilizer) {
  const auto c = cfg(100, 2, 1);
  const auto s = stabilizers_and_logicals(CodeParams{kLattice, 1, 0.37}, 1);
  double prev = 1.0;
  for (double kappa : {0.3, 0.4, 0.5}) {
    const double v = std::abs(chi_re(ideal_qunaught(Qunaught::plain, kappa, c), s.S_q));
    EXPECT_LT(v, prev) << kappa;
    prev = v;
  }
}

TEST(Qunaught, DeltaFromStabilizer) {
  const auto c = cfg(100, 2, 1);
  const auto s = stabilizers_and_logicals(CodeParams{kLattice, 1, 0.37}, 1);
  const double S = chi_re(ideal_qunaught(Qunaught::plain, 0.37, c), s.S_q);
  // closed-form inversion of <S> = exp(-pi Delta^2 / 2)
  const double delta = std::sqrt(-2.0 * std::log(S) / kPi);
  EXPECT_NEAR(delta, 0.37, 0.02);
  EXPECT_NEAR(effective_squeezing(S).delta, delta, 1e-12);
}

TEST(Qunaught, RejectsBadKappa) {
  EXPECT_THROW(ideal_qunaught(Qunaught::plain, 0.0, cfg(40, 2, 1)), Error);
  EXPECT_THROW(ideal_qunaught(Qunaught::plain, 1.2, cfg(40, 2, 1)), Error);
}

TEST(Qunaught, TightEnvelopeLeaks) {
  EXPECT_THROW(ideal_qunaught(Qunaught::plain, 0.1, cfg(40, 2, 1)), TruncationError);
}

TEST(Bell, PhiPlusSigns) {
  const auto c = cfg(40, 40);
  auto s = ideal_bell(Bell::phi_plus, 0.37, c);
  auto pp = [&](Pauli p) { return logical_label(p, 1) + logical_label(p, 2); };
  EXPECT_GT(chi_re(s, pp(Pauli::Z)), 0.3);
  EXPECT_GT(chi_re(s, pp(Pauli::X)), 0.3);
  EXPECT_LT(chi_re(s, pp(Pauli::Y)), -0.3);
  for (Pauli p : {Pauli::X, Pauli::Y, Pauli::Z}) EXPECT_LT(std::abs(chi_re(s, pp(p))), 1.0);
}

TEST(Bell, AllFourSignPatterns) {
  const auto c = cfg(40, 40);
  for (Bell b : {Bell::phi_plus, Bell::phi_minus, Bell::psi_plus, Bell::psi_minus}) {
    auto s = ideal_bell(b, 0.37, c);
    for (Pauli p : {Pauli::X, Pauli::Y, Pauli::Z}) {
      const double v = chi_re(s, logical_label(p, 1) + logical_label(p, 2));
      const double sign = (bell_dm(b) * pauli_pair(p, p)).trace().real();
      EXPECT_GT(sign * v, 0.3) << bell_name(b) << pauli_char(p);
    }
  }
}

TEST(Bell, TruncationConvergence) {
  const auto zz = logical_label(Pauli::Z, 1) + logical_label(Pauli::Z, 2);
  const double a = chi_re(ideal_bell(Bell::phi_plus, 0.37, cfg(50, 50)), zz);
  const double b = chi_re(ideal_bell(Bell::phi_plus, 0.37, cfg(60, 60)), zz);
  EXPECT_LT(std::abs(a - b), 1e-4);
}

TEST(CharFunction, VacuumGaussian) {
  const auto c = cfg(40, 40);
  RVec ax = RVec::LinSpaced(17, -2.2, 2.2);
  auto g = char_function(HybridState::vacuum(c), 0, ax, 1, ax);
  double err = 0;
  for (long i = 0; i < ax.size(); ++i)
    for (long j = 0; j < ax.size(); ++j)
      err = std::max(err, std::abs(g.values(i, j) - std::exp(-(ax(i) * ax(i) + ax(j) * ax(j)) / 4)));
  EXPECT_LT(err, 1e-8);
}

TEST(CharFunction, SqueezedGaussian) {
  const auto c = cfg(40, 2, 1);
  const double r = 0.5;
  CVec m = ModeKernel(c.dim1()).squeeze(r, 0.0).col(0);
  auto s = place_modes(c, m, fock_vacuum(c.dim2()));
  RVec ax = RVec::LinSpaced(13, -2.0, 2.0);
  auto g = char_function(s, 0, ax, 1, ax);
  double err = 0;
  for (long i = 0; i < ax.size(); ++i)
    for (long j = 0; j < ax.size(); ++j) {
      const double uq = ax(i), up = ax(j);
      err = std::max(err, std::abs(g.values(i, j) - std::exp(-(std::exp(2 * r) * uq * uq + std::exp(-2 * r) * up * up) / 4)));
    }
  EXPECT_LT(err, 1e-6);
}

TEST(CharFunction, OriginAndHermitianSymmetry) {
  const auto c = cfg(30, 30);
  std::mt19937_64 rng(8);
  auto psi = gkpsim::testing::random_low_state(c, 5, rng);
  EXPECT_NEAR(std::abs(char_value(psi, {}) - 1.0), 0.0, 1e-12);
  for (int k = 0; k < 20; ++k) {
    auto u = random_label(rng, 1.0);
    EXPECT_LT(std::abs(char_value(psi, -u) - std::conj(char_value(psi, u))), 1e-10);
  }
}

TEST(CharFunction, RejectsRepeatedAxis) {
  RVec ax = RVec::LinSpaced(3, -1, 1);
  EXPECT_THROW(char_function(HybridState::vacuum(cfg(10, 10)), 1, ax, 1, ax), Error);
}

TEST(Beamsplitter, CovarianceOfDisplacements) {
  const auto c = cfg(40, 40);
  Propagator B(beamsplitter_generator(c));
  std::mt19937_64 rng(31);
  for (int k = 0; k < 20; ++k) {
    auto psi = gkpsim::testing::random_low_state(c, 3, rng);
    auto u = random_label(rng, 0.8);
    CVec lhs = B.apply(displacement_op(u, c).apply(B.apply(psi.amp, kPi / 4)), -kPi / 4);
    CVec rhs = displacement_op(beamsplitter_label(u, kPi / 4), c).apply(psi.amp);
    EXPECT_LT((lhs - rhs).norm(), 1e-8);
  }
}

TEST(Beamsplitter, FeaturesRotateByQuarterTurn) {
  std::mt19937_64 rng(32);
  for (int k = 0; k < 100; ++k) {
    auto u = random_label(rng, 2.0);
    auto v = beamsplitter_peak_map(u, kPi / 4);
    EXPECT_NEAR(v.up1, (u.up1 - u.up2) / std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(v.up2, (u.up1 + u.up2) / std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(v.uq1, (u.uq1 - u.uq2) / std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(v.uq2, (u.uq1 + u.uq2) / std::sqrt(2.0), 1e-12);
    auto w = beamsplitter_label(v, kPi / 4);
    for (int a = 0; a < 4; ++a) EXPECT_NEAR(w.coord(a), u.coord(a), 1e-12);
  }
}

TEST(Beamsplitter, FeatureMapMatchesSimulation) {
  // chi_out(u) = chi_in(M u): a peak of the input pair at w shows up at peak_map(w).
  // The comb tail is cut at n_max, hence the looser tolerance (2e-6 at n_max 60, 2e-4 at 40)
  const auto c = cfg(60, 60);
  auto in = place_modes(c, qunaught_fock(Qunaught::plain, 0.37, c.dim1()), qunaught_fock(Qunaught::plain, 0.37, c.dim2()));
  auto out = ideal_bell(Bell::phi_plus, 0.37, c);
  const DisplacementLabel w{0, kLattice, 0, 0};
  const auto v = beamsplitter_peak_map(w, kPi / 4);
  EXPECT_NEAR(char_value(out, v).real(), char_value(in, w).real(), 1e-5);
}

TEST(Beamsplitter, QunaughtLatticeBecomesQubitLattice) {
  const auto s = stabilizers_and_logicals(CodeParams{kLattice, 1, 0.37}, 1);
  const auto v = beamsplitter_peak_map(s.S_p, kPi / 4);
  EXPECT_NEAR(std::abs(v.up1), kSqrtPi, 1e-12);
  EXPECT_NEAR(std::abs(v.up2), kSqrtPi, 1e-12);
  EXPECT_NEAR(kLattice / std::sqrt(2.0), kSqrtPi, 1e-14);
}

TEST(Squeezing, Examples) {
  auto one = effective_squeezing(1.0);
  EXPECT_TRUE(one.saturated);
  EXPECT_EQ(one.delta, 0.0);
  EXPECT_TRUE(std::isinf(one.dB));

  const double s37 = stabilizer_from_delta(0.37);
  const auto q = effective_squeezing(s37);
  EXPECT_NEAR(q.delta, 0.37, 1e-12);
  EXPECT_NEAR(q.dB, 10 * std::log10(2 / (0.37 * 0.37)), 1e-12);
  EXPECT_NEAR(q.dB, 11.5, 0.3);

  EXPECT_NEAR(effective_squeezing(0.807).delta, 0.37, 1e-3);
}

TEST(Squeezing, RoundTrip) {
  for (double d : {0.1, 0.25, 0.37, 0.5, 0.8}) EXPECT_NEAR(effective_squeezing(stabilizer_from_delta(d)).delta, d, 1e-12);
  for (double s : {0.2, 0.5, 0.807, 0.95}) EXPECT_NEAR(stabilizer_from_delta(effective_squeezing(s).delta), s, 1e-12);
}

TEST(Squeezing, NonPositiveIsUndefined) {
  for (double s : {0.0, -0.3}) {
    try {
      effective_squeezing(s);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::undefined_squeezing);
    }
  }
}

TEST(Squeezing, BothDbConventions) {
  auto [a, b] = squeeze_db_conventions(0.8);
  EXPECT_NEAR(a, 6.95, 0.01);
  EXPECT_NEAR(b, 13.9, 0.01);
}
