#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace gkpsim;
using gkpsim::testing::cfg;

TEST(Embed, SigmaZOnDown) {
  const auto c = cfg(10, 10);
  EXPECT_NEAR(expectation(HybridState::basis(c, down, 0, 0), embed(SpinOperator{SpinOperator::z}, c)).real(), -1.0, 1e-14);
}

TEST(Embed, NumberOnFockState) {
  const auto c = cfg(10, 10);
  auto n1 = embed(QuadratureOperator{1, QuadratureOperator::number}, c);
  EXPECT_NEAR(expectation(HybridState::basis(c, down, 3, 0), n1).real(), 3.0, 1e-14);
}

TEST(Embed, DifferentModesCommute) {
  const auto c = cfg(12, 9);
  std::mt19937_64 rng(3);
  auto psi = gkpsim::testing::random_low_state(c, 12, rng);
  auto q1 = embed(QuadratureOperator{1, QuadratureOperator::position}, c);
  auto p2 = embed(QuadratureOperator{2, QuadratureOperator::momentum}, c);
  EXPECT_LT(commutator(q1, p2).apply(psi.amp).norm(), 1e-12);
}

TEST(Embed, RejectsTinyCutoff) {
  auto c = cfg(1, 10, 1);
  try {
    embed(QuadratureOperator{1, QuadratureOperator::position}, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_config);
  }
}

TEST(Embed, ModeIndependenceExact) {
  const auto c = cfg(6, 7, 2);
  for (auto k1 : {QuadratureOperator::position, QuadratureOperator::momentum, QuadratureOperator::lowering, QuadratureOperator::number})
    for (auto k2 : {QuadratureOperator::position, QuadratureOperator::momentum, QuadratureOperator::lowering, QuadratureOperator::number}) {
      auto a = embed(QuadratureOperator{1, k1}, c), b = embed(QuadratureOperator{2, k2}, c);
      EXPECT_EQ(gkpsim::testing::max_abs(commutator(a, b).dense()), 0.0);
    }
}

TEST(Commutator, CanonicalBelowBuffer) {
  for (int nmax : {20, 60}) {
    const int d = nmax + 1, guard = 5;
    CMat C = position_op(d) * momentum_op(d) - momentum_op(d) * position_op(d);
    const int lo = d - guard;
    CMat top = C.topLeftCorner(lo, lo) - kI * CMat::Identity(lo, lo);
    EXPECT_LT(gkpsim::testing::max_abs(top), 1e-10) << nmax;
  }
}

TEST(PauliAlgebra, Exact) {
  const Mat2 X = pauli_x(), Y = pauli_y(), Z = pauli_z();
  EXPECT_LT((X * Y - kI * Z).norm(), 1e-15);
  EXPECT_LT((Y * Z - kI * X).norm(), 1e-15);
  EXPECT_LT((X * X - Mat2::Identity()).norm(), 1e-15);
  const double phi = 0.7;
  EXPECT_LT((pauli_phi(phi) - (std::cos(phi) * X + std::sin(phi) * Y)).norm(), 1e-15);
}

TEST(ApplyUnitary, ZeroAngleIsIdentity) {
  const auto c = cfg(10, 10);
  std::mt19937_64 rng(5);
  auto psi = gkpsim::testing::random_low_state(c, 5, rng);
  auto out = apply_unitary(psi, embed(QuadratureOperator{1, QuadratureOperator::position}, c), 0.0);
  EXPECT_EQ((out.amp - psi.amp).norm(), 0.0);
}

TEST(ApplyUnitary, NumberGivesGlobalPhase) {
  const auto c = cfg(10, 10);
  const double th = 0.83;
  auto s = HybridState::basis(c, down, 1, 0);
  auto out = apply_unitary(s, embed(QuadratureOperator{1, QuadratureOperator::number}, c), th);
  EXPECT_LT((out.amp - std::exp(-kI * th) * s.amp).norm(), 1e-12);
}

TEST(ApplyUnitary, BeamsplitterSwapsPhonon) {
  const auto c = cfg(6, 6, 2);
  auto out = apply_unitary(HybridState::basis(c, down, 1, 0), beamsplitter_generator(c), kPi / 2);
  const long idx = (long(down) * c.dim1() + 0) * c.dim2() + 1;
  EXPECT_NEAR(std::norm(out.amp(idx)), 1.0, 1e-12);
}

TEST(ApplyUnitary, RejectsNonHermitian) {
  const auto c = cfg(6, 6, 2);
  try {
    apply_unitary(HybridState::vacuum(c), embed(QuadratureOperator{1, QuadratureOperator::lowering}, c), 0.3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_generator);
  }
}

TEST(ApplyUnitary, LeakageRaisesTruncation) {
  const auto c = cfg(10, 10, 3);
  auto p1 = embed(QuadratureOperator{1, QuadratureOperator::momentum}, c);
  try {
    apply_unitary(HybridState::vacuum(c), p1, 3.0);
    FAIL();
  } catch (const TruncationError& e) {
    EXPECT_EQ(e.mode, 1);
    EXPECT_GT(e.population, c.leak_tol);
  }
}

TEST(ApplyUnitary, NormPreservedForPulseGenerators) {
  const auto c = cfg(30, 30);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  auto psi = gkpsim::testing::random_low_state(c, 4, rng);
  const CMat q1 = position_op(c.dim1()), p1 = momentum_op(c.dim1()), q2 = position_op(c.dim2());
  const CMat sq = 0.5 * (q1 * p1 + p1 * q1);
  std::vector<JointMatrix> gens{
      JointMatrix::term(c, 1.0, pauli_phi(0.3), q1, std::nullopt),
      JointMatrix::term(c, 1.0, pauli_phi(1.9), std::nullopt, q2),
      JointMatrix::term(c, 1.0, std::nullopt, sq, std::nullopt),
      beamsplitter_generator(c),
      embed(QuadratureOperator{2, QuadratureOperator::number}, c),
      embed(SpinOperator{SpinOperator::y}, c)};
  for (int rep = 0; rep < 4; ++rep)
    for (const auto& g : gens) {
      psi = apply_unitary(psi, g, 0.5 * U(rng));
      EXPECT_NEAR(psi.norm(), 1.0, 1e-10);
    }
}

TEST(ApplyUnitary, MatchesExecutorSdf) {
  // block-eigendecomposed joint generator vs the single-mode kernel used by the executor
  const auto c = cfg(40, 8);
  std::mt19937_64 rng(2);
  auto psi = gkpsim::testing::random_low_state(c, 4, rng);
  const double u = 0.8, phs = 0.4, phm = 1.1;
  const CMat qphi = std::cos(phm) * position_op(c.dim1()) - std::sin(phm) * momentum_op(c.dim1());
  auto ref = apply_unitary(psi, JointMatrix::term(c, 1.0, pauli_phi(phs), qphi, std::nullopt), u);
  Executor ex(c);
  CVec a = psi.amp;
  ex.apply_unitary(a, SdfOp{1, u, phs, phm, 0.0, 1e-6});
  EXPECT_LT((a - ref.amp).norm(), 1e-10);
}

TEST(Expectation, Examples) {
  const auto c = cfg(20, 20);
  auto vac = HybridState::vacuum(c);
  EXPECT_NEAR(expectation(vac, JointMatrix::identity(c)).real(), 1.0, 1e-14);
  EXPECT_NEAR(std::abs(expectation(vac, embed(SpinOperator{SpinOperator::x}, c))), 0.0, 1e-14);
  auto q1 = embed(QuadratureOperator{1, QuadratureOperator::position}, c);
  EXPECT_NEAR(expectation(vac, q1 * q1).real(), 0.5, 1e-14);
}

TEST(Expectation, HermitianIsReal) {
  const auto c = cfg(15, 15);
  std::mt19937_64 rng(9);
  auto psi = gkpsim::testing::random_low_state(c, 8, rng);
  auto H = embed(QuadratureOperator{1, QuadratureOperator::position}, c) * embed(QuadratureOperator{2, QuadratureOperator::momentum}, c);
  EXPECT_LT(std::abs(expectation(psi, H).imag()), 1e-10);
}

TEST(Expectation, DimensionMismatch) {
  try {
    expectation(HybridState::vacuum(cfg(10, 10)), JointMatrix::identity(cfg(11, 10)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::dimension_mismatch);
  }
}

TEST(SpinMeasure, Eigenstate) {
  auto m = partial_spin_measure(HybridState::basis(cfg(5, 5, 2), down, 2, 1), SpinBasis::z);
  EXPECT_NEAR(m.probabilities[0], 1.0, 1e-14);  // outcome -1
  EXPECT_NEAR(m.probabilities[1], 0.0, 1e-14);
}

TEST(SpinMeasure, EqualSuperposition) {
  const auto c = cfg(5, 5, 2);
  auto s = HybridState::product(c, Eigen::Vector2cd(1.0, 1.0), fock_vacuum(c.dim1()), fock_vacuum(c.dim2()));
  auto m = partial_spin_measure(s, SpinBasis::z);
  EXPECT_NEAR(m.probabilities[0], 0.5, 1e-12);
  EXPECT_NEAR(m.probabilities[1], 0.5, 1e-12);
  EXPECT_NEAR(m.probabilities[0] + m.probabilities[1], 1.0, 1e-10);
  ASSERT_TRUE(m.post[1]);
  EXPECT_NEAR(m.post[1]->norm(), 1.0, 1e-12);
}

TEST(SpinMeasure, SdfContrastIsGaussianOverlap) {
  const auto c = cfg(50, 2, 1);
  for (double u : {0.3, 0.7, 1.2}) {
    auto G = JointMatrix::term(c, 1.0, pauli_x(), position_op(c.dim1()), std::nullopt);
    auto s = apply_unitary(HybridState::vacuum(c), G, u);
    // sigma_x commutes with the pulse; the overlap shows up in sigma_z
    auto mx = partial_spin_measure(s, SpinBasis::x);
    EXPECT_NEAR(mx.probabilities[1] - mx.probabilities[0], 0.0, 1e-10) << u;
    auto mz = partial_spin_measure(s, SpinBasis::z);
    EXPECT_NEAR(mz.probabilities[1] - mz.probabilities[0], -std::exp(-u * u), 1e-10) << u;
  }
}
