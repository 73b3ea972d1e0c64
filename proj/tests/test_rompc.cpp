#include <gtest/gtest.h>

#include "qp_oracle.hpp"
#include "romshape/rompc.hpp"

using namespace romshape;
using namespace romshape::testing;

namespace {

DiscreteRom random_rom(Index r, Index p, std::mt19937_64& gen, bool feedthrough = false) {
  DiscreteRom rom = as_rom({stable_matrix(r, 0.95, gen), 0.1 * gaussian(r, 6, gen), gaussian(p, r, gen),
                            feedthrough ? gaussian(p, 6, gen) : Mat::Zero(p, 6)});
  rom.Ts = 0.01;
  return rom;
}

MpcSpec small_spec(Index p, Index horizon) {
  MpcSpec s;
  s.horizon = horizon;
  s.Wy = Vec::Constant(p, 0.6);
  return s;
}

}  // namespace

TEST(CouplingMap, Antagonistic) {
  const Mat P = coupling_map();
  Vec v(3);
  v << 0.2, -0.7, 1.0;
  const Vec u = P * v;
  for (Index i = 0; i < 3; ++i) {
    EXPECT_EQ(u(2 * i), v(i));
    EXPECT_EQ(u(2 * i + 1), -v(i));
  }
  EXPECT_EQ(P.transpose() * P, 2.0 * Mat::Identity(3, 3));
}

TEST(Weights, Schemes) {
  const Vec eq = equal_weights();
  ASSERT_EQ(eq.size(), 40);
  for (Index j = 0; j < 20; ++j) {
    EXPECT_EQ(eq(2 * j), 0.0);
    EXPECT_EQ(eq(2 * j + 1), 0.6);
  }
  const Vec post = posterior_weights();
  EXPECT_EQ(post(2 * 9 + 1), 0.0);
  EXPECT_EQ(post(2 * 10 + 1), 1.2);
  EXPECT_EQ(post(39), 1.2);
  EXPECT_EQ(post.sum(), 12.0);
}

TEST(MpcSpec, Validation) {
  MpcSpec s = small_spec(4, 5);
  EXPECT_NO_THROW(s.validate(4));
  EXPECT_THROW(s.validate(5), Error);
  s.c_u = 0.0;
  EXPECT_THROW(s.validate(4), Error);
  s = small_spec(4, 0);
  EXPECT_THROW(s.validate(4), Error);
}

TEST(BoxQp, MatchesEnumerationOracle) {
  std::mt19937_64 gen(71);
  for (int trial = 0; trial < 120; ++trial) {
    const Index d = 1 + trial % 8;
    const CondensedQp qp = random_box_qp(d, gen);
    const QpResult res = solve_box_qp(qp);
    EXPECT_LE(res.objective - enumerate_box_qp(qp), 1e-8) << trial;
    EXPECT_GE(res.v.minCoeff(), -1.0);
    EXPECT_LE(res.v.maxCoeff(), 1.0);
    EXPECT_LE(projected_gradient_residual(qp, res.v), 1e-8 * (1.0 + qp.g.lpNorm<Eigen::Infinity>()));
  }
}

TEST(BoxQp, InteriorSolutionIsUnconstrainedMinimizer) {
  std::mt19937_64 gen(72);
  CondensedQp qp = random_box_qp(6, gen);
  qp.g *= 1e-3;
  qp.lb.setConstant(-1e6);
  qp.ub.setConstant(1e6);
  const QpResult res = solve_box_qp(qp);
  const Vec exact = qp.H.llt().solve(-qp.g);
  EXPECT_LE((res.v - exact).lpNorm<Eigen::Infinity>(), 1e-7);
}

TEST(BoxQp, WarmStartAndErrors) {
  std::mt19937_64 gen(73);
  const CondensedQp qp = random_box_qp(8, gen);
  const QpResult cold = solve_box_qp(qp);
  const QpResult warm = solve_box_qp(qp, cold.v);
  EXPECT_EQ(warm.iterations, 0);
  EXPECT_EQ(warm.v, cold.v);
  CondensedQp bad = qp;
  bad.g.resize(3);
  EXPECT_THROW(solve_box_qp(bad), QpError);
  bad = qp;
  bad.g(0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(solve_box_qp(bad), NumericError);
}

TEST(Condenser, ObjectiveMatchesExplicitRollout) {
  std::mt19937_64 gen(74);
  for (int trial = 0; trial < 40; ++trial) {
    const Index r = 2 + trial % 6, p = 4 + 2 * (trial % 3), T = 1 + trial % 7;
    DiscreteRom rom = random_rom(r, p, gen, trial % 2 == 0);
    MpcSpec spec = small_spec(p, T);
    spec.Wy = gaussian(p, 1, gen).cwiseAbs();
    const Vec x = gaussian(r, 1, gen), u_prev = coupling_map() * gaussian(3, 1, gen);
    const Mat ref = gaussian(p, T, gen);
    const CondensedQp qp = condense(rom, spec, x, u_prev, ref);
    for (int s = 0; s < 5; ++s) {
      const Vec v = gaussian(3 * T, 1, gen);
      const double want = rollout_objective(rom, spec, x, u_prev, ref, v);
      EXPECT_LE(std::abs(qp.objective(v) - want), 1e-9 * std::abs(want)) << trial;
    }
  }
}

TEST(Condenser, HessianIsConstantAndSymmetric) {
  std::mt19937_64 gen(75);
  DiscreteRom rom = random_rom(5, 6, gen);
  Condenser c(rom, small_spec(6, 10));
  const CondensedQp a = c.condense(gaussian(5, 1, gen), Vec::Zero(6), gaussian(6, 10, gen));
  const CondensedQp b = c.condense(gaussian(5, 1, gen), Vec::Ones(6), gaussian(6, 10, gen));
  EXPECT_EQ(a.H, b.H);
  EXPECT_EQ(a.H, a.H.transpose());
  EXPECT_EQ(c.decision_size(), 30);
  EXPECT_THROW(c.condense(Vec::Zero(4), Vec::Zero(6), Mat::Zero(6, 10)), Error);
  EXPECT_THROW(c.condense(Vec::Zero(5), Vec::Zero(6), Mat::Zero(6, 9)), Error);
}

TEST(Policy, ConstraintsAndSaturation) {
  std::mt19937_64 gen(76);
  DiscreteRom rom = random_rom(4, 6, gen);
  MpcSpec spec = small_spec(6, 8);
  spec.c_u = 1e-3;
  spec.c_du = 0.0;
  RompcPolicy policy(rom, place_gain(rom), spec);
  ControllerState st = policy.initial_state();
  int saturated = 0;
  for (int k = 0; k < 10; ++k) {
    const Mat far = Mat::Constant(6, 8, 1e4);  // unreachable reference drives the inputs to the box
    PolicyStep out = policy.step(st, Vec::Zero(6), far);
    EXPECT_LE(out.u_next.cwiseAbs().maxCoeff(), spec.u_max + 1e-12);
    for (Index i = 0; i < 3; ++i) EXPECT_EQ(out.u_next(2 * i + 1), -out.u_next(2 * i));
    saturated += out.diag.saturated;
    EXPECT_EQ(st.u_applied, out.u_next);
  }
  EXPECT_GT(saturated, 0);
}

TEST(Policy, ZeroReferenceAtRestIsZeroInput) {
  std::mt19937_64 gen(77);
  DiscreteRom rom = random_rom(5, 6, gen);
  RompcPolicy policy(rom, place_gain(rom), small_spec(6, 10));
  ControllerState st = policy.initial_state();
  for (int k = 0; k < 5; ++k) {
    PolicyStep out = policy.step(st, Vec::Zero(6), Mat::Zero(6, 10));
    EXPECT_LE(out.u_next.norm(), 1e-12);
  }
  EXPECT_TRUE(st.x_hat.isZero(0.0));
}

TEST(Policy, FirstStepUsesObserverPrediction) {
  std::mt19937_64 gen(78);
  DiscreteRom rom = random_rom(4, 6, gen, true);
  const MpcSpec spec = small_spec(6, 6);
  const ObserverGain gain = place_gain(rom);
  RompcPolicy policy(rom, gain, spec);
  ControllerState st = policy.initial_state();
  st.x_hat = gaussian(4, 1, gen);
  st.u_applied = coupling_map() * Vec::Constant(3, 0.1);
  const ControllerState before = st;
  const Vec y = gaussian(6, 1, gen);
  const Mat ref = gaussian(6, 6, gen);
  PolicyStep out = policy.step(st, y, ref);
  const Vec x_next = rom.A * before.x_hat + rom.B * before.u_applied +
                     gain.L * (y - rom.C * before.x_hat - rom.D * before.u_applied);
  EXPECT_LE((st.x_hat - x_next).norm(), 1e-12 * (1.0 + x_next.norm()));
  const QpResult direct = solve_box_qp(condense(rom, spec, x_next, before.u_applied, ref));
  EXPECT_LE(std::abs(out.diag.objective - direct.objective), 1e-8 * (1.0 + std::abs(direct.objective)));
}
