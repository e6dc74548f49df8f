#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qp_cases.hpp"
#include "srn/qp.hpp"

using namespace srn;

TEST(Qp, HalfSpaceProjection)
{
  QpProblem p;
  LinearRow r;
  r.a = Vec3(1.0, 0.0, 0.0);
  r.b = 1.0;
  p.rows.push_back(r);
  const QpSolution s = solve_qp(p);
  ASSERT_TRUE(s.optimal());
  EXPECT_NEAR((s.u - Vec3(1.0, 0.0, 0.0)).norm(), 0.0, 1e-12);
  EXPECT_LT(s.kkt_residual, 1e-12);
  ASSERT_EQ(s.active.size(), 1u);
  EXPECT_EQ(s.active[0], 0u);
}

TEST(Qp, BoxOnlyGivesZero)
{
  QpProblem p;
  p.box = 30.0;
  const QpSolution s = solve_qp(p);
  ASSERT_TRUE(s.optimal());
  EXPECT_EQ(s.u, Vec3::Zero());
}

TEST(Qp, BoxClipsLinearTerm)
{
  QpProblem p;
  p.box = 1.0;
  p.linear = Vec3(-10.0, 0.0, 4.0);
  const QpSolution s = solve_qp(p);
  ASSERT_TRUE(s.optimal());
  EXPECT_NEAR(s.u(0), 1.0, 1e-12);
  EXPECT_NEAR(s.u(2), -1.0, 1e-12);
}

TEST(Qp, ContradictoryRowsAreInfeasible)
{
  QpProblem p;
  LinearRow a;
  a.a = Vec3(1.0, 0.0, 0.0);
  a.b = 1.0;
  LinearRow b;
  b.a = Vec3(-1.0, 0.0, 0.0);
  b.b = 1.0;  // u1 <= -1
  p.rows = {a, b};
  EXPECT_FALSE(solve_qp(p).optimal());

  QpProblem q;
  LinearRow z;
  z.b = 0.5;  // 0 >= 0.5
  q.rows = {z};
  EXPECT_FALSE(solve_qp(q).optimal());
}

TEST(Qp, BoxMakesRowInfeasible)
{
  QpProblem p;
  p.box = 1.0;
  LinearRow r;
  r.a = Vec3(1.0, 1.0, 1.0);
  r.b = 4.0;
  p.rows = {r};
  EXPECT_FALSE(solve_qp(p).optimal());
}

TEST(Qp, DuplicateActiveRowsAreHandled)
{
  QpProblem p;
  LinearRow r;
  r.a = Vec3(0.0, 1.0, 0.0);
  r.b = 2.0;
  p.rows = {r, r, r};
  const QpSolution s = solve_qp(p);
  ASSERT_TRUE(s.optimal());
  EXPECT_NEAR(s.u(1), 2.0, 1e-12);
}

TEST(Qp, MatchesExhaustiveEnumeration)
{
  std::mt19937_64 rng(77);
  for (int n = 0; n < 300; ++n) {
    QpProblem p = gen::feasible_qp(rng);
    if (n % 3 == 0) { p.box = 5.0; }
    const auto ref = oracle::qp_minimizer(p);
    const QpSolution s = solve_qp(p);
    if (!ref) {
      EXPECT_FALSE(s.optimal());
      continue;
    }
    ASSERT_TRUE(s.optimal()) << "case " << n;
    EXPECT_LT((s.u - *ref).norm(), 1e-6) << "case " << n;
    EXPECT_LT(s.kkt_residual, 1e-7) << "case " << n;
  }
}

TEST(Qp, ImmediateHandOverMatchesEnumeration)
{
  QpSettings settings;
  settings.stall_sweeps = 1;
  std::mt19937_64 rng(78);
  for (int n = 0; n < 300; ++n) {
    QpProblem p = gen::feasible_qp(rng);
    if (n % 2 == 0) { p.box = 3.0; }
    const auto ref = oracle::qp_minimizer(p);
    const QpSolution s = solve_qp(p, settings);
    ASSERT_EQ(s.optimal(), ref.has_value()) << "case " << n;
    if (ref) { EXPECT_LT((s.u - *ref).norm(), 1e-6) << "case " << n; }
  }
  // contradictory rows through the same path
  QpProblem q;
  LinearRow r;
  r.a = Vec3(1.0, 0.0, 0.0);
  r.b = 1.0;
  q.rows.push_back(r);
  r.a = Vec3(-1.0, 0.0, 0.0);
  q.rows.push_back(r);
  EXPECT_FALSE(solve_qp(q, settings).optimal());
}

TEST(Qp, KktResidualDetectsWrongPoints)
{
  QpProblem p;
  LinearRow r;
  r.a = Vec3(1.0, 0.0, 0.0);
  r.b = 1.0;
  p.rows.push_back(r);
  Eigen::VectorXd lambda(1);
  lambda << 2.0;
  EXPECT_LT(kkt_residual(p, Vec3(1.0, 0.0, 0.0), lambda), 1e-15);
  EXPECT_GT(kkt_residual(p, Vec3(0.0, 0.0, 0.0), lambda), 0.5);
}

TEST(Qp, ScalingRowsKeepsMinimizer)
{
  std::mt19937_64 rng(13);
  for (int n = 0; n < 100; ++n) {
    const QpProblem p = gen::feasible_qp(rng);
    QpProblem scaled = p;
    for (auto & r : scaled.rows) {
      r.a *= 1000.0;
      r.b *= 1000.0;
    }
    const QpSolution a = solve_qp(p);
    const QpSolution b = solve_qp(scaled);
    ASSERT_TRUE(a.optimal());
    ASSERT_TRUE(b.optimal());
    EXPECT_LT((a.u - b.u).norm(), 1e-6);
  }
}

TEST(Qp, Deterministic)
{
  std::mt19937_64 rng(19);
  const QpProblem p = gen::feasible_qp(rng);
  const QpSolution a = solve_qp(p);
  const QpSolution b = solve_qp(p);
  EXPECT_EQ(a.u, b.u);
}
