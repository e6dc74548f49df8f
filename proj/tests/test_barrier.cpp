#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "generators.hpp"
#include "srn/barrier.hpp"

using namespace srn;
using stl::Formula;
using stl::NodeKind;
using stl::PredicateKind;

namespace {

stl::Predicate ball(PredicateKind kind, Vec2 center, double radius)
{
  stl::Predicate p;
  p.kind = kind;
  p.name = "p";
  p.center = center;
  p.radius = radius;
  p.bound = true;
  return p;
}

Formula bound(const std::string & text, const stl::NameTable & names)
{
  Formula f = stl::parse_stl(text);
  stl::bind_names(f, names);
  return f;
}

// Central differences of b in x, y, theta and t.
Eigen::Vector4d finite_difference(const TimeVaryingBarrier & b, const RobotState & x, double t, double h = 1e-6)
{
  Eigen::Vector4d g;
  for (int i = 0; i < 3; ++i) {
    Vec3 lo = x.vector();
    Vec3 hi = x.vector();
    lo(i) -= h;
    hi(i) += h;
    g(i) = (b.evaluate({hi(0), hi(1), hi(2)}, t).value - b.evaluate({lo(0), lo(1), lo(2)}, t).value) / (2.0 * h);
  }
  g(3) = (b.evaluate(x, t + h).value - b.evaluate(x, t - h).value) / (2.0 * h);
  return g;
}

}  // namespace

TEST(PredicateBarrier, CenterIsRegularized)
{
  const PredicateBarrier pb = predicate_barrier(ball(PredicateKind::Reach, {0.0, 0.0}, 1.0), {0.0, 0.0, 0.4});
  EXPECT_EQ(pb.value, 1.0);
  EXPECT_EQ(pb.gradient, Vec3::Zero());
}

TEST(PredicateBarrier, AvoidThreeFourFive)
{
  const PredicateBarrier pb = predicate_barrier(ball(PredicateKind::Avoid, {3.0, 4.0}, 2.0), {});
  EXPECT_DOUBLE_EQ(pb.value, 3.0);
  EXPECT_DOUBLE_EQ(pb.gradient(0), -0.6);
  EXPECT_DOUBLE_EQ(pb.gradient(1), -0.8);
  EXPECT_EQ(pb.gradient(2), 0.0);
}

TEST(PredicateBarrier, ReachCollinear)
{
  const PredicateBarrier pb = predicate_barrier(ball(PredicateKind::Reach, {2.0, 0.0}, 0.5), {1.0, 0.0, 0.0});
  EXPECT_DOUBLE_EQ(pb.value, -0.5);
  EXPECT_EQ(pb.gradient, Vec3(1.0, 0.0, 0.0));
}

TEST(PredicateBarrier, DynamicCenterComesFromPositions)
{
  stl::Predicate p = ball(PredicateKind::Avoid, {}, 1.0);
  p.dynamic_index = 1;
  const std::vector<Vec2> dyn{{0.0, 0.0}, {4.0, 0.0}};
  EXPECT_DOUBLE_EQ(predicate_barrier(p, {}, dyn).value, 3.0);
}

TEST(Gamma, LinearDecay)
{
  const DecayProfile p{2.0, 0.0, 4.0};
  EXPECT_EQ(gamma(p, 0.0).value, 2.0);
  EXPECT_EQ(gamma(p, 0.0).rate, -0.5);
  EXPECT_EQ(gamma(p, 4.0).value, 0.0);
  EXPECT_EQ(gamma(p, 4.0).rate, 0.0);
  const DecayProfile q{2.0, -1.0, 6.0};
  EXPECT_DOUBLE_EQ(gamma(q, 3.0).value, 0.5);
  EXPECT_DOUBLE_EQ(gamma(q, 3.0).rate, -0.5);
}

TEST(SmoothMin, Examples)
{
  EXPECT_EQ(smooth_min({1.7}).value, 1.7);
  EXPECT_DOUBLE_EQ(smooth_min({0.0, 0.0}).value, -std::log(2.0));
  const double expected = -std::log(std::exp(-1.0) + std::exp(-5.0));
  EXPECT_NEAR(smooth_min({1.0, 5.0}).value, expected, 1e-15);
  EXPECT_NEAR(expected, 0.981850, 1e-6);
  EXPECT_THROW(smooth_min(std::span<const double>{}), std::invalid_argument);
}

TEST(SmoothMin, BoundsAndWeights)
{
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> d(-50.0, 50.0);
  std::uniform_int_distribution<int> len(1, 12);
  for (int n = 0; n < 1000; ++n) {
    std::vector<double> v(static_cast<std::size_t>(len(rng)));
    for (auto & x : v) { x = d(rng); }
    const SmoothMin sm = smooth_min(v);
    const double lo = *std::min_element(v.begin(), v.end());
    EXPECT_LE(sm.value, lo + 1e-12);
    EXPECT_GE(sm.value, lo - std::log(static_cast<double>(v.size())) - 1e-12);
    double sum = 0.0;
    for (double w : sm.weights) { sum += w; }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
  // large magnitudes must not overflow
  EXPECT_NEAR(smooth_min({1000.0, 1000.0}).value, 1000.0 - std::log(2.0), 1e-9);
}

TEST(BuildBarrier, EventuallySizedFromInitialMargin)
{
  stl::NameTable names;
  names.points["g"] = Vec2(3.1, 0.0);
  const Formula f = bound("F[0,10] reach(g, 0.1)", names);
  const RobotState x0{};
  const TimeVaryingBarrier b = build_barrier(f, x0, 0.0);
  ASSERT_EQ(b.phases().size(), 1u);
  const BarrierTask & task = b.phases()[0].tasks.at(0);
  const double margin = predicate_barrier(task.predicates[0], x0).value;
  EXPECT_DOUBLE_EQ(margin, -3.0);
  const double pad = std::log(1.0) + BarrierConfig{}.pad_extra;
  EXPECT_DOUBLE_EQ(task.profile.gamma0, 3.0 + pad);
  EXPECT_EQ(task.profile.settle, 10.0);
  EXPECT_LE(task.profile.gamma_inf, 0.0);
  EXPECT_GT(b.evaluate(x0, 0.0).value, 0.0);
}

TEST(BuildBarrier, SafeAlwaysNeedsNoDecay)
{
  stl::NameTable names;
  names.points["o"] = Vec2(3.0, 0.0);
  const Formula f = bound("G[0,5] avoid(o, 1)", names);
  const TimeVaryingBarrier b = build_barrier(f, {}, 0.0);
  const BarrierTask & task = b.phases()[0].tasks.at(0);
  EXPECT_EQ(task.profile.gamma0, 0.0);
  EXPECT_EQ(task.profile.gamma_inf, 0.0);
  EXPECT_EQ(task.profile.settle, 0.0);
  const RobotState x{0.5, 0.2, 0.0};
  const BarrierEval e = b.evaluate(x, 2.5);
  const PredicateBarrier pb = predicate_barrier(task.predicates[0], x);
  EXPECT_EQ(e.value, pb.value);
  EXPECT_EQ(e.gradient, pb.gradient);
  EXPECT_EQ(e.time_derivative, 0.0);
}

TEST(BuildBarrier, UnsafeAlwaysAtStartIsInfeasible)
{
  stl::NameTable names;
  names.points["o"] = Vec2(0.5, 0.0);
  EXPECT_THROW(build_barrier(bound("G[0,5] avoid(o, 1)", names), {}, 0.0), InfeasibleStartError);
  // a later window leaves room to get clear
  EXPECT_NO_THROW(build_barrier(bound("G[3,5] avoid(o, 1)", names), {}, 0.0));
}

TEST(BuildBarrier, SeqSwitchesPhasesAtDeadlines)
{
  stl::NameTable names;
  names.points["a"] = Vec2(2.0, 0.0);
  names.points["b"] = Vec2(2.0, 2.0);
  const Formula f = bound("seq { F[0,10] reach(a, 0.2); F[10,20] reach(b, 0.2); }", names);
  const TimeVaryingBarrier b = build_barrier(f, {}, 0.0);
  ASSERT_EQ(b.phases().size(), 2u);
  EXPECT_EQ(b.phases()[0].end, 10.0);
  EXPECT_EQ(b.phases()[1].start, 10.0);
  EXPECT_EQ(b.phase_at(9.99), 0u);
  EXPECT_EQ(b.phase_at(10.0), 1u);
  EXPECT_EQ(b.end_time(), 20.0);
  EXPECT_THROW(b.phase_at(20.5), stl::HorizonError);
}

TEST(BuildBarrier, RebaseResizesFromCurrentState)
{
  stl::NameTable names;
  names.points["a"] = Vec2(2.0, 0.0);
  names.points["b"] = Vec2(8.0, 0.0);
  const Formula f = bound("seq { F[0,10] reach(a, 0.2); F[10,20] reach(b, 0.2); }", names);
  const TimeVaryingBarrier b = build_barrier(f, {}, 0.0);
  const RobotState at_a{2.0, 0.0, 0.0};
  const TimeVaryingBarrier r = b.rebased(1, at_a);
  const double pad = BarrierConfig{}.pad_extra;
  EXPECT_DOUBLE_EQ(r.phases()[1].tasks[0].profile.gamma0, 6.0 - 0.2 + pad);
  EXPECT_GT(r.evaluate(at_a, 10.0).value, 0.0);
}

TEST(EvalBarrier, SymmetricPairAveragesGradients)
{
  BarrierPhase ph;
  ph.start = 0.0;
  ph.end = 10.0;
  BarrierTask task;
  task.kind = NodeKind::Always;
  task.window = {0.0, 10.0};
  task.predicates = {ball(PredicateKind::Reach, {1.0, 0.0}, 1.0), ball(PredicateKind::Reach, {0.0, 1.0}, 1.0)};
  task.profile = {0.4, 0.0, 8.0};
  ph.tasks.push_back(task);
  const TimeVaryingBarrier b({ph}, {});
  const BarrierEval e = b.evaluate({}, 2.0);
  const double g = gamma(task.profile, 2.0).value;
  EXPECT_NEAR(e.value, -std::log(2.0) + g, 1e-15);
  EXPECT_NEAR(e.gradient(0), 0.5, 1e-15);
  EXPECT_NEAR(e.gradient(1), 0.5, 1e-15);
  EXPECT_NEAR(e.time_derivative, -0.05, 1e-15);
}

TEST(EvalBarrier, MatchesFiniteDifferences)
{
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> pos(-6.0, 6.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int checked = 0;
  while (checked < 100) {
    const Formula f = gen::fragment_mission(rng);
    const RobotState x0{pos(rng), pos(rng), pos(rng)};
    TimeVaryingBarrier b;
    try {
      b = build_barrier(f, x0, 0.0);
    } catch (const InfeasibleStartError &) {
      continue;
    }
    const double t = b.start_time() + u(rng) * (b.end_time() - b.start_time());
    const RobotState x{pos(rng), pos(rng), pos(rng)};
    const BarrierEval e = b.evaluate(x, t);
    if (e.gradient.norm() < 1e-3) { continue; }
    const Eigen::Vector4d fd = finite_difference(b, x, t);
    if (b.phase_at(t - 1e-6) != b.phase_at(t + 1e-6)) { continue; }
    EXPECT_LE((e.gradient - fd.head<3>()).norm(), 1e-5 * fd.head<3>().norm());
    ++checked;
  }
}
