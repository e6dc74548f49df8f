#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "srn/barrier.hpp"
#include "srn/controller.hpp"
#include "srn/scenario.hpp"
#include "srn/social_fov.hpp"
#include "srn/stl.hpp"
#include "srn/trace.hpp"

namespace srn {

struct WorstMargin
{
  double value{std::numeric_limits<double>::infinity()};
  double time{0.0};
  std::size_t violations{0};

  void update(double v, double t)
  {
    if (v < value) {
      value = v;
      time = t;
    }
  }
};

struct AvoidMargin
{
  stl::Predicate predicate;
  std::string name;
  double radius{0.0};
  stl::Interval window{};
  WorstMargin worst;
};

struct ReachArrival
{
  stl::Predicate predicate;
  std::string name;
  double radius{0.0};
  stl::Interval window{};
  std::optional<double> arrival;  ///< first sample time in the window with positive margin
};

enum class ViolationFamily { Fov, Velocity, Avoid, Infeasible };

inline const char * to_string(ViolationFamily f)
{
  switch (f) {
    case ViolationFamily::Fov: return "fov";
    case ViolationFamily::Velocity: return "velocity";
    case ViolationFamily::Avoid: return "avoid";
    case ViolationFamily::Infeasible: return "infeasible";
  }
  return "?";
}

struct TimelineEntry
{
  double t;
  ViolationFamily family;
  std::string what;
  double margin;
};

/// Mission robustness plus per-family worst margins and the violation timeline of a trace.
struct TraceCheck
{
  double robustness{0.0};
  WorstMargin fov;       ///< min(h1, h2) over FOV-active samples
  WorstMargin velocity;  ///< v_max - |v| over all samples
  std::vector<AvoidMargin> avoid;
  std::vector<ReachArrival> reach;
  std::size_t infeasible_steps{0};
  std::optional<double> first_infeasible;
  std::vector<TimelineEntry> timeline;

  double min_avoid_margin() const
  {
    double m = std::numeric_limits<double>::infinity();
    for (const auto & a : avoid) { m = std::min(m, a.worst.value); }
    return m;
  }

  /// Constraint breaches that make a run unacceptable regardless of robustness.
  std::size_t hard_violations() const
  {
    std::size_t n = velocity.violations;
    for (const auto & a : avoid) { n += a.worst.violations; }
    return n;
  }
};

namespace detail {

inline void collect_windows(const stl::Formula & f, const stl::Interval & window, TraceCheck & out)
{
  if (f.kind == stl::NodeKind::Predicate) {
    const auto & p = f.predicate;
    if (p.kind == stl::PredicateKind::Avoid) {
      out.avoid.push_back({p, p.name, p.radius, window, {}});
    } else {
      out.reach.push_back({p, p.name, p.radius, window, std::nullopt});
    }
    return;
  }
  const stl::Interval w = f.is_temporal() ? f.interval : window;
  for (const auto & c : f.children) { collect_windows(c, w, out); }
}

}  // namespace detail

/**
 * Monitors a trace: robustness at t = 0 through the STL monitor, worst
 * margins per constraint family and every violating sample.
 */
inline TraceCheck check_trace(const Trace & trace, const stl::Formula & mission, double v_max)
{
  TraceCheck out;
  out.robustness = robustness(mission, trace, 0.0);
  detail::collect_windows(mission, {0.0, 0.0}, out);

  constexpr double speed_tol = 1e-9;
  for (std::size_t k = 0; k < trace.samples.size(); ++k) {
    const TraceSample & s = trace.samples[k];
    if (s.fov_active) {
      const double h = std::min(s.fov_h1, s.fov_h2);
      out.fov.update(h, s.t);
      if (h < 0.0) {
        ++out.fov.violations;
        out.timeline.push_back({s.t, ViolationFamily::Fov, "fov", h});
      }
    }
    const double vm = v_max - s.speed;
    out.velocity.update(vm, s.t);
    if (vm < -speed_tol) {
      ++out.velocity.violations;
      out.timeline.push_back({s.t, ViolationFamily::Velocity, "velocity", vm});
    }
    if (s.status == QpStatus::Infeasible) {
      ++out.infeasible_steps;
      if (!out.first_infeasible) { out.first_infeasible = s.t; }
      out.timeline.push_back({s.t, ViolationFamily::Infeasible, "qp", 0.0});
    }
  }

  auto in_window = [&trace](std::size_t k, const stl::Interval & w) {
    const stl::SampleWindow sw = stl::sample_window(0, w, trace.dt);
    return k >= sw.first && k <= sw.last;
  };
  auto margin_at = [&trace](const stl::Predicate & p, std::size_t k) {
    const TraceSample & s = trace.samples[k];
    return stl::predicate_margin(p, s.robot.position(), s.dynamic_obstacles);
  };
  for (auto & a : out.avoid) {
    for (std::size_t k = 0; k < trace.samples.size(); ++k) {
      if (!in_window(k, a.window)) { continue; }
      const double m = margin_at(a.predicate, k);
      a.worst.update(m, trace.samples[k].t);
      if (m < 0.0) {
        ++a.worst.violations;
        out.timeline.push_back({trace.samples[k].t, ViolationFamily::Avoid, a.name, m});
      }
    }
  }
  for (auto & r : out.reach) {
    for (std::size_t k = 0; k < trace.samples.size() && !r.arrival; ++k) {
      if (in_window(k, r.window) && margin_at(r.predicate, k) > 0.0) { r.arrival = trace.samples[k].t; }
    }
  }
  std::stable_sort(out.timeline.begin(), out.timeline.end(),
                   [](const TimelineEntry & a, const TimelineEntry & b) { return a.t < b.t; });
  return out;
}

struct RunReport
{
  Trace trace;
  TraceCheck check;
  std::uint64_t seed{0};
  std::optional<double> detection_time;
  bool start_infeasible{false};
  double wall_clock{0.0};

  double robustness() const { return check.robustness; }
  bool satisfied() const { return check.robustness > 0.0 && check.hard_violations() == 0; }
};

/**
 * Fixed-step closed loop: obstacles and person advance, the mission is armed
 * on detection, each step solves the QP and integrates the robot with RK4.
 * Bit-deterministic for a given scenario and seed.
 */
inline RunReport run(const Scenario & sc)
{
  const auto wall_start = std::chrono::steady_clock::now();
  RunReport report;
  report.seed = sc.seed;

  Trace & trace = report.trace;
  trace.dt = sc.dt;
  trace.dynamic_count = sc.dynamic_obstacles.size();
  trace.names = sc.names;

  std::mt19937_64 rng(sc.seed);
  const auto steps = static_cast<std::size_t>(std::llround(sc.horizon / sc.dt));
  trace.samples.reserve(steps + 1);

  RobotState robot = sc.start;
  HumanState human{sc.human.reference_at(0.0).position, Vec2::Zero(), sc.human.sigma};

  std::optional<TimeVaryingBarrier> barrier;
  std::size_t sized_phase = 0;

  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * sc.dt;
    const std::vector<Vec2> dyn = sc.dynamic_positions(t);

    const HumanState human_next =
      step_human(human, sc.human.reference_at(t), sc.dt, rng, sc.human.tracking_gain);
    human.velocity = human_next.velocity;

    if (!barrier && !report.start_infeasible) {
      const bool by_time = t + 1e-9 >= sc.detection_time;
      const bool by_range = sc.detection_radius > 0.0 && (human.position - robot.position()).norm() <= sc.detection_radius;
      if (by_time || by_range) {
        report.detection_time = t;
        try {
          barrier = build_barrier(sc.mission, robot, t, sc.barrier, dyn);
          sized_phase = 0;
        } catch (const InfeasibleStartError &) {
          report.start_infeasible = true;
        }
      }
    }

    TraceSample s;
    s.t = t;
    s.robot = robot;
    s.human_position = human.position;
    s.human_velocity = human.velocity;
    s.dynamic_obstacles = dyn;

    if (barrier) {
      const double t_eval = std::min(t, barrier->end_time());
      const std::size_t phase = barrier->phase_at(t_eval);
      if (phase != sized_phase) {
        barrier = barrier->rebased(phase, robot, dyn);
        sized_phase = phase;
      }
      ControlInput in;
      in.robot = robot;
      in.t = t_eval;
      in.barrier = &*barrier;
      in.human = human;
      in.dynamic_obstacles = dyn;
      in.fov_active = sc.fov_active_in_leg(phase);

      const ControlOutput out = control_step(in, sc.model, sc.controller, sc.fov);
      s.phase = static_cast<int>(phase);
      s.fov_active = in.fov_active;
      s.barrier = out.barrier.value;
      s.status = out.feasible ? QpStatus::Optimal : QpStatus::Infeasible;
      s.wheels = out.wheels;
      s.twist = out.twist;
    } else if (report.start_infeasible) {
      s.status = QpStatus::Infeasible;
    }

    const Vec2 h = fov_values(robot, human, sc.fov);
    s.fov_h1 = h(0);
    s.fov_h2 = h(1);
    s.speed = s.twist.linear_speed();
    trace.samples.push_back(std::move(s));

    if (k < steps) {
      robot = integrate(robot, trace.samples.back().twist, sc.dt);
      human = human_next;
    }
  }

  report.check = check_trace(trace, sc.mission, sc.controller.v_max);
  report.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return report;
}

}  // namespace srn
