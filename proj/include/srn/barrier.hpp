#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "srn/kinematics.hpp"
#include "srn/stl.hpp"

namespace srn {

struct PredicateBarrier
{
  double value{0.0};
  Vec3 gradient{Vec3::Zero()};
};

/// Distances below this are treated as the ball center; the gradient is zero there.
inline constexpr double kCenterRegularization = 1e-9;

/// Predicate margin and its gradient w.r.t. (x, y, theta).
inline PredicateBarrier predicate_barrier(const stl::Predicate & pred, const RobotState & x,
                                          std::span<const Vec2> dynamic_positions = {})
{
  const Vec2 center = pred.is_dynamic() ? dynamic_positions[static_cast<std::size_t>(pred.dynamic_index)] : pred.center;
  const Vec2 diff = x.position() - center;
  const double dist = diff.norm();
  const double sign = pred.kind == stl::PredicateKind::Reach ? -1.0 : 1.0;

  PredicateBarrier out;
  out.value = pred.kind == stl::PredicateKind::Reach ? pred.radius - dist : dist - pred.radius;
  if (dist >= kCenterRegularization) { out.gradient.head<2>() = sign * diff / dist; }
  return out;
}

/// Piecewise-linear offset: gamma0 -> gamma_inf over [0, settle], constant after.
struct DecayProfile
{
  double gamma0{0.0};
  double gamma_inf{0.0};
  double settle{0.0};

  static DecayProfile constant(double value) { return {value, value, 0.0}; }
};

struct GammaValue
{
  double value;
  double rate;
};

/// gamma(t) and its right derivative; t is measured from the owning phase's start.
inline GammaValue gamma(const DecayProfile & p, double t)
{
  if (t < p.settle) {
    const double slope = (p.gamma_inf - p.gamma0) / p.settle;
    return {p.gamma0 + slope * t, slope};
  }
  return {p.gamma_inf, 0.0};
}

struct SmoothMin
{
  double value;
  std::vector<double> weights;
};

/// -ln(sum exp(-b_i)) evaluated with a min shift; weights are the softmin coefficients.
inline SmoothMin smooth_min(std::span<const double> values)
{
  if (values.empty()) { throw std::invalid_argument("smooth_min: empty list"); }
  const double lo = *std::min_element(values.begin(), values.end());
  SmoothMin out{0.0, std::vector<double>(values.size())};
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out.weights[i] = std::exp(-(values[i] - lo));
    sum += out.weights[i];
  }
  for (auto & w : out.weights) { w /= sum; }
  out.value = lo - std::log(sum);
  return out;
}

inline SmoothMin smooth_min(std::initializer_list<double> values)
{
  return smooth_min(std::span<const double>(values.begin(), values.size()));
}

struct BarrierConfig
{
  /// Added to ln(n) to size gamma0 above the softmin gap.
  double pad_extra{0.1};
  /// Final offset of eventually-profiles (<= 0); the task margin at the settle time exceeds -gamma_inf.
  double gamma_inf{-0.05};
  /// Upper bound on any gamma0.
  double gamma_cap{50.0};
  /// Settle time of F[a,b] placed at a + fraction * (b - a).
  double settle_fraction{1.0};

  void validate() const
  {
    if (!(gamma_inf <= 0.0)) { throw std::invalid_argument("BarrierConfig: gamma_inf must be <= 0"); }
    if (!(gamma_cap > 0.0)) { throw std::invalid_argument("BarrierConfig: gamma_cap must be positive"); }
    if (!(settle_fraction > 0.0 && settle_fraction <= 1.0)) {
      throw std::invalid_argument("BarrierConfig: settle_fraction must lie in (0, 1]");
    }
    if (!(pad_extra > 0.0)) { throw std::invalid_argument("BarrierConfig: pad_extra must be positive"); }
  }
};

class InfeasibleStartError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// One temporal operator (or an untimed conjunction) inside a phase.
struct BarrierTask
{
  stl::NodeKind kind{stl::NodeKind::Eventually};  ///< Eventually, Always, or Predicate for untimed
  stl::Interval window{};                         ///< absolute times
  std::vector<stl::Predicate> predicates;
  DecayProfile profile{};
};

struct BarrierPhase
{
  double start{0.0};
  double end{0.0};
  std::vector<BarrierTask> tasks;

  std::size_t term_count() const
  {
    std::size_t n = 0;
    for (const auto & t : tasks) { n += t.predicates.size(); }
    return n;
  }
};

struct BarrierEval
{
  double value{0.0};
  Vec3 gradient{Vec3::Zero()};
  double time_derivative{0.0};
  std::size_t phase{0};
};

namespace detail {

inline void collect_predicates(const stl::Formula & f, std::vector<stl::Predicate> & out)
{
  stl::for_each_predicate(f, [&out](const stl::Predicate & p) { out.push_back(p); });
}

inline void collect_tasks(const stl::Formula & f, double phase_start, std::vector<BarrierTask> & out)
{
  using stl::NodeKind;
  if (f.kind == NodeKind::And) {
    std::vector<stl::Predicate> untimed;
    for (const auto & c : f.children) {
      if (c.kind == NodeKind::Predicate) {
        untimed.push_back(c.predicate);
      } else {
        collect_tasks(c, phase_start, out);
      }
    }
    if (!untimed.empty()) {
      out.push_back({NodeKind::Predicate, {phase_start, phase_start}, std::move(untimed), {}});
    }
    return;
  }
  if (f.kind == NodeKind::Predicate) {
    out.push_back({NodeKind::Predicate, {phase_start, phase_start}, {f.predicate}, {}});
    return;
  }
  if (f.is_temporal()) {
    BarrierTask task;
    task.kind = f.kind;
    task.window = f.interval;
    collect_predicates(f.children.front(), task.predicates);
    out.push_back(std::move(task));
    return;
  }
  throw std::invalid_argument("build_barrier: formula outside the supported fragment");
}

}  // namespace detail

/**
 * Time-varying barrier b(x, t) compiled from a mission.
 *
 * Each phase is the softmin over its predicate barriers shifted by their
 * task's decay offset: b = -ln sum_j exp(-(h_j(x) + gamma_task(j)(t - start))).
 * Phases tile [start of first, deadline of last] and switch at seq deadlines.
 */
class TimeVaryingBarrier
{
public:
  TimeVaryingBarrier() = default;
  TimeVaryingBarrier(std::vector<BarrierPhase> phases, BarrierConfig config)
      : phases_(std::move(phases)), config_(config)
  {}

  const std::vector<BarrierPhase> & phases() const { return phases_; }
  const BarrierConfig & config() const { return config_; }
  double start_time() const { return phases_.front().start; }
  double end_time() const { return phases_.back().end; }

  /// Index of the phase active at t; boundaries belong to the later phase.
  std::size_t phase_at(double t) const
  {
    constexpr double eps = 1e-9;
    if (phases_.empty() || t < start_time() - eps || t > end_time() + eps) {
      throw stl::HorizonError("barrier evaluated at t=" + format_double(t) + " outside [" + format_double(start_time()) +
                              ", " + format_double(end_time()) + "]");
    }
    std::size_t idx = 0;
    for (std::size_t i = 0; i < phases_.size(); ++i) {
      if (phases_[i].start <= t + eps) { idx = i; }
    }
    return idx;
  }

  BarrierEval evaluate(const RobotState & x, double t, std::span<const Vec2> dynamic_positions = {}) const
  {
    BarrierEval out;
    out.phase = phase_at(t);
    const BarrierPhase & ph = phases_[out.phase];
    const double local = std::max(0.0, t - ph.start);

    std::vector<double> values;
    std::vector<Vec3> grads;
    std::vector<double> rates;
    for (const auto & task : ph.tasks) {
      const GammaValue g = gamma(task.profile, local);
      for (const auto & p : task.predicates) {
        const PredicateBarrier pb = predicate_barrier(p, x, dynamic_positions);
        values.push_back(pb.value + g.value);
        grads.push_back(pb.gradient);
        rates.push_back(g.rate);
      }
    }
    const SmoothMin sm = smooth_min(values);
    out.value = sm.value;
    for (std::size_t i = 0; i < values.size(); ++i) {
      out.gradient += sm.weights[i] * grads[i];
      out.time_derivative += sm.weights[i] * rates[i];
    }
    return out;
  }

  /// Copy with the given phase's decay profiles re-sized from the state at its start; gamma0 is clamped to the cap.
  TimeVaryingBarrier rebased(std::size_t phase, const RobotState & x, std::span<const Vec2> dynamic_positions = {}) const
  {
    TimeVaryingBarrier copy = *this;
    size_phase(copy.phases_.at(phase), x, dynamic_positions, config_, false);
    return copy;
  }

  /// Sizes every task in a phase so that b(x, start) > 0; throws when strict and the cap or window forbids it.
  static void size_phase(BarrierPhase & ph, const RobotState & x, std::span<const Vec2> dynamic_positions,
                         const BarrierConfig & cfg, bool strict)
  {
    const double pad = std::log(static_cast<double>(std::max<std::size_t>(ph.term_count(), 1))) + cfg.pad_extra;
    for (auto & task : ph.tasks) {
      double margin = std::numeric_limits<double>::infinity();
      for (const auto & p : task.predicates) {
        margin = std::min(margin, predicate_barrier(p, x, dynamic_positions).value);
      }

      if (task.kind == stl::NodeKind::Eventually) {
        const double settle_abs = task.window.lower + cfg.settle_fraction * (task.window.upper - task.window.lower);
        const double settle = settle_abs - ph.start;
        double g0 = std::max(0.0, -margin) + pad;
        if (g0 > cfg.gamma_cap) {
          if (strict) {
            throw InfeasibleStartError("initial margin " + format_double(margin) + " needs gamma0=" + format_double(g0) +
                                       " above cap " + format_double(cfg.gamma_cap));
          }
          g0 = cfg.gamma_cap;
        }
        if (settle <= 0.0) {
          if (strict) { throw InfeasibleStartError("eventually deadline lies before the phase start"); }
          task.profile = DecayProfile::constant(cfg.gamma_inf);
        } else {
          task.profile = {g0, std::min(cfg.gamma_inf, g0), settle};
        }
        continue;
      }

      // Always and untimed conjunctions
      if (margin > pad) {
        task.profile = DecayProfile::constant(0.0);
        continue;
      }
      const double settle = task.window.lower - ph.start;
      double g0 = pad - margin;
      if (settle <= 0.0 || g0 > cfg.gamma_cap) {
        if (strict) {
          throw InfeasibleStartError("invariance task starts with margin " + format_double(margin) +
                                     " (needs > " + format_double(pad) + ")");
        }
        g0 = std::min(g0, cfg.gamma_cap);
        task.profile = settle <= 0.0 ? DecayProfile::constant(0.0) : DecayProfile{g0, 0.0, settle};
        continue;
      }
      task.profile = {g0, 0.0, settle};
    }
  }

private:
  std::vector<BarrierPhase> phases_;
  BarrierConfig config_;
};

/**
 * Compiles a bound, fragment-valid mission into a barrier starting at t0.
 * The first phase is sized from x0 (strict); later phases get a provisional
 * sizing from x0 and are meant to be rebased at their switch time.
 */
inline TimeVaryingBarrier build_barrier(const stl::Formula & formula, const RobotState & x0, double t0,
                                        const BarrierConfig & config = {},
                                        std::span<const Vec2> dynamic_positions = {})
{
  config.validate();
  if (const auto v = stl::validate_fragment(formula); !v.empty()) { throw stl::FragmentError(v); }

  std::vector<const stl::Formula *> tasks;
  if (formula.kind == stl::NodeKind::Seq) {
    for (const auto & c : formula.children) { tasks.push_back(&c); }
  } else {
    tasks.push_back(&formula);
  }

  std::vector<BarrierPhase> phases;
  double start = t0;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto [task_start, deadline] = stl::task_window(*tasks[i]);
    (void)task_start;
    BarrierPhase ph;
    ph.start = start;
    ph.end = std::max(deadline, start);
    detail::collect_tasks(*tasks[i], start, ph.tasks);
    TimeVaryingBarrier::size_phase(ph, x0, dynamic_positions, config, i == 0);
    start = ph.end;
    phases.push_back(std::move(ph));
  }
  return TimeVaryingBarrier(std::move(phases), config);
}

inline BarrierEval eval_barrier(const TimeVaryingBarrier & b, const RobotState & x, double t,
                                std::span<const Vec2> dynamic_positions = {})
{
  return b.evaluate(x, t, dynamic_positions);
}

}  // namespace srn
