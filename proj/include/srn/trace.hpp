#pragma once

#include <cmath>
#include <cstddef>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "srn/format.hpp"
#include "srn/kinematics.hpp"
#include "srn/social_fov.hpp"
#include "srn/stl.hpp"

namespace srn {

enum class QpStatus : int {
  Optimal = 0,
  Infeasible = 1,
  Idle = 2,  ///< no active mission (before detection)
};

struct TraceSample
{
  double t{0.0};
  RobotState robot{};
  Vec2 human_position{Vec2::Zero()};
  Vec2 human_velocity{Vec2::Zero()};
  BodyTwist twist{};
  Vec3 wheels{Vec3::Zero()};
  double barrier{0.0};
  double fov_h1{0.0};
  double fov_h2{0.0};
  double speed{0.0};
  QpStatus status{QpStatus::Idle};
  bool fov_active{false};
  int phase{-1};
  std::vector<Vec2> dynamic_obstacles;
};

/**
 * Uniformly sampled closed-loop log. Sample k sits at t = k * dt. The name
 * table travels with the trace so missions can be monitored without the
 * originating scenario.
 */
struct Trace
{
  double dt{0.02};
  std::size_t dynamic_count{0};
  stl::NameTable names;
  std::vector<TraceSample> samples;

  double time_at(std::size_t k) const { return static_cast<double>(k) * dt; }
  double end_time() const { return samples.empty() ? 0.0 : samples.back().t; }
};

class TraceFormatError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Checks uniform timestamps and consistent per-sample sizes.
inline void validate_trace(const Trace & trace)
{
  if (!(trace.dt > 0.0)) { throw TraceFormatError("trace dt must be positive"); }
  for (std::size_t k = 0; k < trace.samples.size(); ++k) {
    const auto & s = trace.samples[k];
    if (s.t != trace.time_at(k)) {
      throw TraceFormatError("sample " + std::to_string(k) + " has timestamp " + format_double(s.t) +
                             ", expected " + format_double(trace.time_at(k)));
    }
    if (s.dynamic_obstacles.size() != trace.dynamic_count) {
      throw TraceFormatError("sample " + std::to_string(k) + " has wrong dynamic obstacle count");
    }
  }
}

/// Robustness of a bound formula on the trace at time t.
inline double robustness(const stl::Formula & formula, const Trace & trace, double t)
{
  if (trace.samples.empty()) { throw stl::HorizonError("empty trace"); }
  const std::size_t k = stl::time_to_sample(t, trace.dt);
  return stl::robustness_at(formula, k, trace.samples.size(), trace.dt,
                            [&trace](const stl::Predicate & p, std::size_t j) {
                              const auto & s = trace.samples[j];
                              return stl::predicate_margin(p, s.robot.position(), s.dynamic_obstacles);
                            });
}

// ---------------------------------------------------------------------------
// CSV

inline std::vector<std::string> trace_columns(std::size_t dynamic_count)
{
  std::vector<std::string> cols = {"t",        "x",        "y",       "theta",   "human_x", "human_y",
                                   "human_vx", "human_vy", "vx",      "vy",      "omega",   "u1",
                                   "u2",       "u3",       "barrier", "fov_h1",  "fov_h2",  "speed",
                                   "qp_status", "fov_active", "phase"};
  for (std::size_t j = 0; j < dynamic_count; ++j) {
    cols.push_back("dyn" + std::to_string(j) + "_x");
    cols.push_back("dyn" + std::to_string(j) + "_y");
  }
  return cols;
}

inline void write_trace_csv(std::ostream & out, const Trace & trace)
{
  out << "# srn-trace 1\n";
  out << "# dt " << format_double(trace.dt) << "\n";
  out << "# dynamic_count " << trace.dynamic_count << "\n";
  for (const auto & [name, p] : trace.names.points) {
    out << "# point " << name << " " << format_double(p.x()) << " " << format_double(p.y()) << "\n";
  }
  for (const auto & [name, idx] : trace.names.dynamic) { out << "# dynamic " << name << " " << idx << "\n"; }

  const auto cols = trace_columns(trace.dynamic_count);
  for (std::size_t i = 0; i < cols.size(); ++i) { out << (i ? "," : "") << cols[i]; }
  out << "\n";

  for (const auto & s : trace.samples) {
    const double fields[] = {s.t,
                             s.robot.x,
                             s.robot.y,
                             s.robot.theta,
                             s.human_position.x(),
                             s.human_position.y(),
                             s.human_velocity.x(),
                             s.human_velocity.y(),
                             s.twist.vx,
                             s.twist.vy,
                             s.twist.omega,
                             s.wheels(0),
                             s.wheels(1),
                             s.wheels(2),
                             s.barrier,
                             s.fov_h1,
                             s.fov_h2,
                             s.speed};
    bool first = true;
    for (double v : fields) {
      out << (first ? "" : ",") << format_double(v);
      first = false;
    }
    out << "," << static_cast<int>(s.status) << "," << (s.fov_active ? 1 : 0) << "," << s.phase;
    for (const auto & d : s.dynamic_obstacles) { out << "," << format_double(d.x()) << "," << format_double(d.y()); }
    out << "\n";
  }
}

inline std::string trace_to_csv(const Trace & trace)
{
  std::ostringstream os;
  write_trace_csv(os, trace);
  return os.str();
}

namespace detail {

inline std::vector<std::string> split(const std::string & line, char sep)
{
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, sep)) { out.push_back(cur); }
  if (!line.empty() && line.back() == sep) { out.emplace_back(); }
  return out;
}

inline double field(const std::vector<std::string> & row, std::size_t i, std::size_t line_no)
{
  const auto v = parse_double(row[i]);
  if (!v) {
    throw TraceFormatError("line " + std::to_string(line_no) + ": column " + std::to_string(i + 1) + " is not a number");
  }
  return *v;
}

}  // namespace detail

inline Trace read_trace_csv(std::istream & in)
{
  Trace trace;
  bool have_dt = false;
  bool have_header = false;
  std::vector<std::string> expected;
  std::string line;
  std::size_t line_no = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') { line.pop_back(); }
    if (line.empty()) { continue; }
    if (line.front() == '#') {
      std::istringstream meta(line.substr(1));
      std::string key;
      meta >> key;
      if (key == "dt") {
        std::string v;
        meta >> v;
        const auto dt = parse_double(v);
        if (!dt) { throw TraceFormatError("line " + std::to_string(line_no) + ": bad dt"); }
        trace.dt = *dt;
        have_dt = true;
      } else if (key == "dynamic_count") {
        meta >> trace.dynamic_count;
      } else if (key == "point") {
        std::string name, xs, ys;
        meta >> name >> xs >> ys;
        const auto x = parse_double(xs);
        const auto y = parse_double(ys);
        if (!x || !y) { throw TraceFormatError("line " + std::to_string(line_no) + ": bad point"); }
        trace.names.points[name] = Vec2(*x, *y);
      } else if (key == "dynamic") {
        std::string name;
        int idx = -1;
        meta >> name >> idx;
        trace.names.dynamic[name] = idx;
      }
      continue;
    }

    const auto row = detail::split(line, ',');
    if (!have_header) {
      expected = trace_columns(trace.dynamic_count);
      if (row != expected) {
        std::string want;
        for (const auto & c : expected) { want += (want.empty() ? "" : ",") + c; }
        throw TraceFormatError("column mismatch: expected header '" + want + "'");
      }
      have_header = true;
      continue;
    }
    if (row.size() != expected.size()) {
      throw TraceFormatError("line " + std::to_string(line_no) + ": expected " + std::to_string(expected.size()) +
                             " columns, found " + std::to_string(row.size()));
    }
    TraceSample s;
    std::size_t i = 0;
    auto next = [&]() { return detail::field(row, i++, line_no); };
    s.t = next();
    s.robot.x = next();
    s.robot.y = next();
    s.robot.theta = next();
    s.human_position.x() = next();
    s.human_position.y() = next();
    s.human_velocity.x() = next();
    s.human_velocity.y() = next();
    s.twist.vx = next();
    s.twist.vy = next();
    s.twist.omega = next();
    s.wheels(0) = next();
    s.wheels(1) = next();
    s.wheels(2) = next();
    s.barrier = next();
    s.fov_h1 = next();
    s.fov_h2 = next();
    s.speed = next();
    const int status = static_cast<int>(next());
    if (status < 0 || status > 2) { throw TraceFormatError("line " + std::to_string(line_no) + ": bad qp_status"); }
    s.status = static_cast<QpStatus>(status);
    s.fov_active = next() != 0.0;
    s.phase = static_cast<int>(next());
    for (std::size_t j = 0; j < trace.dynamic_count; ++j) {
      const double x = next();
      const double y = next();
      s.dynamic_obstacles.emplace_back(x, y);
    }
    trace.samples.push_back(std::move(s));
  }
  if (!have_dt) { throw TraceFormatError("missing '# dt' metadata line"); }
  if (!have_header) { throw TraceFormatError("missing column header"); }
  validate_trace(trace);
  return trace;
}

inline Trace trace_from_csv(const std::string & text)
{
  std::istringstream is(text);
  return read_trace_csv(is);
}

}  // namespace srn
