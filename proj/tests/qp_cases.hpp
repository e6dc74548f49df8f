#pragma once

#include <random>

#include "srn/qp.hpp"

namespace gen {

/// Random strictly convex QP with up to `max_rows` rows, feasible by construction.
inline srn::QpProblem feasible_qp(std::mt19937_64 & rng, int max_rows = 8)
{
  std::normal_distribution<double> d(0.0, 1.0);
  std::uniform_int_distribution<int> rows(0, max_rows);
  std::uniform_int_distribution<int> tight(0, 2);
  std::uniform_real_distribution<double> slack(0.0, 2.0);

  srn::QpProblem p;
  srn::Mat3 m;
  for (int i = 0; i < 9; ++i) { m(i / 3, i % 3) = d(rng); }
  p.cost = m * m.transpose() + 0.1 * srn::Mat3::Identity();
  p.linear = srn::Vec3(d(rng), d(rng), d(rng)) * 3.0;

  const srn::Vec3 inside(d(rng), d(rng), d(rng));
  for (int i = 0, n = rows(rng); i < n; ++i) {
    srn::LinearRow r;
    r.a = srn::Vec3(d(rng), d(rng), d(rng));
    r.b = r.a.dot(inside) - (tight(rng) == 0 ? 0.0 : slack(rng));
    p.rows.push_back(r);
  }
  return p;
}

}  // namespace gen
