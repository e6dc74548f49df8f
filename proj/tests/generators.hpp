#pragma once

// Random formulas and signals for the property tests.

#include <random>
#include <string>
#include <vector>

#include "srn/stl.hpp"

namespace gen {

using srn::stl::Formula;
using srn::stl::Interval;
using srn::stl::NodeKind;
using srn::stl::PredicateKind;

/// Interval endpoints on a half-second grid.
inline Interval interval(std::mt19937_64 & rng, int max_halves = 8)
{
  std::uniform_int_distribution<int> d(0, max_halves);
  int a = d(rng);
  int b = d(rng);
  if (a > b) { std::swap(a, b); }
  return {0.5 * a, 0.5 * b};
}

inline Formula predicate(std::mt19937_64 & rng)
{
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> r(1, 40);
  return Formula::make_predicate(coin(rng) ? PredicateKind::Reach : PredicateKind::Avoid, "p", 0.05 * r(rng));
}

/// Any formula of the given depth budget; nested temporal operators allowed.
inline Formula formula(std::mt19937_64 & rng, int depth)
{
  std::uniform_int_distribution<int> pick(0, 3);
  const int c = depth <= 0 ? 0 : pick(rng);
  if (c == 0) { return predicate(rng); }
  if (c == 1 || c == 2) {
    return Formula::make_temporal(c == 1 ? NodeKind::Eventually : NodeKind::Always, interval(rng), formula(rng, depth - 1));
  }
  std::uniform_int_distribution<int> width(2, 3);
  std::vector<Formula> kids;
  const int n = width(rng);
  for (int i = 0; i < n; ++i) {
    Formula k = formula(rng, depth - 1);
    // the parser flattens nested conjunctions, so keep them out
    while (k.kind == NodeKind::And) { k = formula(rng, depth - 1); }
    kids.push_back(std::move(k));
  }
  return Formula::make_list(NodeKind::And, std::move(kids));
}

/// Names predicates p0, p1, ... in traversal order; returns the count.
inline std::size_t number_predicates(Formula & f, std::size_t next = 0)
{
  if (f.kind == NodeKind::Predicate) {
    f.predicate.name = "p" + std::to_string(next);
    return next + 1;
  }
  for (auto & c : f.children) { next = number_predicates(c, next); }
  return next;
}

/// One margin sequence per predicate, with repeated values to exercise ties.
inline std::vector<std::vector<double>> margins(std::mt19937_64 & rng, std::size_t predicates, std::size_t samples)
{
  std::normal_distribution<double> d(0.0, 1.0);
  std::uniform_int_distribution<int> tie(0, 9);
  std::vector<std::vector<double>> out(predicates, std::vector<double>(samples));
  for (auto & row : out) {
    for (std::size_t k = 0; k < samples; ++k) { row[k] = (k > 0 && tie(rng) == 0) ? row[k - 1] : d(rng); }
  }
  return out;
}

/// Bound predicate with a center in [-5, 5]^2.
inline Formula located_predicate(std::mt19937_64 & rng, PredicateKind kind)
{
  std::uniform_real_distribution<double> c(-5.0, 5.0);
  std::uniform_real_distribution<double> r(0.2, 1.5);
  Formula f = Formula::make_predicate(kind, "p", r(rng));
  f.predicate.center = srn::Vec2(c(rng), c(rng));
  f.predicate.bound = true;
  return f;
}

/// Mission inside the compilable fragment: a seq of 1-3 tasks with ordered windows.
inline Formula fragment_mission(std::mt19937_64 & rng)
{
  std::uniform_int_distribution<int> legs(1, 3);
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> width(1, 2);
  std::uniform_real_distribution<double> span(4.0, 10.0);
  std::vector<Formula> tasks;
  double t = 0.0;
  const int n = legs(rng);
  for (int i = 0; i < n; ++i) {
    const double end = t + span(rng);
    std::vector<Formula> parts;
    std::vector<Formula> goal;
    for (int j = 0, w = width(rng); j < w; ++j) { goal.push_back(located_predicate(rng, PredicateKind::Reach)); }
    parts.push_back(Formula::make_temporal(NodeKind::Eventually, {t, end},
                                           goal.size() == 1 ? goal[0] : Formula::make_list(NodeKind::And, goal)));
    if (coin(rng)) {
      parts.push_back(Formula::make_temporal(NodeKind::Always, {t, end}, located_predicate(rng, PredicateKind::Avoid)));
    }
    tasks.push_back(parts.size() == 1 ? parts[0] : Formula::make_list(NodeKind::And, parts));
    t = end;
  }
  return tasks.size() == 1 ? tasks[0] : Formula::make_list(NodeKind::Seq, tasks);
}

}  // namespace gen
