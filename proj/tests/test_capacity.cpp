#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "treeglass/capacity.hpp"

using namespace treeglass;

namespace {

// Random rooted tree: vertex v > 0 hangs below a uniform earlier vertex.
ResistorTree random_tree(std::size_t n, Rng& rng, std::vector<VertexId>& parent, std::vector<double>& r) {
  parent.assign(n, kNoVertex);
  r.assign(n, 1.0);
  for (std::size_t v = 1; v < n; ++v) {
    parent[v] = static_cast<VertexId>(rng.below(v));
    r[v] = 0.05 + 3.0 * rng.uniform();
  }
  return ResistorTree(parent, r);
}

}  // namespace

TEST(Resistance, MatchesKirchhoffSolve) {
  Rng rng(31);
  for (int t = 0; t < 25; ++t) {
    std::vector<VertexId> parent;
    std::vector<double> r;
    const ResistorTree rt = random_tree(3 + rng.below(40), rng, parent, r);
    const double ref = oracle::kirchhoff_resistance(parent, r);
    EXPECT_NEAR(effective_resistance(rt), ref, 1e-10 * ref);
    EXPECT_NEAR(capacity(rt), 1.0 / ref, 1e-10 / ref);
    EXPECT_NEAR(log_effective_resistance(rt), std::log(ref), 1e-10);
  }
}

TEST(Resistance, SeriesAndParallel) {
  // root - a - {l1, l2}: 1 + (2 * 3) / 5
  const ResistorTree rt({kNoVertex, 0, 1, 1}, {0.0 + 1.0, 1.0, 2.0, 3.0});
  EXPECT_NEAR(effective_resistance(rt), 1.0 + 6.0 / 5.0, 1e-15);
  EXPECT_THROW(ResistorTree({kNoVertex, 0}, {1.0, -1.0}), std::invalid_argument);
  EXPECT_THROW(ResistorTree({kNoVertex, kNoVertex}, {1.0, 1.0}), std::invalid_argument);
}

TEST(Resistance, LogDomainFallback) {
  // a path of two edges with resistances e^700 and e^701
  const ResistorTree rt = ResistorTree::from_log({kNoVertex, 0, 1}, {0.0, 700.0, 701.0});
  EXPECT_NEAR(log_effective_resistance(rt), 701.0 + std::log1p(std::exp(-1.0)), 1e-12);
  EXPECT_TRUE(std::isinf(effective_resistance(rt)) || effective_resistance(rt) > 1e300);
  // two parallel leaves at e^-800 each
  const ResistorTree par = ResistorTree::from_log({kNoVertex, 0, 0}, {0.0, -800.0, -800.0});
  EXPECT_NEAR(log_effective_resistance(par), -800.0 - std::log(2.0), 1e-12);
}

TEST(LevelResistances, CriticalCapacityIsInverseDepth) {
  for (int b : {2, 3}) {
    const double theta = 1.0 / std::sqrt(static_cast<double>(b));
    for (int m = 1; m <= 6; ++m) {
      const TreeShape s(b, m);
      const ResistorTree rt = paper_resistances(s, theta);
      EXPECT_NEAR(capacity(rt), 1.0 / m, 1e-12);
      EXPECT_NEAR(nash_williams_bound(rt, level_cutsets(rt)), static_cast<double>(m), 1e-10);
      EXPECT_NEAR(rt.resistance(s.level_begin(m)), std::pow(theta, -2 * m), 1e-9);
    }
  }
  EXPECT_THROW(paper_resistances(TreeShape(2, 2), 1.0), std::invalid_argument);
  EXPECT_THROW(paper_resistances(TreeShape(2, 2), 0.5, 3), std::invalid_argument);
}

TEST(NashWilliams, LowerBoundAndValidation) {
  Rng rng(4);
  const TreeShape s(2, 4);
  std::vector<VertexId> parent(s.size());
  std::vector<double> r(s.size());
  for (VertexId v = 0; v < static_cast<VertexId>(s.size()); ++v) {
    parent[static_cast<std::size_t>(v)] = s.parent(v);
    r[static_cast<std::size_t>(v)] = 0.2 + rng.uniform();
  }
  const ResistorTree rt(parent, r);
  const double reff = effective_resistance(rt);
  EXPECT_LE(nash_williams_bound(rt, level_cutsets(rt)), reff + 1e-12);
  EXPECT_LE(nash_williams_bound(rt, {{1, 2}, {7, 8, 9, 10, 5, 6}}), reff + 1e-12);
  EXPECT_THROW(nash_williams_bound(rt, {{1}}), std::invalid_argument);          // does not separate
  EXPECT_THROW(nash_williams_bound(rt, {{1, 2}, {1, 2}}), std::invalid_argument);  // overlapping
}

TEST(Flows, UnitCurrent) {
  Rng rng(9);
  std::vector<VertexId> parent;
  std::vector<double> r;
  const ResistorTree rt = random_tree(30, rng, parent, r);
  const auto f = unit_current_flow(rt);
  const FlowReport rep = validate_flow(rt, f);
  EXPECT_TRUE(rep.feasible);
  EXPECT_NEAR(rep.strength, 1.0, 1e-12);
  // the current has the same potential R_eff at every leaf
  EXPECT_NEAR(rep.voltage, effective_resistance(rt), 1e-10);
  std::vector<double> bad = f;
  for (VertexId v : rt.leaves()) {
    if (rt.parent(v) != rt.root()) {
      bad[static_cast<std::size_t>(v)] += 0.5;  // breaks conservation at its parent
      break;
    }
  }
  EXPECT_FALSE(validate_flow(rt, bad).feasible);
  // rescaled to unit voltage it attains cap2 = 1 / R_eff
  std::vector<double> g = f;
  for (auto& x : g) x /= rep.voltage;
  const FlowReport rg = validate_flow(rt, g);
  EXPECT_TRUE(rg.within_capacity);
  EXPECT_NEAR(rg.strength, capacity(rt), 1e-10);
}
