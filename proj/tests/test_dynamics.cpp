#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "treeglass/dynamics.hpp"
#include "treeglass/gibbs.hpp"

using namespace treeglass;

TEST(HeatBath, ProbabilityFormula) {
  const TreeShape s(2, 2);
  const auto params = IsingParams::critical(2);
  SpinConfig c(s.size(), 1);
  c.set(3, -1);
  // vertex 1 sees parent 0 (+), children 3 (-), 4 (+)
  EXPECT_NEAR(heat_bath_prob(s.forest(), c, 1, params), 0.5 * (1 + std::tanh(params.beta)), 1e-15);
  EXPECT_NEAR(heat_bath_prob(s.forest(), c, 1, params, 0.3), 0.5 * (1 + std::tanh(params.beta + 0.3)), 1e-15);
  Pinning pin = BoundaryCondition::all_plus().resolve(s);
  EXPECT_THROW(heat_bath_step(c, s.forest(), 3, pin, params, 0.5), std::invalid_argument);
}

TEST(HeatBath, MonotoneUnderSharedUniform) {
  const TreeShape s(3, 2);
  const auto params = IsingParams::critical(3);
  const Pinning pin(s.size(), 0);
  Rng rng(4);
  SpinConfig lo(s.size(), -1), hi(s.size(), 1);
  for (int t = 0; t < 2000; ++t) {
    const auto v = static_cast<VertexId>(rng.below(s.size()));
    const double u = rng.uniform();
    heat_bath_step(lo, s.forest(), v, pin, params, u);
    heat_bath_step(hi, s.forest(), v, pin, params, u);
    ASSERT_TRUE(lo.below(hi));
  }
}

TEST(BlockLaw, MatchesConditionalEnumeration) {
  const TreeShape s(2, 3);
  const auto params = IsingParams::from_beta(0.6);
  const Pinning pin = BoundaryCondition::arbitrary({1, -1, -1, 1, 1, 1, -1, 1}).resolve(s);
  Rng rng(2);
  SpinConfig cfg(s.size(), 1);
  for (VertexId v = 0; v < 7; ++v) cfg.set(v, rng.below(2) ? 1 : -1);
  cfg.pin(pin);
  const std::vector<VertexId> verts{1, 3, 4};
  const PreparedBlock blk = prepare_block(s.forest(), verts, pin);
  const auto law = block_law(cfg, blk, params);
  // oracle: full Gibbs restricted to configurations agreeing with cfg off the block
  const auto w = oracle::full_gibbs(s, params.beta, pin);
  std::vector<double> m(law.size(), 0.0);
  double z = 0.0;
  for (std::uint64_t x = 0; x < w.size(); ++x) {
    if (w[x] == 0) continue;
    bool agree = true;
    for (VertexId v = 0; v < static_cast<VertexId>(s.size()) && agree; ++v) {
      if (v == 1 || v == 3 || v == 4) continue;
      agree = oracle::bit_spin(x, v) == cfg.spin(v);
    }
    if (!agree) continue;
    std::uint64_t k = 0;
    for (std::size_t i = 0; i < blk.order.size(); ++i) {
      if ((x >> blk.order[i]) & 1U) k |= std::uint64_t{1} << i;
    }
    m[k] += w[x];
    z += w[x];
  }
  for (std::size_t k = 0; k < m.size(); ++k) EXPECT_NEAR(law[k], m[k] / z, 1e-12);
}

TEST(BlockUpdate, EmpiricalLawAndMonotonicity) {
  const TreeShape s(2, 2);
  const auto params = IsingParams::critical(2);
  const Pinning pin(s.size(), 0);
  const std::vector<VertexId> verts{0, 1, 3};
  const PreparedBlock blk = prepare_block(s.forest(), verts, pin);
  SpinConfig base(s.size(), 1);
  base.set(4, -1);
  const auto law = block_law(base, blk, params);
  Rng rng(6);
  const int draws = 40000;
  std::vector<double> freq(law.size(), 0.0);
  for (int i = 0; i < draws; ++i) {
    SpinConfig c = base;
    block_update(c, blk, params, rng);
    std::uint64_t k = 0;
    for (std::size_t j = 0; j < blk.order.size(); ++j) {
      if (c.spin(blk.order[j]) == 1) k |= std::uint64_t{1} << j;
    }
    freq[k] += 1.0 / draws;
  }
  for (std::size_t k = 0; k < law.size(); ++k) {
    EXPECT_NEAR(freq[k], law[k], 4.0 * std::sqrt(law[k] * (1 - law[k]) / draws) + 1e-4);
  }
  for (int t = 0; t < 500; ++t) {
    SpinConfig lo(s.size(), -1), hi(s.size(), 1);
    for (VertexId v : {2, 4, 5, 6}) {
      const int sp = rng.below(2) ? 1 : -1;
      lo.set(v, sp);
      hi.set(v, sp);
    }
    lo.set(4, -1);
    std::vector<double> u(s.size());
    for (auto& x : u) x = rng.uniform();
    block_update(lo, blk, params, u);
    block_update(hi, blk, params, u);
    ASSERT_TRUE(lo.below(hi));
  }
}

TEST(BlockCover, Structure) {
  const TreeShape s(2, 4);
  const BlockCover c = paper_block_cover(s, 1, 3);
  ASSERT_EQ(c.blocks.size(), 3u);
  EXPECT_EQ(c.blocks[0].size(), 7u);   // root block: three levels
  EXPECT_EQ(c.blocks[1].size(), 7u);
  const auto cov = c.coverage(s.size());
  EXPECT_EQ(cov[0], 1);
  EXPECT_EQ(cov[1], 2);  // level ell..r-1 is covered twice
  EXPECT_EQ(cov[15], 0);  // leaves are left to the boundary
  EXPECT_EQ(c.multiplicity(s.size()), 2);
  EXPECT_THROW(paper_block_cover(s, 0, 2), std::invalid_argument);
  const BlockCover a = paper_block_cover(TreeShape(2, 6), 0.34);
  EXPECT_EQ(a.ell, 2);
  EXPECT_EQ(a.r, 4);
}

TEST(Speedup, SpecStructure) {
  const TreeShape s(2, 3);
  const SpeedupSpec sp = make_speedup_spec(s, 1, 2);
  ASSERT_EQ(sp.top.size(), 2u);
  EXPECT_EQ(sp.w[0], 3);  // leftmost grandchild of vertex 1 sits on level 2
  EXPECT_EQ(sp.w[1], 5);
  // B_v = (T_v \ T_{w_v}) + w_v
  EXPECT_EQ(sp.blocks[0].size(), s.subtree(1).size() - s.subtree(3).size() + 1);
  EXPECT_TRUE(sp.in_w[3]);
  EXPECT_TRUE(sp.in_g[7]);
  EXPECT_FALSE(sp.in_g[4]);
  EXPECT_TRUE(sp.in_f[1]);
  EXPECT_EQ(sp.block_of[3], 0);
  EXPECT_EQ(sp.block_of[4], -1);
  EXPECT_THROW(make_speedup_spec(s, 2, 2), std::invalid_argument);
}

TEST(ExactPushForward, GibbsIsStationary) {
  const TreeShape s(2, 2);
  const auto params = IsingParams::critical(2);
  const StateSpace space(s, BoundaryCondition::arbitrary({1, -1, 1, 1}));
  const GibbsTable g = exact_gibbs(space, params);
  DistVector d = g.prob;
  for (VertexId v : space.free_vertices()) apply_site_update(d, space, v, params);
  const PreparedBlock blk = prepare_block(space.forest(), std::vector<VertexId>{0, 1, 2}, space.pinning());
  apply_block_update(d, space, blk, params);
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_NEAR(d[i], g.prob[i], 1e-13);
}

TEST(CensoredRun, IdenticalAndGuard) {
  const TreeShape s(2, 1);
  const auto params = IsingParams::critical(2);
  const StateSpace space(s, BoundaryCondition::free());
  SpinConfig top(s.size(), 1);
  Schedule sched{{0, 1, 2, 0, 1}};
  const auto a = censored_run(space, top, sched, {}, params);
  const auto b = censored_run(space, top, sched, std::vector<bool>(5, false), params);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
  EXPECT_THROW(censored_run(space, SpinConfig(s.size(), -1), sched, {}, params), std::invalid_argument);
  const auto all = censored_run(space, top, sched, std::vector<bool>(5, true), params);
  EXPECT_EQ(all.back(), 1.0);
}

TEST(GrandCoupling, PreservesOrder) {
  const TreeShape s(2, 3);
  const auto params = IsingParams::critical(2);
  const Pinning pin = BoundaryCondition::all_plus().resolve(s);
  std::vector<SpinConfig> cs{SpinConfig(s.size(), -1), SpinConfig(s.size(), 1)};
  for (auto& c : cs) c.pin(pin);
  Rng rng(1);
  for (int t = 0; t < 3000; ++t) {
    grand_coupling_step(cs, s.forest(), pin, params, rng);
    ASSERT_TRUE(cs[0].below(cs[1]));
  }
}

TEST(Runners, SingleSiteReachesGibbsMarginal) {
  const TreeShape s(2, 1);
  const auto params = IsingParams::critical(2);
  const Pinning pin(s.size(), 0);
  Rng rng(10);
  const int reps = 20000;
  double corr = 0.0;
  for (int i = 0; i < reps; ++i) {
    SpinConfig c(s.size(), 1);
    run_continuous(c, s.forest(), pin, params, rng, 30.0);
    corr += c.spin(0) * c.spin(1);
  }
  EXPECT_NEAR(corr / reps, params.theta, 4.0 / std::sqrt(reps));
}

TEST(Speedup, CouplingTimeIsPositive) {
  const TreeShape s(2, 3);
  const SpeedupSpec sp = make_speedup_spec(s, 1, 2);
  Rng rng(13);
  for (int i = 0; i < 50; ++i) {
    const double t = speedup_forest_coupling_time(s, sp, IsingParams::critical(2), rng, 5.0);
    EXPECT_GT(t, 0.0);
  }
  // at beta = 0 every update ignores the neighbours, so the chains never split
  EXPECT_TRUE(std::isinf(speedup_forest_coupling_time(s, sp, IsingParams::from_beta(0.0), rng, 5.0)));
}
