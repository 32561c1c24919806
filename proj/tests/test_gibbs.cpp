#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "treeglass/gibbs.hpp"

using namespace treeglass;

namespace {

Pinning random_leaf_pins(const TreeShape& s, Rng& rng, bool allow_free) {
  Pinning p(s.size(), 0);
  for (VertexId v : s.leaves()) {
    const auto r = rng.below(allow_free ? 3 : 2);
    p[static_cast<std::size_t>(v)] = r == 0 ? 1 : (r == 1 ? -1 : 0);
  }
  return p;
}

}  // namespace

TEST(ExactGibbs, MatchesBruteForce) {
  Rng rng(11);
  for (auto [b, h] : {std::pair{2, 2}, std::pair{3, 1}, std::pair{2, 3}}) {
    const TreeShape s(b, h);
    for (int trial = 0; trial < 4; ++trial) {
      const Pinning pin = trial == 0 ? Pinning(s.size(), 0) : random_leaf_pins(s, rng, true);
      const IsingParams params = IsingParams::from_beta(0.3 + 0.4 * trial);
      const StateSpace space(s.forest(), pin);
      const GibbsTable g = exact_gibbs(space, params);
      const auto w = oracle::full_gibbs(s, params.beta, pin);
      std::vector<double> marg(space.state_count(), 0.0);
      for (std::uint64_t x = 0; x < w.size(); ++x) {
        if (w[x] > 0) marg[oracle::to_state(x, space.free_vertices())] += w[x];
      }
      for (std::size_t i = 0; i < marg.size(); ++i) EXPECT_NEAR(g.prob[i], marg[i], 1e-12);
    }
  }
}

TEST(ExactGibbs, SizeGuard) {
  EXPECT_THROW(exact_gibbs(TreeShape(2, 4), IsingParams::critical(2), BoundaryCondition::free()), SizeGuardError);
}

TEST(PairwiseCov, EqualsThetaToDistance) {
  const TreeShape s(2, 3);
  const auto params = IsingParams::critical(2);
  const auto w = oracle::full_gibbs(s, params.beta, Pinning(s.size(), 0));
  for (VertexId u : {0, 3, 7, 12}) {
    for (VertexId v : {1, 8, 14}) {
      const double e = oracle::expectation(w, [&](auto x) { return oracle::bit_spin(x, u) * oracle::bit_spin(x, v); });
      EXPECT_NEAR(pairwise_cov(s, params, u, v), e, 1e-12);
    }
  }
}

TEST(Broadcast, EmpiricalCorrelations) {
  const TreeShape s(2, 3);
  const auto params = IsingParams::critical(2);
  Rng rng(3);
  const int draws = 40000;
  double sum = 0.0, root = 0.0;
  for (int i = 0; i < draws; ++i) {
    const SpinConfig c = broadcast_sample(s, params, BoundaryCondition::free(), rng);
    sum += c.spin(0) * c.spin(14);
    root += c.spin(0);
  }
  const double target = std::pow(params.theta, 3);
  EXPECT_NEAR(sum / draws, target, 4.0 / std::sqrt(draws));
  EXPECT_NEAR(root / draws, 0.0, 4.0 / std::sqrt(draws));
  EXPECT_THROW(broadcast_sample(s, params, BoundaryCondition::all_plus(), rng), std::invalid_argument);
  const SpinConfig fixed = broadcast_sample(s, params, BoundaryCondition::free(), rng, -1);
  EXPECT_EQ(fixed.spin(0), -1);
}

TEST(FFunc, LimitsAndSymmetry) {
  const auto params = IsingParams::critical(3);
  const double t = params.theta;
  EXPECT_NEAR(f_func(INFINITY, t), 2.0 * params.beta, 1e-12);
  EXPECT_NEAR(f_func(-INFINITY, t), -2.0 * params.beta, 1e-12);
  for (double x : {0.1, 1.0, 3.0, 12.0}) {
    EXPECT_NEAR(f_func(-x, t), -f_func(x, t), 1e-14);
    const double direct =
        std::log((std::cosh(x / 2) + t * std::sinh(x / 2)) / (std::cosh(x / 2) - t * std::sinh(x / 2)));
    EXPECT_NEAR(f_func(x, t), direct, 1e-12);
  }
}

TEST(LoglikRecursion, MatchesEnumeration) {
  Rng rng(5);
  for (auto [b, h] : {std::pair{2, 2}, std::pair{3, 2}, std::pair{2, 3}}) {
    const TreeShape s(b, h);
    for (int trial = 0; trial < 6; ++trial) {
      const Pinning pin = random_leaf_pins(s, rng, true);
      const IsingParams params = IsingParams::from_beta(0.2 + 0.25 * trial);
      const double x = loglik_recursion(s, params, 0, h, pin);
      bool any_pinned = false;
      for (auto p : pin) any_pinned = any_pinned || p != 0;
      if (!any_pinned) {
        EXPECT_EQ(x, 0.0);
        continue;
      }
      EXPECT_NEAR(x, oracle::root_log_odds(s, params.beta, pin), 1e-10);
    }
  }
}

TEST(LoglikRecursion, PinnedVertexIsInfinite) {
  const TreeShape s(2, 2);
  Pinning pin(s.size(), 0);
  pin[0] = -1;
  EXPECT_EQ(loglik_recursion(s, IsingParams::critical(2), 0, 2, pin), -INFINITY);
}

TEST(BoundaryLaw, MatchesConditionedEnumeration) {
  const TreeShape s(2, 3);
  const auto params = IsingParams::critical(2);
  Rng rng(8);
  const Pinning tau = random_leaf_pins(s, rng, false);
  const int bottom = 2;
  const BoundaryLaw law = boundary_law(s, params, 0, bottom, tau);
  const auto w = oracle::full_gibbs(s, params.beta, tau);
  const auto& bd = law.boundary;
  ASSERT_EQ(bd.size(), 4u);
  for (int root : {1, -1}) {
    std::vector<double> m(std::size_t{1} << bd.size(), 0.0);
    double z = 0.0;
    for (std::uint64_t x = 0; x < w.size(); ++x) {
      if (w[x] == 0 || oracle::bit_spin(x, 0) != root) continue;
      std::uint64_t pat = 0;
      for (std::size_t i = 0; i < bd.size(); ++i) {
        if ((x >> bd[i]) & 1U) pat |= std::uint64_t{1} << i;
      }
      m[pat] += w[x];
      z += w[x];
    }
    const auto& got = root == 1 ? law.plus : law.minus;
    for (std::size_t i = 0; i < m.size(); ++i) EXPECT_NEAR(got[i], m[i] / z, 1e-12);
  }
}

TEST(ReconstructionDelta, ZeroAtInfiniteTemperature) {
  const TreeShape s(2, 3);
  const auto params = IsingParams::from_beta(0.0);
  const Estimate d = reconstruction_delta(s, params, BoundaryCondition::all_plus().resolve(s), 1);
  EXPECT_NEAR(d.value, 0.0, 1e-15);
}

TEST(ReconstructionDelta, FlipSymmetricAndMonteCarloAgrees) {
  const TreeShape s(2, 3);
  const auto params = IsingParams::critical(2);
  const Pinning plus = BoundaryCondition::all_plus().resolve(s);
  const Pinning minus = BoundaryCondition::all_minus().resolve(s);
  for (int hd : {1, 2}) {
    const double a = reconstruction_delta(s, params, plus, hd).value;
    EXPECT_NEAR(a, reconstruction_delta(s, params, minus, hd).value, 1e-12);
    EXPECT_GT(a, 0.0);
    DeltaOptions mc;
    mc.mode = EstimateMode::MonteCarlo;
    mc.samples = 20000;
    mc.seed = 9;
    const Estimate e = reconstruction_delta(s, params, plus, hd, mc);
    EXPECT_GT(e.std_error, 0.0);
    EXPECT_NEAR(e.value, a, 4.0 * e.std_error + 1e-3);
  }
  EXPECT_THROW(reconstruction_delta(s, params, plus, 3), std::invalid_argument);
}

TEST(ReconstructionDelta, BruteForceTwoLevel) {
  // h = 2, hat_depth = 1: Delta is an expectation over the level-1 spins.
  const TreeShape s(2, 2);
  const auto params = IsingParams::from_beta(0.7);
  const Pinning tau = BoundaryCondition::arbitrary({1, -1, 1, 1}).resolve(s);
  const double got = reconstruction_delta(s, params, tau, 1).value;
  const auto w = oracle::full_gibbs(s, params.beta, tau);
  double exp_plus = 0.0, exp_minus = 0.0, zp = 0.0, zm = 0.0;
  for (std::uint64_t x = 0; x < w.size(); ++x) {
    if (w[x] == 0) continue;
    // reconstruct the root from sigma(1), sigma(2) alone
    Pinning xi(s.size(), 0);
    xi[1] = static_cast<std::int8_t>(oracle::bit_spin(x, 1));
    xi[2] = static_cast<std::int8_t>(oracle::bit_spin(x, 2));
    const double lo = oracle::root_log_odds(TreeShape(2, 1), params.beta, Pinning{0, xi[1], xi[2]});
    const double mu = 0.5 * (1.0 + std::tanh(lo / 2.0));
    if (oracle::bit_spin(x, 0) == 1) {
      exp_plus += w[x] * mu;
      zp += w[x];
    } else {
      exp_minus += w[x] * mu;
      zm += w[x];
    }
  }
  EXPECT_NEAR(got, exp_plus / zp - exp_minus / zm, 1e-12);
}

TEST(MQuantity, RecursionAndCutLevel) {
  const TreeShape s(2, 3);
  const auto params = IsingParams::critical(2);
  Rng rng(12);
  for (int i = 0; i < 10; ++i) {
    const Pinning tau = random_leaf_pins(s, rng, false);
    for (int hd : {1, 2}) {
      for (const auto& row : mv_recursion_check(s, params, tau, hd)) EXPECT_TRUE(row.holds);
      EXPECT_TRUE(std::isinf(m_quantity(s, params, s.level_begin(hd), tau, hd)));
      EXPECT_GT(m_quantity(s, params, 0, tau, hd), 0.0);
    }
  }
}

TEST(LogOddsInequality, SmallGridHolds) {
  std::vector<double> th, de;
  for (int i = 0; i < 10; ++i) th.push_back(0.01 + 0.74 * i / 9.0);
  for (int i = 0; i < 30; ++i) de.push_back(1e-4 * std::pow(2e5, i / 29.0));
  const auto r = lemma35_inequality_scan(th, de, {1, 5, 100}, {-5, -1, 0, 0.5, 3, 10});
  EXPECT_EQ(r.points, th.size() * de.size() * 3);
  EXPECT_EQ(r.violations, 0u);
  EXPECT_EQ(r.f_delta_violations, 0u);
  EXPECT_GT(r.f_delta_points, 0u);
  EXPECT_LE(r.max_ratio, 1.0);
}

TEST(LogOddsInequality, HugeKappaIsCaught) {
  // with kappa far above the admissible range the inequality must fail somewhere
  const auto r = lemma35_inequality_scan({0.5}, {1.0, 5.0}, {100}, {}, 50.0);
  EXPECT_GT(r.violations, 0u);
  ASSERT_TRUE(r.first_violation.has_value());
  EXPECT_GT(r.first_violation->lhs, r.first_violation->rhs);
}
