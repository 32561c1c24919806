#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "treeglass/gibbs.hpp"
#include "treeglass/mixing.hpp"

using namespace treeglass;

namespace {

std::vector<double> random_law(std::size_t n, Rng& rng) {
  std::vector<double> p(n);
  double z = 0;
  for (auto& x : p) z += (x = rng.uniform() + 1e-3);
  for (auto& x : p) x /= z;
  return p;
}

MarkovKernel two_state(double a, double b) {
  Eigen::MatrixXd p(2, 2);
  p << 1 - a, a, b, 1 - b;
  return MarkovKernel::from_dense(p, {b / (a + b), a / (a + b)});
}

}  // namespace

TEST(Distances, TvFormsAndHellingerSandwich) {
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 2 + rng.below(20);
    const auto p = random_law(n, rng);
    const auto q = random_law(n, rng);
    const double tv = tv_distance(p, q);
    EXPECT_NEAR(tv, tv_distance_sup(p, q), 1e-14);
    const Hellinger h = hellinger(p, q);
    EXPECT_LE(0.5 * h.distance * h.distance, tv + 1e-14);
    EXPECT_LE(tv, h.distance + 1e-14);
  }
  EXPECT_THROW(tv_distance(std::vector<double>{1.0}, std::vector<double>{0.5, 0.5}), std::invalid_argument);
}

TEST(Distances, HellingerIsMultiplicative) {
  Rng rng(2);
  const auto p1 = random_law(3, rng), q1 = random_law(3, rng);
  const auto p2 = random_law(5, rng), q2 = random_law(5, rng);
  const auto p = product_distribution({p1, p2});
  const auto q = product_distribution({q1, q2});
  EXPECT_NEAR(p[2 + 3 * 4], p1[2] * p2[4], 1e-16);
  EXPECT_NEAR(hellinger(p, q).affinity, hellinger(p1, q1).affinity * hellinger(p2, q2).affinity, 1e-14);
}

TEST(Tmix, TwoStateDiscreteAndContinuous) {
  const double a = 0.3, b = 0.2;
  const MarkovKernel k = two_state(a, b);
  const DistVector start{1.0, 0.0};
  TmixOptions opt;
  opt.t_max = 20;
  const MixingReport d = exact_tmix(k, start, {0.25, 0.01}, opt);
  const double tv0 = a / (a + b);
  for (std::size_t i = 0; i < d.times.size(); ++i) {
    EXPECT_NEAR(d.tv[i], tv0 * std::pow(1 - a - b, d.times[i]), 1e-13);
  }
  ASSERT_TRUE(d.tmix[0].has_value());
  EXPECT_EQ(*d.tmix[0], 2.0);  // 0.6, 0.3, 0.15
  opt.mode = TimeMode::Continuous;
  opt.rate = 2.0;
  opt.dt = 0.5;
  opt.t_max = 5;
  const MixingReport c = exact_tmix(k, start, {0.1}, opt);
  for (std::size_t i = 0; i < c.times.size(); ++i) {
    EXPECT_NEAR(c.tv[i], tv0 * std::exp(-opt.rate * (a + b) * c.times[i]), 1e-10);
    EXPECT_LE(c.tv_error[i], 1e-11);
  }
  const MixingReport w = exact_tmix_worst(k, {0.1}, TmixOptions{});
  EXPECT_NEAR(w.tv[3], std::max(a, b) / (a + b) * std::pow(0.5, 3), 1e-13);
  EXPECT_NEAR(log_decay_slope(d.times, d.tv, 1, 10), std::log(0.5), 1e-10);
}

TEST(Projections, BelowFullTv) {
  const TreeShape s(2, 2);
  const auto params = IsingParams::critical(2);
  const StateSpace space(s, BoundaryCondition::free());
  const GibbsTable g = exact_gibbs(space, params);
  Rng rng(3);
  const auto p = random_law(space.state_count(), rng);
  const ProjectedTv pr = projected_tv(s, space, p, g.prob);
  const double full = tv_distance(p, g.prob);
  EXPECT_LE(pr.magnetization, pr.level_sums + 1e-14);
  EXPECT_LE(pr.level_sums, full + 1e-14);
  EXPECT_NEAR(projected_tv(s, space, g.prob, g.prob).level_sums, 0.0, 1e-15);
}

TEST(McTv, DeterministicAndSmallAtStationarity) {
  const TreeShape s(2, 1);
  const auto params = IsingParams::critical(2);
  const GibbsTable g = exact_gibbs(s, params, BoundaryCondition::free());
  const Pinning pin(s.size(), 0);
  auto advance = [&](SpinConfig& c, Rng& rng) { run_continuous(c, s.forest(), pin, params, rng, 20.0); };
  const SpinConfig start(s.size(), 1);
  const McTvEstimate a = mc_tv_estimate(s, advance, start, g, 4000, 77);
  const McTvEstimate b = mc_tv_estimate(s, advance, start, g, 4000, 77);
  EXPECT_EQ(a.estimate, b.estimate);
  EXPECT_EQ(a.ci_high, b.ci_high);
  EXPECT_LT(a.estimate, 0.05);
  EXPECT_LE(a.ci_low, a.estimate + 1e-12);
  // no time at all: the magnetisation law is a point mass at +3
  auto none = [](SpinConfig&, Rng&) {};
  const McTvEstimate z = mc_tv_estimate(s, none, start, g, 100, 1);
  double p3 = g.prob[7];
  EXPECT_NEAR(z.magnetization, 1.0 - p3, 1e-12);
}

TEST(Domination, FlowCertificate) {
  // on {0,1}: p = (0.6, 0.4) below q = (0.3, 0.7)
  const DominationResult yes = stochastic_domination_check(std::vector<double>{0.6, 0.4}, std::vector<double>{0.3, 0.7});
  EXPECT_TRUE(yes.dominated);
  EXPECT_TRUE(yes.definitive);
  const DominationResult no = stochastic_domination_check(std::vector<double>{0.3, 0.7}, std::vector<double>{0.6, 0.4});
  EXPECT_FALSE(no.dominated);
  EXPECT_GT(no.max_violation, 0.2);
  // 2 bits: mass on 01 against mass on 10 is incomparable
  const DominationResult inc = stochastic_domination_check(std::vector<double>{0, 1, 0, 0}, std::vector<double>{0, 0, 1, 0});
  EXPECT_FALSE(inc.dominated);
  EXPECT_THROW(stochastic_domination_check(std::vector<double>{0.5, 0.25, 0.25}, std::vector<double>{1, 0, 0}),
               std::invalid_argument);
}

TEST(Domination, EventFamilyBeyondFlowScope) {
  // 11 bits: product of independent coordinates with larger marginals dominates
  std::vector<DistVector> lo, hi;
  for (int i = 0; i < 11; ++i) {
    lo.push_back({0.6, 0.4});
    hi.push_back({0.5, 0.5});
  }
  const DominationResult r = stochastic_domination_check(product_distribution(lo), product_distribution(hi));
  EXPECT_TRUE(r.dominated);
  EXPECT_FALSE(r.definitive);
  const DominationResult back = stochastic_domination_check(product_distribution(hi), product_distribution(lo));
  EXPECT_FALSE(back.dominated);
}

TEST(SubforestProjection, WithinBound) {
  const TreeShape s(2, 3);
  const SpeedupSpec sp = make_speedup_spec(s, 1, 2);
  const ProjectionTvCheck r = subforest_projection_tv(s, sp, IsingParams::critical(2));
  EXPECT_GT(r.tv, 0.0);
  EXPECT_LE(r.tv, r.bound);
  EXPECT_NEAR(r.bound, 4.0 * 0.5, 1e-12);
}
