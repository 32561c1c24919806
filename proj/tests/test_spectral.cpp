#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "treeglass/gibbs.hpp"
#include "treeglass/spectral.hpp"

using namespace treeglass;

namespace {

MarkovKernel two_state(double a, double b) {
  Eigen::MatrixXd p(2, 2);
  p << 1 - a, a, b, 1 - b;
  return MarkovKernel::from_dense(p, {b / (a + b), a / (a + b)});
}

}  // namespace

TEST(Kernel, SingleSiteMatchesDirectConstruction) {
  for (auto bcase : {0, 1, 2}) {
    const TreeShape s(2, 2);
    const auto params = IsingParams::critical(2);
    const BoundaryCondition bc = bcase == 0   ? BoundaryCondition::free()
                                 : bcase == 1 ? BoundaryCondition::all_plus()
                                              : BoundaryCondition::arbitrary({1, -1, -1, 1});
    const MarkovKernel k = build_kernel(Dynamics{SingleSite{}}, s, params, bc);
    const StateSpace space(s, bc);
    const Eigen::MatrixXd ref = oracle::single_site_kernel(s, params.beta, bc.resolve(s), space.free_vertices());
    const Eigen::MatrixXd got = k.to_dense();
    EXPECT_LT((got - ref).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_TRUE(k.reversible());
    EXPECT_LT(k.row_sum_error(), 1e-14);
    EXPECT_LT(k.stationarity_error(), 1e-14);
    EXPECT_LT(k.detailed_balance_error(), 1e-14);
    const GibbsTable g = exact_gibbs(space, params);
    for (std::size_t i = 0; i < g.prob.size(); ++i) EXPECT_NEAR(k.pi()[i], g.prob[i], 1e-14);
  }
}

TEST(Gap, TwoStateClosedForm) {
  const MarkovKernel k = two_state(0.3, 0.1);
  EXPECT_NEAR(spectral_gap(k, GapMethod::Dense).gap, 0.4, 1e-13);
  EXPECT_NEAR(spectral_gap(k, GapMethod::Power).gap, 0.4, 1e-8);
}

TEST(Gap, DenseAndPowerAgreeWithOracle) {
  const TreeShape s(2, 2);
  const auto params = IsingParams::critical(2);
  const MarkovKernel k = build_kernel(Dynamics{SingleSite{}}, s, params, BoundaryCondition::free());
  const double ref = oracle::dense_gap(k.to_dense(), k.pi());
  const GapResult d = spectral_gap(k, GapMethod::Dense);
  const GapResult p = spectral_gap(k, GapMethod::Power);
  EXPECT_NEAR(d.gap, ref, 1e-12);
  EXPECT_NEAR(p.gap, ref, 1e-8);
  EXPECT_EQ(p.method, GapMethod::Power);
  EXPECT_GT(p.iterations, 0u);
}

TEST(Gap, OneStateChain) {
  const MarkovKernel k = MarkovKernel::from_dense(Eigen::MatrixXd::Ones(1, 1), {1.0});
  const GapResult g = spectral_gap(k);
  EXPECT_EQ(g.gap, 1.0);
  EXPECT_FALSE(g.note.empty());
}

TEST(Gap, NonReversibleRejected) {
  Eigen::MatrixXd p(3, 3);
  p << 0, 1, 0, 0, 0, 1, 1, 0, 0;
  const MarkovKernel k = MarkovKernel::from_dense(p, {1.0 / 3, 1.0 / 3, 1.0 / 3});
  EXPECT_FALSE(k.reversible());
  EXPECT_THROW(spectral_gap(k), std::invalid_argument);
  EXPECT_THROW(dirichlet_form(std::vector<double>{1, 2, 3}, k), std::invalid_argument);
}

TEST(DenseSpectrum, MatchesOracleEigenvalues) {
  Rng rng(21);
  const auto c = oracle::random_reversible(7, rng);
  const MarkovKernel k = MarkovKernel::from_dense(c.p, c.pi);
  const DenseSpectrum sp = dense_spectrum(k);
  const Eigen::VectorXd ref = oracle::dense_eigenvalues(c.p, c.pi);
  for (Eigen::Index i = 0; i < ref.size(); ++i) EXPECT_NEAR(sp.values(i), ref(ref.size() - 1 - i), 1e-12);
  // right eigenvectors, pi-normalised
  for (Eigen::Index j = 0; j < 7; ++j) {
    const Eigen::VectorXd v = sp.vectors.col(j);
    EXPECT_LT((c.p * v - sp.values(j) * v).cwiseAbs().maxCoeff(), 1e-10);
    double norm = 0;
    for (Eigen::Index i = 0; i < 7; ++i) norm += c.pi[static_cast<std::size_t>(i)] * v(i) * v(i);
    EXPECT_NEAR(norm, 1.0, 1e-10);
  }
}

TEST(DirichletForm, TwoExpressionsAgreeAndBoundGap) {
  Rng rng(3);
  const auto c = oracle::random_reversible(9, rng);
  const MarkovKernel k = MarkovKernel::from_dense(c.p, c.pi);
  const double gap = spectral_gap(k).gap;
  for (int t = 0; t < 10; ++t) {
    std::vector<double> f(9);
    for (auto& x : f) x = rng.uniform() * 4 - 2;
    EXPECT_NEAR(dirichlet_form(f, k), dirichlet_form_quadratic(f, k), 1e-12);
    EXPECT_GE(test_function_gap_bound(f, k), gap - 1e-12);
  }
}

TEST(VarianceEntropy, KnownValues) {
  const std::vector<double> pi{0.5, 0.5};
  const VarEnt ve = variance_entropy(std::vector<double>{1.0, 3.0}, pi);
  EXPECT_NEAR(ve.variance, 1.0, 1e-15);
  // E f^2 = 5; Ent = 0.5 (1 log(1/5) + 9 log(9/5))
  EXPECT_NEAR(ve.entropy, 0.5 * (std::log(0.2) + 9 * std::log(1.8)), 1e-13);
  EXPECT_NEAR(variance_entropy(std::vector<double>{2.0, 2.0}, pi).entropy, 0.0, 1e-15);
}

TEST(ClosedForms, WeightedSumMatchesEnumeration) {
  for (auto [b, h] : {std::pair{2, 1}, std::pair{2, 2}, std::pair{3, 1}, std::pair{3, 2}, std::pair{2, 3}}) {
    for (double eps : {0.0, 0.3}) {
      if ((1.0 + eps) / b >= 1.0) continue;
      const auto params = eps == 0.0 ? IsingParams::critical(b) : IsingParams::near_critical(b, eps);
      const TreeShape s(b, h);
      const MarkovKernel k = build_kernel(Dynamics{SingleSite{}}, s, params, BoundaryCondition::free());
      const StateSpace space(s, BoundaryCondition::free());
      const auto g = weighted_spin_sum(s, space, params.theta);
      const double var = variance_entropy(g, k.pi()).variance;
      EXPECT_NEAR(closed_form::weighted_sum_variance(b, h, params.theta), var, 1e-9 * var);
      const double dir = dirichlet_form(g, k);
      EXPECT_NEAR(closed_form::weighted_sum_dirichlet(b, h, params), dir, 1e-9 * dir);
      if (eps == 0.0) {
        // the quoted expressions bound these from the safe side
        EXPECT_LE(closed_form::critical_variance_formula(b, h), var);
        EXPECT_LE(dir, 2.0 * (h + 1) / closed_form::vertex_count(b, h) + 1e-12);
      } else {
        EXPECT_LE(closed_form::near_critical_variance_formula(b, h, eps), var);
        EXPECT_LE(dir, closed_form::dirichlet_bound_near_critical(b, h, eps) + 1e-12);
      }
    }
  }
}

TEST(ClosedForms, Values) {
  EXPECT_NEAR(closed_form::critical_variance_formula(2, 3), 0.25 * 3 * 4 * 7 / 3.0, 1e-12);
  EXPECT_NEAR(closed_form::vertex_count(3, 2), 13.0, 0);
  EXPECT_NEAR(closed_form::gap_upper_critical(2, 2), 12.0 / (7 * 4), 1e-15);
  EXPECT_NEAR(closed_form::relaxation_lower_transition(4, 0.0, 2.0), 32.0, 1e-12);
  EXPECT_NEAR(closed_form::relaxation_lower_transition(10, 0.5, 1.0), 4.0 * std::pow(1.5, 10), 1e-9);
  // the near-critical variance approaches the shifted cubic as eps -> 0
  const double lim = 1.0 / 12.0 * 4 * 5 * 9;
  EXPECT_NEAR(closed_form::near_critical_variance_formula(2, 3, 1e-4), lim, 1e-2);
}

TEST(ProductChain, EigenvaluesMatchAssembledKernel) {
  Rng rng(17);
  const auto c1 = oracle::random_reversible(3, rng);
  const auto c2 = oracle::random_reversible(4, rng);
  const MarkovKernel k1 = MarkovKernel::from_dense(c1.p, c1.pi);
  const MarkovKernel k2 = MarkovKernel::from_dense(c2.p, c2.pi);
  std::vector<std::vector<double>> spectra;
  for (const auto* k : {&k1, &k2}) {
    const auto v = dense_spectrum(*k).values;
    spectra.emplace_back(v.data(), v.data() + v.size());
  }
  const std::vector<double> nu{0.3, 0.5};
  const auto eig = product_chain_eigenvalues(spectra, nu, 0.2);
  const MarkovKernel prod = assemble_product_kernel({k1, k2}, nu, 0.2);
  ASSERT_EQ(prod.size(), 12u);
  const auto ref = dense_spectrum(prod).values;
  for (std::size_t i = 0; i < eig.size(); ++i) EXPECT_NEAR(eig[i], ref(static_cast<Eigen::Index>(i)), 1e-12);
  // pi of the product is the product of the pis, index = x1 + 3 x2
  EXPECT_NEAR(prod.pi()[1 + 3 * 2], c1.pi[1] * c2.pi[2], 1e-14);
}

TEST(Jstv, BoundBelowGapAndTwoStateCells) {
  Rng rng(8);
  const auto c = oracle::random_reversible(6, rng, 0.1);
  const MarkovKernel k = MarkovKernel::from_dense(c.p, c.pi);
  const JstvResult r = jstv_decompose(k, {0, 0, 1, 1, 2, 2});
  EXPECT_EQ(r.restrictions.size(), 3u);
  EXPECT_LE(r.bound, spectral_gap(k).gap + 1e-12);
  EXPECT_GT(r.bound, 0.0);
  EXPECT_THROW(jstv_decompose(k, {0, 0, 2, 2, 2, 2}), std::invalid_argument);
  // singletons: each restriction is a one-state chain
  const JstvResult s = jstv_decompose(k, {0, 1, 2, 3, 4, 5});
  EXPECT_FALSE(s.notes.empty());
  EXPECT_NEAR(s.projection_gap, spectral_gap(k).gap, 1e-10);
}

TEST(BlockComparison, AssembledBoundBelowSingleSiteGap) {
  const TreeShape s(2, 3);
  const auto params = IsingParams::critical(2);
  const BoundaryCondition bc = BoundaryCondition::all_plus();
  const BlockCover cover = paper_block_cover(s, 1, 2);
  const MarkovKernel kb = build_kernel(Dynamics{BlockDynamics{cover}}, s, params, bc);
  const MarkovKernel ks = build_kernel(Dynamics{SingleSite{}}, s, params, bc);
  const ScaledBlockGap sb = min_scaled_block_gap(s, cover, params, bc.resolve(s));
  EXPECT_TRUE(sb.exhaustive);
  EXPECT_GT(sb.boundaries, 0u);
  const double bound =
      block_vs_single_site_bound(cover.blocks.size(), 7, spectral_gap(kb).gap, sb.value, cover.multiplicity(s.size()));
  EXPECT_LE(bound, spectral_gap(ks).gap);
  EXPECT_THROW(build_kernel(Dynamics{BlockDynamics{cover}}, s, params, BoundaryCondition::free()),
               std::invalid_argument);
}

TEST(Contraction, TwoStateCoupling) {
  // copy chain: with probability q both move to a common fresh draw
  const double q = 0.25;
  Rng rng(5);
  std::vector<std::pair<int, int>> pairs{{0, 1}};
  auto step = [&](int& x, int& y, Rng& r) {
    if (r.uniform() < q) {
      x = y = static_cast<int>(r.below(2));
    }
  };
  auto dist = [](int x, int y) { return static_cast<double>(x != y); };
  const auto est = contraction_gap_bound(pairs, step, dist, 20000, rng);
  EXPECT_NEAR(est.iota, 1 - q, 4 * est.std_error + 1e-3);
  EXPECT_NEAR(est.gap_lower, q, 4 * est.std_error + 1e-3);
}

TEST(Kernel, SizeGuards) {
  EXPECT_THROW(build_kernel(Dynamics{SingleSite{}}, TreeShape(4, 2), IsingParams::critical(4),
                            BoundaryCondition::free()),
               SizeGuardError);
}

TEST(Kernel, SpeedupChainFixesGibbs) {
  const TreeShape s(2, 2);
  const auto params = IsingParams::critical(2);
  const MarkovKernel k =
      build_kernel(Dynamics{SpeedupDynamics{make_speedup_spec(s, 0, 1)}}, s, params, BoundaryCondition::free());
  EXPECT_LT(k.stationarity_error(), 1e-14);
  EXPECT_TRUE(k.reversible());
  EXPECT_THROW(build_kernel(Dynamics{SpeedupDynamics{make_speedup_spec(s, 0, 1)}}, s, params,
                            BoundaryCondition::all_plus()),
               std::invalid_argument);
}
