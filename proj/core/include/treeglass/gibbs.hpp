#pragma once

// Exact Gibbs measures on trees: enumeration, broadcast sampling, and the
// log-likelihood machinery used for spatial mixing (reconstruction of the
// root spin from a boundary).

#include <cstdint>
#include <optional>
#include <vector>

#include "treeglass/random.hpp"
#include "treeglass/tree.hpp"

namespace treeglass {

// Log-odds log(P(+)/P(-)). Plain IEEE double: +-infinity marks a spin that
// is forced by the boundary.
using LogOdds = double;

// Default constant for the spatial-mixing inequalities. The statements only
// promise some kappa > 1/100; 1/96 is the value the argument actually reaches.
inline constexpr double kKappa = 1.0 / 96.0;

inline constexpr int kMaxGibbsFreeVertices = 24;

struct GibbsTable {
  StateSpace space;
  std::vector<double> prob;
  double log_partition = 0.0;

  std::uint64_t size() const { return prob.size(); }
  double expectation(const std::vector<double>& f) const;
};

// Gibbs measure exp(beta * sum_{xy} s(x)s(y)) / Z over the free vertices of
// `space`; pinned spins enter the energy. Throws SizeGuardError beyond
// kMaxGibbsFreeVertices free vertices.
GibbsTable exact_gibbs(const StateSpace& space, const IsingParams& params);
GibbsTable exact_gibbs(const TreeShape& shape, const IsingParams& params, const BoundaryCondition& bc);

// Free-boundary sample by propagating from the root: each child copies its
// parent with probability (1+theta)/2. Rejects non-free boundaries.
SpinConfig broadcast_sample(const TreeShape& shape, const IsingParams& params, const BoundaryCondition& bc,
                            Rng& rng, std::optional<int> root_spin = std::nullopt);

// Free-boundary covariance of sigma(u), sigma(w): theta^dist(u,w).
double pairwise_cov(const TreeShape& shape, const IsingParams& params, VertexId u, VertexId w);

// f(x) = log((cosh(x/2) + theta sinh(x/2)) / (cosh(x/2) - theta sinh(x/2))),
// evaluated as 2 atanh(theta tanh(x/2)) so that f(+-inf) = +-2 beta.
double f_func(double x, double theta);

// Log-odds at v on the subtree rooted at v cut at absolute level
// `bottom_level`. Vertices pinned by `xi` contribute +-inf; unpinned vertices
// on the bottom level (or leaves of the tree) are free and contribute 0.
LogOdds loglik_recursion(const TreeShape& shape, const IsingParams& params, VertexId v, int bottom_level,
                         const Pinning& xi);

// x_v^*: log-odds at v induced by the leaf boundary tau on T_v.
LogOdds boundary_field(const TreeShape& shape, const IsingParams& params, VertexId v, const Pinning& tau);

// D_w^* = cosh^2(beta) / (cosh^2(beta) + cosh^2(x_w^*/2) - 1).
double propagation_coeff(LogOdds x_star, const IsingParams& params);

// Law of the spins on level `bottom_level` of T_v under the Gibbs measure of
// T_v with boundary tau, conditioned on sigma(v) = +1 / -1.
struct BoundaryLaw {
  std::vector<VertexId> boundary;  // level `bottom_level` vertices of T_v
  std::vector<double> plus;        // indexed by bit pattern over `boundary`
  std::vector<double> minus;
  // Pinning of T_v's boundary vertices to pattern xi (other entries 0).
  Pinning pattern(std::uint64_t xi, std::size_t n) const;
};
BoundaryLaw boundary_law(const TreeShape& shape, const IsingParams& params, VertexId v, int bottom_level,
                         const Pinning& tau);

enum class EstimateMode { Exact, MonteCarlo };

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

struct DeltaOptions {
  EstimateMode mode = EstimateMode::Exact;
  double root_field = 0.0;  // external field h on the root, used in the reconstruction step only
  std::size_t samples = 20000;
  std::uint64_t seed = 1;
};

// Delta = E_{Q+}[mu_hat^xi(sigma(rho)=1)] - E_{Q-}[...], with T_hat the first
// hat_depth+1 levels below the root (1 <= hat_depth <= h-1).
Estimate reconstruction_delta(const TreeShape& shape, const IsingParams& params, const Pinning& tau, int hat_depth,
                              const DeltaOptions& options = {});

// m_v = E_{Q_v^+}[x_v^xi] - E_{Q_v^-}[x_v^xi]; +inf when v lies on the cut level.
double m_quantity(const TreeShape& shape, const IsingParams& params, VertexId v, const Pinning& tau, int hat_depth);

struct MvRecursionRow {
  VertexId v = 0;
  double m = 0.0;
  double rhs = 0.0;  // sum_w theta^2 m_w / (1 + kappa (1-theta) m_w / 4)
  bool holds = true;
};
std::vector<MvRecursionRow> mv_recursion_check(const TreeShape& shape, const IsingParams& params, const Pinning& tau,
                                               int hat_depth, double kappa = kKappa);

struct InequalityScanReport {
  std::size_t points = 0;
  std::size_t violations = 0;
  double max_ratio = 0.0;  // max lhs/rhs over the grid
  struct Point {
    double theta, delta, c1, lhs, rhs;
  };
  std::optional<Point> first_violation;
  std::size_t f_delta_points = 0;
  std::size_t f_delta_violations = 0;
};

// Checks f(d)(1 + 4 kappa (1-theta) C1 d tanh(d/2)) <= C2 theta d with
// C2 = max(1 + (C1/2 - 1)(1 - theta^2), 1) on the product grid, and
// |f(x) - f(y)| <= 2 f(|x-y|/2) on the square grid xy_grid^2 for every theta.
InequalityScanReport lemma35_inequality_scan(const std::vector<double>& theta_grid, const std::vector<double>& delta_grid,
                                      const std::vector<double>& c1_grid, const std::vector<double>& xy_grid = {},
                                      double kappa = kKappa);

}  // namespace treeglass
