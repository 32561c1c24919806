#pragma once

// Exact transition kernels over enumerated state spaces and the spectral
// machinery built on them: Dirichlet forms, gaps, test-function bounds,
// product chains, projection/restriction decompositions and the block
// comparison bound. Also the closed forms for the weighted spin sum.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "treeglass/dynamics.hpp"
#include "treeglass/random.hpp"
#include "treeglass/tree.hpp"

namespace treeglass {

inline constexpr std::uint64_t kMaxKernelStates = std::uint64_t{1} << 15;
inline constexpr std::uint64_t kMaxDenseStates = std::uint64_t{1} << 12;

// Sparse row-stochastic matrix (CSR, columns sorted within a row) with its
// stationary law.
class MarkovKernel {
 public:
  MarkovKernel() = default;
  MarkovKernel(std::vector<std::size_t> row_offset, std::vector<std::uint32_t> col, std::vector<double> val,
               std::vector<double> pi, std::shared_ptr<const StateSpace> space = nullptr);

  static MarkovKernel from_dense(const Eigen::MatrixXd& p, std::vector<double> pi);

  std::size_t size() const { return pi_.size(); }
  std::size_t nonzeros() const { return val_.size(); }
  const std::vector<double>& pi() const { return pi_; }
  bool reversible() const { return reversible_; }
  const StateSpace* space() const { return space_.get(); }

  std::span<const std::uint32_t> row_cols(std::size_t x) const {
    return {col_.data() + row_offset_[x], row_offset_[x + 1] - row_offset_[x]};
  }
  std::span<const double> row_vals(std::size_t x) const {
    return {val_.data() + row_offset_[x], row_offset_[x + 1] - row_offset_[x]};
  }
  double at(std::size_t x, std::size_t y) const;

  // mu P and P f.
  DistVector apply_left(std::span<const double> mu) const;
  std::vector<double> apply_right(std::span<const double> f) const;

  Eigen::MatrixXd to_dense() const;

  double row_sum_error() const;
  double detailed_balance_error() const;
  // max |pi P - pi|
  double stationarity_error() const;

 private:
  std::vector<std::size_t> row_offset_{0};
  std::vector<std::uint32_t> col_;
  std::vector<double> val_;
  std::vector<double> pi_;
  bool reversible_ = false;
  std::shared_ptr<const StateSpace> space_;
};

struct SingleSite {};
struct BlockDynamics {
  BlockCover cover;
};
struct SpeedupDynamics {
  SpeedupSpec spec;
};
using Dynamics = std::variant<SingleSite, BlockDynamics, SpeedupDynamics>;

// One kind of update: with probability `weight`, resample `vertices` from the
// conditional law given the rest.
struct WeightedBlock {
  double weight = 0.0;
  std::vector<VertexId> vertices;
};

std::vector<WeightedBlock> update_moves(const Dynamics& dynamics, const TreeShape& shape, const Pinning& pinning);

// Kernel over `space` (which may live on a subforest) for a mixture of block
// updates. The stationary law is the exact Gibbs measure of `space`.
MarkovKernel build_kernel(const StateSpace& space, const std::vector<WeightedBlock>& moves, const IsingParams& params);
MarkovKernel build_kernel(const Dynamics& dynamics, const TreeShape& shape, const IsingParams& params,
                          const BoundaryCondition& bc);

double dirichlet_form(std::span<const double> f, const MarkovKernel& k);
// <(I - P) f, f>_pi
double dirichlet_form_quadratic(std::span<const double> f, const MarkovKernel& k);

struct VarEnt {
  double variance = 0.0;
  double entropy = 0.0;
};
VarEnt variance_entropy(std::span<const double> f, std::span<const double> pi);

enum class GapMethod { Auto, Dense, Power };

struct GapResult {
  double gap = 0.0;
  double lambda2 = 0.0;
  GapMethod method = GapMethod::Dense;
  std::size_t iterations = 0;
  double residual = 0.0;
  std::string note;
};

struct PowerOptions {
  double tolerance = 1e-10;
  std::size_t max_iterations = 1000000;
  std::uint64_t seed = 12345;
};

// 1 - lambda_2 of a reversible kernel. A one-state chain has gap 1 by
// convention (recorded in GapResult::note). Throws std::runtime_error if the
// power method does not reach the tolerance.
GapResult spectral_gap(const MarkovKernel& k, GapMethod method = GapMethod::Auto, const PowerOptions& opts = {});

// Eigenvalues in decreasing order, with the pi-normalised eigenvectors as
// columns (right eigenvectors of P).
struct DenseSpectrum {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};
DenseSpectrum dense_spectrum(const MarkovKernel& k);

// E(f) / Var(f), an upper bound on the gap.
double test_function_gap_bound(std::span<const double> f, const MarkovKernel& k);

// g(sigma) = sum_v theta^{level(v)} sigma(v), tabulated over `space`.
std::vector<double> weighted_spin_sum(const TreeShape& shape, const StateSpace& space, double theta);

namespace closed_form {

// The variance expression (b-1)/(6b) h(h+1)(2h+1) used for the critical
// lower bound on the relaxation time.
double critical_variance_formula(int b, int h);
// (b-1)/(b eps^3) ((1+eps)^{2h+3} - (2h+3) eps (1+eps)^{h+1} - 1).
double near_critical_variance_formula(int b, int h, double eps);
// Var(g) under the free measure, exact for any theta.
double weighted_sum_variance(int b, int h, double theta);
// E(g) for the discrete single-site heat bath, free boundary, exact.
double weighted_sum_dirichlet(int b, int h, const IsingParams& params);

double vertex_count(int b, int h);
// 2h/n
double dirichlet_bound_critical(int b, int h);
// (2/n)((1+eps)^{h+1} - 1)/eps
double dirichlet_bound_near_critical(int b, int h, double eps);
// 6b / ((b-1) n h^2)
double gap_upper_critical(int b, int h);
// (4b/(b-1)) eps^2 / (n (1+eps)^h); meant for eps >= 8/h
double gap_upper_eps_large(int b, int h, double eps);
// (3 e^7 b/(b-1)) / (n h^2); meant for eps < 8/h
double gap_upper_eps_small(int b, int h);
// c1 ((1/eps) ^ h)^2 (1+eps)^h, with eps = 0 read as h^2
double relaxation_lower_transition(int h, double eps, double c1 = 1.0);
// (1/(4(b^ell+1))) (1 - alpha/(kappa (1-theta)(1-2 alpha)))
double block_gap_lower(int b, int ell, double alpha, double theta, double kappa);

}  // namespace closed_form

// Spectrum of the chain that holds with probability `hold`, otherwise picks
// coordinate j with probability nu[j] and moves it by its own chain.
std::vector<double> product_chain_eigenvalues(const std::vector<std::vector<double>>& spectra,
                                              const std::vector<double>& nu, double hold = 0.0);
MarkovKernel assemble_product_kernel(const std::vector<MarkovKernel>& parts, const std::vector<double>& nu,
                                     double hold = 0.0);

struct JstvResult {
  MarkovKernel projection;
  std::vector<MarkovKernel> restrictions;
  double projection_gap = 0.0;
  std::vector<double> restriction_gaps;
  double gap_min = 0.0;
  double gamma = 0.0;
  double bound = 0.0;
  std::vector<std::string> notes;
};

// cell[x] in 0..m-1 for each state; every cell must be non-empty.
JstvResult jstv_decompose(const MarkovKernel& k, const std::vector<int>& cell);

struct ContractionEstimate {
  double iota = 0.0;
  double std_error = 0.0;
  double gap_lower = 0.0;
};

// Estimates iota = max over the given pairs of E[dist(X_1, Y_1)] / dist(x, y)
// under the supplied one-step coupling. Pairs at distance 0 are skipped.
template <class State, class CoupledStep, class Metric>
ContractionEstimate contraction_gap_bound(const std::vector<std::pair<State, State>>& pairs, CoupledStep step,
                                          Metric dist, std::size_t trials, Rng& rng) {
  ContractionEstimate best;
  bool any = false;
  for (const auto& [x0, y0] : pairs) {
    const double d0 = dist(x0, y0);
    if (d0 <= 0.0) continue;
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
      State x = x0;
      State y = y0;
      step(x, y, rng);
      const double r = dist(x, y) / d0;
      sum += r;
      sum_sq += r * r;
    }
    const double n = static_cast<double>(trials);
    const double mean = sum / n;
    const double se = trials > 1 ? std::sqrt(std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0)) / n) : 0.0;
    if (!any || mean > best.iota) {
      best.iota = mean;
      best.std_error = se;
      any = true;
    }
  }
  best.gap_lower = 1.0 - best.iota;
  return best;
}

// (k/|W|) gap_B * inf_i inf_phi |B_i| gap_{B_i}^phi / multiplicity
double block_vs_single_site_bound(std::size_t block_count, std::size_t site_count, double gap_block,
                                  double min_scaled_block_gap, int multiplicity);

struct ScaledBlockGap {
  double value = 0.0;
  bool exhaustive = true;  // false: minimum over sampled boundary conditions
  std::size_t boundaries = 0;
};

// inf over blocks and boundary conditions phi of |B_i| times the single-site
// gap inside B_i with everything else frozen to phi. Boundaries with more
// than `max_enumerated` free neighbour spins are sampled `samples` times.
ScaledBlockGap min_scaled_block_gap(const TreeShape& shape, const BlockCover& cover, const IsingParams& params,
                                    const Pinning& pinning, int max_enumerated = 16, std::size_t samples = 256,
                                    std::uint64_t seed = 7);

}  // namespace treeglass
