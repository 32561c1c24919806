#pragma once

// Distances between laws, exact and sampled mixing curves, and stochastic
// domination on the coordinatewise order of spin configurations.

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "treeglass/dynamics.hpp"
#include "treeglass/gibbs.hpp"
#include "treeglass/spectral.hpp"

namespace treeglass {

// (1/2) sum |p - q|
double tv_distance(std::span<const double> p, std::span<const double> q);
// sup_A |p(A) - q(A)|, realised by A = {p > q}
double tv_distance_sup(std::span<const double> p, std::span<const double> q);

struct Hellinger {
  double affinity = 0.0;  // I_H = sum sqrt(p q)
  double distance = 0.0;  // d_H = sqrt(2 - 2 I_H)
};
Hellinger hellinger(std::span<const double> p, std::span<const double> q);

// Law of independent coordinates, index = sum_j x_j * prod_{i<j} |part_i|.
DistVector product_distribution(const std::vector<DistVector>& parts);

enum class TimeMode { Discrete, Continuous };

struct MixingReport {
  TimeMode mode = TimeMode::Discrete;
  bool exact = true;
  std::vector<double> times;
  std::vector<double> tv;
  std::vector<double> tv_error;  // truncation band (continuous time)
  std::vector<double> epsilons;
  std::vector<std::optional<double>> tmix;  // first grid time with tv <= eps
};

struct TmixOptions {
  TimeMode mode = TimeMode::Discrete;
  double t_max = 100.0;
  double dt = 1.0;     // grid spacing (continuous time)
  double rate = 0.0;   // clock rate; 0 means one clock per free vertex
  double tail = 1e-12;
};

// Evolves `start` under `k` and records the TV distance to pi on a time grid.
// Continuous time is uniformisation: H_t = sum_j Poisson(rate t; j) P^j.
MixingReport exact_tmix(const MarkovKernel& k, const DistVector& start, const std::vector<double>& epsilons,
                        const TmixOptions& options = {});
// Max over point-mass starts, point by point on the grid.
MixingReport exact_tmix_worst(const MarkovKernel& k, const std::vector<double>& epsilons,
                              const TmixOptions& options = {});

// Least-squares slope of log tv over grid indices [first, last).
double log_decay_slope(const std::vector<double>& times, const std::vector<double>& tv, std::size_t first,
                       std::size_t last);

// Exact TV between the laws of the magnetisation and of the vector of level
// sums under p and q (both over `space`). Each is a lower bound on tv(p, q).
struct ProjectedTv {
  double magnetization = 0.0;
  double level_sums = 0.0;
};
ProjectedTv projected_tv(const TreeShape& shape, const StateSpace& space, std::span<const double> p,
                         std::span<const double> q);

struct McTvEstimate {
  double magnetization = 0.0;
  double level_sums = 0.0;
  double estimate = 0.0;  // max of the two, a lower bound on the true TV
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t replicas = 0;
};

// Runs `advance` from `start` on independent replicas (replica i uses stream
// i of `seed`) and compares the empirical statistic laws with those of the
// reference Gibbs table. The CI is a percentile bootstrap.
McTvEstimate mc_tv_estimate(const TreeShape& shape, const std::function<void(SpinConfig&, Rng&)>& advance,
                            const SpinConfig& start, const GibbsTable& reference, std::size_t replicas,
                            std::uint64_t seed, std::size_t bootstrap = 200);

struct DominationResult {
  bool dominated = false;
  bool definitive = false;  // max-flow certificate rather than the event family
  double flow = 0.0;
  double max_violation = 0.0;
};

// Does q dominate p (p below q) for the order x <= y iff the bits of x are a
// subset of those of y? Max-flow certificate up to 2^10 states; beyond that,
// only the events {sigma >= eta} and the single-coordinate events are checked.
DominationResult stochastic_domination_check(std::span<const double> p, std::span<const double> q,
                                             double tolerance = 1e-9);

struct ProjectionTvCheck {
  double tv = 0.0;
  double bound = 0.0;
};
// TV between the product of free Gibbs measures on the subtrees T_{w_v} and
// the marginal on G of the free measure on T, against b^{2 ell} theta^{2(r-ell)}.
ProjectionTvCheck subforest_projection_tv(const TreeShape& shape, const SpeedupSpec& spec, const IsingParams& params);

}  // namespace treeglass
