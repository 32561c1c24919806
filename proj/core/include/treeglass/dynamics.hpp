#pragma once

// Glauber-type chains as in-place step functions: single-site heat bath,
// exact block updates, block covers, the speed-up chain with its forest
// coupling, the grand coupling and censored schedules.

#include <cstdint>
#include <span>
#include <vector>

#include "treeglass/random.hpp"
#include "treeglass/tree.hpp"

namespace treeglass {

// P(sigma(site) = +1 | neighbours) = (1 + tanh(beta * S + field)) / 2, with S
// the sum of the neighbour spins in `forest`.
double heat_bath_prob(const Forest& forest, const SpinConfig& config, VertexId site, const IsingParams& params,
                      double field = 0.0);

// Monotone rule: the new spin is +1 iff u < P(+). Throws on a pinned site.
void heat_bath_step(SpinConfig& config, const Forest& forest, VertexId site, const Pinning& pinning,
                    const IsingParams& params, double u, double field = 0.0);

// A block ready for conditional resampling: its free vertices in top-down
// order, in-block parents, and the neighbours it sees outside the block.
struct PreparedBlock {
  std::vector<VertexId> order;
  std::vector<int> parent;            // index into order, or -1
  std::vector<std::size_t> outside_offset;
  std::vector<VertexId> outside;      // out-of-block neighbours, CSR by order index

  std::size_t size() const { return order.size(); }
};

PreparedBlock prepare_block(const Forest& forest, std::span<const VertexId> vertices, const Pinning& pinning);

// Exact resample of the block from the Gibbs law given the rest of `config`:
// an upward pass of log-odds messages, then top-down sampling. Vertex v reads
// uniform_by_vertex[v], so two configurations updated with the same array
// are monotonically coupled.
void block_update(SpinConfig& config, const PreparedBlock& block, const IsingParams& params,
                  std::span<const double> uniform_by_vertex);
void block_update(SpinConfig& config, const PreparedBlock& block, const IsingParams& params, Rng& rng);

// Conditional law of the block given `config` off the block; entry k is the
// probability that order[i] is + exactly for the bits i set in k.
std::vector<double> block_law(const SpinConfig& config, const PreparedBlock& block, const IsingParams& params);

struct BlockCover {
  std::vector<std::vector<VertexId>> blocks;
  int ell = 0;
  int r = 0;

  // Number of blocks containing each vertex.
  std::vector<int> coverage(std::size_t n) const;
  int multiplicity(std::size_t n) const;
};

// {B(rho, r)} together with {B(v, r) : v in H_ell}, where B(v, k) has k
// levels. The root block comes first.
BlockCover paper_block_cover(const TreeShape& shape, int ell, int r);
// ell = floor(alpha h), r = h - ell.
BlockCover paper_block_cover(const TreeShape& shape, double alpha);

struct SpeedupSpec {
  int ell = 0;
  int r = 0;
  std::vector<VertexId> top;           // H_ell
  std::vector<VertexId> w;             // w[i] is the chosen descendant of top[i] on H_r
  std::vector<std::vector<VertexId>> blocks;  // B_v = (T_v \ T_{w_v}) + w_v
  std::vector<std::vector<VertexId>> paths;   // L_v, from v down to w_v
  std::vector<bool> in_w;
  std::vector<bool> in_f;
  std::vector<bool> in_g;
  std::vector<int> block_of;           // index of v with w_v == u, else -1
  Forest f_forest;
};

// w_v is the leftmost descendant of v on level r.
SpeedupSpec make_speedup_spec(const TreeShape& shape, int ell, int r);

// One discrete step: a uniform vertex u out of all n; u = w_v resamples B_v,
// any other u gets a heat-bath update. Free boundary only.
void speedup_step(SpinConfig& config, const TreeShape& shape, const SpeedupSpec& spec,
                  const std::vector<PreparedBlock>& prepared, const IsingParams& params, Rng& rng);
std::vector<PreparedBlock> prepare_speedup_blocks(const TreeShape& shape, const SpeedupSpec& spec);

// Heat-bath update of one uniformly chosen free site, the same uniform shared
// by every configuration.
void grand_coupling_step(std::span<SpinConfig> configs, const Forest& forest, const Pinning& pinning,
                         const IsingParams& params, Rng& rng);

// Runs the single-site chain for `steps` discrete steps, sites uniform over
// the free vertices.
void run_single_site(SpinConfig& config, const Forest& forest, const Pinning& pinning, const IsingParams& params,
                     Rng& rng, std::uint64_t steps);
// Continuous time: every free vertex carries a rate-1 clock.
void run_continuous(SpinConfig& config, const Forest& forest, const Pinning& pinning, const IsingParams& params,
                    Rng& rng, double t);
void run_speedup_continuous(SpinConfig& config, const TreeShape& shape, const SpeedupSpec& spec,
                            const std::vector<PreparedBlock>& prepared, const IsingParams& params, Rng& rng, double t);

// Coupling of the speed-up chain X on T with the chain Y restricted to the
// forest F, both from all-plus, in continuous time. Returns the first time X
// and Y disagree on G, or +inf if that does not happen before t_max.
double speedup_forest_coupling_time(const TreeShape& shape, const SpeedupSpec& spec, const IsingParams& params,
                                    Rng& rng, double t_max);

using DistVector = std::vector<double>;

// Exact push-forward of a distribution over `space` through one update.
void apply_site_update(DistVector& dist, const StateSpace& space, VertexId site, const IsingParams& params);
void apply_block_update(DistVector& dist, const StateSpace& space, const PreparedBlock& block,
                        const IsingParams& params);

struct Schedule {
  std::vector<VertexId> sites;
};

// Law after applying the sites of `schedule` whose censor flag is false,
// starting from the top configuration (all free vertices +1). Any other
// start is refused.
DistVector censored_run(const StateSpace& space, const SpinConfig& start, const Schedule& schedule,
                        const std::vector<bool>& censored, const IsingParams& params);

}  // namespace treeglass
