#include "treeglass/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "treeglass/gibbs.hpp"

namespace treeglass {

namespace {

std::size_t idx(VertexId v) { return static_cast<std::size_t>(v); }

int neighbour_sum(const Forest& forest, const SpinConfig& config, VertexId site) {
  int s = 0;
  const VertexId p = forest.parent(site);
  if (p != kNoVertex) s += config.spin(p);
  for (VertexId c : forest.children(site)) s += config.spin(c);
  return s;
}

void set_heat_bath(SpinConfig& config, const Forest& forest, VertexId site, const IsingParams& params, double u,
                   double field) {
  config.set(site, u < heat_bath_prob(forest, config, site, params, field) ? 1 : -1);
}

std::vector<VertexId> free_sites(const Forest& forest, const Pinning& pinning) {
  std::vector<VertexId> out;
  for (VertexId v : forest.top_down()) {
    if (pinning[idx(v)] == 0) out.push_back(v);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Upward pass: log-odds of each block vertex given everything below it and
// its out-of-block neighbours (the in-block parent excluded).
std::vector<double> upward_messages(const SpinConfig& config, const PreparedBlock& block, const IsingParams& params) {
  const std::size_t k = block.size();
  std::vector<double> x(k, 0.0);
  for (std::size_t i = k; i-- > 0;) {
    for (std::size_t j = block.outside_offset[i]; j < block.outside_offset[i + 1]; ++j) {
      x[i] += 2.0 * params.beta * config.spin(block.outside[j]);
    }
    if (block.parent[i] >= 0) x[static_cast<std::size_t>(block.parent[i])] += f_func(x[i], params.theta);
  }
  return x;
}

}  // namespace

double heat_bath_prob(const Forest& forest, const SpinConfig& config, VertexId site, const IsingParams& params,
                      double field) {
  return 0.5 * (1.0 + std::tanh(params.beta * neighbour_sum(forest, config, site) + field));
}

void heat_bath_step(SpinConfig& config, const Forest& forest, VertexId site, const Pinning& pinning,
                    const IsingParams& params, double u, double field) {
  if (pinning[idx(site)] != 0) throw std::invalid_argument("heat_bath_step: site is frozen");
  if (!forest.present(site)) throw std::invalid_argument("heat_bath_step: site not in forest");
  set_heat_bath(config, forest, site, params, u, field);
}

PreparedBlock prepare_block(const Forest& forest, std::span<const VertexId> vertices, const Pinning& pinning) {
  std::vector<int> pos(forest.size(), -1);
  std::vector<bool> member(forest.size(), false);
  for (VertexId v : vertices) {
    if (v < 0 || idx(v) >= forest.size()) throw std::invalid_argument("prepare_block: vertex out of range");
    if (forest.present(v) && pinning[idx(v)] == 0) member[idx(v)] = true;
  }
  PreparedBlock b;
  for (VertexId v : forest.top_down()) {
    if (!member[idx(v)]) continue;
    pos[idx(v)] = static_cast<int>(b.order.size());
    b.order.push_back(v);
  }
  b.outside_offset.push_back(0);
  for (VertexId v : b.order) {
    const VertexId p = forest.parent(v);
    b.parent.push_back(p != kNoVertex ? pos[idx(p)] : -1);
    if (p != kNoVertex && !member[idx(p)]) b.outside.push_back(p);
    for (VertexId c : forest.children(v)) {
      if (!member[idx(c)]) b.outside.push_back(c);
    }
    b.outside_offset.push_back(b.outside.size());
  }
  return b;
}

void block_update(SpinConfig& config, const PreparedBlock& block, const IsingParams& params,
                  std::span<const double> uniform_by_vertex) {
  const auto x = upward_messages(config, block, params);
  for (std::size_t i = 0; i < block.size(); ++i) {
    double lo = x[i];
    if (block.parent[i] >= 0) lo += 2.0 * params.beta * config.spin(block.order[static_cast<std::size_t>(block.parent[i])]);
    const double p = 0.5 * (1.0 + std::tanh(0.5 * lo));
    config.set(block.order[i], uniform_by_vertex[idx(block.order[i])] < p ? 1 : -1);
  }
}

void block_update(SpinConfig& config, const PreparedBlock& block, const IsingParams& params, Rng& rng) {
  std::vector<double> u(config.size(), 0.0);
  for (VertexId v : block.order) u[idx(v)] = rng.uniform();
  block_update(config, block, params, u);
}

std::vector<double> block_law(const SpinConfig& config, const PreparedBlock& block, const IsingParams& params) {
  const std::size_t k = block.size();
  if (k > 24) throw SizeGuardError("block_law: block too large to enumerate");
  const auto x = upward_messages(config, block, params);
  std::vector<double> p_plus_given(2 * k);  // [2i] parent -, [2i+1] parent +
  for (std::size_t i = 0; i < k; ++i) {
    if (block.parent[i] >= 0) {
      p_plus_given[2 * i] = 0.5 * (1.0 + std::tanh(0.5 * x[i] - params.beta));
      p_plus_given[2 * i + 1] = 0.5 * (1.0 + std::tanh(0.5 * x[i] + params.beta));
    } else {
      p_plus_given[2 * i] = p_plus_given[2 * i + 1] = 0.5 * (1.0 + std::tanh(0.5 * x[i]));
    }
  }
  std::vector<double> law(std::size_t{1} << k);
  for (std::uint64_t a = 0; a < law.size(); ++a) {
    double w = 1.0;
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t up =
          block.parent[i] >= 0 ? static_cast<std::size_t>((a >> static_cast<unsigned>(block.parent[i])) & 1U) : 1;
      const double p = p_plus_given[2 * i + up];
      w *= (a >> i) & 1U ? p : 1.0 - p;
    }
    law[a] = w;
  }
  return law;
}

std::vector<int> BlockCover::coverage(std::size_t n) const {
  std::vector<int> c(n, 0);
  for (const auto& b : blocks) {
    for (VertexId v : b) ++c[idx(v)];
  }
  return c;
}

int BlockCover::multiplicity(std::size_t n) const {
  int m = 0;
  for (int c : coverage(n)) m = std::max(m, c);
  return m;
}

BlockCover paper_block_cover(const TreeShape& shape, int ell, int r) {
  if (ell < 1 || r < 1 || ell > r || r > shape.height()) {
    throw std::invalid_argument("paper_block_cover: need 1 <= ell <= r <= h");
  }
  BlockCover cover;
  cover.ell = ell;
  cover.r = r;
  cover.blocks.push_back(shape.subtree(shape.root(), r));
  for (VertexId v : shape.level_vertices(ell)) cover.blocks.push_back(shape.subtree(v, r));
  return cover;
}

BlockCover paper_block_cover(const TreeShape& shape, double alpha) {
  if (!(alpha > 0.0 && alpha <= 0.5)) throw std::invalid_argument("paper_block_cover: alpha must lie in (0, 1/2]");
  const int ell = static_cast<int>(std::floor(alpha * shape.height() + 1e-9));
  if (ell < 1) throw std::invalid_argument("paper_block_cover: height too small for this alpha");
  return paper_block_cover(shape, ell, shape.height() - ell);
}

SpeedupSpec make_speedup_spec(const TreeShape& shape, int ell, int r) {
  if (ell < 0 || ell >= r || r > shape.height()) throw std::invalid_argument("make_speedup_spec: need 0 <= ell < r <= h");
  const std::size_t n = shape.size();
  SpeedupSpec s;
  s.ell = ell;
  s.r = r;
  s.in_w.assign(n, false);
  s.in_f.assign(n, false);
  s.in_g.assign(n, false);
  s.block_of.assign(n, -1);
  s.top = shape.level_vertices(ell);
  for (std::size_t i = 0; i < s.top.size(); ++i) {
    const VertexId v = s.top[i];
    VertexId w = v;
    for (int k = ell; k < r; ++k) w = shape.child(w, 0);
    s.w.push_back(w);
    s.in_w[idx(w)] = true;
    s.block_of[idx(w)] = static_cast<int>(i);

    std::vector<VertexId> block;
    for (VertexId x : shape.subtree(v)) {
      if (x == w || !shape.is_ancestor(w, x)) block.push_back(x);
    }
    s.blocks.push_back(std::move(block));

    std::vector<VertexId> path;
    for (VertexId x = w;; x = shape.parent(x)) {
      path.insert(path.begin(), x);
      if (x == v) break;
    }
    for (VertexId x : path) s.in_f[idx(x)] = true;
    s.paths.push_back(std::move(path));
    for (VertexId x : shape.subtree(w)) {
      s.in_f[idx(x)] = true;
      s.in_g[idx(x)] = true;
    }
  }
  s.f_forest = shape.forest().induced(s.in_f);
  return s;
}

std::vector<PreparedBlock> prepare_speedup_blocks(const TreeShape& shape, const SpeedupSpec& spec) {
  const Pinning none(shape.size(), 0);
  std::vector<PreparedBlock> out;
  for (const auto& b : spec.blocks) out.push_back(prepare_block(shape.forest(), b, none));
  return out;
}

void speedup_step(SpinConfig& config, const TreeShape& shape, const SpeedupSpec& spec,
                  const std::vector<PreparedBlock>& prepared, const IsingParams& params, Rng& rng) {
  const auto u = static_cast<VertexId>(rng.below(shape.size()));
  const int b = spec.block_of[idx(u)];
  if (b >= 0) {
    block_update(config, prepared[static_cast<std::size_t>(b)], params, rng);
  } else {
    set_heat_bath(config, shape.forest(), u, params, rng.uniform(), 0.0);
  }
}

void grand_coupling_step(std::span<SpinConfig> configs, const Forest& forest, const Pinning& pinning,
                         const IsingParams& params, Rng& rng) {
  const auto sites = free_sites(forest, pinning);
  if (sites.empty()) return;
  const VertexId site = sites[rng.below(sites.size())];
  const double u = rng.uniform();
  for (SpinConfig& c : configs) set_heat_bath(c, forest, site, params, u, 0.0);
}

void run_single_site(SpinConfig& config, const Forest& forest, const Pinning& pinning, const IsingParams& params,
                     Rng& rng, std::uint64_t steps) {
  const auto sites = free_sites(forest, pinning);
  if (sites.empty()) return;
  for (std::uint64_t k = 0; k < steps; ++k) {
    const VertexId site = sites[rng.below(sites.size())];
    set_heat_bath(config, forest, site, params, rng.uniform(), 0.0);
  }
}

void run_continuous(SpinConfig& config, const Forest& forest, const Pinning& pinning, const IsingParams& params,
                    Rng& rng, double t) {
  const auto sites = free_sites(forest, pinning);
  if (sites.empty()) return;
  const double rate = static_cast<double>(sites.size());
  for (double clock = rng.exponential(rate); clock <= t; clock += rng.exponential(rate)) {
    const VertexId site = sites[rng.below(sites.size())];
    set_heat_bath(config, forest, site, params, rng.uniform(), 0.0);
  }
}

void run_speedup_continuous(SpinConfig& config, const TreeShape& shape, const SpeedupSpec& spec,
                            const std::vector<PreparedBlock>& prepared, const IsingParams& params, Rng& rng, double t) {
  const double rate = static_cast<double>(shape.size());
  for (double clock = rng.exponential(rate); clock <= t; clock += rng.exponential(rate)) {
    speedup_step(config, shape, spec, prepared, params, rng);
  }
}

double speedup_forest_coupling_time(const TreeShape& shape, const SpeedupSpec& spec, const IsingParams& params,
                                    Rng& rng, double t_max) {
  const std::size_t n = shape.size();
  const Pinning none(n, 0);
  const Forest& tree = shape.forest();
  std::vector<PreparedBlock> x_blocks;
  std::vector<PreparedBlock> y_blocks;
  for (std::size_t i = 0; i < spec.blocks.size(); ++i) {
    x_blocks.push_back(prepare_block(tree, spec.blocks[i], none));
    y_blocks.push_back(prepare_block(spec.f_forest, spec.paths[i], none));
  }
  SpinConfig x(n, 1);
  SpinConfig y(n, 1);
  std::vector<double> uniforms(n, 0.0);
  const double rate = static_cast<double>(n);
  for (double clock = rng.exponential(rate); clock <= t_max; clock += rng.exponential(rate)) {
    const auto u = static_cast<VertexId>(rng.below(n));
    const int b = spec.block_of[idx(u)];
    if (b >= 0) {
      const auto& xb = x_blocks[static_cast<std::size_t>(b)];
      for (VertexId v : xb.order) uniforms[idx(v)] = rng.uniform();
      block_update(x, xb, params, uniforms);
      block_update(y, y_blocks[static_cast<std::size_t>(b)], params, uniforms);
      if (x.spin(u) != y.spin(u)) return clock;
    } else if (spec.in_f[idx(u)]) {
      const double v = rng.uniform();
      set_heat_bath(x, tree, u, params, v, 0.0);
      set_heat_bath(y, spec.f_forest, u, params, v, 0.0);
      if (spec.in_g[idx(u)] && x.spin(u) != y.spin(u)) return clock;
    } else {
      set_heat_bath(x, tree, u, params, rng.uniform(), 0.0);
    }
  }
  return std::numeric_limits<double>::infinity();
}

void apply_site_update(DistVector& dist, const StateSpace& space, VertexId site, const IsingParams& params) {
  const int pos = space.position(site);
  if (pos < 0) throw std::invalid_argument("apply_site_update: site is not free");
  if (dist.size() != space.state_count()) throw std::invalid_argument("apply_site_update: size mismatch");
  const Forest& forest = space.forest();
  std::vector<VertexId> nbrs;
  if (forest.parent(site) != kNoVertex) nbrs.push_back(forest.parent(site));
  for (VertexId c : forest.children(site)) nbrs.push_back(c);
  const std::uint64_t bit = std::uint64_t{1} << pos;
  for (std::uint64_t s = 0; s < dist.size(); ++s) {
    if (s & bit) continue;
    int sum = 0;
    for (VertexId w : nbrs) sum += space.spin(s, w);
    const double p = 0.5 * (1.0 + std::tanh(params.beta * sum));
    const double mass = dist[s] + dist[s | bit];
    dist[s | bit] = mass * p;
    dist[s] = mass * (1.0 - p);
  }
}

void apply_block_update(DistVector& dist, const StateSpace& space, const PreparedBlock& block,
                        const IsingParams& params) {
  if (dist.size() != space.state_count()) throw std::invalid_argument("apply_block_update: size mismatch");
  std::vector<int> bitpos;
  std::uint64_t mask = 0;
  for (VertexId v : block.order) {
    const int p = space.position(v);
    if (p < 0) throw std::invalid_argument("apply_block_update: block vertex is not free");
    bitpos.push_back(p);
    mask |= std::uint64_t{1} << p;
  }
  DistVector out(dist.size(), 0.0);
  for (std::uint64_t s = 0; s < dist.size(); ++s) {
    if (dist[s] == 0.0) continue;
    const auto law = block_law(space.decode(s), block, params);
    const std::uint64_t base = s & ~mask;
    for (std::uint64_t a = 0; a < law.size(); ++a) {
      std::uint64_t t = base;
      for (std::size_t i = 0; i < bitpos.size(); ++i) {
        if ((a >> i) & 1U) t |= std::uint64_t{1} << bitpos[i];
      }
      out[t] += dist[s] * law[a];
    }
  }
  dist = std::move(out);
}

DistVector censored_run(const StateSpace& space, const SpinConfig& start, const Schedule& schedule,
                        const std::vector<bool>& censored, const IsingParams& params) {
  for (VertexId v : space.free_vertices()) {
    if (start.spin(v) != 1) throw std::invalid_argument("censored_run: start must be the all-plus configuration");
  }
  if (!censored.empty() && censored.size() != schedule.sites.size()) {
    throw std::invalid_argument("censored_run: censor mask length differs from the schedule");
  }
  DistVector dist(space.state_count(), 0.0);
  dist.back() = 1.0;
  for (std::size_t i = 0; i < schedule.sites.size(); ++i) {
    if (!censored.empty() && censored[i]) continue;
    apply_site_update(dist, space, schedule.sites[i], params);
  }
  return dist;
}

}  // namespace treeglass
