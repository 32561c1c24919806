#include "treeglass/mixing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

namespace treeglass {

namespace {

void check_same(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("distributions over different state spaces");
}

double poisson_pmf(double lambda, std::size_t j) {
  if (lambda == 0.0) return j == 0 ? 1.0 : 0.0;
  const double jd = static_cast<double>(j);
  return std::exp(-lambda + jd * std::log(lambda) - std::lgamma(jd + 1.0));
}

void fill_tmix(MixingReport& rep) {
  rep.tmix.clear();
  for (double eps : rep.epsilons) {
    std::optional<double> hit;
    for (std::size_t i = 0; i < rep.times.size(); ++i) {
      if (rep.tv[i] + rep.tv_error[i] <= eps) {
        hit = rep.times[i];
        break;
      }
    }
    rep.tmix.push_back(hit);
  }
}

// Dinic's algorithm on a graph with real capacities.
class MaxFlow {
 public:
  explicit MaxFlow(std::size_t n) : head_(n, -1), level_(n), it_(n) {}

  void add_edge(std::size_t a, std::size_t b, double cap) {
    edges_.push_back({b, cap, head_[a]});
    head_[a] = static_cast<int>(edges_.size()) - 1;
    edges_.push_back({a, 0.0, head_[b]});
    head_[b] = static_cast<int>(edges_.size()) - 1;
  }

  double run(std::size_t s, std::size_t t) {
    double total = 0.0;
    while (bfs(s, t)) {
      for (std::size_t v = 0; v < head_.size(); ++v) it_[v] = head_[v];
      while (true) {
        const double f = dfs(s, t, std::numeric_limits<double>::infinity());
        if (f <= kEps) break;
        total += f;
      }
    }
    return total;
  }

 private:
  static constexpr double kEps = 1e-15;
  struct Edge {
    std::size_t to;
    double cap;
    int next;
  };

  bool bfs(std::size_t s, std::size_t t) {
    std::fill(level_.begin(), level_.end(), -1);
    std::vector<std::size_t> queue{s};
    level_[s] = 0;
    for (std::size_t i = 0; i < queue.size(); ++i) {
      const std::size_t v = queue[i];
      for (int e = head_[v]; e >= 0; e = edges_[static_cast<std::size_t>(e)].next) {
        const Edge& ed = edges_[static_cast<std::size_t>(e)];
        if (ed.cap > kEps && level_[ed.to] < 0) {
          level_[ed.to] = level_[v] + 1;
          queue.push_back(ed.to);
        }
      }
    }
    return level_[t] >= 0;
  }

  double dfs(std::size_t v, std::size_t t, double pushed) {
    if (v == t) return pushed;
    for (int& e = it_[v]; e >= 0; e = edges_[static_cast<std::size_t>(e)].next) {
      Edge& ed = edges_[static_cast<std::size_t>(e)];
      if (ed.cap <= kEps || level_[ed.to] != level_[v] + 1) continue;
      const double f = dfs(ed.to, t, std::min(pushed, ed.cap));
      if (f > kEps) {
        ed.cap -= f;
        edges_[static_cast<std::size_t>(e) ^ 1U].cap += f;
        return f;
      }
    }
    return 0.0;
  }

  std::vector<Edge> edges_;
  std::vector<int> head_;
  std::vector<int> level_;
  std::vector<int> it_;
};

// Statistic keys: magnetisation, and the vector of level sums.
struct Statistics {
  int magnetization = 0;
  std::vector<int> levels;
};

Statistics statistics_of(const TreeShape& shape, std::span<const std::int8_t> spins) {
  Statistics s;
  s.levels.assign(static_cast<std::size_t>(shape.height()) + 1, 0);
  for (std::size_t v = 0; v < shape.size(); ++v) {
    s.magnetization += spins[v];
    s.levels[static_cast<std::size_t>(shape.level(static_cast<VertexId>(v)))] += spins[v];
  }
  return s;
}

Statistics statistics_of(const TreeShape& shape, const SpinConfig& c) {
  std::vector<std::int8_t> spins(shape.size());
  for (std::size_t v = 0; v < shape.size(); ++v) spins[v] = static_cast<std::int8_t>(c.spin(static_cast<VertexId>(v)));
  return statistics_of(shape, spins);
}

template <class Key>
double tv_of_maps(const std::map<Key, double>& a, const std::map<Key, double>& b) {
  double s = 0.0;
  for (const auto& [k, v] : a) {
    auto it = b.find(k);
    s += std::abs(v - (it == b.end() ? 0.0 : it->second));
  }
  for (const auto& [k, v] : b) {
    if (a.find(k) == a.end()) s += v;
  }
  return 0.5 * s;
}

}  // namespace

double tv_distance(std::span<const double> p, std::span<const double> q) {
  check_same(p, q);
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

double tv_distance_sup(std::span<const double> p, std::span<const double> q) {
  check_same(p, q);
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::max(0.0, p[i] - q[i]);
  return s;
}

Hellinger hellinger(std::span<const double> p, std::span<const double> q) {
  check_same(p, q);
  Hellinger h;
  for (std::size_t i = 0; i < p.size(); ++i) h.affinity += std::sqrt(p[i] * q[i]);
  h.distance = std::sqrt(std::max(0.0, 2.0 - 2.0 * h.affinity));
  return h;
}

DistVector product_distribution(const std::vector<DistVector>& parts) {
  DistVector out{1.0};
  for (const auto& part : parts) {
    DistVector next(out.size() * part.size());
    for (std::size_t j = 0; j < part.size(); ++j) {
      for (std::size_t i = 0; i < out.size(); ++i) next[i + j * out.size()] = out[i] * part[j];
    }
    out.swap(next);
  }
  return out;
}

MixingReport exact_tmix(const MarkovKernel& k, const DistVector& start, const std::vector<double>& epsilons,
                        const TmixOptions& options) {
  if (start.size() != k.size()) throw std::invalid_argument("exact_tmix: start has the wrong size");
  if (k.size() > kMaxKernelStates) throw SizeGuardError("exact_tmix: state space too large");
  MixingReport rep;
  rep.mode = options.mode;
  rep.epsilons = epsilons;
  const auto& pi = k.pi();
  if (options.mode == TimeMode::Discrete) {
    DistVector mu = start;
    const auto steps = static_cast<std::size_t>(std::floor(options.t_max));
    for (std::size_t t = 0; t <= steps; ++t) {
      if (t > 0) mu = k.apply_left(mu);
      rep.times.push_back(static_cast<double>(t));
      rep.tv.push_back(tv_distance(mu, pi));
      rep.tv_error.push_back(0.0);
    }
    fill_tmix(rep);
    return rep;
  }

  double rate = options.rate;
  if (rate <= 0.0) rate = k.space() ? static_cast<double>(std::max<std::size_t>(k.space()->free_count(), 1)) : 1.0;
  if (!(options.dt > 0.0)) throw std::invalid_argument("exact_tmix: dt must be positive");
  const auto points = static_cast<std::size_t>(std::floor(options.t_max / options.dt + 1e-9)) + 1;
  for (std::size_t i = 0; i < points; ++i) rep.times.push_back(static_cast<double>(i) * options.dt);
  const double lambda_max = rate * rep.times.back();
  std::size_t jmax = 0;
  for (double cdf = 0.0; cdf < 1.0 - options.tail || static_cast<double>(jmax) < lambda_max; ++jmax) {
    cdf += poisson_pmf(lambda_max, jmax);
    if (jmax > 100000000) throw std::runtime_error("exact_tmix: Poisson truncation did not terminate");
  }
  std::vector<DistVector> acc(points, DistVector(k.size(), 0.0));
  std::vector<double> mass(points, 0.0);
  DistVector mu = start;
  for (std::size_t j = 0; j <= jmax; ++j) {
    if (j > 0) mu = k.apply_left(mu);
    for (std::size_t i = 0; i < points; ++i) {
      const double w = poisson_pmf(rate * rep.times[i], j);
      if (w == 0.0) continue;
      mass[i] += w;
      for (std::size_t x = 0; x < mu.size(); ++x) acc[i][x] += w * mu[x];
    }
  }
  for (std::size_t i = 0; i < points; ++i) {
    rep.tv.push_back(tv_distance(acc[i], pi));
    rep.tv_error.push_back(std::max(0.0, 1.0 - mass[i]));
  }
  fill_tmix(rep);
  return rep;
}

MixingReport exact_tmix_worst(const MarkovKernel& k, const std::vector<double>& epsilons, const TmixOptions& options) {
  MixingReport worst;
  for (std::size_t x = 0; x < k.size(); ++x) {
    DistVector start(k.size(), 0.0);
    start[x] = 1.0;
    auto rep = exact_tmix(k, start, epsilons, options);
    if (x == 0) {
      worst = std::move(rep);
      continue;
    }
    for (std::size_t i = 0; i < worst.tv.size(); ++i) {
      worst.tv[i] = std::max(worst.tv[i], rep.tv[i]);
      worst.tv_error[i] = std::max(worst.tv_error[i], rep.tv_error[i]);
    }
  }
  fill_tmix(worst);
  return worst;
}

double log_decay_slope(const std::vector<double>& times, const std::vector<double>& tv, std::size_t first,
                       std::size_t last) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  double n = 0.0;
  for (std::size_t i = first; i < last && i < tv.size(); ++i) {
    if (!(tv[i] > 0.0)) continue;
    const double y = std::log(tv[i]);
    sx += times[i];
    sy += y;
    sxx += times[i] * times[i];
    sxy += times[i] * y;
    n += 1.0;
  }
  if (n < 2.0) throw std::invalid_argument("log_decay_slope: need at least two positive points");
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

ProjectedTv projected_tv(const TreeShape& shape, const StateSpace& space, std::span<const double> p,
                         std::span<const double> q) {
  check_same(p, q);
  if (p.size() != space.state_count()) throw std::invalid_argument("projected_tv: size mismatch");
  std::map<int, double> mp, mq;
  std::map<std::vector<int>, double> lp, lq;
  std::vector<std::int8_t> spins(space.forest().size());
  for (std::uint64_t s = 0; s < p.size(); ++s) {
    space.decode_into(s, spins);
    const auto st = statistics_of(shape, spins);
    mp[st.magnetization] += p[s];
    mq[st.magnetization] += q[s];
    lp[st.levels] += p[s];
    lq[st.levels] += q[s];
  }
  return {tv_of_maps(mp, mq), tv_of_maps(lp, lq)};
}

McTvEstimate mc_tv_estimate(const TreeShape& shape, const std::function<void(SpinConfig&, Rng&)>& advance,
                            const SpinConfig& start, const GibbsTable& reference, std::size_t replicas,
                            std::uint64_t seed, std::size_t bootstrap) {
  if (replicas == 0) throw std::invalid_argument("mc_tv_estimate: need at least one replica");
  std::map<int, double> ref_m;
  std::map<std::vector<int>, double> ref_l;
  std::vector<std::int8_t> spins(reference.space.forest().size());
  for (std::uint64_t s = 0; s < reference.size(); ++s) {
    reference.space.decode_into(s, spins);
    const auto st = statistics_of(shape, spins);
    ref_m[st.magnetization] += reference.prob[s];
    ref_l[st.levels] += reference.prob[s];
  }
  std::vector<Statistics> samples;
  samples.reserve(replicas);
  for (std::size_t i = 0; i < replicas; ++i) {
    Rng rng(seed, i);
    SpinConfig c = start;
    advance(c, rng);
    samples.push_back(statistics_of(shape, c));
  }
  auto evaluate = [&](const std::vector<std::size_t>& pick) {
    std::map<int, double> em;
    std::map<std::vector<int>, double> el;
    const double w = 1.0 / static_cast<double>(pick.size());
    for (std::size_t i : pick) {
      em[samples[i].magnetization] += w;
      el[samples[i].levels] += w;
    }
    return std::pair{tv_of_maps(em, ref_m), tv_of_maps(el, ref_l)};
  };
  std::vector<std::size_t> all(replicas);
  std::iota(all.begin(), all.end(), 0);
  McTvEstimate out;
  out.replicas = replicas;
  std::tie(out.magnetization, out.level_sums) = evaluate(all);
  out.estimate = std::max(out.magnetization, out.level_sums);
  std::vector<double> boot;
  Rng rng(seed, replicas + 0x626f6f74ULL);
  std::vector<std::size_t> pick(replicas);
  for (std::size_t b = 0; b < bootstrap; ++b) {
    for (auto& i : pick) i = rng.below(replicas);
    const auto [m, l] = evaluate(pick);
    boot.push_back(std::max(m, l));
  }
  if (!boot.empty()) {
    std::sort(boot.begin(), boot.end());
    out.ci_low = boot[static_cast<std::size_t>(0.025 * static_cast<double>(boot.size() - 1))];
    out.ci_high = boot[static_cast<std::size_t>(std::ceil(0.975 * static_cast<double>(boot.size() - 1)))];
  } else {
    out.ci_low = out.ci_high = out.estimate;
  }
  return out;
}

DominationResult stochastic_domination_check(std::span<const double> p, std::span<const double> q, double tolerance) {
  check_same(p, q);
  const std::size_t n = p.size();
  if (n == 0 || (n & (n - 1)) != 0) throw std::invalid_argument("stochastic_domination_check: size must be 2^k");
  DominationResult res;

  // up-set probabilities P(sigma >= eta) by a superset-sum transform
  std::vector<double> up_p(p.begin(), p.end());
  std::vector<double> up_q(q.begin(), q.end());
  for (std::size_t bit = 1; bit < n; bit <<= 1) {
    for (std::size_t x = 0; x < n; ++x) {
      if (!(x & bit)) {
        up_p[x] += up_p[x | bit];
        up_q[x] += up_q[x | bit];
      }
    }
  }
  for (std::size_t x = 0; x < n; ++x) res.max_violation = std::max(res.max_violation, up_p[x] - up_q[x]);

  if (n <= 1024) {
    const std::size_t source = 2 * n;
    const std::size_t sink = 2 * n + 1;
    MaxFlow mf(2 * n + 2);
    double total = 0.0;
    for (std::size_t x = 0; x < n; ++x) {
      if (p[x] > 0.0) {
        mf.add_edge(source, x, p[x]);
        total += p[x];
      }
      if (q[x] > 0.0) mf.add_edge(n + x, sink, q[x]);
    }
    for (std::size_t x = 0; x < n; ++x) {
      if (!(p[x] > 0.0)) continue;
      for (std::size_t y = x;; y = (y + 1) | x) {
        if (q[y] > 0.0) mf.add_edge(x, n + y, std::numeric_limits<double>::infinity());
        if (y == n - 1) break;
      }
    }
    res.flow = mf.run(source, sink);
    res.definitive = true;
    res.dominated = res.flow >= total - tolerance;
  } else {
    res.dominated = res.max_violation <= tolerance;
  }
  return res;
}

ProjectionTvCheck subforest_projection_tv(const TreeShape& shape, const SpeedupSpec& spec, const IsingParams& params) {
  const StateSpace full(shape.forest(), Pinning(shape.size(), 0));
  const auto mu = exact_gibbs(full, params);
  const StateSpace g(shape.forest().induced(spec.in_g), Pinning(shape.size(), 0));
  const auto mu_g = exact_gibbs(g, params);
  DistVector marginal(g.state_count(), 0.0);
  for (std::uint64_t s = 0; s < full.state_count(); ++s) {
    std::uint64_t t = 0;
    for (std::size_t i = 0; i < g.free_count(); ++i) {
      if ((s >> full.position(g.free_vertices()[i])) & 1U) t |= std::uint64_t{1} << i;
    }
    marginal[t] += mu.prob[s];
  }
  ProjectionTvCheck out;
  out.tv = tv_distance(mu_g.prob, marginal);
  out.bound = std::pow(shape.branching(), 2 * spec.ell) * std::pow(params.theta, 2 * (spec.r - spec.ell));
  return out;
}

}  // namespace treeglass
