#include "treeglass/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace treeglass {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct EdgeTerm {
  int a = -1;  // free position, or -1
  int b = -1;
  int fixed = 0;  // product of pinned spins when a or b is pinned
};

std::size_t idx(VertexId v) { return static_cast<std::size_t>(v); }

// P(child = + | parent = t) when the child's subtree carries log-odds x.
double tilted_plus(double beta, int t, double x) { return 0.5 * (1.0 + std::tanh(beta * t + 0.5 * x)); }

}  // namespace

double GibbsTable::expectation(const std::vector<double>& f) const {
  if (f.size() != prob.size()) throw std::invalid_argument("GibbsTable::expectation: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < prob.size(); ++i) s += prob[i] * f[i];
  return s;
}

GibbsTable exact_gibbs(const StateSpace& space, const IsingParams& params) {
  if (space.free_count() > kMaxGibbsFreeVertices) {
    throw SizeGuardError("exact_gibbs: more than 24 free vertices");
  }
  const Forest& forest = space.forest();
  const Pinning& pin = space.pinning();
  std::vector<EdgeTerm> edges;
  double constant = 0.0;
  for (VertexId v : forest.top_down()) {
    const VertexId p = forest.parent(v);
    if (p == kNoVertex) continue;
    EdgeTerm e;
    e.a = space.position(v);
    e.b = space.position(p);
    if (e.a < 0 && e.b < 0) {
      constant += pin[idx(v)] * pin[idx(p)];
      continue;
    }
    if (e.a < 0) std::swap(e.a, e.b);
    e.fixed = e.b < 0 ? pin[idx(e.a == space.position(v) ? p : v)] : 0;
    edges.push_back(e);
  }

  GibbsTable table{space, {}, 0.0};
  const std::uint64_t count = space.state_count();
  table.prob.resize(count);
  double max_log = -kInf;
  for (std::uint64_t s = 0; s < count; ++s) {
    double energy = constant;
    for (const EdgeTerm& e : edges) {
      const int sa = (s >> e.a) & 1U ? 1 : -1;
      if (e.b >= 0) {
        energy += sa * ((s >> e.b) & 1U ? 1 : -1);
      } else {
        energy += sa * e.fixed;
      }
    }
    table.prob[s] = params.beta * energy;
    max_log = std::max(max_log, table.prob[s]);
  }
  double z = 0.0;
  for (double& w : table.prob) {
    w = std::exp(w - max_log);
    z += w;
  }
  for (double& w : table.prob) w /= z;
  table.log_partition = max_log + std::log(z);
  return table;
}

GibbsTable exact_gibbs(const TreeShape& shape, const IsingParams& params, const BoundaryCondition& bc) {
  return exact_gibbs(StateSpace(shape, bc), params);
}

SpinConfig broadcast_sample(const TreeShape& shape, const IsingParams& params, const BoundaryCondition& bc,
                            Rng& rng, std::optional<int> root_spin) {
  if (!bc.is_free()) throw std::invalid_argument("broadcast_sample: only valid under a free boundary");
  SpinConfig c(shape.size(), -1);
  int r = root_spin.value_or(rng.uniform() < 0.5 ? 1 : -1);
  if (r != 1 && r != -1) throw std::invalid_argument("broadcast_sample: root spin must be +-1");
  c.set(shape.root(), r);
  const double keep = 0.5 * (1.0 + params.theta);
  for (VertexId v = 1; static_cast<std::size_t>(v) < shape.size(); ++v) {
    const int s = c.spin(shape.parent(v));
    c.set(v, rng.uniform() < keep ? s : -s);
  }
  return c;
}

double pairwise_cov(const TreeShape& shape, const IsingParams& params, VertexId u, VertexId w) {
  return std::pow(params.theta, shape.dist(u, w));
}

double f_func(double x, double theta) {
  if (std::isinf(x)) return std::copysign(2.0 * std::atanh(theta), x);
  return 2.0 * std::atanh(theta * std::tanh(0.5 * x));
}

LogOdds loglik_recursion(const TreeShape& shape, const IsingParams& params, VertexId v, int bottom_level,
                         const Pinning& xi) {
  if (xi.size() != shape.size()) throw std::invalid_argument("loglik_recursion: pinning size mismatch");
  if (xi[idx(v)] != 0) return xi[idx(v)] > 0 ? kInf : -kInf;
  const int lv = shape.level(v);
  if (lv >= bottom_level || lv == shape.height()) return 0.0;
  double x = 0.0;
  for (int i = 0; i < shape.branching(); ++i) {
    x += f_func(loglik_recursion(shape, params, shape.child(v, i), bottom_level, xi), params.theta);
  }
  return x;
}

LogOdds boundary_field(const TreeShape& shape, const IsingParams& params, VertexId v, const Pinning& tau) {
  return loglik_recursion(shape, params, v, shape.height(), tau);
}

double propagation_coeff(LogOdds x_star, const IsingParams& params) {
  const double cb = std::cosh(params.beta);
  const double cx = std::cosh(0.5 * x_star);
  return cb * cb / (cb * cb + cx * cx - 1.0);
}

Pinning BoundaryLaw::pattern(std::uint64_t xi, std::size_t n) const {
  Pinning p(n, 0);
  for (std::size_t i = 0; i < boundary.size(); ++i) p[idx(boundary[i])] = (xi >> i) & 1U ? 1 : -1;
  return p;
}

BoundaryLaw boundary_law(const TreeShape& shape, const IsingParams& params, VertexId v, int bottom_level,
                         const Pinning& tau) {
  const int lv = shape.level(v);
  if (bottom_level <= lv || bottom_level > shape.height()) {
    throw std::invalid_argument("boundary_law: bottom level must lie strictly below v");
  }
  // Conditioned on sigma(v), spins below v form a top-down chain whose
  // transitions are tilted by each child's boundary field.
  std::vector<VertexId> inner;  // levels lv+1 .. bottom_level of T_v
  for (VertexId w : shape.subtree(v, bottom_level - lv + 1)) {
    if (w != v) inner.push_back(w);
  }
  if (inner.size() > static_cast<std::size_t>(kMaxGibbsFreeVertices)) {
    throw SizeGuardError("boundary_law: too many vertices between v and the cut");
  }
  std::vector<double> field(shape.size(), 0.0);
  for (VertexId w : inner) field[idx(w)] = boundary_field(shape, params, w, tau);

  BoundaryLaw law;
  for (VertexId w : inner) {
    if (shape.level(w) == bottom_level) law.boundary.push_back(w);
  }
  if (law.boundary.size() > 30) throw SizeGuardError("boundary_law: boundary too wide");
  const std::size_t patterns = std::size_t{1} << law.boundary.size();
  law.plus.assign(patterns, 0.0);
  law.minus.assign(patterns, 0.0);

  const std::size_t first_boundary = inner.size() - law.boundary.size();
  std::vector<int> spin(shape.size(), 0);
  for (int root_spin : {1, -1}) {
    auto& out = root_spin > 0 ? law.plus : law.minus;
    spin[idx(v)] = root_spin;
    for (std::uint64_t s = 0; s < (std::uint64_t{1} << inner.size()); ++s) {
      double w = 1.0;
      for (std::size_t i = 0; i < inner.size() && w > 0.0; ++i) {
        const VertexId u = inner[i];
        const int su = (s >> i) & 1U ? 1 : -1;
        spin[idx(u)] = su;
        const double p = tilted_plus(params.beta, spin[idx(shape.parent(u))], field[idx(u)]);
        w *= su > 0 ? p : 1.0 - p;
      }
      if (w == 0.0) continue;
      out[s >> first_boundary] += w;
    }
  }
  return law;
}

Estimate reconstruction_delta(const TreeShape& shape, const IsingParams& params, const Pinning& tau, int hat_depth,
                              const DeltaOptions& options) {
  if (hat_depth < 1 || hat_depth > shape.height() - 1) {
    throw std::invalid_argument("reconstruction_delta: hat_depth must lie in [1, h-1]");
  }
  const VertexId root = shape.root();
  auto reconstruct = [&](const Pinning& xi) {
    const double x = loglik_recursion(shape, params, root, hat_depth, xi);
    return 0.5 * (1.0 + std::tanh(0.5 * x + options.root_field));
  };

  if (options.mode == EstimateMode::Exact) {
    const BoundaryLaw law = boundary_law(shape, params, root, hat_depth, tau);
    double delta = 0.0;
    for (std::uint64_t xi = 0; xi < law.plus.size(); ++xi) {
      const double d = law.plus[xi] - law.minus[xi];
      if (d == 0.0) continue;
      delta += d * reconstruct(law.pattern(xi, shape.size()));
    }
    return {delta, 0.0};
  }

  // Monotone coupling: both conditioned chains read the same uniform per vertex.
  std::vector<double> field(shape.size(), 0.0);
  std::vector<VertexId> inner;
  for (VertexId w : shape.subtree(root, hat_depth + 1)) {
    if (w != root) {
      inner.push_back(w);
      field[idx(w)] = boundary_field(shape, params, w, tau);
    }
  }
  Rng rng(options.seed, 0x6465);
  std::vector<int> up(shape.size()), down(shape.size());
  Pinning xi_up(shape.size(), 0), xi_down(shape.size(), 0);
  double sum = 0.0;
  double sum_sq = 0.0;
  const std::size_t samples = std::max<std::size_t>(options.samples, 2);
  for (std::size_t k = 0; k < samples; ++k) {
    up[idx(root)] = 1;
    down[idx(root)] = -1;
    for (VertexId w : inner) {
      const double u = rng.uniform();
      const VertexId p = shape.parent(w);
      up[idx(w)] = u < tilted_plus(params.beta, up[idx(p)], field[idx(w)]) ? 1 : -1;
      down[idx(w)] = u < tilted_plus(params.beta, down[idx(p)], field[idx(w)]) ? 1 : -1;
      if (shape.level(w) == hat_depth) {
        xi_up[idx(w)] = static_cast<std::int8_t>(up[idx(w)]);
        xi_down[idx(w)] = static_cast<std::int8_t>(down[idx(w)]);
      }
    }
    const double d = reconstruct(xi_up) - reconstruct(xi_down);
    sum += d;
    sum_sq += d * d;
  }
  const double n = static_cast<double>(samples);
  const double mean = sum / n;
  const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
  return {mean, std::sqrt(var / n)};
}

double m_quantity(const TreeShape& shape, const IsingParams& params, VertexId v, const Pinning& tau, int hat_depth) {
  const int lv = shape.level(v);
  if (lv > hat_depth) throw std::invalid_argument("m_quantity: v lies below the cut");
  if (lv == hat_depth) return kInf;
  const BoundaryLaw law = boundary_law(shape, params, v, hat_depth, tau);
  double m = 0.0;
  for (std::uint64_t xi = 0; xi < law.plus.size(); ++xi) {
    const double d = law.plus[xi] - law.minus[xi];
    if (d == 0.0) continue;
    m += d * loglik_recursion(shape, params, v, hat_depth, law.pattern(xi, shape.size()));
  }
  return m;
}

std::vector<MvRecursionRow> mv_recursion_check(const TreeShape& shape, const IsingParams& params, const Pinning& tau,
                                               int hat_depth, double kappa) {
  const double theta2 = params.theta * params.theta;
  const double k = kappa * (1.0 - params.theta) / 4.0;
  auto g = [&](double m) { return std::isinf(m) ? theta2 / k : theta2 * m / (1.0 + k * m); };
  std::vector<MvRecursionRow> rows;
  for (VertexId v : shape.subtree(shape.root(), hat_depth)) {
    MvRecursionRow row;
    row.v = v;
    row.m = m_quantity(shape, params, v, tau, hat_depth);
    for (int i = 0; i < shape.branching(); ++i) {
      row.rhs += g(m_quantity(shape, params, shape.child(v, i), tau, hat_depth));
    }
    row.holds = row.m <= row.rhs * (1.0 + 1e-12) + 1e-14;
    rows.push_back(row);
  }
  return rows;
}

InequalityScanReport lemma35_inequality_scan(const std::vector<double>& theta_grid, const std::vector<double>& delta_grid,
                                      const std::vector<double>& c1_grid, const std::vector<double>& xy_grid,
                                      double kappa) {
  InequalityScanReport rep;
  for (double theta : theta_grid) {
    for (double c1 : c1_grid) {
      const double c2 = std::max(1.0 + (0.5 * c1 - 1.0) * (1.0 - theta * theta), 1.0);
      for (double delta : delta_grid) {
        const double lhs = f_func(delta, theta) * (1.0 + 4.0 * kappa * (1.0 - theta) * c1 * delta * std::tanh(0.5 * delta));
        const double rhs = c2 * theta * delta;
        ++rep.points;
        if (rhs > 0.0) rep.max_ratio = std::max(rep.max_ratio, lhs / rhs);
        if (lhs > rhs * (1.0 + 1e-12)) {
          ++rep.violations;
          if (!rep.first_violation) rep.first_violation = InequalityScanReport::Point{theta, delta, c1, lhs, rhs};
        }
      }
    }
    for (double x : xy_grid) {
      for (double y : xy_grid) {
        const double lhs = std::abs(f_func(x, theta) - f_func(y, theta));
        const double rhs = 2.0 * f_func(0.5 * std::abs(x - y), theta);
        ++rep.f_delta_points;
        if (lhs > rhs + 1e-12 * (1.0 + rhs)) ++rep.f_delta_violations;
      }
    }
  }
  return rep;
}

}  // namespace treeglass
