#include "treeglass/spectral.hpp"

#include <limits>
#include <numeric>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "treeglass/gibbs.hpp"

namespace treeglass {

namespace {

std::size_t idx(VertexId v) { return static_cast<std::size_t>(v); }

struct RowBuilder {
  std::vector<std::pair<std::uint32_t, double>> entries;

  void add(std::uint64_t y, double p) { entries.emplace_back(static_cast<std::uint32_t>(y), p); }

  void flush(std::vector<std::size_t>& offset, std::vector<std::uint32_t>& col, std::vector<double>& val) {
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 0; i < entries.size();) {
      std::size_t j = i;
      double sum = 0.0;
      while (j < entries.size() && entries[j].first == entries[i].first) sum += entries[j++].second;
      if (sum != 0.0) {
        col.push_back(entries[i].first);
        val.push_back(sum);
      }
      i = j;
    }
    offset.push_back(col.size());
    entries.clear();
  }
};

}  // namespace

MarkovKernel::MarkovKernel(std::vector<std::size_t> row_offset, std::vector<std::uint32_t> col,
                           std::vector<double> val, std::vector<double> pi, std::shared_ptr<const StateSpace> space)
    : row_offset_(std::move(row_offset)), col_(std::move(col)), val_(std::move(val)), pi_(std::move(pi)),
      space_(std::move(space)) {
  if (row_offset_.size() != pi_.size() + 1 || col_.size() != val_.size() || row_offset_.back() != col_.size()) {
    throw std::invalid_argument("MarkovKernel: inconsistent CSR arrays");
  }
  for (std::uint32_t c : col_) {
    if (c >= pi_.size()) throw std::invalid_argument("MarkovKernel: column out of range");
  }
  reversible_ = detailed_balance_error() <= 1e-12;
}

MarkovKernel MarkovKernel::from_dense(const Eigen::MatrixXd& p, std::vector<double> pi) {
  if (p.rows() != p.cols() || static_cast<std::size_t>(p.rows()) != pi.size()) {
    throw std::invalid_argument("MarkovKernel::from_dense: shape mismatch");
  }
  std::vector<std::size_t> off{0};
  std::vector<std::uint32_t> col;
  std::vector<double> val;
  for (Eigen::Index x = 0; x < p.rows(); ++x) {
    for (Eigen::Index y = 0; y < p.cols(); ++y) {
      if (p(x, y) != 0.0) {
        col.push_back(static_cast<std::uint32_t>(y));
        val.push_back(p(x, y));
      }
    }
    off.push_back(col.size());
  }
  return MarkovKernel(std::move(off), std::move(col), std::move(val), std::move(pi));
}

double MarkovKernel::at(std::size_t x, std::size_t y) const {
  const auto cols = row_cols(x);
  const auto it = std::lower_bound(cols.begin(), cols.end(), static_cast<std::uint32_t>(y));
  if (it == cols.end() || *it != y) return 0.0;
  return val_[row_offset_[x] + static_cast<std::size_t>(it - cols.begin())];
}

DistVector MarkovKernel::apply_left(std::span<const double> mu) const {
  if (mu.size() != size()) throw std::invalid_argument("MarkovKernel::apply_left: size mismatch");
  DistVector out(size(), 0.0);
  for (std::size_t x = 0; x < size(); ++x) {
    if (mu[x] == 0.0) continue;
    for (std::size_t j = row_offset_[x]; j < row_offset_[x + 1]; ++j) out[col_[j]] += mu[x] * val_[j];
  }
  return out;
}

std::vector<double> MarkovKernel::apply_right(std::span<const double> f) const {
  if (f.size() != size()) throw std::invalid_argument("MarkovKernel::apply_right: size mismatch");
  std::vector<double> out(size(), 0.0);
  for (std::size_t x = 0; x < size(); ++x) {
    double s = 0.0;
    for (std::size_t j = row_offset_[x]; j < row_offset_[x + 1]; ++j) s += val_[j] * f[col_[j]];
    out[x] = s;
  }
  return out;
}

Eigen::MatrixXd MarkovKernel::to_dense() const {
  if (size() > kMaxDenseStates) throw SizeGuardError("MarkovKernel::to_dense: too many states");
  const auto n = static_cast<Eigen::Index>(size());
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t x = 0; x < size(); ++x) {
    for (std::size_t j = row_offset_[x]; j < row_offset_[x + 1]; ++j) {
      p(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(col_[j])) = val_[j];
    }
  }
  return p;
}

double MarkovKernel::row_sum_error() const {
  double err = 0.0;
  for (std::size_t x = 0; x < size(); ++x) {
    double s = 0.0;
    for (double v : row_vals(x)) s += v;
    err = std::max(err, std::abs(s - 1.0));
  }
  return err;
}

double MarkovKernel::detailed_balance_error() const {
  double err = 0.0;
  for (std::size_t x = 0; x < size(); ++x) {
    for (std::size_t j = row_offset_[x]; j < row_offset_[x + 1]; ++j) {
      const std::size_t y = col_[j];
      if (y <= x) continue;
      err = std::max(err, std::abs(pi_[x] * val_[j] - pi_[y] * at(y, x)));
    }
    // entries present only in the transposed position
    for (std::size_t j = row_offset_[x]; j < row_offset_[x + 1]; ++j) {
      const std::size_t y = col_[j];
      if (y < x && at(y, x) == 0.0) err = std::max(err, pi_[x] * val_[j]);
    }
  }
  return err;
}

double MarkovKernel::stationarity_error() const {
  const auto next = apply_left(pi_);
  double err = 0.0;
  for (std::size_t x = 0; x < size(); ++x) err = std::max(err, std::abs(next[x] - pi_[x]));
  return err;
}

std::vector<WeightedBlock> update_moves(const Dynamics& dynamics, const TreeShape& shape, const Pinning& pinning) {
  std::vector<WeightedBlock> moves;
  if (std::holds_alternative<SingleSite>(dynamics)) {
    std::vector<VertexId> sites;
    for (std::size_t v = 0; v < shape.size(); ++v) {
      if (pinning[v] == 0) sites.push_back(static_cast<VertexId>(v));
    }
    for (VertexId v : sites) moves.push_back({1.0 / static_cast<double>(sites.size()), {v}});
  } else if (const auto* bd = std::get_if<BlockDynamics>(&dynamics)) {
    const auto& blocks = bd->cover.blocks;
    if (blocks.empty()) throw std::invalid_argument("update_moves: empty block cover");
    // a free vertex outside every block never moves; the chain would be reducible
    std::vector<bool> covered(shape.size(), false);
    for (const auto& b : blocks) {
      for (VertexId v : b) covered[static_cast<std::size_t>(v)] = true;
    }
    for (std::size_t v = 0; v < shape.size(); ++v) {
      if (pinning[v] == 0 && !covered[v]) {
        throw std::invalid_argument("update_moves: block cover misses a free vertex");
      }
    }
    for (const auto& b : blocks) moves.push_back({1.0 / static_cast<double>(blocks.size()), b});
  } else {
    const auto& spec = std::get<SpeedupDynamics>(dynamics).spec;
    for (std::int8_t p : pinning) {
      if (p != 0) throw std::invalid_argument("update_moves: the speed-up chain needs a free boundary");
    }
    const double w = 1.0 / static_cast<double>(shape.size());
    for (std::size_t u = 0; u < shape.size(); ++u) {
      const int b = spec.block_of[u];
      if (b >= 0) {
        moves.push_back({w, spec.blocks[static_cast<std::size_t>(b)]});
      } else {
        moves.push_back({w, {static_cast<VertexId>(u)}});
      }
    }
  }
  return moves;
}

MarkovKernel build_kernel(const StateSpace& space, const std::vector<WeightedBlock>& moves, const IsingParams& params) {
  if (space.state_count() > kMaxKernelStates) throw SizeGuardError("build_kernel: more than 2^15 states");
  auto shared = std::make_shared<const StateSpace>(space);
  auto pi = exact_gibbs(space, params).prob;

  struct Prepared {
    double weight;
    PreparedBlock block;
    std::vector<int> bit;  // state bit for each block vertex
    std::uint64_t mask = 0;
  };
  std::vector<Prepared> prepared;
  double total_weight = 0.0;
  for (const auto& m : moves) {
    Prepared p{m.weight, prepare_block(space.forest(), m.vertices, space.pinning()), {}, 0};
    for (VertexId v : p.block.order) {
      p.bit.push_back(space.position(v));
      p.mask |= std::uint64_t{1} << space.position(v);
    }
    total_weight += m.weight;
    prepared.push_back(std::move(p));
  }
  if (!moves.empty() && std::abs(total_weight - 1.0) > 1e-12) {
    throw std::invalid_argument("build_kernel: move weights must sum to 1");
  }

  std::vector<std::size_t> off{0};
  std::vector<std::uint32_t> col;
  std::vector<double> val;
  RowBuilder row;
  for (std::uint64_t s = 0; s < space.state_count(); ++s) {
    if (moves.empty()) row.add(s, 1.0);
    const SpinConfig config = space.decode(s);
    for (const auto& m : prepared) {
      if (m.block.size() == 0) {
        row.add(s, m.weight);
        continue;
      }
      const auto law = block_law(config, m.block, params);
      const std::uint64_t base = s & ~m.mask;
      for (std::uint64_t a = 0; a < law.size(); ++a) {
        std::uint64_t t = base;
        for (std::size_t i = 0; i < m.bit.size(); ++i) {
          if ((a >> i) & 1U) t |= std::uint64_t{1} << m.bit[i];
        }
        row.add(t, m.weight * law[a]);
      }
    }
    row.flush(off, col, val);
  }
  return MarkovKernel(std::move(off), std::move(col), std::move(val), std::move(pi), std::move(shared));
}

MarkovKernel build_kernel(const Dynamics& dynamics, const TreeShape& shape, const IsingParams& params,
                          const BoundaryCondition& bc) {
  const StateSpace space(shape, bc);
  return build_kernel(space, update_moves(dynamics, shape, space.pinning()), params);
}

double dirichlet_form(std::span<const double> f, const MarkovKernel& k) {
  if (!k.reversible()) throw std::invalid_argument("dirichlet_form: kernel is not reversible");
  if (f.size() != k.size()) throw std::invalid_argument("dirichlet_form: size mismatch");
  double e = 0.0;
  for (std::size_t x = 0; x < k.size(); ++x) {
    const auto cols = k.row_cols(x);
    const auto vals = k.row_vals(x);
    double s = 0.0;
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const double d = f[x] - f[cols[j]];
      s += vals[j] * d * d;
    }
    e += k.pi()[x] * s;
  }
  return 0.5 * e;
}

double dirichlet_form_quadratic(std::span<const double> f, const MarkovKernel& k) {
  if (!k.reversible()) throw std::invalid_argument("dirichlet_form: kernel is not reversible");
  const auto pf = k.apply_right(f);
  double e = 0.0;
  for (std::size_t x = 0; x < k.size(); ++x) e += k.pi()[x] * f[x] * (f[x] - pf[x]);
  return e;
}

VarEnt variance_entropy(std::span<const double> f, std::span<const double> pi) {
  if (f.size() != pi.size()) throw std::invalid_argument("variance_entropy: size mismatch");
  double mean = 0.0;
  double second = 0.0;
  for (std::size_t x = 0; x < f.size(); ++x) {
    mean += pi[x] * f[x];
    second += pi[x] * f[x] * f[x];
  }
  VarEnt out;
  for (std::size_t x = 0; x < f.size(); ++x) out.variance += pi[x] * (f[x] - mean) * (f[x] - mean);
  if (second > 0.0) {
    for (std::size_t x = 0; x < f.size(); ++x) {
      const double f2 = f[x] * f[x];
      if (f2 > 0.0) out.entropy += pi[x] * f2 * std::log(f2 / second);
    }
  }
  out.entropy = std::max(0.0, out.entropy);
  return out;
}

DenseSpectrum dense_spectrum(const MarkovKernel& k) {
  if (!k.reversible()) throw std::invalid_argument("dense_spectrum: kernel is not reversible");
  Eigen::MatrixXd p = k.to_dense();
  const auto n = p.rows();
  Eigen::VectorXd sq(n);
  for (Eigen::Index i = 0; i < n; ++i) sq(i) = std::sqrt(k.pi()[static_cast<std::size_t>(i)]);
  Eigen::MatrixXd s = sq.asDiagonal() * p * sq.cwiseInverse().asDiagonal();
  s = 0.5 * (s + s.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  if (es.info() != Eigen::Success) throw std::runtime_error("dense_spectrum: eigensolver failed");
  DenseSpectrum out;
  out.values = es.eigenvalues().reverse();
  out.vectors = sq.cwiseInverse().asDiagonal() * es.eigenvectors().rowwise().reverse();
  return out;
}

GapResult spectral_gap(const MarkovKernel& k, GapMethod method, const PowerOptions& opts) {
  if (!k.reversible()) throw std::invalid_argument("spectral_gap: kernel is not reversible");
  GapResult r;
  if (k.size() == 1) {
    r.gap = 1.0;
    r.lambda2 = 0.0;
    r.note = "single-state chain: gap taken as 1 by convention";
    return r;
  }
  if (method == GapMethod::Auto) method = k.size() <= kMaxDenseStates ? GapMethod::Dense : GapMethod::Power;
  r.method = method;
  if (method == GapMethod::Dense) {
    const auto spec = dense_spectrum(k);
    r.lambda2 = spec.values(1);
    r.gap = 1.0 - r.lambda2;
    return r;
  }

  // Power iteration on (S + I)/2, S = D^{1/2} P D^{-1/2}, kept orthogonal to
  // the top eigenvector sqrt(pi).
  const std::size_t n = k.size();
  std::vector<double> sq(n);
  for (std::size_t x = 0; x < n; ++x) sq[x] = std::sqrt(k.pi()[x]);
  std::vector<std::size_t> offset{0};
  std::vector<double> sval;
  std::vector<std::uint32_t> scol;
  for (std::size_t x = 0; x < n; ++x) {
    const auto cols = k.row_cols(x);
    const auto vals = k.row_vals(x);
    for (std::size_t j = 0; j < cols.size(); ++j) {
      scol.push_back(cols[j]);
      sval.push_back(0.5 * vals[j] * sq[x] / sq[cols[j]]);
    }
    offset.push_back(scol.size());
  }
  auto deflate = [&](std::vector<double>& v) {
    const double c = std::inner_product(v.begin(), v.end(), sq.begin(), 0.0);
    for (std::size_t x = 0; x < n; ++x) v[x] -= c * sq[x];
  };
  auto normalise = [](std::vector<double>& v) {
    const double nv = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    for (double& e : v) e /= nv;
  };
  Rng rng(opts.seed);
  std::vector<double> v(n);
  for (double& e : v) e = rng.uniform() - 0.5;
  deflate(v);
  normalise(v);
  std::vector<double> w(n);
  for (std::size_t it = 1; it <= opts.max_iterations; ++it) {
    for (std::size_t x = 0; x < n; ++x) {
      double s = 0.5 * v[x];
      for (std::size_t j = offset[x]; j < offset[x + 1]; ++j) s += sval[j] * v[scol[j]];
      w[x] = s;
    }
    deflate(w);
    const double mu = std::inner_product(v.begin(), v.end(), w.begin(), 0.0);
    double res = 0.0;
    for (std::size_t x = 0; x < n; ++x) res += (w[x] - mu * v[x]) * (w[x] - mu * v[x]);
    res = 2.0 * std::sqrt(res);
    r.iterations = it;
    r.residual = res;
    r.lambda2 = 2.0 * mu - 1.0;
    if (res < opts.tolerance) {
      r.gap = 1.0 - r.lambda2;
      return r;
    }
    v.swap(w);
    normalise(v);
  }
  throw std::runtime_error("spectral_gap: power iteration did not converge (residual " + std::to_string(r.residual) +
                           ")");
}

double test_function_gap_bound(std::span<const double> f, const MarkovKernel& k) {
  const double var = variance_entropy(f, k.pi()).variance;
  if (!(var > 1e-300)) throw std::invalid_argument("test_function_gap_bound: f is constant under pi");
  return dirichlet_form(f, k) / var;
}

std::vector<double> weighted_spin_sum(const TreeShape& shape, const StateSpace& space, double theta) {
  std::vector<double> weight(shape.size());
  for (std::size_t v = 0; v < shape.size(); ++v) weight[v] = std::pow(theta, shape.level(static_cast<VertexId>(v)));
  std::vector<std::int8_t> spins(space.forest().size());
  std::vector<double> g(space.state_count());
  for (std::uint64_t s = 0; s < g.size(); ++s) {
    space.decode_into(s, spins);
    double sum = 0.0;
    for (std::size_t v = 0; v < shape.size(); ++v) sum += weight[v] * spins[v];
    g[s] = sum;
  }
  return g;
}

namespace closed_form {

double vertex_count(int b, int h) {
  double n = 0.0;
  double w = 1.0;
  for (int k = 0; k <= h; ++k, w *= b) n += w;
  return n;
}

double critical_variance_formula(int b, int h) {
  return (b - 1.0) / (6.0 * b) * h * (h + 1.0) * (2.0 * h + 1.0);
}

double near_critical_variance_formula(int b, int h, double eps) {
  const double q = 1.0 + eps;
  return (b - 1.0) / (b * eps * eps * eps) *
         (std::pow(q, 2 * h + 3) - (2.0 * h + 3.0) * eps * std::pow(q, h + 1) - 1.0);
}

double weighted_sum_variance(int b, int h, double theta) {
  const double ratio = b * theta * theta;
  double var = 0.0;
  double level_weight = 1.0;  // b^k theta^{2k}
  for (int k = 0; k <= h; ++k, level_weight *= ratio) {
    double s = 0.0;
    double t = 1.0;
    for (int i = 0; i <= h - k; ++i, t *= ratio) s += t;
    var += level_weight * ((b - 1.0) / b * s * s + (2.0 * s - 1.0) / b);
  }
  return var;
}

namespace {

// E[tanh(beta (eta_1 + ... + eta_d))] with eta iid, P(eta = 1) = (1+theta)/2.
double mean_tanh(int d, const IsingParams& params) {
  const double p = 0.5 * (1.0 + params.theta);
  double out = 0.0;
  double binom = 1.0;
  for (int j = 0; j <= d; ++j) {
    out += binom * std::pow(p, j) * std::pow(1.0 - p, d - j) * std::tanh(params.beta * (2 * j - d));
    binom = binom * (d - j) / (j + 1.0);
  }
  return out;
}

}  // namespace

double weighted_sum_dirichlet(int b, int h, const IsingParams& params) {
  double e = 0.0;
  double level_weight = 1.0;
  double count = 1.0;
  for (int k = 0; k <= h; ++k, level_weight *= params.theta * params.theta, count *= b) {
    int degree = b + 1;
    if (h == 0) {
      degree = 0;
    } else if (k == 0) {
      degree = b;
    } else if (k == h) {
      degree = 1;
    }
    e += count * level_weight * (1.0 - mean_tanh(degree, params));
  }
  return e / vertex_count(b, h);
}

double dirichlet_bound_critical(int b, int h) { return 2.0 * h / vertex_count(b, h); }

double dirichlet_bound_near_critical(int b, int h, double eps) {
  return 2.0 / vertex_count(b, h) * (std::pow(1.0 + eps, h + 1) - 1.0) / eps;
}

double gap_upper_critical(int b, int h) {
  return 6.0 * b / ((b - 1.0) * vertex_count(b, h) * h * h);
}

double gap_upper_eps_large(int b, int h, double eps) {
  return 4.0 * b / (b - 1.0) * eps * eps / (vertex_count(b, h) * std::pow(1.0 + eps, h));
}

double gap_upper_eps_small(int b, int h) {
  return 3.0 * std::exp(7.0) * b / (b - 1.0) / (vertex_count(b, h) * h * h);
}

double relaxation_lower_transition(int h, double eps, double c1) {
  if (eps == 0.0) return c1 * h * h;
  const double m = std::min(1.0 / eps, static_cast<double>(h));
  return c1 * m * m * std::pow(1.0 + eps, h);
}

double block_gap_lower(int b, int ell, double alpha, double theta, double kappa) {
  return 1.0 / (4.0 * (std::pow(b, ell) + 1.0)) * (1.0 - alpha / (kappa * (1.0 - theta) * (1.0 - 2.0 * alpha)));
}

}  // namespace closed_form

std::vector<double> product_chain_eigenvalues(const std::vector<std::vector<double>>& spectra,
                                              const std::vector<double>& nu, double hold) {
  if (spectra.size() != nu.size()) throw std::invalid_argument("product_chain_eigenvalues: one weight per component");
  const double total = std::accumulate(nu.begin(), nu.end(), hold);
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("product_chain_eigenvalues: weights must sum to 1");
  std::vector<double> out{hold};
  for (std::size_t j = 0; j < spectra.size(); ++j) {
    std::vector<double> next;
    next.reserve(out.size() * spectra[j].size());
    for (double base : out) {
      for (double lam : spectra[j]) next.push_back(base + nu[j] * lam);
    }
    out.swap(next);
  }
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

MarkovKernel assemble_product_kernel(const std::vector<MarkovKernel>& parts, const std::vector<double>& nu,
                                     double hold) {
  if (parts.size() != nu.size()) throw std::invalid_argument("assemble_product_kernel: one weight per component");
  const double total_w = std::accumulate(nu.begin(), nu.end(), hold);
  if (std::abs(total_w - 1.0) > 1e-12) throw std::invalid_argument("assemble_product_kernel: weights must sum to 1");
  std::vector<std::uint64_t> stride(parts.size());
  std::uint64_t total = 1;
  for (std::size_t j = 0; j < parts.size(); ++j) {
    stride[j] = total;
    total *= parts[j].size();
    if (total > kMaxKernelStates) throw SizeGuardError("assemble_product_kernel: too many states");
  }
  std::vector<double> pi(total, 1.0);
  std::vector<std::size_t> off{0};
  std::vector<std::uint32_t> col;
  std::vector<double> val;
  RowBuilder row;
  for (std::uint64_t x = 0; x < total; ++x) {
    if (hold > 0.0) row.add(x, hold);
    for (std::size_t j = 0; j < parts.size(); ++j) {
      const std::uint64_t xj = (x / stride[j]) % parts[j].size();
      pi[x] *= parts[j].pi()[xj];
      const auto cols = parts[j].row_cols(xj);
      const auto vals = parts[j].row_vals(xj);
      for (std::size_t i = 0; i < cols.size(); ++i) {
        const std::uint64_t y = x - xj * stride[j] + cols[i] * stride[j];
        row.add(y, nu[j] * vals[i]);
      }
    }
    row.flush(off, col, val);
  }
  return MarkovKernel(std::move(off), std::move(col), std::move(val), std::move(pi));
}

JstvResult jstv_decompose(const MarkovKernel& k, const std::vector<int>& cell) {
  if (!k.reversible()) throw std::invalid_argument("jstv_decompose: kernel is not reversible");
  if (cell.size() != k.size()) throw std::invalid_argument("jstv_decompose: one cell label per state");
  int m = 0;
  for (int c : cell) {
    if (c < 0) throw std::invalid_argument("jstv_decompose: negative cell label");
    m = std::max(m, c + 1);
  }
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(m));
  for (std::size_t x = 0; x < cell.size(); ++x) members[static_cast<std::size_t>(cell[x])].push_back(x);
  for (const auto& mem : members) {
    if (mem.empty()) throw std::invalid_argument("jstv_decompose: empty partition cell");
  }

  JstvResult out;
  const auto& pi = k.pi();
  std::vector<double> pibar(static_cast<std::size_t>(m), 0.0);
  for (std::size_t x = 0; x < k.size(); ++x) pibar[static_cast<std::size_t>(cell[x])] += pi[x];
  Eigen::MatrixXd pbar = Eigen::MatrixXd::Zero(m, m);
  for (std::size_t x = 0; x < k.size(); ++x) {
    const auto cols = k.row_cols(x);
    const auto vals = k.row_vals(x);
    double leave = 0.0;
    for (std::size_t j = 0; j < cols.size(); ++j) {
      pbar(cell[x], cell[cols[j]]) += pi[x] * vals[j];
      if (cell[cols[j]] != cell[x]) leave += vals[j];
    }
    out.gamma = std::max(out.gamma, leave);
  }
  for (int i = 0; i < m; ++i) pbar.row(i) /= pibar[static_cast<std::size_t>(i)];
  out.projection = MarkovKernel::from_dense(pbar, pibar);
  const auto pg = spectral_gap(out.projection);
  out.projection_gap = pg.gap;
  if (!pg.note.empty()) out.notes.push_back("projection: " + pg.note);

  out.gap_min = std::numeric_limits<double>::infinity();
  std::vector<int> local(k.size(), -1);
  for (int i = 0; i < m; ++i) {
    const auto& mem = members[static_cast<std::size_t>(i)];
    for (std::size_t a = 0; a < mem.size(); ++a) local[mem[a]] = static_cast<int>(a);
    std::vector<std::size_t> off{0};
    std::vector<std::uint32_t> col;
    std::vector<double> val;
    std::vector<double> pii;
    RowBuilder row;
    for (std::size_t a = 0; a < mem.size(); ++a) {
      const std::size_t x = mem[a];
      pii.push_back(pi[x] / pibar[static_cast<std::size_t>(i)]);
      const auto cols = k.row_cols(x);
      const auto vals = k.row_vals(x);
      double stay = 1.0;
      for (std::size_t j = 0; j < cols.size(); ++j) {
        if (cols[j] == x || cell[cols[j]] != i) continue;
        row.add(static_cast<std::uint64_t>(local[cols[j]]), vals[j]);
        stay -= vals[j];
      }
      row.add(a, std::max(0.0, stay));
      row.flush(off, col, val);
    }
    out.restrictions.emplace_back(std::move(off), std::move(col), std::move(val), std::move(pii));
    const auto g = spectral_gap(out.restrictions.back());
    if (!g.note.empty()) out.notes.push_back("cell " + std::to_string(i) + ": " + g.note);
    out.restriction_gaps.push_back(g.gap);
    out.gap_min = std::min(out.gap_min, g.gap);
  }
  const double gb = out.projection_gap;
  out.bound = std::min(gb / 3.0, gb * out.gap_min / (3.0 * out.gamma + gb));
  return out;
}

double block_vs_single_site_bound(std::size_t block_count, std::size_t site_count, double gap_block,
                                  double min_scaled_block_gap, int multiplicity) {
  if (block_count == 0 || site_count == 0 || !(gap_block > 0.0) || !(min_scaled_block_gap > 0.0) || multiplicity < 1) {
    throw std::invalid_argument("block_vs_single_site_bound: inputs must be positive");
  }
  return static_cast<double>(block_count) / static_cast<double>(site_count) * gap_block * min_scaled_block_gap /
         multiplicity;
}

ScaledBlockGap min_scaled_block_gap(const TreeShape& shape, const BlockCover& cover, const IsingParams& params,
                                    const Pinning& pinning, int max_enumerated, std::size_t samples,
                                    std::uint64_t seed) {
  ScaledBlockGap out;
  out.value = std::numeric_limits<double>::infinity();
  Rng rng(seed);
  const Forest& tree = shape.forest();
  for (const auto& block : cover.blocks) {
    std::vector<bool> in_block(shape.size(), false);
    std::vector<VertexId> sites;
    for (VertexId v : block) {
      if (pinning[idx(v)] == 0 && !in_block[idx(v)]) {
        in_block[idx(v)] = true;
        sites.push_back(v);
      }
    }
    if (sites.empty()) continue;
    std::vector<VertexId> boundary;
    std::vector<bool> seen(shape.size(), false);
    auto consider = [&](VertexId w) {
      if (w == kNoVertex || in_block[idx(w)] || seen[idx(w)] || pinning[idx(w)] != 0) return;
      seen[idx(w)] = true;
      boundary.push_back(w);
    };
    for (VertexId v : sites) {
      consider(tree.parent(v));
      for (VertexId c : tree.children(v)) consider(c);
    }
    Pinning base = pinning;
    for (std::size_t v = 0; v < shape.size(); ++v) {
      if (!in_block[v] && base[v] == 0) base[v] = 1;
    }
    std::vector<WeightedBlock> moves;
    for (VertexId v : sites) moves.push_back({1.0 / static_cast<double>(sites.size()), {v}});

    const bool exhaustive = static_cast<int>(boundary.size()) <= max_enumerated;
    out.exhaustive = out.exhaustive && exhaustive;
    const std::uint64_t runs = exhaustive ? std::uint64_t{1} << boundary.size() : samples;
    for (std::uint64_t r = 0; r < runs; ++r) {
      Pinning pin = base;
      for (std::size_t i = 0; i < boundary.size(); ++i) {
        const bool up = exhaustive ? ((r >> i) & 1U) != 0 : rng.below(2) == 1;
        pin[idx(boundary[i])] = up ? 1 : -1;
      }
      const StateSpace space(tree, pin);
      const auto gap = spectral_gap(build_kernel(space, moves, params)).gap;
      out.value = std::min(out.value, static_cast<double>(sites.size()) * gap);
      ++out.boundaries;
    }
  }
  return out;
}

}  // namespace treeglass
