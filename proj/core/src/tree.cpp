#include "treeglass/tree.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

namespace treeglass {

Forest::Forest(std::vector<VertexId> parent, std::vector<bool> present)
    : parent_(std::move(parent)), present_(std::move(present)) {
  const std::size_t n = parent_.size();
  if (present_.size() != n) throw std::invalid_argument("Forest: mask size mismatch");
  std::vector<std::size_t> count(n + 1, 0);
  for (std::size_t v = 0; v < n; ++v) {
    if (!present_[v]) {
      parent_[v] = kNoVertex;
      continue;
    }
    const VertexId p = parent_[v];
    if (p != kNoVertex) {
      if (p < 0 || static_cast<std::size_t>(p) >= n) throw std::invalid_argument("Forest: bad parent");
      if (!present_[static_cast<std::size_t>(p)]) {
        parent_[v] = kNoVertex;
      } else {
        ++count[static_cast<std::size_t>(p)];
      }
    }
  }
  child_offset_.assign(n + 1, 0);
  for (std::size_t v = 0; v < n; ++v) child_offset_[v + 1] = child_offset_[v] + count[v];
  child_list_.resize(child_offset_[n]);
  std::vector<std::size_t> fill(child_offset_.begin(), child_offset_.end() - 1);
  for (std::size_t v = 0; v < n; ++v) {
    if (present_[v] && parent_[v] != kNoVertex) {
      child_list_[fill[static_cast<std::size_t>(parent_[v])]++] = static_cast<VertexId>(v);
    }
  }
  top_down_.reserve(n);
  for (std::size_t v = 0; v < n; ++v) {
    if (present_[v] && parent_[v] == kNoVertex) top_down_.push_back(static_cast<VertexId>(v));
  }
  for (std::size_t i = 0; i < top_down_.size(); ++i) {
    for (VertexId c : children(top_down_[i])) top_down_.push_back(c);
  }
  if (top_down_.size() != static_cast<std::size_t>(std::count(present_.begin(), present_.end(), true))) {
    throw std::invalid_argument("Forest: parent relation has a cycle");
  }
}

std::size_t Forest::edge_count() const { return child_list_.size(); }

Forest Forest::induced(const std::vector<bool>& mask) const {
  std::vector<bool> keep(size());
  for (std::size_t v = 0; v < size(); ++v) keep[v] = present_[v] && mask[v];
  return Forest(parent_, keep);
}

TreeShape::TreeShape(int branching, int height) : b_(branching), h_(height) {
  if (b_ < 2) throw std::invalid_argument("TreeShape: branching must be >= 2");
  if (h_ < 0) throw std::invalid_argument("TreeShape: height must be >= 0");
  std::size_t total = 0;
  std::size_t width = 1;
  for (int k = 0; k <= h_; ++k) {
    level_offset_.push_back(static_cast<VertexId>(total));
    total += width;
    if (total > (std::size_t{1} << 30)) throw SizeGuardError("TreeShape: tree too large");
    width *= static_cast<std::size_t>(b_);
  }
  level_offset_.push_back(static_cast<VertexId>(total));
  n_ = total;
  std::vector<VertexId> parent(n_);
  for (std::size_t v = 0; v < n_; ++v) parent[v] = this->parent(static_cast<VertexId>(v));
  forest_ = Forest(std::move(parent), std::vector<bool>(n_, true));
}

int TreeShape::level(VertexId v) const {
  auto it = std::upper_bound(level_offset_.begin(), level_offset_.end(), v);
  return static_cast<int>(it - level_offset_.begin()) - 1;
}

VertexId TreeShape::level_begin(int k) const { return level_offset_[static_cast<std::size_t>(k)]; }

std::size_t TreeShape::level_size(int k) const {
  return static_cast<std::size_t>(level_offset_[static_cast<std::size_t>(k) + 1] -
                                  level_offset_[static_cast<std::size_t>(k)]);
}

std::vector<VertexId> TreeShape::level_vertices(int k) const {
  std::vector<VertexId> out(level_size(k));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = level_begin(k) + static_cast<VertexId>(i);
  return out;
}

bool TreeShape::is_ancestor(VertexId a, VertexId v) const {
  int la = level(a);
  int lv = level(v);
  while (lv > la) {
    v = parent(v);
    --lv;
  }
  return v == a;
}

VertexId TreeShape::meet(VertexId u, VertexId w) const {
  int lu = level(u);
  int lw = level(w);
  while (lu > lw) {
    u = parent(u);
    --lu;
  }
  while (lw > lu) {
    w = parent(w);
    --lw;
  }
  while (u != w) {
    u = parent(u);
    w = parent(w);
  }
  return u;
}

int TreeShape::dist(VertexId u, VertexId w) const {
  return level(u) + level(w) - 2 * level(meet(u, w));
}

std::vector<VertexId> TreeShape::subtree(VertexId v, int levels) const {
  const int depth_cap = levels < 0 ? h_ - level(v) : std::min(levels - 1, h_ - level(v));
  std::vector<VertexId> out;
  VertexId first = v;
  std::size_t width = 1;
  for (int d = 0; d <= depth_cap; ++d) {
    for (std::size_t i = 0; i < width; ++i) out.push_back(first + static_cast<VertexId>(i));
    first = b_ * first + 1;
    width *= static_cast<std::size_t>(b_);
  }
  return out;
}

double critical_beta(int b) {
  if (b < 2) throw std::invalid_argument("critical_beta: b must be >= 2");
  return std::atanh(1.0 / std::sqrt(static_cast<double>(b)));
}

IsingParams IsingParams::from_beta(double beta) {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw std::invalid_argument("IsingParams: beta must be finite and >= 0");
  return {beta, std::tanh(beta), std::nullopt};
}

IsingParams IsingParams::critical(int b) {
  IsingParams p;
  p.theta = 1.0 / std::sqrt(static_cast<double>(b));
  p.beta = critical_beta(b);
  p.epsilon = 0.0;
  return p;
}

IsingParams IsingParams::near_critical(int b, double eps) {
  if (b < 2) throw std::invalid_argument("near_critical: b must be >= 2");
  const double t2 = (1.0 + eps) / static_cast<double>(b);
  if (!(t2 >= 0.0 && t2 < 1.0)) throw std::invalid_argument("near_critical: theta must lie in [0,1)");
  IsingParams p;
  p.theta = std::sqrt(t2);
  p.beta = std::atanh(p.theta);
  p.epsilon = eps;
  return p;
}

BoundaryCondition BoundaryCondition::arbitrary(std::vector<int> leaf_spins) {
  for (int s : leaf_spins) {
    if (s != 1 && s != -1) throw std::invalid_argument("BoundaryCondition: leaf spins must be +-1");
  }
  BoundaryCondition bc(Kind::Arbitrary, {});
  bc.leaf_spins_ = std::move(leaf_spins);
  return bc;
}

BoundaryCondition BoundaryCondition::frozen(std::map<VertexId, int> spins) {
  for (auto [v, s] : spins) {
    if (v < 0 || (s != 1 && s != -1)) throw std::invalid_argument("BoundaryCondition: bad frozen entry");
  }
  return BoundaryCondition(Kind::FrozenSet, std::move(spins));
}

Pinning BoundaryCondition::resolve(const TreeShape& shape) const {
  Pinning pin(shape.size(), 0);
  switch (kind_) {
    case Kind::Free:
      break;
    case Kind::AllPlus:
    case Kind::AllMinus:
      for (VertexId v : shape.leaves()) pin[static_cast<std::size_t>(v)] = kind_ == Kind::AllPlus ? 1 : -1;
      break;
    case Kind::Arbitrary: {
      auto leaves = shape.leaves();
      if (leaves.size() != leaf_spins_.size()) {
        throw std::invalid_argument("BoundaryCondition: expected one spin per leaf");
      }
      for (std::size_t i = 0; i < leaves.size(); ++i) {
        pin[static_cast<std::size_t>(leaves[i])] = static_cast<std::int8_t>(leaf_spins_[i]);
      }
      break;
    }
    case Kind::FrozenSet:
      for (auto [v, s] : spins_) {
        if (static_cast<std::size_t>(v) >= shape.size()) throw std::invalid_argument("BoundaryCondition: vertex out of range");
        pin[static_cast<std::size_t>(v)] = static_cast<std::int8_t>(s);
      }
      break;
  }
  return pin;
}

BoundaryCondition BoundaryCondition::flipped() const {
  switch (kind_) {
    case Kind::Free:
      return *this;
    case Kind::AllPlus:
      return all_minus();
    case Kind::AllMinus:
      return all_plus();
    case Kind::Arbitrary: {
      auto s = leaf_spins_;
      for (int& x : s) x = -x;
      return arbitrary(std::move(s));
    }
    case Kind::FrozenSet: {
      auto s = spins_;
      for (auto& [v, x] : s) x = -x;
      return frozen(std::move(s));
    }
  }
  return *this;
}

std::string BoundaryCondition::describe() const {
  switch (kind_) {
    case Kind::Free:
      return "free";
    case Kind::AllPlus:
      return "plus";
    case Kind::AllMinus:
      return "minus";
    case Kind::Arbitrary: {
      std::string s = "tau:";
      for (int x : leaf_spins_) s += x > 0 ? '+' : '-';
      return s;
    }
    case Kind::FrozenSet:
      return "frozen:" + std::to_string(spins_.size());
  }
  return "?";
}

SpinConfig::SpinConfig(std::size_t n, int fill) : n_(n), words_((n + 63) / 64, 0) {
  if (fill > 0) {
    for (std::size_t v = 0; v < n; ++v) set(static_cast<VertexId>(v), 1);
  }
}

int SpinConfig::magnetization() const {
  int m = 0;
  for (std::size_t v = 0; v < n_; ++v) m += spin(static_cast<VertexId>(v));
  return m;
}

void SpinConfig::pin(const Pinning& pinning) {
  for (std::size_t v = 0; v < n_; ++v) {
    if (pinning[v] != 0) set(static_cast<VertexId>(v), pinning[v]);
  }
}

bool SpinConfig::agrees_with(const Pinning& pinning) const {
  for (std::size_t v = 0; v < n_; ++v) {
    if (pinning[v] != 0 && spin(static_cast<VertexId>(v)) != pinning[v]) return false;
  }
  return true;
}

bool SpinConfig::below(const SpinConfig& other) const {
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (words_[i] & ~other.words_[i]) return false;
  }
  return true;
}

int SpinConfig::hamming(const SpinConfig& other) const {
  int d = 0;
  for (std::size_t i = 0; i < words_.size(); ++i) d += std::popcount(words_[i] ^ other.words_[i]);
  return d;
}

std::string SpinConfig::to_hex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  const std::size_t nibbles = (n_ + 3) / 4;
  out.reserve(nibbles);
  for (std::size_t k = nibbles; k-- > 0;) {
    const std::size_t bit = 4 * k;
    const unsigned nib = static_cast<unsigned>((words_[bit >> 6] >> (bit & 63)) & 0xF);
    out.push_back(kDigits[nib]);
  }
  return out;
}

StateSpace::StateSpace(const Forest& forest, Pinning pinning) : forest_(forest), pinning_(std::move(pinning)) {
  if (pinning_.size() != forest_.size()) throw std::invalid_argument("StateSpace: pinning size mismatch");
  pos_.assign(forest_.size(), -1);
  for (std::size_t v = 0; v < forest_.size(); ++v) {
    if (forest_.present(static_cast<VertexId>(v)) && pinning_[v] == 0) {
      pos_[v] = static_cast<int>(free_.size());
      free_.push_back(static_cast<VertexId>(v));
    }
  }
  if (free_.size() > kMaxFreeVertices) throw SizeGuardError("StateSpace: too many free vertices to enumerate");
}

int StateSpace::spin(std::uint64_t state, VertexId v) const {
  const int p = pos_[static_cast<std::size_t>(v)];
  if (p < 0) return pinning_[static_cast<std::size_t>(v)];
  return (state >> p) & 1U ? 1 : -1;
}

SpinConfig StateSpace::decode(std::uint64_t state) const {
  SpinConfig c(forest_.size(), -1);
  c.pin(pinning_);
  for (std::size_t i = 0; i < free_.size(); ++i) c.set(free_[i], (state >> i) & 1U ? 1 : -1);
  return c;
}

std::uint64_t StateSpace::encode(const SpinConfig& config) const {
  std::uint64_t s = 0;
  for (std::size_t i = 0; i < free_.size(); ++i) {
    if (config.spin(free_[i]) > 0) s |= std::uint64_t{1} << i;
  }
  return s;
}

void StateSpace::decode_into(std::uint64_t state, std::span<std::int8_t> spins) const {
  for (std::size_t v = 0; v < forest_.size(); ++v) {
    spins[v] = forest_.present(static_cast<VertexId>(v)) ? pinning_[v] : 0;
  }
  for (std::size_t i = 0; i < free_.size(); ++i) {
    spins[static_cast<std::size_t>(free_[i])] = (state >> i) & 1U ? 1 : -1;
  }
}

}  // namespace treeglass
