#pragma once

// Geometry of rooted b-ary trees, Ising parameters, boundary conditions and
// spin configurations. Everything else in treeglass indexes against these.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace treeglass {

using VertexId = std::int32_t;
inline constexpr VertexId kNoVertex = -1;

// Rooted forest over a fixed vertex set 0..size-1. Vertices may be absent
// (they then carry no edges). Used for the full tree, for induced
// subforests (the speed-up forest F, the subforest G) and for blocks.
class Forest {
 public:
  Forest() = default;
  Forest(std::vector<VertexId> parent, std::vector<bool> present);

  std::size_t size() const { return parent_.size(); }
  bool present(VertexId v) const { return present_[static_cast<std::size_t>(v)]; }
  VertexId parent(VertexId v) const { return parent_[static_cast<std::size_t>(v)]; }
  std::span<const VertexId> children(VertexId v) const {
    auto b = child_offset_[static_cast<std::size_t>(v)];
    auto e = child_offset_[static_cast<std::size_t>(v) + 1];
    return {child_list_.data() + b, e - b};
  }
  // Present vertices in an order where every parent precedes its children.
  const std::vector<VertexId>& top_down() const { return top_down_; }
  std::size_t present_count() const { return top_down_.size(); }
  std::size_t edge_count() const;

  // Forest induced on the vertices with mask[v] true (and present here).
  Forest induced(const std::vector<bool>& mask) const;

 private:
  std::vector<VertexId> parent_;
  std::vector<bool> present_;
  std::vector<std::size_t> child_offset_;
  std::vector<VertexId> child_list_;
  std::vector<VertexId> top_down_;
};

// Complete b-ary tree of height h in breadth-first numbering: level k holds
// b^k vertices starting at index (b^k - 1)/(b - 1).
class TreeShape {
 public:
  TreeShape(int branching, int height);

  int branching() const { return b_; }
  int height() const { return h_; }
  std::size_t size() const { return n_; }
  VertexId root() const { return 0; }

  int level(VertexId v) const;
  VertexId parent(VertexId v) const { return v == 0 ? kNoVertex : (v - 1) / b_; }
  VertexId child(VertexId v, int i) const { return b_ * v + 1 + i; }
  bool is_leaf(VertexId v) const { return level(v) == h_; }
  VertexId level_begin(int k) const;
  std::size_t level_size(int k) const;
  std::vector<VertexId> level_vertices(int k) const;
  std::vector<VertexId> leaves() const { return level_vertices(h_); }

  bool is_ancestor(VertexId a, VertexId v) const;  // a == v counts
  VertexId meet(VertexId u, VertexId w) const;
  int dist(VertexId u, VertexId w) const;

  // Vertices of T_v restricted to its first `levels` levels (B(v, levels)),
  // in breadth-first order. levels < 0 means all of T_v.
  std::vector<VertexId> subtree(VertexId v, int levels = -1) const;

  const Forest& forest() const { return forest_; }

 private:
  int b_;
  int h_;
  std::size_t n_;
  std::vector<VertexId> level_offset_;
  Forest forest_;
};

struct IsingParams {
  double beta = 0.0;
  double theta = 0.0;
  std::optional<double> epsilon;

  static IsingParams from_beta(double beta);
  static IsingParams critical(int b);
  // theta = sqrt((1 + eps) / b), beta = atanh(theta).
  static IsingParams near_critical(int b, double eps);
};

double critical_beta(int b);

// Per-vertex pinned spins: 0 = free, +1/-1 = frozen to that value.
using Pinning = std::vector<std::int8_t>;

class BoundaryCondition {
 public:
  enum class Kind { Free, AllPlus, AllMinus, Arbitrary, FrozenSet };

  static BoundaryCondition free() { return BoundaryCondition(Kind::Free, {}); }
  static BoundaryCondition all_plus() { return BoundaryCondition(Kind::AllPlus, {}); }
  static BoundaryCondition all_minus() { return BoundaryCondition(Kind::AllMinus, {}); }
  // One spin per leaf, in breadth-first leaf order.
  static BoundaryCondition arbitrary(std::vector<int> leaf_spins);
  static BoundaryCondition frozen(std::map<VertexId, int> spins);

  Kind kind() const { return kind_; }
  bool is_free() const { return kind_ == Kind::Free; }
  Pinning resolve(const TreeShape& shape) const;
  BoundaryCondition flipped() const;
  std::string describe() const;

 private:
  BoundaryCondition(Kind kind, std::map<VertexId, int> spins)
      : kind_(kind), spins_(std::move(spins)) {}
  Kind kind_;
  std::vector<int> leaf_spins_;
  std::map<VertexId, int> spins_;
};

// Bit-packed +-1 assignment; bit v set <=> sigma(v) = +1.
class SpinConfig {
 public:
  SpinConfig() = default;
  explicit SpinConfig(std::size_t n, int fill = -1);

  std::size_t size() const { return n_; }
  int spin(VertexId v) const {
    auto i = static_cast<std::size_t>(v);
    return (words_[i >> 6] >> (i & 63)) & 1U ? 1 : -1;
  }
  void set(VertexId v, int s) {
    auto i = static_cast<std::size_t>(v);
    const std::uint64_t bit = std::uint64_t{1} << (i & 63);
    if (s > 0) {
      words_[i >> 6] |= bit;
    } else {
      words_[i >> 6] &= ~bit;
    }
  }
  void flip(VertexId v) {
    auto i = static_cast<std::size_t>(v);
    words_[i >> 6] ^= std::uint64_t{1} << (i & 63);
  }
  int magnetization() const;
  // Applies the pinned spins.
  void pin(const Pinning& pinning);
  bool agrees_with(const Pinning& pinning) const;
  // Coordinatewise order: *this <= other.
  bool below(const SpinConfig& other) const;
  int hamming(const SpinConfig& other) const;
  std::string to_hex() const;

  friend bool operator==(const SpinConfig&, const SpinConfig&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint64_t> words_;
};

// Enumeration of the configurations of the free vertices of a forest: state
// index bit i <=> free_vertices()[i] is +1. Pinned vertices keep their spins.
class StateSpace {
 public:
  static constexpr int kMaxFreeVertices = 30;

  StateSpace(const Forest& forest, Pinning pinning);
  StateSpace(const TreeShape& shape, const BoundaryCondition& bc)
      : StateSpace(shape.forest(), bc.resolve(shape)) {}

  const Forest& forest() const { return forest_; }
  const Pinning& pinning() const { return pinning_; }
  const std::vector<VertexId>& free_vertices() const { return free_; }
  // Position of v among the free vertices, or -1.
  int position(VertexId v) const { return pos_[static_cast<std::size_t>(v)]; }
  std::size_t free_count() const { return free_.size(); }
  std::uint64_t state_count() const { return std::uint64_t{1} << free_.size(); }

  int spin(std::uint64_t state, VertexId v) const;
  SpinConfig decode(std::uint64_t state) const;
  std::uint64_t encode(const SpinConfig& config) const;
  // Writes spins for every vertex (0 for absent ones).
  void decode_into(std::uint64_t state, std::span<std::int8_t> spins) const;

 private:
  Forest forest_;
  Pinning pinning_;
  std::vector<VertexId> free_;
  std::vector<int> pos_;
};

class SizeGuardError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace treeglass
