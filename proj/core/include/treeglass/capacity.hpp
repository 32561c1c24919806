#pragma once

// Electrical networks on rooted trees: edge resistances, root-to-leaves
// effective resistance (hence L2-capacity), Nash-Williams cutset bounds and
// flow checks. Edges are named by their lower endpoint.

#include <cmath>
#include <span>
#include <vector>

#include "treeglass/tree.hpp"

namespace treeglass {

class ResistorTree {
 public:
  // resistance[v] belongs to the edge (parent[v], v); the root entry is ignored.
  ResistorTree(std::vector<VertexId> parent, std::vector<double> resistance);
  // Same, with natural logs of the resistances (for values past double range).
  static ResistorTree from_log(std::vector<VertexId> parent, std::vector<double> log_resistance);

  std::size_t size() const { return parent_.size(); }
  VertexId root() const { return root_; }
  VertexId parent(VertexId v) const { return parent_[static_cast<std::size_t>(v)]; }
  std::span<const VertexId> children(VertexId v) const { return forest_.children(v); }
  bool is_leaf(VertexId v) const { return children(v).empty(); }
  double resistance(VertexId v) const { return std::exp(log_r_[static_cast<std::size_t>(v)]); }
  double log_resistance(VertexId v) const { return log_r_[static_cast<std::size_t>(v)]; }
  const std::vector<VertexId>& top_down() const { return forest_.top_down(); }
  int depth(VertexId v) const { return depth_[static_cast<std::size_t>(v)]; }
  int height() const;
  std::vector<VertexId> leaves() const;

 private:
  ResistorTree() = default;
  void init(std::vector<VertexId> parent, std::vector<double> log_r);

  std::vector<VertexId> parent_;
  std::vector<double> log_r_;
  std::vector<int> depth_;
  Forest forest_;
  VertexId root_ = 0;
};

// B(rho, depth + 1) (levels 0..depth, depth < 0 meaning the whole tree) with
// R = theta^{-2k} on the edge into level k.
ResistorTree paper_resistances(const TreeShape& shape, double theta, int depth = -1);

// Root to leaves. Switches to log-domain accumulation when resistances leave
// the comfortable double range.
double effective_resistance(const ResistorTree& rt);
double log_effective_resistance(const ResistorTree& rt);
double capacity(const ResistorTree& rt);  // 1 / R_eff

// Edge sets, each given by lower endpoints.
using Cutset = std::vector<VertexId>;

// sum_j (sum_{e in Pi_j} 1/R_e)^{-1}. Throws std::invalid_argument unless the
// cutsets are pairwise disjoint and each separates the root from every leaf.
double nash_williams_bound(const ResistorTree& rt, const std::vector<Cutset>& cutsets);
// Cutset k holds the edges into depth k, for k = 1..height.
std::vector<Cutset> level_cutsets(const ResistorTree& rt);

struct FlowReport {
  double strength = 0.0;  // |f|
  double voltage = 0.0;   // V(f)
  bool feasible = true;   // nonnegative and conserved
  std::vector<VertexId> violations;
  // |f| <= cap2 whenever V(f) <= 1 (vacuous otherwise)
  bool within_capacity = true;
};

FlowReport validate_flow(const ResistorTree& rt, std::span<const double> flow);

// The unit-strength electrical current from the root to the leaves.
std::vector<double> unit_current_flow(const ResistorTree& rt);

}  // namespace treeglass
