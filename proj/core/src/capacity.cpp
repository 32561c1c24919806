#include "treeglass/capacity.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace treeglass {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLogRange = 600.0;

std::size_t idx(VertexId v) { return static_cast<std::size_t>(v); }

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

}  // namespace

ResistorTree::ResistorTree(std::vector<VertexId> parent, std::vector<double> resistance) {
  if (parent.size() != resistance.size()) throw std::invalid_argument("ResistorTree: size mismatch");
  std::vector<double> log_r(resistance.size(), 0.0);
  for (std::size_t v = 0; v < parent.size(); ++v) {
    if (parent[v] == kNoVertex) continue;
    if (!(resistance[v] > 0.0) || !std::isfinite(resistance[v])) {
      throw std::invalid_argument("ResistorTree: resistances must be positive and finite");
    }
    log_r[v] = std::log(resistance[v]);
  }
  init(std::move(parent), std::move(log_r));
}

ResistorTree ResistorTree::from_log(std::vector<VertexId> parent, std::vector<double> log_resistance) {
  if (parent.size() != log_resistance.size()) throw std::invalid_argument("ResistorTree: size mismatch");
  for (std::size_t v = 0; v < parent.size(); ++v) {
    if (parent[v] != kNoVertex && !std::isfinite(log_resistance[v])) {
      throw std::invalid_argument("ResistorTree: log resistances must be finite");
    }
  }
  ResistorTree rt;
  rt.init(std::move(parent), std::move(log_resistance));
  return rt;
}

void ResistorTree::init(std::vector<VertexId> parent, std::vector<double> log_r) {
  if (parent.empty()) throw std::invalid_argument("ResistorTree: empty tree");
  int roots = 0;
  for (std::size_t v = 0; v < parent.size(); ++v) {
    if (parent[v] == kNoVertex) {
      ++roots;
      root_ = static_cast<VertexId>(v);
      log_r[v] = 0.0;
    }
  }
  if (roots != 1) throw std::invalid_argument("ResistorTree: need exactly one root");
  forest_ = Forest(parent, std::vector<bool>(parent.size(), true));
  parent_ = std::move(parent);
  log_r_ = std::move(log_r);
  depth_.assign(parent_.size(), 0);
  for (VertexId v : forest_.top_down()) {
    if (parent_[idx(v)] != kNoVertex) depth_[idx(v)] = depth_[idx(parent_[idx(v)])] + 1;
  }
}

int ResistorTree::height() const { return *std::max_element(depth_.begin(), depth_.end()); }

std::vector<VertexId> ResistorTree::leaves() const {
  std::vector<VertexId> out;
  for (VertexId v : top_down()) {
    if (is_leaf(v)) out.push_back(v);
  }
  return out;
}

ResistorTree paper_resistances(const TreeShape& shape, double theta, int depth) {
  if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("paper_resistances: theta must lie in (0, 1)");
  if (depth < 0) depth = shape.height();
  if (depth > shape.height()) throw std::invalid_argument("paper_resistances: depth exceeds the tree height");
  const auto vertices = shape.subtree(shape.root(), depth + 1);
  std::vector<VertexId> parent(vertices.size());
  std::vector<double> log_r(vertices.size(), 0.0);
  const double lt = std::log(theta);
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    parent[i] = shape.parent(vertices[i]);
    log_r[i] = -2.0 * shape.level(vertices[i]) * lt;
  }
  return ResistorTree::from_log(std::move(parent), std::move(log_r));
}

double log_effective_resistance(const ResistorTree& rt) {
  std::vector<double> lr(rt.size(), kNegInf);
  const auto& order = rt.top_down();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const VertexId v = *it;
    if (rt.is_leaf(v)) continue;
    double log_c = kNegInf;
    for (VertexId c : rt.children(v)) log_c = log_add(log_c, -log_add(rt.log_resistance(c), lr[idx(c)]));
    lr[idx(v)] = -log_c;
  }
  return lr[idx(rt.root())];
}

double effective_resistance(const ResistorTree& rt) {
  for (VertexId v : rt.top_down()) {
    if (v != rt.root() && std::abs(rt.log_resistance(v)) > kLogRange) return std::exp(log_effective_resistance(rt));
  }
  std::vector<double> r(rt.size(), 0.0);
  const auto& order = rt.top_down();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const VertexId v = *it;
    if (rt.is_leaf(v)) continue;
    CompensatedSum c;
    for (VertexId ch : rt.children(v)) c.add(1.0 / (rt.resistance(ch) + r[idx(ch)]));
    r[idx(v)] = 1.0 / c.value();
  }
  return r[idx(rt.root())];
}

double capacity(const ResistorTree& rt) { return 1.0 / effective_resistance(rt); }

double nash_williams_bound(const ResistorTree& rt, const std::vector<Cutset>& cutsets) {
  std::vector<int> owner(rt.size(), -1);
  for (std::size_t j = 0; j < cutsets.size(); ++j) {
    if (cutsets[j].empty()) throw std::invalid_argument("nash_williams_bound: empty cutset");
    for (VertexId e : cutsets[j]) {
      if (e < 0 || idx(e) >= rt.size() || e == rt.root()) throw std::invalid_argument("nash_williams_bound: bad edge");
      if (owner[idx(e)] >= 0) throw std::invalid_argument("nash_williams_bound: cutsets are not disjoint");
      owner[idx(e)] = static_cast<int>(j);
    }
  }
  CompensatedSum total;
  for (std::size_t j = 0; j < cutsets.size(); ++j) {
    // every root-to-leaf path must cross cutset j
    std::vector<VertexId> stack{rt.root()};
    while (!stack.empty()) {
      const VertexId v = stack.back();
      stack.pop_back();
      if (rt.is_leaf(v)) throw std::invalid_argument("nash_williams_bound: cutset does not separate root from leaves");
      for (VertexId c : rt.children(v)) {
        if (owner[idx(c)] != static_cast<int>(j)) stack.push_back(c);
      }
    }
    CompensatedSum cond;
    for (VertexId e : cutsets[j]) cond.add(std::exp(-rt.log_resistance(e)));
    total.add(1.0 / cond.value());
  }
  return total.value();
}

std::vector<Cutset> level_cutsets(const ResistorTree& rt) {
  std::vector<Cutset> out(static_cast<std::size_t>(rt.height()));
  for (VertexId v : rt.top_down()) {
    if (v != rt.root()) out[static_cast<std::size_t>(rt.depth(v) - 1)].push_back(v);
  }
  return out;
}

FlowReport validate_flow(const ResistorTree& rt, std::span<const double> flow) {
  if (flow.size() != rt.size()) throw std::invalid_argument("validate_flow: one value per vertex");
  FlowReport rep;
  std::vector<bool> bad(rt.size(), false);
  for (VertexId v : rt.top_down()) {
    if (v != rt.root() && flow[idx(v)] < 0.0) bad[idx(v)] = true;
  }
  for (VertexId v : rt.top_down()) {
    if (v == rt.root() || rt.is_leaf(v)) continue;
    CompensatedSum out;
    for (VertexId c : rt.children(v)) out.add(flow[idx(c)]);
    if (std::abs(out.value() - flow[idx(v)]) > 1e-9 * (1.0 + std::abs(flow[idx(v)]))) bad[idx(v)] = true;
  }
  for (VertexId v : rt.top_down()) {
    if (bad[idx(v)]) rep.violations.push_back(v);
  }
  rep.feasible = rep.violations.empty();
  for (VertexId c : rt.children(rt.root())) rep.strength += flow[idx(c)];
  std::vector<double> pot(rt.size(), 0.0);
  for (VertexId v : rt.top_down()) {
    if (v == rt.root()) continue;
    pot[idx(v)] = pot[idx(rt.parent(v))] + flow[idx(v)] * rt.resistance(v);
    if (rt.is_leaf(v)) rep.voltage = std::max(rep.voltage, pot[idx(v)]);
  }
  if (rep.feasible && rep.voltage <= 1.0 + 1e-12) {
    rep.within_capacity = rep.strength <= capacity(rt) * (1.0 + 1e-9);
  }
  return rep;
}

std::vector<double> unit_current_flow(const ResistorTree& rt) {
  std::vector<double> r(rt.size(), 0.0);
  const auto& order = rt.top_down();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const VertexId v = *it;
    if (rt.is_leaf(v)) continue;
    CompensatedSum c;
    for (VertexId ch : rt.children(v)) c.add(1.0 / (rt.resistance(ch) + r[idx(ch)]));
    r[idx(v)] = 1.0 / c.value();
  }
  std::vector<double> flow(rt.size(), 0.0);
  std::vector<double> in(rt.size(), 0.0);
  in[idx(rt.root())] = 1.0;
  for (VertexId v : order) {
    if (rt.is_leaf(v)) continue;
    for (VertexId c : rt.children(v)) {
      flow[idx(c)] = in[idx(v)] * r[idx(v)] / (rt.resistance(c) + r[idx(c)]);
      in[idx(c)] = flow[idx(c)];
    }
  }
  return flow;
}

}  // namespace treeglass
