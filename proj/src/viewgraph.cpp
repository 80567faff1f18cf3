#include "desc/viewgraph.hpp"

#include <algorithm>
#include <fmt/core.h>
#include <numeric>

#include "desc/cycle_table.hpp"
#include "desc/error.hpp"

namespace desc {

ViewGraph::ViewGraph(int num_nodes) {
  if (num_nodes < 0) throw InputError("node count must be nonnegative");
  adjacency_.resize(static_cast<std::size_t>(num_nodes));
}

int ViewGraph::add_edge(int a, int b, const Rotation& r_ab) {
  const int n = num_nodes();
  if (a < 0 || b < 0 || a >= n || b >= n) {
    throw InputError(fmt::format("edge ({}, {}) references a node outside [0, {})", a, b, n));
  }
  if (a == b) throw InputError(fmt::format("self-loop at node {}", a));
  if (find_edge(a, b)) throw InputError(fmt::format("duplicate edge ({}, {})", a, b));

  const int id = num_edges();
  if (a < b) {
    edges_.push_back({a, b, r_ab});
  } else {
    edges_.push_back({b, a, r_ab.transpose()});
  }
  auto insert_sorted = [](std::vector<Neighbor>& list, Neighbor nb) {
    auto pos = std::lower_bound(list.begin(), list.end(), nb.node,
                                [](const Neighbor& x, int node) { return x.node < node; });
    list.insert(pos, nb);
  };
  insert_sorted(adjacency_[static_cast<std::size_t>(a)], {b, id});
  insert_sorted(adjacency_[static_cast<std::size_t>(b)], {a, id});
  return id;
}

std::optional<int> ViewGraph::find_edge(int a, int b) const {
  if (a < 0 || a >= num_nodes()) return std::nullopt;
  const auto& list = adjacency_[static_cast<std::size_t>(a)];
  auto pos = std::lower_bound(list.begin(), list.end(), b,
                              [](const Neighbor& x, int node) { return x.node < node; });
  if (pos != list.end() && pos->node == b) return pos->edge;
  return std::nullopt;
}

Rotation ViewGraph::measurement_from(int e, int from) const {
  const Edge& ed = edge(e);
  return from == ed.i ? ed.rij : ed.rij.transpose();
}

int ViewGraph::component_count() const {
  const int n = num_nodes();
  std::vector<int> label(static_cast<std::size_t>(n), -1);
  std::vector<int> stack;
  int components = 0;
  for (int s = 0; s < n; ++s) {
    if (label[static_cast<std::size_t>(s)] >= 0) continue;
    label[static_cast<std::size_t>(s)] = components;
    stack.push_back(s);
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (const Neighbor& nb : neighbors(u)) {
        if (label[static_cast<std::size_t>(nb.node)] < 0) {
          label[static_cast<std::size_t>(nb.node)] = components;
          stack.push_back(nb.node);
        }
      }
    }
    ++components;
  }
  return components;
}

double corruption_level(const ViewGraph& g, const std::vector<Rotation>& rotations, int e) {
  const Edge& ed = g.edge(e);
  const Rotation truth = rotations[static_cast<std::size_t>(ed.i)] * rotations[static_cast<std::size_t>(ed.j)].transpose();
  return angular_distance(ed.rij, truth);
}

GroundTruth make_ground_truth(const ViewGraph& g, std::vector<Rotation> rotations, std::vector<bool> bad) {
  if (static_cast<int>(rotations.size()) != g.num_nodes()) {
    throw InputError(fmt::format("ground truth has {} rotations for {} nodes", rotations.size(), g.num_nodes()));
  }
  if (bad.empty()) bad.assign(static_cast<std::size_t>(g.num_edges()), false);
  if (static_cast<int>(bad.size()) != g.num_edges()) throw InputError("edge label count mismatch");

  GroundTruth truth;
  truth.corruption.resize(static_cast<std::size_t>(g.num_edges()));
  for (int e = 0; e < g.num_edges(); ++e) {
    truth.corruption[static_cast<std::size_t>(e)] = corruption_level(g, rotations, e);
  }
  truth.rotations = std::move(rotations);
  truth.bad = std::move(bad);
  return truth;
}

PrunedGraph prune_uncovered_edges(const ViewGraph& g) {
  std::vector<int> kept(static_cast<std::size_t>(g.num_edges()));
  std::iota(kept.begin(), kept.end(), 0);
  ViewGraph current = g;

  while (true) {
    std::vector<int> survivors;
    for (int e = 0; e < current.num_edges(); ++e) {
      if (!common_neighbors(current, e).empty()) survivors.push_back(e);
    }
    if (static_cast<int>(survivors.size()) == current.num_edges()) break;

    ViewGraph next(current.num_nodes());
    std::vector<int> next_kept;
    for (int e : survivors) {
      const Edge& ed = current.edge(e);
      next.add_edge(ed.i, ed.j, ed.rij);
      next_kept.push_back(kept[static_cast<std::size_t>(e)]);
    }
    current = std::move(next);
    kept = std::move(next_kept);
  }
  return {std::move(current), std::move(kept)};
}

}  // namespace desc
