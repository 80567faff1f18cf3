#pragma once

#include <optional>
#include <span>
#include <vector>

#include "desc/so3.hpp"

namespace desc {

/// Undirected edge stored with i < j; `rij` is the measured relative
/// rotation R_ij ~ R_i R_j^T. The reverse measurement is rij^T.
struct Edge {
  int i = 0;
  int j = 0;
  Rotation rij;
};

struct Neighbor {
  int node = 0;
  int edge = 0;
};

/// Pose graph on nodes 0..n-1 with one measurement per undirected edge.
/// Adjacency lists are kept sorted by neighbor id.
class ViewGraph {
 public:
  ViewGraph() = default;
  explicit ViewGraph(int num_nodes);

  /// Adds edge {a, b} with measurement R_ab (a->b orientation). The edge is
  /// stored canonically, transposing the measurement when a > b. Throws
  /// InputError on self-loops, duplicates or out-of-range ids.
  int add_edge(int a, int b, const Rotation& r_ab);

  int num_nodes() const { return static_cast<int>(adjacency_.size()); }
  int num_edges() const { return static_cast<int>(edges_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(int e) const { return edges_[static_cast<std::size_t>(e)]; }

  std::span<const Neighbor> neighbors(int node) const { return adjacency_[static_cast<std::size_t>(node)]; }
  int degree(int node) const { return static_cast<int>(adjacency_[static_cast<std::size_t>(node)].size()); }
  std::optional<int> find_edge(int a, int b) const;

  /// Measurement of edge `e` oriented from node `from` to the other endpoint.
  Rotation measurement_from(int e, int from) const;

  int component_count() const;
  bool is_connected() const { return num_nodes() > 0 && component_count() == 1; }

 private:
  std::vector<Edge> edges_;
  std::vector<std::vector<Neighbor>> adjacency_;
};

/// Ground-truth absolute rotations and per-edge corruption levels.
struct GroundTruth {
  std::vector<Rotation> rotations;
  /// s*_ij = d(R_ij, R_i* R_j*^T), indexed by edge id.
  std::vector<double> corruption;
  /// true for corrupted (bad) edges.
  std::vector<bool> bad;
};

/// d(R_ij, R_i R_j^T) for edge `e`.
double corruption_level(const ViewGraph& g, const std::vector<Rotation>& rotations, int e);

/// Fills corruption levels from `rotations`; labels are taken as given.
GroundTruth make_ground_truth(const ViewGraph& g, std::vector<Rotation> rotations, std::vector<bool> bad);

struct PrunedGraph {
  ViewGraph graph;
  /// kept_edges[new_id] = original edge id.
  std::vector<int> kept_edges;
};

/// Repeatedly removes edges that lie on no triangle until every remaining
/// edge is covered by at least one 3-cycle.
PrunedGraph prune_uncovered_edges(const ViewGraph& g);

}  // namespace desc
