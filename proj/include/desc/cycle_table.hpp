#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "desc/so3.hpp"
#include "desc/viewgraph.hpp"

namespace desc {

/// How many 3-cycles to keep per edge. With sampling enabled the budget is
/// max(ceil(median_fraction * median cycle count), minimum); edges with at
/// most `budget` cycles keep all of them.
struct CycleBudget {
  bool sample = true;
  double median_fraction = 0.25;
  int minimum = 30;

  static CycleBudget all_cycles() { return CycleBudget{false, 0.25, 30}; }
  int budget_for_median(double median_cycles) const;
};

/// d(R_ij R_jk R_ki, I): inconsistency of the triangle ijk.
double cycle_inconsistency(const Rotation& r_ij, const Rotation& r_jk, const Rotation& r_ki);

/// Sampled 3-cycles per edge and their inconsistencies, stored in CSR form.
/// For edge e = (i, j) and slot t in [begin(e), end(e)):
///   node(t) = k, edge_ik(t) / edge_jk(t) are the edge ids of ik and jk,
///   d(t) = d_ij,k.
/// Slots of one edge are sorted by k.
class CycleTable {
 public:
  int num_edges() const { return static_cast<int>(offsets_.size()) - 1; }
  std::size_t total_cycles() const { return nodes_.size(); }
  int budget() const { return budget_; }
  double median_cycle_count() const { return median_; }

  std::size_t begin(int e) const { return offsets_[static_cast<std::size_t>(e)]; }
  std::size_t end(int e) const { return offsets_[static_cast<std::size_t>(e) + 1]; }
  std::size_t size(int e) const { return end(e) - begin(e); }

  std::span<const int> cycle_nodes(int e) const { return {nodes_.data() + begin(e), size(e)}; }
  std::span<const double> inconsistencies(int e) const { return {d_.data() + begin(e), size(e)}; }

  int node(std::size_t slot) const { return nodes_[slot]; }
  int edge_ik(std::size_t slot) const { return edge_ik_[slot]; }
  int edge_jk(std::size_t slot) const { return edge_jk_[slot]; }
  double d(std::size_t slot) const { return d_[slot]; }

  /// Position of cycle node k in the slots of edge e, if it was sampled.
  std::ptrdiff_t find_slot(int e, int k) const;

  /// Same cycles with caller-supplied inconsistencies, one per slot. Used to
  /// pose the program on values no rotation data would produce. Throws
  /// InputError on a size mismatch or values outside [0, 1].
  CycleTable with_inconsistencies(std::vector<double> d) const;

 private:
  friend CycleTable build_cycle_table(const ViewGraph&, const CycleBudget&, Rng&);

  std::vector<std::size_t> offsets_{0};
  std::vector<int> nodes_;
  std::vector<int> edge_ik_;
  std::vector<int> edge_jk_;
  std::vector<double> d_;
  int budget_ = 0;
  double median_ = 0.0;
};

/// Common neighbours of each edge's endpoints, as (k, edge ik, edge jk).
struct CommonNeighbor {
  int node;
  int edge_ik;
  int edge_jk;
};
std::vector<CommonNeighbor> common_neighbors(const ViewGraph& g, int e);

/// Throws UncoveredEdgesError if some edge has no 3-cycle.
CycleTable build_cycle_table(const ViewGraph& g, const CycleBudget& policy, Rng& rng);

/// Checks |d_ij,k - s*_ij| <= s*_ik + s*_jk + tol for every stored cycle.
bool stability_bound_check(const CycleTable& table, const GroundTruth& truth, double tol = 1e-9);

}  // namespace desc
