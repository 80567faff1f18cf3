#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "desc/viewgraph.hpp"

namespace desc {

/// Uniform corruption model on an Erdos-Renyi graph G(n, p): each edge is
/// replaced by a fresh Haar rotation with probability q, otherwise it is the
/// ground-truth ratio perturbed by Wigner noise of level sigma.
struct UcmParams {
  int n = 100;
  double p = 0.5;
  double q = 0.0;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  /// Redraws of the graph allowed when it comes out disconnected.
  int max_regenerations = 20;
  /// Throw when still disconnected after the redraws.
  bool require_connected = true;

  void validate() const;
};

struct UcmInstance {
  UcmParams params;
  ViewGraph graph;
  GroundTruth truth;
  int regenerations = 0;

  int num_corrupted() const;
};

/// Seed of a named child stream for the (seed, q, sigma) cell.
std::uint64_t derive_seed(std::uint64_t seed, double q, double sigma, std::string_view stream);

UcmInstance generate_ucm(const UcmParams& params);

struct SweepGrid {
  std::vector<double> q;
  std::vector<double> sigma;
  int seeds = 1;
  std::uint64_t first_seed = 0;

  /// q = 0, 0.1, ..., 0.8; sigma in {0, 0.1}; 10 seeds.
  static SweepGrid default_grid();
};

/// One parameter set per (q, sigma, seed), ordered q-major, then sigma, then seed.
std::vector<UcmParams> ucm_sweep(const SweepGrid& grid, int n = 100, double p = 0.5);

}  // namespace desc
