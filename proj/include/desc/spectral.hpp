#pragma once

#include <span>
#include <vector>

#include "desc/so3.hpp"
#include "desc/viewgraph.hpp"

namespace desc {

/// Row-normalized connection weights. weights[i][t] is w_ij for
/// j = g.neighbors(i)[t].node; each row sums to one. w_ij and w_ji differ
/// in general since each row has its own normalization.
struct WeightedConnection {
  std::vector<std::vector<double>> weights;
};

struct SpectralConfig {
  /// Raw weight is min(s_hat^-exponent, weight_cap).
  double weight_exponent = 1.5;
  double weight_cap = 1e8;
  int max_iters = 1000;
  /// Convergence threshold on the subspace change between iterates.
  double tolerance = 1e-10;
  /// At the iteration cap, a basis whose Rayleigh residual is at most this
  /// is returned unconverged (near-degenerate eigengap); otherwise the
  /// solve fails.
  double stall_residual = 1e-4;
};

/// Throws InputError for isolated nodes or a length mismatch.
WeightedConnection build_weight_matrix(const ViewGraph& g, std::span<const double> s_hat,
                                       const SpectralConfig& cfg = {});

/// Every neighbor of node i gets 1/deg(i).
WeightedConnection uniform_weights(const ViewGraph& g);

struct SpectralResult {
  std::vector<Rotation> rotations;
  int iterations = 0;
  bool converged = false;
  double subspace_change = 0.0;
  /// ||X Q - Q (Q^T X Q)||_F for the final orthonormal basis Q; large values
  /// mean the dominant subspace is poorly separated.
  double rayleigh_residual = 0.0;
};

/// Dominant 3-dimensional invariant subspace of the 3n x 3n block matrix X
/// with blocks w_ij R_ij, by orthogonal iteration on (X + I) / 2 from a fixed
/// start. The eigenvalues of X are real and lie in [-1, 1], so the shift
/// selects the algebraically largest ones and keeps bipartite graphs from
/// oscillating. Each 3x3 block of the basis is projected to SO(3) after
/// fixing the basis orientation. Throws SpectralError if the cap is reached
/// with a Rayleigh residual above cfg.stall_residual.
SpectralResult spectral_sync(const WeightedConnection& wc, const ViewGraph& g, const SpectralConfig& cfg = {});

}  // namespace desc
