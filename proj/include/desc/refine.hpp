#pragma once

#include <span>
#include <vector>

#include "desc/so3.hpp"
#include "desc/viewgraph.hpp"

namespace desc {

struct RefineConfig {
  int max_iters = 100;
  /// Stop once max_i ||dOmega_i||_2 <= convergence_tol (radians).
  double convergence_tol = 1e-3;
  double weight_exponent = 1.5;
  /// Truncation percentage tau_t = min(slope * t, cap).
  double truncation_slope = 5.0;
  double truncation_cap = 20.0;
  double weight_floor = 1e-8;
  double weight_cap = 1e8;
  /// Relative residual tolerance of the Laplacian solves.
  double cg_tolerance = 1e-8;
  /// Plain IRLS-l1/2: h = r, uniform initial weights, no truncation.
  bool baseline_irls = false;
  bool record_trace = false;

  void validate() const;
  double truncation_percent(int t) const;
};

struct EdgeResiduals {
  /// dOmega_ij = log(R_i^T R_ij R_j) per edge id.
  std::vector<TangentVector> omega;
  /// Edges whose argument is within 1e-9 of angle pi.
  std::vector<int> flagged;
};

EdgeResiduals tangent_residual_edges(const ViewGraph& g, std::span<const Rotation> rotations);

struct TangentSolve {
  std::vector<TangentVector> omega;
  int cg_iterations = 0;
  double relative_residual = 0.0;
};

/// Minimum-norm minimizer of sum_ij w_ij ||x_i - x_j - omega_ij||^2, one
/// weighted-Laplacian system per coordinate, solved by Jacobi-preconditioned
/// conjugate gradients (cap 10 n iterations). Throws SolverError if the
/// tolerance is not met.
TangentSolve solve_tangent_ls(const ViewGraph& g, std::span<const double> weights,
                              std::span<const TangentVector> omega_edges, double tolerance = 1e-8);

/// ||x_i - x_j - omega_ij||_2 / pi, equal to the Frobenius form over sqrt(2) pi.
double normalized_residual(const TangentVector& xi, const TangentVector& xj, const TangentVector& omega_ij);

/// (t r + s_hat) / (t + 1).
double blended_residual(int t, double r, double s_hat);

/// Edge ids receiving the floor weight at percentage `percent`: the
/// ceil(percent |E| / 100) largest h values, ties broken by lower edge id.
std::vector<int> truncated_edges(std::span<const double> h, double percent);

struct RefineTraceRow {
  int iter = 0;
  double max_step_norm = 0.0;
  double mean_residual = 0.0;
  int truncated_count = 0;
};

struct SyncSolution {
  std::vector<Rotation> rotations;
  std::vector<double> weights;
  std::vector<double> residuals;
  int iterations = 0;
  bool converged = false;
  /// Number of edge residuals evaluated at the log cut locus over the run.
  int flagged_residuals = 0;
  std::vector<RefineTraceRow> trace;
};

/// Residual-driven IRLS in the tangent space, guided by s_hat. `s_hat` may be
/// empty in baseline mode.
SyncSolution refine_rotations(const ViewGraph& g, std::span<const double> s_hat, std::vector<Rotation> initial,
                              const RefineConfig& cfg = {});

}  // namespace desc
