#pragma once

#include <span>
#include <vector>

#include "desc/so3.hpp"

namespace desc {

struct ErrorSummary {
  double mean = 0.0;
  double median = 0.0;
};

/// Mean and median of |s_hat - s_star|. Throws InputError on length mismatch.
ErrorSummary corruption_error(std::span<const double> s_hat, std::span<const double> s_star);

/// Median of a sample (mean of the two middle values for even sizes).
double median(std::vector<double> values);

/// G = project_to_so3(sum_i est_i^T truth_i), the minimizer of
/// sum_i ||est_i G - truth_i||_F^2. Throws SolverError when the sum has rank <= 1.
Rotation align_rotations(std::span<const Rotation> est, std::span<const Rotation> truth);

struct RotationErrors {
  double mean_deg = 0.0;
  double median_deg = 0.0;
  /// 180 * d(est_i G, truth_i) per node.
  std::vector<double> per_node_deg;
  Rotation alignment;
};

/// Geodesic errors in degrees after chordal alignment.
RotationErrors rotation_error_stats(std::span<const Rotation> est, std::span<const Rotation> truth);

}  // namespace desc
