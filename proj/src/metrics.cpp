#include "desc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/core.h>

#include "desc/error.hpp"

namespace desc {

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

ErrorSummary corruption_error(std::span<const double> s_hat, std::span<const double> s_star) {
  if (s_hat.size() != s_star.size()) {
    throw InputError(fmt::format("corruption vectors differ in length ({} vs {})", s_hat.size(), s_star.size()));
  }
  if (s_hat.empty()) return {};
  std::vector<double> dev(s_hat.size());
  double sum = 0.0;
  for (std::size_t e = 0; e < s_hat.size(); ++e) {
    dev[e] = std::abs(s_hat[e] - s_star[e]);
    sum += dev[e];
  }
  return {sum / static_cast<double>(dev.size()), median(std::move(dev))};
}

Rotation align_rotations(std::span<const Rotation> est, std::span<const Rotation> truth) {
  if (est.size() != truth.size() || est.empty()) {
    throw InputError(fmt::format("cannot align {} estimates to {} ground-truth rotations", est.size(), truth.size()));
  }
  Mat3 acc = Mat3::Zero();
  for (std::size_t i = 0; i < est.size(); ++i) acc += est[i].matrix().transpose() * truth[i].matrix();
  try {
    return project_to_so3(acc);
  } catch (const DegenerateProjectionError&) {
    throw SolverError("rotation alignment failed: degenerate correlation matrix");
  }
}

RotationErrors rotation_error_stats(std::span<const Rotation> est, std::span<const Rotation> truth) {
  RotationErrors out;
  out.alignment = align_rotations(est, truth);
  out.per_node_deg.resize(est.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    out.per_node_deg[i] = 180.0 * angular_distance(est[i] * out.alignment, truth[i]);
    sum += out.per_node_deg[i];
  }
  out.mean_deg = sum / static_cast<double>(est.size());
  out.median_deg = median(out.per_node_deg);
  return out;
}

}  // namespace desc
