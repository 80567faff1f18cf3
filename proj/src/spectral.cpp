#include "desc/spectral.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fmt/core.h>

#include "desc/error.hpp"

namespace desc {

namespace {

using Basis = Eigen::Matrix<double, Eigen::Dynamic, 3>;

WeightedConnection normalize_rows(const ViewGraph& g, std::vector<std::vector<double>> raw) {
  for (int i = 0; i < g.num_nodes(); ++i) {
    auto& row = raw[static_cast<std::size_t>(i)];
    if (row.empty()) throw InputError(fmt::format("node {} is isolated", i));
    double sum = 0.0;
    for (double w : row) sum += w;
    for (double& w : row) w /= sum;
  }
  return {std::move(raw)};
}

// y = (X v + v) / 2
Basis apply_shifted(const WeightedConnection& wc, const ViewGraph& g, const Basis& v) {
  Basis y(v.rows(), 3);
  for (int i = 0; i < g.num_nodes(); ++i) {
    Mat3 acc = Mat3::Zero();
    const auto nbrs = g.neighbors(i);
    const auto& row = wc.weights[static_cast<std::size_t>(i)];
    for (std::size_t t = 0; t < nbrs.size(); ++t) {
      acc.noalias() += row[t] * g.measurement_from(nbrs[t].edge, i).matrix() * v.middleRows<3>(3 * nbrs[t].node);
    }
    y.middleRows<3>(3 * i) = 0.5 * (acc + v.middleRows<3>(3 * i));
  }
  return y;
}

Basis orthonormalize(const Basis& m) {
  Eigen::HouseholderQR<Basis> qr(m);
  Basis q = qr.householderQ() * Basis::Identity(m.rows(), 3);
  // Fix column signs so the iteration has a well-defined limit.
  const Eigen::Matrix3d r = qr.matrixQR().topRows<3>().triangularView<Eigen::Upper>();
  for (int c = 0; c < 3; ++c)
    if (r(c, c) < 0.0) q.col(c) = -q.col(c);
  return q;
}

}  // namespace

WeightedConnection build_weight_matrix(const ViewGraph& g, std::span<const double> s_hat, const SpectralConfig& cfg) {
  if (static_cast<int>(s_hat.size()) != g.num_edges()) {
    throw InputError(fmt::format("{} corruption estimates for {} edges", s_hat.size(), g.num_edges()));
  }
  std::vector<std::vector<double>> raw(static_cast<std::size_t>(g.num_nodes()));
  for (int i = 0; i < g.num_nodes(); ++i) {
    for (const Neighbor& nb : g.neighbors(i)) {
      const double s = s_hat[static_cast<std::size_t>(nb.edge)];
      raw[static_cast<std::size_t>(i)].push_back(std::min(std::pow(s, -cfg.weight_exponent), cfg.weight_cap));
    }
  }
  return normalize_rows(g, std::move(raw));
}

WeightedConnection uniform_weights(const ViewGraph& g) {
  std::vector<std::vector<double>> raw(static_cast<std::size_t>(g.num_nodes()));
  for (int i = 0; i < g.num_nodes(); ++i) raw[static_cast<std::size_t>(i)].assign(g.neighbors(i).size(), 1.0);
  return normalize_rows(g, std::move(raw));
}

SpectralResult spectral_sync(const WeightedConnection& wc, const ViewGraph& g, const SpectralConfig& cfg) {
  const int n = g.num_nodes();
  if (n == 0) throw InputError("empty graph");
  if (static_cast<int>(wc.weights.size()) != n) throw InputError("weight rows do not match node count");

  // Deterministic start, independent of any caller RNG.
  Rng start_rng(0x5eed5eedULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  Basis q(3 * n, 3);
  for (int r = 0; r < 3 * n; ++r)
    for (int c = 0; c < 3; ++c) q(r, c) = normal(start_rng);
  q = orthonormalize(q);

  SpectralResult result;
  double change = std::numeric_limits<double>::infinity();
  int iter = 0;
  while (iter < cfg.max_iters && !(change <= cfg.tolerance)) {
    ++iter;
    Basis next = orthonormalize(apply_shifted(wc, g, q));
    change = (next - q * (q.transpose() * next)).norm();
    q = std::move(next);
  }

  const Basis xq = 2.0 * apply_shifted(wc, g, q) - q;
  result.iterations = iter;
  result.subspace_change = change;
  result.rayleigh_residual = (xq - q * (q.transpose() * xq)).norm();
  result.converged = change <= cfg.tolerance;
  if (!result.converged && !(result.rayleigh_residual <= cfg.stall_residual)) {
    throw SpectralError(fmt::format("orthogonal iteration did not converge in {} iterations "
                                    "(subspace change {:.3g}, Rayleigh residual {:.3g})",
                                    iter, change, result.rayleigh_residual),
                        change, result.rayleigh_residual);
  }

  // Blocks are R_i O for one orthogonal O; flip a column if det O = -1.
  double det_sum = 0.0;
  for (int i = 0; i < n; ++i) det_sum += Mat3(q.middleRows<3>(3 * i)).determinant();
  if (det_sum < 0.0) q.col(2) = -q.col(2);

  result.rotations.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) result.rotations.push_back(project_to_so3(q.middleRows<3>(3 * i)));
  return result;
}

}  // namespace desc
