#include "desc/refine.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <fmt/core.h>
#include <numbers>
#include <numeric>

#include "desc/error.hpp"

namespace desc {

void RefineConfig::validate() const {
  if (max_iters < 1) throw InputError("refinement needs at least one iteration");
  if (!(convergence_tol > 0.0 && weight_exponent > 0.0 && truncation_slope >= 0.0 && truncation_cap >= 0.0 &&
        weight_floor > 0.0 && weight_cap >= weight_floor && cg_tolerance > 0.0)) {
    throw InputError("invalid refinement configuration");
  }
}

double RefineConfig::truncation_percent(int t) const {
  if (baseline_irls) return 0.0;
  return std::min(truncation_slope * t, truncation_cap);
}

EdgeResiduals tangent_residual_edges(const ViewGraph& g, std::span<const Rotation> rotations) {
  EdgeResiduals out;
  out.omega.reserve(static_cast<std::size_t>(g.num_edges()));
  for (int e = 0; e < g.num_edges(); ++e) {
    const Edge& ed = g.edge(e);
    const Rotation arg = rotations[static_cast<std::size_t>(ed.i)].transpose() * ed.rij *
                         rotations[static_cast<std::size_t>(ed.j)];
    const LogResult log = so3_log_checked(arg);
    out.omega.push_back(log.v);
    if (log.at_cut_locus) out.flagged.push_back(e);
  }
  return out;
}

TangentSolve solve_tangent_ls(const ViewGraph& g, std::span<const double> weights,
                              std::span<const TangentVector> omega_edges, double tolerance) {
  const int n = g.num_nodes();
  using Block = Eigen::Matrix<double, Eigen::Dynamic, 3>;

  Block b = Block::Zero(n, 3);
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  for (int e = 0; e < g.num_edges(); ++e) {
    const Edge& ed = g.edge(e);
    const double w = weights[static_cast<std::size_t>(e)];
    if (!(w > 0.0)) throw InputError(fmt::format("edge {} has nonpositive weight", e));
    b.row(ed.i) += w * omega_edges[static_cast<std::size_t>(e)].transpose();
    b.row(ed.j) -= w * omega_edges[static_cast<std::size_t>(e)].transpose();
    diag[ed.i] += w;
    diag[ed.j] += w;
  }
  for (int i = 0; i < n; ++i)
    if (diag[i] <= 0.0) throw InputError(fmt::format("node {} is isolated", i));

  auto laplacian = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd y = diag.cwiseProduct(x);
    for (int e = 0; e < g.num_edges(); ++e) {
      const Edge& ed = g.edge(e);
      const double w = weights[static_cast<std::size_t>(e)];
      y[ed.i] -= w * x[ed.j];
      y[ed.j] -= w * x[ed.i];
    }
    return y;
  };

  TangentSolve out;
  Block x = Block::Zero(n, 3);
  const int cap = std::max(10 * n, 10);
  double worst = 0.0;
  for (int c = 0; c < 3; ++c) {
    // Exact sums vanish by antisymmetry; drop the rounding left along the null vector.
    const Eigen::VectorXd rhs = b.col(c).array() - b.col(c).mean();
    const double bnorm = rhs.norm();
    if (bnorm == 0.0) continue;
    Eigen::VectorXd xc = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd r = rhs;
    Eigen::VectorXd z = r.cwiseQuotient(diag);
    Eigen::VectorXd p = z;
    double rz = r.dot(z);
    int it = 0;
    while (it < cap && r.norm() > tolerance * bnorm) {
      const Eigen::VectorXd ap = laplacian(p);
      const double pap = p.dot(ap);
      if (!(pap > 0.0)) break;
      const double alpha = rz / pap;
      xc += alpha * p;
      r -= alpha * ap;
      ++it;
      z = r.cwiseQuotient(diag);
      const double rz_next = r.dot(z);
      p = z + (rz_next / rz) * p;
      rz = rz_next;
    }
    const double rel = (rhs - laplacian(xc)).norm() / bnorm;
    out.cg_iterations = std::max(out.cg_iterations, it);
    worst = std::max(worst, rel);
    if (!(rel <= tolerance)) {
      throw SolverError(fmt::format("tangent least-squares solve failed after {} CG iterations "
                                    "(relative residual {:.3g})",
                                    it, rel));
    }
    x.col(c) = xc.array() - xc.mean();
  }
  out.relative_residual = worst;
  out.omega.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.omega[static_cast<std::size_t>(i)] = x.row(i).transpose();
  return out;
}

double normalized_residual(const TangentVector& xi, const TangentVector& xj, const TangentVector& omega_ij) {
  return (xi - xj - omega_ij).norm() / std::numbers::pi;
}

double blended_residual(int t, double r, double s_hat) {
  return (static_cast<double>(t) * r + s_hat) / static_cast<double>(t + 1);
}

std::vector<int> truncated_edges(std::span<const double> h, double percent) {
  const auto m = h.size();
  const auto count = static_cast<std::size_t>(
      std::clamp(std::ceil(percent * static_cast<double>(m) / 100.0 - 1e-9), 0.0, static_cast<double>(m)));
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return h[static_cast<std::size_t>(a)] > h[static_cast<std::size_t>(b)];
  });
  order.resize(count);
  return order;
}

SyncSolution refine_rotations(const ViewGraph& g, std::span<const double> s_hat, std::vector<Rotation> initial,
                              const RefineConfig& cfg) {
  cfg.validate();
  const auto m = static_cast<std::size_t>(g.num_edges());
  if (static_cast<int>(initial.size()) != g.num_nodes()) throw InputError("initial rotation count mismatch");
  if (!cfg.baseline_irls && s_hat.size() != m) throw InputError("corruption estimate count mismatch");

  auto clamp_weight = [&](double raw) { return std::clamp(raw, cfg.weight_floor, cfg.weight_cap); };

  SyncSolution sol;
  sol.rotations = std::move(initial);
  sol.weights.assign(m, 1.0);
  if (!cfg.baseline_irls) {
    for (std::size_t e = 0; e < m; ++e) sol.weights[e] = clamp_weight(std::pow(s_hat[e], -cfg.weight_exponent));
  }
  sol.residuals.assign(m, 0.0);

  std::vector<double> h(m);
  for (int t = 1; t <= cfg.max_iters; ++t) {
    const EdgeResiduals edges = tangent_residual_edges(g, sol.rotations);
    sol.flagged_residuals += static_cast<int>(edges.flagged.size());
    const TangentSolve step = solve_tangent_ls(g, sol.weights, edges.omega, cfg.cg_tolerance);

    double max_step = 0.0;
    for (std::size_t i = 0; i < sol.rotations.size(); ++i) {
      sol.rotations[i] = sol.rotations[i] * so3_exp(step.omega[i]);
      max_step = std::max(max_step, step.omega[i].norm());
    }

    double residual_sum = 0.0;
    for (std::size_t e = 0; e < m; ++e) {
      const Edge& ed = g.edge(static_cast<int>(e));
      const double r = normalized_residual(step.omega[static_cast<std::size_t>(ed.i)],
                                           step.omega[static_cast<std::size_t>(ed.j)], edges.omega[e]);
      sol.residuals[e] = r;
      residual_sum += r;
      h[e] = cfg.baseline_irls ? r : blended_residual(t, r, s_hat[e]);
      sol.weights[e] = clamp_weight(std::pow(h[e], -cfg.weight_exponent));
    }
    const auto cut = truncated_edges(h, cfg.truncation_percent(t));
    for (int e : cut) sol.weights[static_cast<std::size_t>(e)] = cfg.weight_floor;

    if (cfg.record_trace) {
      sol.trace.push_back({t, max_step, m ? residual_sum / static_cast<double>(m) : 0.0, static_cast<int>(cut.size())});
    }
    sol.iterations = t;
    if (max_step <= cfg.convergence_tol) {
      sol.converged = true;
      break;
    }
  }
  return sol;
}

}  // namespace desc
