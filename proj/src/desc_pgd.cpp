#include "desc/desc_pgd.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/core.h>
#include <functional>
#include <numeric>

#include "desc/error.hpp"
#include "desc/metrics.hpp"

namespace desc {

void PgdConfig::validate() const {
  if (!(step_size > 0.0 && step_size <= 10.0)) {
    throw InputError(fmt::format("PGD step size {} outside (0, 10]", step_size));
  }
  if (max_iters < 1) throw InputError("PGD needs at least one iteration");
}

BeliefState init_beliefs(const CycleTable& table) {
  BeliefState b;
  b.p.resize(table.total_cycles());
  b.s.resize(static_cast<std::size_t>(table.num_edges()));
  for (int e = 0; e < table.num_edges(); ++e) {
    const std::size_t m = table.size(e);
    if (m == 0) throw InputError(fmt::format("edge {} has an empty cycle set", e));
    std::fill(b.p.begin() + static_cast<std::ptrdiff_t>(table.begin(e)),
              b.p.begin() + static_cast<std::ptrdiff_t>(table.end(e)), 1.0 / static_cast<double>(m));
  }
  refresh_estimates(table, b);
  return b;
}

void refresh_estimates(const CycleTable& table, BeliefState& b) {
  b.s.resize(static_cast<std::size_t>(table.num_edges()));
  for (int e = 0; e < table.num_edges(); ++e) {
    double s = 0.0;
    for (std::size_t t = table.begin(e); t < table.end(e); ++t) s += b.p[t] * table.d(t);
    b.s[static_cast<std::size_t>(e)] = std::clamp(s, 0.0, 1.0);
  }
}

DescQp::DescQp(const CycleTable& table) : table_(&table) {
  const auto m = static_cast<std::size_t>(table.num_edges());
  std::vector<std::size_t> counts(m, 0);
  for (std::size_t t = 0; t < table.total_cycles(); ++t) {
    const auto ik = table.edge_ik(t);
    const auto jk = table.edge_jk(t);
    if (ik < 0 || jk < 0 || static_cast<std::size_t>(ik) >= m || static_cast<std::size_t>(jk) >= m) {
      throw SolverError(fmt::format("cycle slot {} references an edge outside the graph", t));
    }
    ++counts[static_cast<std::size_t>(ik)];
    ++counts[static_cast<std::size_t>(jk)];
  }
  coupling_offsets_.assign(m + 1, 0);
  for (std::size_t e = 0; e < m; ++e) coupling_offsets_[e + 1] = coupling_offsets_[e] + counts[e];
  coupling_slots_.resize(coupling_offsets_[m]);
  std::vector<std::size_t> fill(coupling_offsets_.begin(), coupling_offsets_.end() - 1);
  for (std::size_t t = 0; t < table.total_cycles(); ++t) {
    coupling_slots_[fill[static_cast<std::size_t>(table.edge_ik(t))]++] = t;
    coupling_slots_[fill[static_cast<std::size_t>(table.edge_jk(t))]++] = t;
  }
}

double DescQp::objective(const BeliefState& b) const {
  const CycleTable& table = *table_;
  long double total = 0.0L;
  for (int e = 0; e < table.num_edges(); ++e) {
    long double edge_sum = 0.0L;
    for (std::size_t t = table.begin(e); t < table.end(e); ++t) {
      const double v = b.s[static_cast<std::size_t>(table.edge_ik(t))] + b.s[static_cast<std::size_t>(table.edge_jk(t))];
      edge_sum += static_cast<long double>(b.p[t]) * v;
    }
    total += edge_sum;
  }
  return static_cast<double>(total);
}

double DescQp::coupling(const BeliefState& b, int e) const {
  double m = 0.0;
  const auto ue = static_cast<std::size_t>(e);
  for (std::size_t c = coupling_offsets_[ue]; c < coupling_offsets_[ue + 1]; ++c) m += b.p[coupling_slots_[c]];
  return m;
}

void DescQp::gradient(const BeliefState& b, int e, std::span<double> out) const {
  const CycleTable& table = *table_;
  const double m = coupling(b, e);
  const std::size_t begin = table.begin(e);
  for (std::size_t t = begin; t < table.end(e); ++t) {
    out[t - begin] = b.s[static_cast<std::size_t>(table.edge_ik(t))] +
                     b.s[static_cast<std::size_t>(table.edge_jk(t))] + m * table.d(t);
  }
}

std::vector<double> DescQp::gradient(const BeliefState& b, int e) const {
  std::vector<double> out(table_->size(e));
  gradient(b, e, out);
  return out;
}

void riemannian_project(std::span<double> g) {
  if (g.empty()) return;
  const double mean = std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(g.size());
  for (double& x : g) x -= mean;
}

std::vector<double> riemannian_project(std::vector<double> g) {
  riemannian_project(std::span<double>(g));
  return g;
}

void project_to_simplex(std::span<const double> v, std::span<double> out, std::vector<double>& scratch) {
  const std::size_t m = v.size();
  scratch.assign(v.begin(), v.end());
  std::stable_sort(scratch.begin(), scratch.end(), std::greater<>());
  // Largest rho with u_rho - (sum_{r<=rho} u_r - 1) / rho > 0 (u descending).
  double prefix = 0.0;
  double tau = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    prefix += scratch[r];
    const double candidate = (prefix - 1.0) / static_cast<double>(r + 1);
    if (scratch[r] - candidate > 0.0) tau = candidate;
  }
  for (std::size_t k = 0; k < m; ++k) out[k] = std::max(v[k] - tau, 0.0);
}

std::vector<double> project_to_simplex(std::span<const double> v) {
  std::vector<double> out(v.size());
  std::vector<double> scratch;
  project_to_simplex(v, out, scratch);
  return out;
}

CorruptionEstimate run_pgd(const CycleTable& table, const PgdConfig& cfg, const GroundTruth* truth,
                           const PgdObserver& observer) {
  cfg.validate();
  const DescQp qp(table);
  BeliefState current = init_beliefs(table);
  BeliefState next = current;

  CorruptionEstimate result;
  auto record = [&](int iter, double f) {
    if (!cfg.record_trace) return;
    PgdTraceRow row{iter, f, std::nullopt, std::nullopt};
    if (truth) {
      const auto err = corruption_error(current.s, truth->corruption);
      row.mean_abs_err = err.mean;
      row.median_abs_err = err.median;
    }
    result.trace.push_back(row);
  };

  double f = qp.objective(current);
  record(0, f);
  if (observer) observer(0, current);

  std::vector<double> grad;
  std::vector<double> scratch;
  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    for (int e = 0; e < table.num_edges(); ++e) {
      const std::size_t begin = table.begin(e);
      const std::size_t m = table.size(e);
      grad.resize(m);
      qp.gradient(current, e, grad);
      riemannian_project(std::span<double>(grad));
      for (std::size_t k = 0; k < m; ++k) {
        if (!std::isfinite(grad[k])) {
          throw SolverError(fmt::format("non-finite gradient at PGD iteration {} (edge {})", iter, e));
        }
        grad[k] = current.p[begin + k] - cfg.step_size * grad[k];
      }
      project_to_simplex(grad, std::span<double>(next.p.data() + begin, m), scratch);
    }
    refresh_estimates(table, next);
    std::swap(current, next);

    f = qp.objective(current);
    if (!std::isfinite(f)) throw SolverError(fmt::format("non-finite objective at PGD iteration {}", iter));
    record(iter, f);
    if (observer) observer(iter, current);
  }

  result.s_hat = current.s;
  result.iterations_run = cfg.max_iters;
  result.final_objective = f;
  return result;
}

}  // namespace desc
