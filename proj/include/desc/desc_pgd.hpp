#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "desc/cycle_table.hpp"
#include "desc/viewgraph.hpp"

namespace desc {

/// Per-edge belief vectors p_ij over the sampled cycles and the induced
/// corruption estimates s_ij = p_ij^T d_ij. `p` is laid out like the
/// cycle table slots; `s` is indexed by edge id.
struct BeliefState {
  std::vector<double> p;
  std::vector<double> s;

  std::span<const double> beliefs(const CycleTable& table, int e) const {
    return {p.data() + table.begin(e), table.size(e)};
  }
};

struct PgdConfig {
  double step_size = 0.01;
  int max_iters = 100;
  bool record_trace = false;

  /// Throws InputError unless step_size in (0, 10] and max_iters >= 1.
  void validate() const;
};

struct PgdTraceRow {
  int iter = 0;
  double objective = 0.0;
  std::optional<double> mean_abs_err;
  std::optional<double> median_abs_err;
};

struct CorruptionEstimate {
  /// s_hat per edge id, in [0, 1].
  std::vector<double> s_hat;
  int iterations_run = 0;
  double final_objective = 0.0;
  std::vector<PgdTraceRow> trace;
};

/// Uniform beliefs 1/|C_ij| and s_ij = mean(d_ij).
BeliefState init_beliefs(const CycleTable& table);

/// Recomputes s from p.
void refresh_estimates(const CycleTable& table, BeliefState& b);

/// The DESC quadratic objective
///   f(p) = sum_ij sum_{k in C_ij} p_ij(k) (s_ik + s_jk),  s = p^T d,
/// over a fixed cycle table, with its exact gradient.
///
/// s_ij enters f through every slot (edge il, node j) or (edge jl, node i),
/// so d f / d p_ij(k) = s_ik + s_jk + M_ij d_ij,k where M_ij sums the
/// beliefs of those slots. With sampled tables only the sampled slots
/// exist; the coupling index lists them per edge.
class DescQp {
 public:
  explicit DescQp(const CycleTable& table);

  const CycleTable& table() const { return *table_; }

  double objective(const BeliefState& b) const;

  /// M_ij: total belief mass placed on cycles that use edge e as a side.
  double coupling(const BeliefState& b, int e) const;

  std::vector<double> gradient(const BeliefState& b, int e) const;
  void gradient(const BeliefState& b, int e, std::span<double> out) const;

 private:
  const CycleTable* table_;
  std::vector<std::size_t> coupling_offsets_;
  std::vector<std::size_t> coupling_slots_;
};

/// Tangent projection onto {x : sum x = 0}: subtracts the mean.
void riemannian_project(std::span<double> g);
std::vector<double> riemannian_project(std::vector<double> g);

/// Euclidean projection onto the probability simplex. Sorts a copy of `v`
/// (stable) and solves sum max(v_k - tau, 0) = 1 on the bracketing piece.
void project_to_simplex(std::span<const double> v, std::span<double> out, std::vector<double>& scratch);
std::vector<double> project_to_simplex(std::span<const double> v);

/// Called after every iterate (t = 0 is the initial state).
using PgdObserver = std::function<void(int iter, const BeliefState& state)>;

/// Projected gradient descent over the product of simplices. Updates are
/// synchronous: every edge steps from the iterate-t state. Always runs
/// cfg.max_iters iterations. With `truth`, the trace carries error columns.
CorruptionEstimate run_pgd(const CycleTable& table, const PgdConfig& cfg, const GroundTruth* truth = nullptr,
                           const PgdObserver& observer = {});

}  // namespace desc
