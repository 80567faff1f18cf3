#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "desc/cycle_table.hpp"
#include "desc/desc_pgd.hpp"
#include "desc/metrics.hpp"
#include "desc/refine.hpp"
#include "desc/spectral.hpp"
#include "desc/ucm.hpp"
#include "desc/viewgraph.hpp"

namespace desc {

enum class Method {
  /// Corruption estimation, weighted spectral init, guided IRLS.
  Desc,
  /// Uniform-weight spectral init followed by plain IRLS-l1/2.
  IrlsBaseline,
};

std::string to_string(Method m);
Method parse_method(const std::string& s);

struct RunConfig {
  PgdConfig pgd;
  CycleBudget budget;
  SpectralConfig spectral;
  RefineConfig refine;
  Method method = Method::Desc;
  /// Drop edges on no 3-cycle instead of failing.
  bool prune_uncovered = false;
  std::uint64_t seed = 0;

  /// Step size 1 and 30 PGD iterations, for large real graphs.
  static RunConfig large_profile();
  nlohmann::json to_json() const;
};

/// Corruption and rotation errors of one solution.
struct EvalReport {
  std::optional<ErrorSummary> corruption;
  RotationErrors rotation;
};

nlohmann::json to_json(const EvalReport& report);

struct PipelineResult {
  Method method = Method::Desc;
  /// Graph actually solved (after optional pruning).
  ViewGraph graph;
  /// Original edge id per solved edge.
  std::vector<int> kept_edges;
  int input_edges = 0;
  std::optional<GroundTruth> truth;

  std::optional<CycleTable> cycles;
  std::optional<CorruptionEstimate> estimate;
  SpectralResult init;
  SyncSolution final;

  std::optional<EvalReport> init_eval;
  std::optional<EvalReport> final_eval;
};

/// Runs the full method on `g`. Evaluation fields are filled when `truth`
/// is given.
PipelineResult run_pipeline(const ViewGraph& g, const GroundTruth* truth, const RunConfig& cfg);

/// Uniform-weight spectral sync only (reference for comparisons).
SpectralResult uniform_spectral(const ViewGraph& g, const SpectralConfig& cfg = {});

/// Deterministic summary of a run (no timestamps).
nlohmann::json make_report(const PipelineResult& result, const RunConfig& cfg);

struct RunArtifacts {
  bool traces = false;
  bool per_node_errors = false;
};

/// Writes s_hat.csv, rotations.txt, rotations_init.txt, report.json and,
/// on request, pgd_trace.csv, refine_trace.csv and per_node_errors.csv.
void write_run_outputs(const std::filesystem::path& dir, const PipelineResult& result, const RunConfig& cfg,
                       const RunArtifacts& artifacts);

std::string s_hat_csv(const PipelineResult& result);
std::string pgd_trace_csv(const CorruptionEstimate& estimate);
std::string refine_trace_csv(const SyncSolution& solution);

nlohmann::json instance_manifest(const UcmInstance& inst);

/// One sweep.csv row. Corruption columns are absent for methods that do
/// not estimate corruption.
struct SweepRow {
  double q = 0.0;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  std::string method;
  double mean_err_deg = 0.0;
  double median_err_deg = 0.0;
  std::optional<double> mean_s_err;
  std::optional<double> median_s_err;
};

/// Methods reported per cell: "desc", "desc-init", "irls", "spectral-uniform".
std::vector<SweepRow> run_sweep_cell(const UcmParams& params, const RunConfig& cfg,
                                     const std::vector<std::string>& methods);

/// Runs every cell on `jobs` worker threads. Row order follows ucm_sweep.
std::vector<SweepRow> run_sweep(const SweepGrid& grid, int n, double p, const RunConfig& cfg,
                                const std::vector<std::string>& methods, int jobs = 1);

std::string sweep_csv(const std::vector<SweepRow>& rows);
std::vector<SweepRow> parse_sweep_csv(const std::string& text);

/// Writes one CSV per (statistic, sigma): figure_{mean,median}_sigma_<sigma>.csv
/// with columns q,method,value,log10_value, values averaged over seeds.
/// Throws InputError listing missing (q, sigma, seed) cells if incomplete.
std::vector<std::filesystem::path> emit_plot_data(const std::vector<SweepRow>& rows, const SweepGrid& grid,
                                                  const std::filesystem::path& out_dir);

}  // namespace desc
