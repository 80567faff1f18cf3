#include "desc/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fmt/core.h>
#include <map>
#include <sstream>
#include <thread>

#include "desc/error.hpp"
#include "desc/pose_graph_io.hpp"

namespace desc {

namespace {

constexpr const char* kRotationErrorMetric = "geodesic angle in degrees after chordal (Frobenius) alignment";

std::string shortest(double x) { return fmt::format("{}", x); }

EvalReport evaluate(const std::vector<Rotation>& est, const GroundTruth& truth,
                    const std::optional<CorruptionEstimate>& estimate) {
  EvalReport report;
  report.rotation = rotation_error_stats(est, truth.rotations);
  if (estimate) report.corruption = corruption_error(estimate->s_hat, truth.corruption);
  return report;
}

GroundTruth restrict_truth(const ViewGraph& pruned, const GroundTruth& truth, const std::vector<int>& kept) {
  std::vector<bool> bad;
  bad.reserve(kept.size());
  for (int e : kept) bad.push_back(truth.bad.empty() ? false : truth.bad[static_cast<std::size_t>(e)]);
  return make_ground_truth(pruned, truth.rotations, std::move(bad));
}

}  // namespace

std::string to_string(Method m) { return m == Method::Desc ? "desc" : "irls"; }

Method parse_method(const std::string& s) {
  if (s == "desc") return Method::Desc;
  if (s == "irls") return Method::IrlsBaseline;
  throw InputError(fmt::format("unknown method '{}' (expected desc or irls)", s));
}

RunConfig RunConfig::large_profile() {
  RunConfig cfg;
  cfg.pgd.step_size = 1.0;
  cfg.pgd.max_iters = 30;
  return cfg;
}

nlohmann::json RunConfig::to_json() const {
  return {
      {"method", to_string(method)},
      {"seed", seed},
      {"prune_uncovered", prune_uncovered},
      {"pgd", {{"step_size", pgd.step_size}, {"max_iters", pgd.max_iters}}},
      {"cycle_budget",
       {{"sample", budget.sample}, {"median_fraction", budget.median_fraction}, {"minimum", budget.minimum}}},
      {"spectral",
       {{"weight_exponent", spectral.weight_exponent},
        {"max_iters", spectral.max_iters},
        {"tolerance", spectral.tolerance},
        {"stall_residual", spectral.stall_residual}}},
      {"refine",
       {{"max_iters", refine.max_iters},
        {"convergence_tol", refine.convergence_tol},
        {"weight_exponent", refine.weight_exponent},
        {"truncation_slope", refine.truncation_slope},
        {"truncation_cap", refine.truncation_cap}}},
  };
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json j;
  if (report.corruption) {
    j["mean_corruption_err"] = report.corruption->mean;
    j["median_corruption_err"] = report.corruption->median;
  }
  j["mean_rotation_err_deg"] = report.rotation.mean_deg;
  j["median_rotation_err_deg"] = report.rotation.median_deg;
  const Mat3& g = report.rotation.alignment.matrix();
  j["alignment"] = {{g(0, 0), g(0, 1), g(0, 2)}, {g(1, 0), g(1, 1), g(1, 2)}, {g(2, 0), g(2, 1), g(2, 2)}};
  j["rotation_error_metric"] = kRotationErrorMetric;
  return j;
}

SpectralResult uniform_spectral(const ViewGraph& g, const SpectralConfig& cfg) {
  return spectral_sync(uniform_weights(g), g, cfg);
}

PipelineResult run_pipeline(const ViewGraph& g, const GroundTruth* truth, const RunConfig& cfg) {
  cfg.pgd.validate();
  cfg.refine.validate();

  PipelineResult res;
  res.method = cfg.method;
  res.input_edges = g.num_edges();
  if (cfg.prune_uncovered) {
    PrunedGraph pruned = prune_uncovered_edges(g);
    if (truth) res.truth = restrict_truth(pruned.graph, *truth, pruned.kept_edges);
    res.graph = std::move(pruned.graph);
    res.kept_edges = std::move(pruned.kept_edges);
  } else {
    res.graph = g;
    if (truth) res.truth = *truth;
    res.kept_edges.resize(static_cast<std::size_t>(g.num_edges()));
    for (int e = 0; e < g.num_edges(); ++e) res.kept_edges[static_cast<std::size_t>(e)] = e;
  }
  if (res.truth && static_cast<int>(res.truth->rotations.size()) != res.graph.num_nodes()) {
    throw InputError(fmt::format("ground truth has {} nodes, graph has {}", res.truth->rotations.size(),
                                 res.graph.num_nodes()));
  }
  if (!res.graph.is_connected()) {
    throw InputError(fmt::format("graph is disconnected ({} components)", res.graph.component_count()));
  }

  const GroundTruth* solved_truth = res.truth ? &*res.truth : nullptr;
  if (cfg.method == Method::Desc) {
    Rng cycle_rng(derive_seed(cfg.seed, 0.0, 0.0, "cycles"));
    res.cycles = build_cycle_table(res.graph, cfg.budget, cycle_rng);
    res.estimate = run_pgd(*res.cycles, cfg.pgd, solved_truth);
    res.init = spectral_sync(build_weight_matrix(res.graph, res.estimate->s_hat, cfg.spectral), res.graph,
                             cfg.spectral);
    res.final = refine_rotations(res.graph, res.estimate->s_hat, res.init.rotations, cfg.refine);
  } else {
    RefineConfig rc = cfg.refine;
    rc.baseline_irls = true;
    res.init = uniform_spectral(res.graph, cfg.spectral);
    res.final = refine_rotations(res.graph, {}, res.init.rotations, rc);
  }

  if (solved_truth) {
    res.init_eval = evaluate(res.init.rotations, *solved_truth, res.estimate);
    res.final_eval = evaluate(res.final.rotations, *solved_truth, res.estimate);
  }
  return res;
}

nlohmann::json make_report(const PipelineResult& result, const RunConfig& cfg) {
  nlohmann::json j;
  j["method"] = to_string(result.method);
  j["config"] = cfg.to_json();
  j["graph"] = {{"num_nodes", result.graph.num_nodes()},
                {"num_edges", result.graph.num_edges()},
                {"pruned_edges", result.input_edges - result.graph.num_edges()}};
  if (result.cycles) {
    j["cycles"] = {{"total", result.cycles->total_cycles()},
                   {"budget", result.cycles->budget()},
                   {"median_per_edge", result.cycles->median_cycle_count()}};
  }
  if (result.estimate) {
    j["pgd"] = {{"iterations", result.estimate->iterations_run}, {"final_objective", result.estimate->final_objective}};
  }
  j["spectral"] = {{"iterations", result.init.iterations},
                   {"converged", result.init.converged},
                   {"subspace_change", result.init.subspace_change},
                   {"rayleigh_residual", result.init.rayleigh_residual}};
  j["refine"] = {{"iterations", result.final.iterations},
                 {"converged", result.final.converged},
                 {"flagged_residuals", result.final.flagged_residuals}};
  if (result.init_eval) {
    j["init"] = to_json(*result.init_eval);
    j["final"] = to_json(*result.final_eval);
  }
  return j;
}

std::string s_hat_csv(const PipelineResult& result) {
  const bool with_truth = result.truth.has_value();
  std::string out = with_truth ? "edge_i,edge_j,s_hat,s_star\n" : "edge_i,edge_j,s_hat\n";
  if (!result.estimate) return out;
  for (int e = 0; e < result.graph.num_edges(); ++e) {
    const Edge& ed = result.graph.edge(e);
    out += fmt::format("{},{},{}", ed.i, ed.j, format_double(result.estimate->s_hat[static_cast<std::size_t>(e)]));
    if (with_truth) out += "," + format_double(result.truth->corruption[static_cast<std::size_t>(e)]);
    out += '\n';
  }
  return out;
}

std::string pgd_trace_csv(const CorruptionEstimate& estimate) {
  const bool with_err = !estimate.trace.empty() && estimate.trace.front().mean_abs_err.has_value();
  std::string out = with_err ? "iter,objective,mean_abs_err,median_abs_err\n" : "iter,objective\n";
  for (const auto& row : estimate.trace) {
    out += fmt::format("{},{}", row.iter, format_double(row.objective));
    if (with_err) out += fmt::format(",{},{}", format_double(*row.mean_abs_err), format_double(*row.median_abs_err));
    out += '\n';
  }
  return out;
}

std::string refine_trace_csv(const SyncSolution& solution) {
  std::string out = "iter,max_step_norm,mean_residual,truncated_count\n";
  for (const auto& row : solution.trace) {
    out += fmt::format("{},{},{},{}\n", row.iter, format_double(row.max_step_norm), format_double(row.mean_residual),
                       row.truncated_count);
  }
  return out;
}

void write_run_outputs(const std::filesystem::path& dir, const PipelineResult& result, const RunConfig& cfg,
                       const RunArtifacts& artifacts) {
  std::filesystem::create_directories(dir);
  if (result.estimate) write_file_atomic(dir / "s_hat.csv", s_hat_csv(result));

  std::ostringstream rot;
  write_rotations(rot, result.final.rotations);
  write_file_atomic(dir / "rotations.txt", rot.str());
  std::ostringstream init;
  write_rotations(init, result.init.rotations);
  write_file_atomic(dir / "rotations_init.txt", init.str());

  write_file_atomic(dir / "report.json", make_report(result, cfg).dump(2) + "\n");

  if (artifacts.traces) {
    if (result.estimate) write_file_atomic(dir / "pgd_trace.csv", pgd_trace_csv(*result.estimate));
    write_file_atomic(dir / "refine_trace.csv", refine_trace_csv(result.final));
  }
  if (artifacts.per_node_errors && result.final_eval) {
    std::string csv = "node,init_err_deg,final_err_deg\n";
    for (std::size_t i = 0; i < result.final_eval->rotation.per_node_deg.size(); ++i) {
      csv += fmt::format("{},{},{}\n", i, format_double(result.init_eval->rotation.per_node_deg[i]),
                         format_double(result.final_eval->rotation.per_node_deg[i]));
    }
    write_file_atomic(dir / "per_node_errors.csv", csv);
  }
}

nlohmann::json instance_manifest(const UcmInstance& inst) {
  return {{"n", inst.params.n},          {"p", inst.params.p},
          {"q", inst.params.q},          {"sigma", inst.params.sigma},
          {"seed", inst.params.seed},    {"num_edges", inst.graph.num_edges()},
          {"num_corrupted", inst.num_corrupted()}, {"regenerations", inst.regenerations}};
}

std::vector<SweepRow> run_sweep_cell(const UcmParams& params, const RunConfig& cfg,
                                     const std::vector<std::string>& methods) {
  const UcmInstance inst = generate_ucm(params);
  auto wants = [&](const char* m) { return std::find(methods.begin(), methods.end(), m) != methods.end(); };
  for (const auto& m : methods) {
    if (m != "desc" && m != "desc-init" && m != "irls" && m != "spectral-uniform") {
      throw InputError(fmt::format("unknown sweep method '{}'", m));
    }
  }

  std::map<std::string, SweepRow> by_method;
  auto make_row = [&](const std::string& method, const EvalReport& report) {
    SweepRow row{params.q, params.sigma, params.seed, method, report.rotation.mean_deg, report.rotation.median_deg,
                 std::nullopt, std::nullopt};
    if (report.corruption) {
      row.mean_s_err = report.corruption->mean;
      row.median_s_err = report.corruption->median;
    }
    by_method[method] = row;
  };

  RunConfig run_cfg = cfg;
  run_cfg.seed = derive_seed(params.seed, params.q, params.sigma, "solver");
  if (wants("desc") || wants("desc-init")) {
    run_cfg.method = Method::Desc;
    const PipelineResult res = run_pipeline(inst.graph, &inst.truth, run_cfg);
    make_row("desc", *res.final_eval);
    make_row("desc-init", *res.init_eval);
  }
  if (wants("irls")) {
    run_cfg.method = Method::IrlsBaseline;
    const PipelineResult res = run_pipeline(inst.graph, &inst.truth, run_cfg);
    make_row("irls", *res.final_eval);
  }
  if (wants("spectral-uniform")) {
    const SpectralResult sr = uniform_spectral(inst.graph, cfg.spectral);
    make_row("spectral-uniform", EvalReport{std::nullopt, rotation_error_stats(sr.rotations, inst.truth.rotations)});
  }

  std::vector<SweepRow> rows;
  for (const auto& m : methods) rows.push_back(by_method.at(m));
  return rows;
}

std::vector<SweepRow> run_sweep(const SweepGrid& grid, int n, double p, const RunConfig& cfg,
                                const std::vector<std::string>& methods, int jobs) {
  const std::vector<UcmParams> cells = ucm_sweep(grid, n, p);
  std::vector<std::vector<SweepRow>> results(cells.size());
  std::vector<std::exception_ptr> errors(cells.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t c = next++; c < cells.size(); c = next++) {
      try {
        results[c] = run_sweep_cell(cells[c], cfg, methods);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  const int workers = std::clamp(jobs, 1, static_cast<int>(std::max<std::size_t>(cells.size(), 1)));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (const auto& err : errors)
    if (err) std::rethrow_exception(err);

  std::vector<SweepRow> rows;
  for (auto& r : results) rows.insert(rows.end(), r.begin(), r.end());
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "q,sigma,seed,method,mean_err_deg,median_err_deg,mean_s_err,median_s_err\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{},{}\n", shortest(r.q), shortest(r.sigma), r.seed, r.method,
                       format_double(r.mean_err_deg), format_double(r.median_err_deg),
                       r.mean_s_err ? format_double(*r.mean_s_err) : "",
                       r.median_s_err ? format_double(*r.median_s_err) : "");
  }
  return out;
}

std::vector<SweepRow> parse_sweep_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<SweepRow> rows;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line.rfind("q,sigma,seed,method", 0) != 0) throw InputError("sweep CSV: unexpected header");
      continue;
    }
    std::vector<std::string> f;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 8) throw InputError(fmt::format("sweep CSV line {}: expected 8 fields", line_no));
    try {
      SweepRow r;
      r.q = std::stod(f[0]);
      r.sigma = std::stod(f[1]);
      r.seed = std::stoull(f[2]);
      r.method = f[3];
      r.mean_err_deg = std::stod(f[4]);
      r.median_err_deg = std::stod(f[5]);
      if (!f[6].empty()) r.mean_s_err = std::stod(f[6]);
      if (!f[7].empty()) r.median_s_err = std::stod(f[7]);
      rows.push_back(r);
    } catch (const std::logic_error&) {
      throw InputError(fmt::format("sweep CSV line {}: malformed number", line_no));
    }
  }
  return rows;
}

std::vector<std::filesystem::path> emit_plot_data(const std::vector<SweepRow>& rows, const SweepGrid& grid,
                                                  const std::filesystem::path& out_dir) {
  auto same = [](double a, double b) { return std::abs(a - b) <= 1e-12; };

  std::vector<std::string> missing;
  for (double q : grid.q)
    for (double sigma : grid.sigma)
      for (int s = 0; s < grid.seeds; ++s) {
        const auto seed = grid.first_seed + static_cast<std::uint64_t>(s);
        const bool found = std::any_of(rows.begin(), rows.end(), [&](const SweepRow& r) {
          return same(r.q, q) && same(r.sigma, sigma) && r.seed == seed;
        });
        if (!found) missing.push_back(fmt::format("(q={}, sigma={}, seed={})", shortest(q), shortest(sigma), seed));
      }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : " ") + m;
    throw InputError(fmt::format("sweep incomplete: {} missing cell(s): {}", missing.size(), list));
  }

  std::vector<std::string> methods;
  for (const auto& r : rows)
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);

  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  for (const char* stat : {"mean", "median"}) {
    const bool is_mean = std::string_view(stat) == "mean";
    for (double sigma : grid.sigma) {
      std::string csv = "q,method,value,log10_value\n";
      for (double q : grid.q) {
        for (const auto& method : methods) {
          double sum = 0.0;
          int count = 0;
          for (const auto& r : rows) {
            if (r.method != method || !same(r.q, q) || !same(r.sigma, sigma)) continue;
            if (r.seed < grid.first_seed || r.seed >= grid.first_seed + static_cast<std::uint64_t>(grid.seeds)) continue;
            sum += is_mean ? r.mean_err_deg : r.median_err_deg;
            ++count;
          }
          if (count == 0) continue;
          const double value = sum / count;
          csv += fmt::format("{},{},{},{}\n", shortest(q), method, format_double(value), format_double(std::log10(value)));
        }
      }
      const auto path = out_dir / fmt::format("figure_{}_sigma_{}.csv", stat, shortest(sigma));
      write_file_atomic(path, csv);
      written.push_back(path);
    }
  }
  return written;
}

}  // namespace desc
