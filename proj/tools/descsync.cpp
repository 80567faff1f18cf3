// descsync: corruption estimation and rotation synchronization experiments.
//
//   descsync generate --ucm n=100,p=0.5,q=0.5,sigma=0 --seed 7 --out inst/
//   descsync run --ucm n=100,p=0.5,q=0.5,sigma=0 --seed 7 --out run/
//   descsync run --input graph.txt --truth truth.txt --profile large --out run/
//   descsync sweep --q 0:0.1:0.8 --sigma 0,0.1 --seeds 10 --out sweep/
//   descsync plot --sweep sweep/sweep.csv --out figures/
//   descsync eval --estimate run/rotations.txt --truth truth.txt
//
// Exit codes: 0 success, 2 input error, 3 solver failure, 4 uncovered edges.

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <fmt/core.h>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "desc/error.hpp"
#include "desc/pipeline.hpp"
#include "desc/pose_graph_io.hpp"

namespace fs = std::filesystem;
using namespace desc;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitSolver = 3;
constexpr int kExitUncovered = 4;

double parse_number(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw InputError(fmt::format("{}: '{}' is not a number", what, s));
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(item);
  return out;
}

// Snap grid values to 12 decimals so 0:0.1:0.8 yields 0.3, not 0.30000000000000004.
double snap(double x) { return std::round(x * 1e12) / 1e12; }

/// "a,b,c" or "start:step:stop" (inclusive).
std::vector<double> parse_grid(const std::string& s, const std::string& what) {
  const auto parts = split(s, ':');
  if (parts.size() == 3) {
    const double start = parse_number(parts[0], what);
    const double step = parse_number(parts[1], what);
    const double stop = parse_number(parts[2], what);
    if (!(step > 0.0) || stop < start) throw InputError(fmt::format("{}: bad range '{}'", what, s));
    std::vector<double> out;
    for (int k = 0;; ++k) {
      const double v = snap(start + k * step);
      if (v > stop + 1e-9) break;
      out.push_back(v);
    }
    return out;
  }
  std::vector<double> out;
  for (const auto& item : split(s, ',')) out.push_back(snap(parse_number(item, what)));
  if (out.empty()) throw InputError(fmt::format("{}: empty list", what));
  return out;
}

UcmParams parse_ucm(const std::string& spec, std::uint64_t seed) {
  UcmParams params;
  params.seed = seed;
  for (const auto& kv : split(spec, ',')) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw InputError(fmt::format("--ucm: expected key=value, got '{}'", kv));
    const std::string key = kv.substr(0, eq);
    const double v = parse_number(kv.substr(eq + 1), "--ucm " + key);
    if (key == "n") {
      params.n = static_cast<int>(v);
      if (params.n != v) throw InputError("--ucm n must be an integer");
    } else if (key == "p") {
      params.p = v;
    } else if (key == "q") {
      params.q = v;
    } else if (key == "sigma") {
      params.sigma = v;
    } else {
      throw InputError(fmt::format("--ucm: unknown key '{}'", key));
    }
  }
  params.validate();
  return params;
}

struct SolverOptions {
  std::string profile = "synthetic";
  std::optional<double> step;
  std::optional<int> pgd_iters;
  int budget_min = 30;
  double budget_fraction = 0.25;
  bool all_cycles = false;
  double gcw_exponent = 1.5;
  int refine_iters = 100;
  double refine_tol = 1e-3;
  bool prune = false;
  std::string method = "desc";

  void attach(CLI::App* cmd) {
    cmd->add_option("--profile", profile, "synthetic (step 0.01, 100 iters) or large (step 1, 30 iters)")
        ->check(CLI::IsMember({"synthetic", "large"}));
    cmd->add_option("--step", step, "PGD step size (overrides profile)");
    cmd->add_option("--pgd-iters", pgd_iters, "PGD iterations (overrides profile)");
    cmd->add_option("--budget-min", budget_min, "minimum cycles sampled per edge");
    cmd->add_option("--budget-fraction", budget_fraction, "fraction of the median cycle count sampled per edge");
    cmd->add_flag("--all-cycles", all_cycles, "use every 3-cycle (no sampling)");
    cmd->add_option("--gcw-exponent", gcw_exponent, "spectral weight exponent (weight = s_hat^-exponent)");
    cmd->add_option("--refine-iters", refine_iters, "maximum IRLS iterations");
    cmd->add_option("--refine-tol", refine_tol, "IRLS convergence threshold on max step norm (radians)");
    cmd->add_flag("--prune-uncovered", prune, "drop edges that lie on no 3-cycle instead of failing");
  }

  RunConfig build(std::uint64_t seed) const {
    RunConfig cfg = profile == "large" ? RunConfig::large_profile() : RunConfig{};
    if (step) cfg.pgd.step_size = *step;
    if (pgd_iters) cfg.pgd.max_iters = *pgd_iters;
    cfg.budget.sample = !all_cycles;
    cfg.budget.minimum = budget_min;
    cfg.budget.median_fraction = budget_fraction;
    cfg.spectral.weight_exponent = gcw_exponent;
    cfg.refine.max_iters = refine_iters;
    cfg.refine.convergence_tol = refine_tol;
    cfg.prune_uncovered = prune;
    cfg.method = parse_method(method);
    cfg.seed = seed;
    cfg.pgd.validate();
    cfg.refine.validate();
    return cfg;
  }
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_instance(const fs::path& dir, const UcmInstance& inst) {
  fs::create_directories(dir);
  std::ostringstream graph, truth;
  write_pose_graph(graph, inst.graph);
  write_rotations(truth, inst.truth.rotations);
  write_file_atomic(dir / "graph.txt", graph.str());
  write_file_atomic(dir / "truth.txt", truth.str());
  write_file_atomic(dir / "manifest.json", instance_manifest(inst).dump(2) + "\n");
}

void print_summary(const PipelineResult& res) {
  fmt::print("nodes {}  edges {}", res.graph.num_nodes(), res.graph.num_edges());
  if (res.cycles) fmt::print("  cycles {} (budget {})", res.cycles->total_cycles(), res.cycles->budget());
  fmt::print("\n");
  if (!res.final_eval) return;
  if (res.final_eval->corruption) {
    fmt::print("corruption error   mean {:.6g}  median {:.6g}\n", res.final_eval->corruption->mean,
               res.final_eval->corruption->median);
  }
  fmt::print("{:<18} mean {:.6g} deg  median {:.6g} deg\n", res.method == Method::Desc ? "DESC-init" : "spectral init",
             res.init_eval->rotation.mean_deg, res.init_eval->rotation.median_deg);
  fmt::print("{:<18} mean {:.6g} deg  median {:.6g} deg\n", res.method == Method::Desc ? "DESC" : "IRLS-l1/2",
             res.final_eval->rotation.mean_deg, res.final_eval->rotation.median_deg);
}

int report_error(const std::string& kind, const std::string& message, int code, const std::optional<fs::path>& out,
                 const nlohmann::json& extra = nlohmann::json::object()) {
  nlohmann::json err = {{"error", kind}, {"message", message}, {"exit_code", code}};
  err.update(extra);
  std::cerr << err.dump() << "\n";
  if (out) {
    try {
      fs::create_directories(*out);
      write_file_atomic(*out / "error.json", err.dump(2) + "\n");
    } catch (...) {
    }
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DESC corruption estimation and rotation synchronization"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::string ucm_spec;
  fs::path out_dir;

  // generate
  auto* gen = app.add_subcommand("generate", "write a UCM instance (graph.txt, truth.txt, manifest.json)");
  gen->add_option("--ucm", ucm_spec, "n=..,p=..,q=..,sigma=..")->required();
  gen->add_option("--seed", seed, "instance seed");
  gen->add_option("--out", out_dir, "output directory")->required();

  // run
  SolverOptions run_opts;
  fs::path input, truth_path;
  bool traces = false, per_node = false;
  auto* run = app.add_subcommand("run", "estimate corruption and rotations for one instance");
  auto* run_ucm = run->add_option("--ucm", ucm_spec, "generate the instance: n=..,p=..,q=..,sigma=..");
  auto* run_input = run->add_option("--input", input, "pose-graph file (EDGE records)");
  run_ucm->excludes(run_input);
  run->add_option("--truth", truth_path, "ground-truth rotations (NODE records)")->needs(run_input);
  run->add_option("--seed", seed, "seed for instance generation and cycle sampling");
  run->add_option("--method", run_opts.method, "desc or irls")->check(CLI::IsMember({"desc", "irls"}));
  run->add_option("--out", out_dir, "output directory")->required();
  run->add_flag("--trace", traces, "write per-iteration PGD and IRLS traces");
  run->add_flag("--per-node", per_node, "write per-node rotation errors");
  run_opts.attach(run);

  // sweep
  SolverOptions sweep_opts;
  std::string q_grid = "0:0.1:0.8", sigma_grid = "0,0.1", methods_arg = "desc";
  int seeds = 10, n = 100, jobs = 1;
  double p = 0.5;
  std::uint64_t first_seed = 0;
  auto* sweep = app.add_subcommand("sweep", "run a UCM grid and write sweep.csv");
  sweep->add_option("--q", q_grid, "corruption probabilities (list or start:step:stop)");
  sweep->add_option("--sigma", sigma_grid, "noise levels (list or start:step:stop)");
  sweep->add_option("--seeds", seeds, "seeds per (q, sigma) cell");
  sweep->add_option("--first-seed", first_seed, "first seed of each cell");
  sweep->add_option("--n", n, "node count");
  sweep->add_option("--p", p, "edge probability");
  sweep->add_option("--methods", methods_arg, "comma list of desc, desc-init, irls, spectral-uniform");
  sweep->add_option("--jobs", jobs, "worker threads");
  sweep->add_option("--out", out_dir, "output directory")->required();
  sweep_opts.attach(sweep);

  // plot
  fs::path sweep_path;
  auto* plot = app.add_subcommand("plot", "turn sweep.csv into per-figure CSVs");
  plot->add_option("--sweep", sweep_path, "sweep.csv")->required();
  plot->add_option("--q", q_grid, "expected q grid");
  plot->add_option("--sigma", sigma_grid, "expected sigma grid");
  plot->add_option("--seeds", seeds, "expected seeds per cell");
  plot->add_option("--first-seed", first_seed, "first expected seed");
  plot->add_option("--out", out_dir, "output directory")->required();

  // eval
  fs::path estimate_path, eval_truth, eval_out;
  auto* eval = app.add_subcommand("eval", "rotation errors of an estimate against ground truth");
  eval->add_option("--estimate", estimate_path, "estimated rotations (NODE records)")->required();
  eval->add_option("--truth", eval_truth, "ground-truth rotations (NODE records)")->required();
  eval->add_option("--out", eval_out, "report JSON path (stdout if omitted)");

  CLI11_PARSE(app, argc, argv);

  std::optional<fs::path> error_dir;
  if (!out_dir.empty()) error_dir = out_dir;

  try {
    if (*gen) {
      write_instance(out_dir, generate_ucm(parse_ucm(ucm_spec, seed)));
      return 0;
    }

    if (*run) {
      const RunConfig cfg = run_opts.build(seed);
      std::optional<UcmInstance> inst;
      ViewGraph graph;
      std::optional<GroundTruth> truth;
      if (!ucm_spec.empty()) {
        inst = generate_ucm(parse_ucm(ucm_spec, seed));
        graph = inst->graph;
        truth = inst->truth;
      } else if (!input.empty()) {
        if (!truth_path.empty()) {
          auto rotations = read_rotations(truth_path);
          graph = read_pose_graph(input, static_cast<int>(rotations.size()));
          truth = make_ground_truth(graph, std::move(rotations), {});
        } else {
          graph = read_pose_graph(input);
        }
      } else {
        throw InputError("run needs --ucm or --input");
      }

      const PipelineResult res = run_pipeline(graph, truth ? &*truth : nullptr, cfg);
      write_run_outputs(out_dir, res, cfg, {traces, per_node});
      nlohmann::json manifest = {{"created_utc", utc_timestamp()}, {"config", cfg.to_json()}};
      if (inst) manifest["instance"] = instance_manifest(*inst);
      if (!input.empty()) manifest["input"] = input.string();
      write_file_atomic(out_dir / "manifest.json", manifest.dump(2) + "\n");
      print_summary(res);
      return 0;
    }

    if (*sweep) {
      SweepGrid grid{parse_grid(q_grid, "--q"), parse_grid(sigma_grid, "--sigma"), seeds, first_seed};
      const RunConfig cfg = sweep_opts.build(0);
      const auto rows = run_sweep(grid, n, p, cfg, split(methods_arg, ','), jobs);
      fs::create_directories(out_dir);
      write_file_atomic(out_dir / "sweep.csv", sweep_csv(rows));
      fmt::print("{} rows written to {}\n", rows.size(), (out_dir / "sweep.csv").string());
      return 0;
    }

    if (*plot) {
      SweepGrid grid{parse_grid(q_grid, "--q"), parse_grid(sigma_grid, "--sigma"), seeds, first_seed};
      const auto files = emit_plot_data(parse_sweep_csv(read_text(sweep_path)), grid, out_dir);
      for (const auto& f : files) fmt::print("{}\n", f.string());
      return 0;
    }

    if (*eval) {
      const auto est = read_rotations(estimate_path);
      const auto tru = read_rotations(eval_truth);
      if (est.size() != tru.size()) {
        throw InputError(fmt::format("estimate has {} nodes, truth has {}", est.size(), tru.size()));
      }
      const auto report = to_json(EvalReport{std::nullopt, rotation_error_stats(est, tru)}).dump(2) + "\n";
      if (eval_out.empty()) {
        std::cout << report;
      } else {
        write_file_atomic(eval_out, report);
      }
      return 0;
    }
  } catch (const UncoveredEdgesError& e) {
    nlohmann::json edges = nlohmann::json::array();
    for (auto [i, j] : e.edges()) edges.push_back({i, j});
    return report_error("uncovered_edges", e.what(), kExitUncovered, error_dir, {{"edges", edges}});
  } catch (const SpectralError& e) {
    return report_error("solver_failure", e.what(), kExitSolver, error_dir,
                        {{"subspace_change", e.subspace_change()}, {"rayleigh_residual", e.rayleigh_residual()}});
  } catch (const SolverError& e) {
    return report_error("solver_failure", e.what(), kExitSolver, error_dir);
  } catch (const InputError& e) {
    return report_error("input_error", e.what(), kExitInput, error_dir);
  } catch (const fs::filesystem_error& e) {
    return report_error("input_error", e.what(), kExitInput, error_dir);
  }
  return 0;
}
