#include "desc/ucm.hpp"

#include <bit>
#include <fmt/core.h>

#include "desc/error.hpp"

namespace desc {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

void UcmParams::validate() const {
  if (n < 2) throw InputError("UCM needs at least two nodes");
  if (!(p > 0.0 && p <= 1.0)) throw InputError(fmt::format("edge probability {} outside (0, 1]", p));
  if (!(q >= 0.0 && q <= 1.0)) throw InputError(fmt::format("corruption probability {} outside [0, 1]", q));
  if (!(sigma >= 0.0)) throw InputError(fmt::format("noise level {} is negative", sigma));
  if (max_regenerations < 0) throw InputError("max_regenerations must be >= 0");
}

int UcmInstance::num_corrupted() const {
  int count = 0;
  for (bool b : truth.bad) count += b ? 1 : 0;
  return count;
}

std::uint64_t derive_seed(std::uint64_t seed, double q, double sigma, std::string_view stream) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ std::bit_cast<std::uint64_t>(q));
  h = splitmix64(h ^ std::bit_cast<std::uint64_t>(sigma));
  return splitmix64(h ^ fnv1a(stream));
}

UcmInstance generate_ucm(const UcmParams& params) {
  params.validate();
  Rng truth_rng(derive_seed(params.seed, params.q, params.sigma, "truth"));
  Rng graph_rng(derive_seed(params.seed, params.q, params.sigma, "graph"));
  Rng corruption_rng(derive_seed(params.seed, params.q, params.sigma, "corruption"));
  Rng noise_rng(derive_seed(params.seed, params.q, params.sigma, "noise"));

  UcmInstance inst;
  inst.params = params;

  std::vector<Rotation> rotations;
  rotations.reserve(static_cast<std::size_t>(params.n));
  for (int i = 0; i < params.n; ++i) rotations.push_back(sample_haar(truth_rng));

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::pair<int, int>> pairs;
  for (int attempt = 0;; ++attempt) {
    pairs.clear();
    ViewGraph skeleton(params.n);
    for (int i = 0; i < params.n; ++i)
      for (int j = i + 1; j < params.n; ++j)
        if (unit(graph_rng) < params.p) {
          pairs.emplace_back(i, j);
          skeleton.add_edge(i, j, Rotation::identity());
        }
    if (skeleton.is_connected()) break;
    if (attempt >= params.max_regenerations) {
      if (params.require_connected) {
        throw InputError(fmt::format("UCM graph disconnected ({} components) after {} regenerations",
                                     skeleton.component_count(), attempt));
      }
      break;
    }
    ++inst.regenerations;
  }

  ViewGraph g(params.n);
  std::vector<bool> bad;
  bad.reserve(pairs.size());
  for (auto [i, j] : pairs) {
    const Rotation clean = rotations[static_cast<std::size_t>(i)] * rotations[static_cast<std::size_t>(j)].transpose();
    if (unit(corruption_rng) < params.q) {
      g.add_edge(i, j, sample_haar(corruption_rng));
      bad.push_back(true);
    } else {
      g.add_edge(i, j, wigner_perturb(clean, params.sigma, noise_rng));
      bad.push_back(false);
    }
  }
  inst.truth = make_ground_truth(g, std::move(rotations), std::move(bad));
  inst.graph = std::move(g);
  return inst;
}

SweepGrid SweepGrid::default_grid() {
  SweepGrid grid;
  for (int k = 0; k <= 8; ++k) grid.q.push_back(k / 10.0);
  grid.sigma = {0.0, 0.1};
  grid.seeds = 10;
  return grid;
}

std::vector<UcmParams> ucm_sweep(const SweepGrid& grid, int n, double p) {
  if (grid.seeds < 1) throw InputError("sweep needs at least one seed");
  std::vector<UcmParams> cells;
  for (double q : grid.q)
    for (double sigma : grid.sigma)
      for (int s = 0; s < grid.seeds; ++s) {
        UcmParams params;
        params.n = n;
        params.p = p;
        params.q = q;
        params.sigma = sigma;
        params.seed = grid.first_seed + static_cast<std::uint64_t>(s);
        params.validate();
        cells.push_back(params);
      }
  return cells;
}

}  // namespace desc
