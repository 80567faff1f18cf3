#include "desc/cycle_table.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/core.h>
#include <numbers>

#include "desc/error.hpp"

namespace desc {

int CycleBudget::budget_for_median(double median_cycles) const {
  const int frac = static_cast<int>(std::ceil(median_fraction * median_cycles));
  return std::max(frac, minimum);
}

double cycle_inconsistency(const Rotation& r_ij, const Rotation& r_jk, const Rotation& r_ki) {
  return rotation_angle(r_ij.matrix() * r_jk.matrix() * r_ki.matrix()) / std::numbers::pi;
}

std::ptrdiff_t CycleTable::find_slot(int e, int k) const {
  auto nodes = cycle_nodes(e);
  auto pos = std::lower_bound(nodes.begin(), nodes.end(), k);
  if (pos == nodes.end() || *pos != k) return -1;
  return pos - nodes.begin();
}

CycleTable CycleTable::with_inconsistencies(std::vector<double> d) const {
  if (d.size() != d_.size()) {
    throw InputError(fmt::format("expected {} inconsistencies, got {}", d_.size(), d.size()));
  }
  for (double x : d) {
    if (!(x >= 0.0 && x <= 1.0)) throw InputError(fmt::format("inconsistency {} outside [0, 1]", x));
  }
  CycleTable out = *this;
  out.d_ = std::move(d);
  return out;
}

std::vector<CommonNeighbor> common_neighbors(const ViewGraph& g, int e) {
  const Edge& ed = g.edge(e);
  auto a = g.neighbors(ed.i);
  auto b = g.neighbors(ed.j);
  std::vector<CommonNeighbor> out;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (ia->node < ib->node) {
      ++ia;
    } else if (ib->node < ia->node) {
      ++ib;
    } else {
      out.push_back({ia->node, ia->edge, ib->edge});
      ++ia;
      ++ib;
    }
  }
  return out;
}

CycleTable build_cycle_table(const ViewGraph& g, const CycleBudget& policy, Rng& rng) {
  const int m = g.num_edges();
  std::vector<std::vector<CommonNeighbor>> all(static_cast<std::size_t>(m));
  std::vector<std::pair<int, int>> uncovered;
  for (int e = 0; e < m; ++e) {
    all[static_cast<std::size_t>(e)] = common_neighbors(g, e);
    if (all[static_cast<std::size_t>(e)].empty()) uncovered.emplace_back(g.edge(e).i, g.edge(e).j);
  }
  if (!uncovered.empty()) {
    std::string list;
    for (std::size_t t = 0; t < uncovered.size() && t < 20; ++t) {
      list += fmt::format("{}({},{})", t ? " " : "", uncovered[t].first, uncovered[t].second);
    }
    if (uncovered.size() > 20) list += " ...";
    std::string what = fmt::format("{} edge(s) lie on no 3-cycle: {}", uncovered.size(), list);
    throw UncoveredEdgesError(what, std::move(uncovered));
  }

  CycleTable table;
  if (m > 0) {
    std::vector<std::size_t> counts(static_cast<std::size_t>(m));
    for (int e = 0; e < m; ++e) counts[static_cast<std::size_t>(e)] = all[static_cast<std::size_t>(e)].size();
    std::sort(counts.begin(), counts.end());
    const std::size_t mid = counts.size() / 2;
    table.median_ = counts.size() % 2 ? static_cast<double>(counts[mid])
                                      : 0.5 * static_cast<double>(counts[mid - 1] + counts[mid]);
  }
  table.budget_ = policy.sample ? policy.budget_for_median(table.median_) : 0;

  table.offsets_.reserve(static_cast<std::size_t>(m) + 1);
  for (int e = 0; e < m; ++e) {
    auto& cands = all[static_cast<std::size_t>(e)];
    if (policy.sample && static_cast<int>(cands.size()) > table.budget_) {
      // Partial Fisher-Yates: first `budget` entries become a uniform sample.
      const std::size_t keep = static_cast<std::size_t>(table.budget_);
      for (std::size_t t = 0; t < keep; ++t) {
        std::uniform_int_distribution<std::size_t> pick(t, cands.size() - 1);
        std::swap(cands[t], cands[pick(rng)]);
      }
      cands.resize(keep);
      std::sort(cands.begin(), cands.end(),
                [](const CommonNeighbor& x, const CommonNeighbor& y) { return x.node < y.node; });
    }

    const Edge& ed = g.edge(e);
    for (const CommonNeighbor& c : cands) {
      const Rotation r_jk = g.measurement_from(c.edge_jk, ed.j);
      const Rotation r_ki = g.measurement_from(c.edge_ik, c.node);
      table.nodes_.push_back(c.node);
      table.edge_ik_.push_back(c.edge_ik);
      table.edge_jk_.push_back(c.edge_jk);
      table.d_.push_back(cycle_inconsistency(ed.rij, r_jk, r_ki));
    }
    table.offsets_.push_back(table.nodes_.size());
  }
  return table;
}

bool stability_bound_check(const CycleTable& table, const GroundTruth& truth, double tol) {
  const auto& s = truth.corruption;
  for (int e = 0; e < table.num_edges(); ++e) {
    for (std::size_t t = table.begin(e); t < table.end(e); ++t) {
      const double lhs = std::abs(table.d(t) - s[static_cast<std::size_t>(e)]);
      const double rhs = s[static_cast<std::size_t>(table.edge_ik(t))] + s[static_cast<std::size_t>(table.edge_jk(t))];
      if (lhs > rhs + tol) return false;
    }
  }
  return true;
}

}  // namespace desc
