#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "desc/cycle_table.hpp"
#include "desc/desc_pgd.hpp"
#include "desc/error.hpp"
#include "desc/ucm.hpp"
#include "test_support.hpp"

using namespace desc;
using namespace testing_support;

namespace {

// Objective by enumeration over node triples, looking edges up in the graph
// rather than through the table's stored side-edge ids.
double objective_oracle(const ViewGraph& g, const CycleTable& t, const BeliefState& b) {
  double f = 0.0;
  for (int e = 0; e < g.num_edges(); ++e) {
    const auto& ed = g.edge(e);
    for (std::size_t s = t.begin(e); s < t.end(e); ++s) {
      const int k = t.node(s);
      f += b.p[s] * (b.s[static_cast<std::size_t>(*g.find_edge(ed.i, k))] +
                     b.s[static_cast<std::size_t>(*g.find_edge(ed.j, k))]);
    }
  }
  return f;
}

// Exact Euclidean projection onto the simplex by enumerating supports.
std::vector<double> simplex_oracle(const std::vector<double>& v) {
  const std::size_t m = v.size();
  std::vector<double> best;
  double best_cost = 1e300;
  for (unsigned mask = 1; mask < (1u << m); ++mask) {
    double sum = 0.0;
    int count = 0;
    for (std::size_t k = 0; k < m; ++k)
      if (mask & (1u << k)) {
        sum += v[k];
        ++count;
      }
    const double tau = (sum - 1.0) / count;
    std::vector<double> p(m, 0.0);
    bool feasible = true;
    for (std::size_t k = 0; k < m; ++k) {
      if (mask & (1u << k)) {
        p[k] = v[k] - tau;
        feasible = feasible && p[k] >= -1e-15;
      }
    }
    if (!feasible) continue;
    double cost = 0.0;
    for (std::size_t k = 0; k < m; ++k) cost += (p[k] - v[k]) * (p[k] - v[k]);
    if (cost < best_cost) {
      best_cost = cost;
      best = p;
    }
  }
  return best;
}

// Random point in the interior of each simplex.
BeliefState random_beliefs(const CycleTable& t, Rng& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  BeliefState b = init_beliefs(t);
  for (int e = 0; e < t.num_edges(); ++e) {
    double sum = 0.0;
    for (std::size_t s = t.begin(e); s < t.end(e); ++s) sum += (b.p[s] = u(rng));
    for (std::size_t s = t.begin(e); s < t.end(e); ++s) b.p[s] /= sum;
  }
  refresh_estimates(t, b);
  return b;
}

struct K3Fixture {
  ViewGraph g;
  CycleTable table;
};

// K3 with d_01 = 0.5, d_02 = 0.5, d_12 = 0 (edge ids 0, 1, 2).
K3Fixture k3_fixture() {
  Rng rng(1);
  ViewGraph g = clean_graph(3, complete_pairs(3), haar_rotations(3, rng));
  CycleTable t = build_cycle_table(g, CycleBudget{}, rng).with_inconsistencies({0.5, 0.5, 0.0});
  return {std::move(g), std::move(t)};
}

}  // namespace

TEST_CASE("uniform initial beliefs") {
  Rng rng(2);
  ViewGraph g5 = clean_graph(6, complete_pairs(6), haar_rotations(6, rng));
  CycleTable t = build_cycle_table(g5, CycleBudget{}, rng);
  BeliefState b = init_beliefs(t);
  for (int s = 0; s < 4; ++s) CHECK(b.p[static_cast<std::size_t>(s)] == 0.25);
  for (double s : b.s) CHECK(s < 1e-15);

  ViewGraph g4 = clean_graph(4, complete_pairs(4), haar_rotations(4, rng));
  CycleTable t4 = build_cycle_table(g4, CycleBudget{}, rng);
  std::vector<double> d(t4.total_cycles(), 0.0);
  d[0] = 0.2;
  d[1] = 0.4;
  CHECK(init_beliefs(t4.with_inconsistencies(d)).s[0] == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("K3 objective and gradient by hand") {
  auto fx = k3_fixture();
  DescQp qp(fx.table);
  BeliefState b = init_beliefs(fx.table);
  // Every edge sees the other two: f = (s_02 + s_12) + (s_01 + s_12) + (s_01 + s_02) = 2(x + y + z).
  CHECK(qp.objective(b) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(objective_oracle(fx.g, fx.table, b) == doctest::Approx(2.0).epsilon(1e-15));
  for (auto [x, y, z] : std::vector<std::array<double, 3>>{{0.1, 0.7, 0.3}, {1.0, 0.0, 0.25}}) {
    CycleTable t = fx.table.with_inconsistencies({x, y, z});
    CHECK(DescQp(t).objective(init_beliefs(t)) == doctest::Approx(2 * (x + y + z)).epsilon(1e-14));
  }
  auto g0 = qp.gradient(b, 0);
  REQUIRE(g0.size() == 1);
  CHECK(g0[0] == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(qp.coupling(b, 0) == 2.0);
}

TEST_CASE("clean instances: zero objective and zero gradient") {
  Rng rng(3);
  ViewGraph g = clean_graph(8, complete_pairs(8), haar_rotations(8, rng));
  CycleTable t = build_cycle_table(g, CycleBudget{}, rng);
  DescQp qp(t);
  BeliefState b = random_beliefs(t, rng);
  CHECK(qp.objective(b) < 1e-14);
  for (int e = 0; e < t.num_edges(); ++e)
    for (double x : qp.gradient(init_beliefs(t), e)) CHECK(std::abs(x) < 1e-14);
}

TEST_CASE("gradient matches central differences of the objective") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    UcmParams params;
    params.n = 30;
    params.q = 0.3;
    params.seed = seed;
    UcmInstance inst = generate_ucm(params);
    Rng rng(seed);
    CycleBudget budget;
    budget.minimum = 4;  // force real sampling
    CycleTable t = build_cycle_table(inst.graph, budget, rng);
    DescQp qp(t);
    BeliefState b = random_beliefs(t, rng);
    CHECK(std::abs(qp.objective(b) - objective_oracle(inst.graph, t, b)) <= 1e-10 * qp.objective(b));

    const double h = 1e-6;
    double worst = 0.0;
    for (int e = 0; e < t.num_edges(); ++e) {
      auto grad = qp.gradient(b, e);
      for (std::size_t k = 0; k < grad.size(); ++k) {
        const std::size_t slot = t.begin(e) + k;
        BeliefState plus = b, minus = b;
        plus.p[slot] += h;
        minus.p[slot] -= h;
        refresh_estimates(t, plus);
        refresh_estimates(t, minus);
        const double fd = (qp.objective(plus) - qp.objective(minus)) / (2 * h);
        // Entries that are exactly zero carry only roundoff, so relative error uses a unit floor.
        worst = std::max(worst, std::abs(fd - grad[k]) / std::max({std::abs(fd), std::abs(grad[k]), 1.0}));
      }
    }
    CHECK(worst <= 1e-5);
  }
}

TEST_CASE("tangent projection") {
  CHECK(riemannian_project(std::vector<double>{2.5, 2.5, 2.5}) == std::vector<double>{0, 0, 0});
  CHECK(riemannian_project(std::vector<double>{1.0, -3.0, 2.0}) == std::vector<double>{1.0, -3.0, 2.0});
  CHECK(riemannian_project(std::vector<double>{1.0, 0.0}) == std::vector<double>{0.5, -0.5});
}

TEST_CASE("simplex projection") {
  const double third = 1.0 / 3.0;
  CHECK(project_to_simplex(std::vector<double>{0.25, 0.25, 0.25, 0.25}) == std::vector<double>{0.25, 0.25, 0.25, 0.25});
  auto p = project_to_simplex(std::vector<double>{1.2, -0.3});
  CHECK(p[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(p[1] == 0.0);
  auto u = project_to_simplex(std::vector<double>{0.5, 0.5, 0.5});
  for (double x : u) CHECK(x == doctest::Approx(third).epsilon(1e-15));
  CHECK(project_to_simplex(std::vector<double>{-7.0}) == std::vector<double>{1.0});

  // Dense grid over Delta(2) for the (1.2, -0.3) case.
  double best = 0.0, best_cost = 1e300;
  for (int i = 0; i <= 100000; ++i) {
    const double a = i / 100000.0;
    const double cost = std::hypot(a - 1.2, (1 - a) + 0.3);
    if (cost < best_cost) {
      best_cost = cost;
      best = a;
    }
  }
  CHECK(std::abs(best - p[0]) <= 1e-5);
}

TEST_CASE("simplex projection agrees with support enumeration") {
  Rng rng(4);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_int_distribution<int> dim(1, 6);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> v(static_cast<std::size_t>(dim(rng)));
    for (double& x : v) x = u(rng);
    auto got = project_to_simplex(v);
    auto expect = simplex_oracle(v);
    double err = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) err = std::max(err, std::abs(got[k] - expect[k]));
    CHECK(err <= 1e-12);
  }
}

TEST_CASE("ties at the threshold are handled deterministically") {
  auto p = project_to_simplex(std::vector<double>{0.3, 0.9, 0.9, 0.3});
  CHECK(p == std::vector<double>{0.0, 0.5, 0.5, 0.0});
}

TEST_CASE("one PGD step on K4 matches a hand trace") {
  Rng rng(5);
  ViewGraph g = clean_graph(4, complete_pairs(4), haar_rotations(4, rng));
  CycleTable base = build_cycle_table(g, CycleBudget::all_cycles(), rng);
  std::vector<double> d(base.total_cycles());
  for (std::size_t s = 0; s < d.size(); ++s) d[s] = 0.05 * static_cast<double>((7 * s + 3) % 13);
  CycleTable t = base.with_inconsistencies(d);

  for (double step : {0.01, 0.5}) {
    PgdConfig cfg;
    cfg.step_size = step;
    cfg.max_iters = 1;
    std::vector<BeliefState> states;
    run_pgd(t, cfg, nullptr, [&](int, const BeliefState& b) { states.push_back(b); });
    REQUIRE(states.size() == 2);

    // Uniform start: p = 1/2 everywhere, s_e = mean of d_e, and every edge
    // is a side of four sampled slots (two per endpoint), so M_e = 4 / 2 = 2.
    std::vector<double> s0(6);
    for (int e = 0; e < 6; ++e) s0[static_cast<std::size_t>(e)] = 0.5 * (d[2 * static_cast<std::size_t>(e)] + d[2 * static_cast<std::size_t>(e) + 1]);
    for (int e = 0; e < 6; ++e) {
      const auto& ed = g.edge(e);
      double grad[2];
      for (int k = 0; k < 2; ++k) {
        const int node = t.node(t.begin(e) + static_cast<std::size_t>(k));
        grad[k] = s0[static_cast<std::size_t>(*g.find_edge(ed.i, node))] +
                  s0[static_cast<std::size_t>(*g.find_edge(ed.j, node))] + 2.0 * d[t.begin(e) + static_cast<std::size_t>(k)];
      }
      // Two-point simplex: p_0 = clamp((v_0 - v_1 + 1) / 2).
      const double v0 = 0.5 - step * (grad[0] - grad[1]) / 2;
      const double v1 = 0.5 - step * (grad[1] - grad[0]) / 2;
      const double p0 = std::clamp((v0 - v1 + 1.0) / 2.0, 0.0, 1.0);
      CHECK(states[1].p[t.begin(e)] == doctest::Approx(p0).epsilon(1e-14));
      CHECK(states[1].p[t.begin(e) + 1] == doctest::Approx(1.0 - p0).epsilon(1e-14));
    }
  }
}

TEST_CASE("PGD config validation") {
  PgdConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.step_size = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg.step_size = 10.5;
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg.step_size = 1.0;
  cfg.max_iters = 0;
  CHECK_THROWS_AS(cfg.validate(), InputError);
}

TEST_CASE("clean UCM instance: zero estimates after one iteration") {
  UcmParams params;
  params.n = 25;
  params.p = 0.6;
  UcmInstance inst = generate_ucm(params);
  Rng rng(1);
  CycleTable t = build_cycle_table(inst.graph, CycleBudget{}, rng);
  PgdConfig cfg;
  cfg.max_iters = 1;
  auto est = run_pgd(t, cfg);
  CHECK(est.iterations_run == 1);
  for (double s : est.s_hat) CHECK(s < 1e-15);
}

TEST_CASE("property: feasibility, nonnegative objective and the cumulative error bound") {
  for (std::uint64_t seed : {11u, 12u}) {
    UcmParams params;
    params.n = 40;
    params.q = 0.4;
    params.sigma = 0.05;
    params.seed = seed;
    UcmInstance inst = generate_ucm(params);
    Rng rng(seed);
    CycleTable t = build_cycle_table(inst.graph, CycleBudget{}, rng);
    DescQp qp(t);
    const auto& star = inst.truth.corruption;

    PgdConfig cfg;
    cfg.max_iters = 40;
    cfg.step_size = 0.05;
    bool feasible = true, bounded = true, nonneg = true;
    run_pgd(t, cfg, &inst.truth, [&](int, const BeliefState& b) {
      double lhs = 0.0, rhs = 0.0;
      for (int e = 0; e < t.num_edges(); ++e) {
        double sum = 0.0, dot = 0.0;
        for (std::size_t s = t.begin(e); s < t.end(e); ++s) {
          feasible = feasible && b.p[s] >= 0.0;
          sum += b.p[s];
          dot += b.p[s] * t.d(s);
          rhs += b.p[s] * (star[static_cast<std::size_t>(t.edge_ik(s))] + star[static_cast<std::size_t>(t.edge_jk(s))]);
        }
        const double se = b.s[static_cast<std::size_t>(e)];
        feasible = feasible && std::abs(sum - 1.0) <= 1e-9 && std::abs(se - dot) <= 1e-12 && se >= 0.0 && se <= 1.0;
        lhs += std::abs(se - star[static_cast<std::size_t>(e)]);
      }
      bounded = bounded && lhs <= rhs + 1e-8;
      nonneg = nonneg && qp.objective(b) >= 0.0;
    });
    CHECK(feasible);
    CHECK(bounded);
    CHECK(nonneg);
  }
}

TEST_CASE("trace rows and determinism") {
  UcmParams params;
  params.n = 30;
  params.q = 0.3;
  params.seed = 3;
  UcmInstance inst = generate_ucm(params);
  auto solve = [&] {
    Rng rng(17);
    CycleTable t = build_cycle_table(inst.graph, CycleBudget{}, rng);
    PgdConfig cfg;
    cfg.max_iters = 20;
    cfg.record_trace = true;
    return run_pgd(t, cfg, &inst.truth);
  };
  auto a = solve();
  auto b = solve();
  CHECK(a.s_hat == b.s_hat);
  REQUIRE(a.trace.size() == 21);
  CHECK(a.trace.front().iter == 0);
  CHECK(a.trace.back().objective == a.final_objective);
  CHECK(a.trace.back().mean_abs_err.has_value());
  CHECK(a.trace.back().objective < a.trace.front().objective);
}

TEST_CASE("exact recovery on a small noiseless instance") {
  // K6 with two disjoint bad edges: every edge keeps a cycle with two good sides.
  Rng rng(21);
  auto truth = haar_rotations(6, rng);
  ViewGraph g = clean_graph(6, complete_pairs(6), truth);
  auto [cg, gt] = corrupt(g, truth, {*g.find_edge(0, 1), *g.find_edge(2, 3)}, rng);
  CycleTable t = build_cycle_table(cg, CycleBudget::all_cycles(), rng);
  PgdConfig cfg;
  cfg.step_size = 0.5;
  cfg.max_iters = 3000;
  auto est = run_pgd(t, cfg);
  REQUIRE(est.final_objective <= 1e-10);
  double worst = 0.0;
  for (int e = 0; e < cg.num_edges(); ++e)
    worst = std::max(worst, std::abs(est.s_hat[static_cast<std::size_t>(e)] - gt.corruption[static_cast<std::size_t>(e)]));
  CHECK(worst <= 1e-6);
}
