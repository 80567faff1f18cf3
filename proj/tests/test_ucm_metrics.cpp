#include <doctest.h>

#include <cmath>

#include "desc/cycle_table.hpp"
#include "desc/error.hpp"
#include "desc/metrics.hpp"
#include "desc/pose_graph_io.hpp"
#include "desc/ucm.hpp"
#include "test_support.hpp"

using namespace desc;
using namespace testing_support;

TEST_CASE("clean UCM instances are cycle consistent") {
  UcmParams params;
  params.n = 30;
  UcmInstance inst = generate_ucm(params);
  for (double s : inst.truth.corruption) CHECK(s < 1e-15);
  Rng rng(0);
  CycleTable t = build_cycle_table(inst.graph, CycleBudget::all_cycles(), rng);
  for (std::size_t s = 0; s < t.total_cycles(); ++s) CHECK(t.d(s) < 1e-14);
  CHECK(inst.num_corrupted() == 0);
}

TEST_CASE("edge count of G(100, 0.5)") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    UcmParams params;
    params.seed = seed;
    UcmInstance inst = generate_ucm(params);
    CHECK(std::abs(inst.graph.num_edges() - 2475) <= 4 * 35);
    CHECK(inst.graph.is_connected());
  }
}

TEST_CASE("fully corrupted edges have Haar-mean corruption") {
  UcmParams params;
  params.q = 1.0;
  UcmInstance inst = generate_ucm(params);
  double sum = 0.0;
  for (double s : inst.truth.corruption) sum += s;
  CHECK(std::abs(sum / inst.graph.num_edges() - 0.7026) <= 0.01);
}

TEST_CASE("property: labels, recomputed corruption and corruption fraction") {
  for (double q : {0.2, 0.5, 0.8}) {
    for (double sigma : {0.0, 0.1}) {
      UcmParams params;
      params.q = q;
      params.sigma = sigma;
      params.seed = 4;
      UcmInstance inst = generate_ucm(params);
      const auto m = static_cast<double>(inst.graph.num_edges());
      CHECK(std::abs(inst.num_corrupted() / m - q) <= 4 * std::sqrt(q * (1 - q) / m));
      for (int e = 0; e < inst.graph.num_edges(); ++e) {
        const auto ue = static_cast<std::size_t>(e);
        CHECK(std::abs(inst.truth.corruption[ue] - corruption_level(inst.graph, inst.truth.rotations, e)) <= 1e-12);
        if (sigma == 0.0) CHECK((inst.truth.corruption[ue] > 1e-12) == inst.truth.bad[ue]);
      }
    }
  }
}

TEST_CASE("default grid and seed streams") {
  auto grid = SweepGrid::default_grid();
  CHECK(grid.q.size() == 9);
  CHECK(grid.q.back() == 0.8);
  CHECK(ucm_sweep(grid).size() == 9 * 2 * 10);
  grid.seeds = 1;
  auto cells = ucm_sweep(grid);
  CHECK(cells.size() == 18);
  CHECK(cells[0].q == 0.0);
  CHECK(cells[1].sigma == 0.1);
  CHECK(cells[2].q == 0.1);

  UcmParams a;
  a.n = 20;
  a.q = 0.1;
  UcmParams b = a;
  b.q = 0.2;
  auto ia = generate_ucm(a);
  auto ib = generate_ucm(b);
  CHECK(ia.truth.rotations[0].matrix() != ib.truth.rotations[0].matrix());
  CHECK(derive_seed(1, 0.1, 0.0, "graph") != derive_seed(1, 0.1, 0.0, "truth"));
  CHECK(derive_seed(1, 0.1, 0.0, "graph") != derive_seed(2, 0.1, 0.0, "graph"));
  CHECK(derive_seed(1, 0.1, 0.0, "graph") == derive_seed(1, 0.1, 0.0, "graph"));
}

TEST_CASE("same triple twice gives identical files") {
  UcmParams params;
  params.n = 25;
  params.q = 0.3;
  params.sigma = 0.1;
  params.seed = 12;
  auto dump = [&] {
    UcmInstance inst = generate_ucm(params);
    std::ostringstream out;
    write_pose_graph(out, inst.graph);
    write_rotations(out, inst.truth.rotations);
    return out.str();
  };
  CHECK(dump() == dump());
}

TEST_CASE("UCM parameter validation") {
  UcmParams params;
  params.p = 0.0;
  CHECK_THROWS_AS(generate_ucm(params), InputError);
  params = UcmParams{};
  params.q = 1.5;
  CHECK_THROWS_AS(generate_ucm(params), InputError);
  params = UcmParams{};
  params.sigma = -1;
  CHECK_THROWS_AS(generate_ucm(params), InputError);
  params = UcmParams{};
  params.n = 1;
  CHECK_THROWS_AS(generate_ucm(params), InputError);
}

TEST_CASE("sparse graphs regenerate or fail") {
  UcmParams params;
  params.n = 40;
  params.p = 0.02;
  params.max_regenerations = 3;
  CHECK_THROWS_AS(generate_ucm(params), InputError);
  params.require_connected = false;
  auto inst = generate_ucm(params);
  CHECK(inst.regenerations == 3);
  CHECK_FALSE(inst.graph.is_connected());
}

TEST_CASE("corruption error") {
  std::vector<double> s{0.1, 0.2, 0.3};
  auto same = corruption_error(s, s);
  CHECK(same.mean == 0.0);
  CHECK(same.median == 0.0);
  std::vector<double> shifted{0.2, 0.3, 0.4};
  auto off = corruption_error(shifted, s);
  CHECK(off.mean == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(off.median == doctest::Approx(0.1).epsilon(1e-14));
  auto hand = corruption_error(std::vector<double>{0.0, 0.3}, std::vector<double>{0.1, 0.1});
  CHECK(hand.mean == doctest::Approx(0.15).epsilon(1e-15));
  CHECK(hand.median == doctest::Approx(0.15).epsilon(1e-15));
  CHECK_THROWS_AS(corruption_error(s, std::vector<double>{0.1}), InputError);
}

TEST_CASE("alignment: identity and gauge inversion") {
  Rng rng(30);
  auto truth = haar_rotations(10, rng);
  CHECK((align_rotations(truth, truth).matrix() - Mat3::Identity()).norm() < 1e-14);
  const Rotation g0 = sample_haar(rng);
  std::vector<Rotation> est;
  for (const auto& r : truth) est.push_back(r * g0);
  CHECK((align_rotations(est, truth).matrix() - g0.transpose().matrix()).norm() < 1e-12);
  auto stats = rotation_error_stats(est, truth);
  CHECK(stats.mean_deg < 1e-10);
  CHECK(stats.median_deg < 1e-10);
  CHECK(stats.per_node_deg.size() == 10);
  CHECK_THROWS_AS(align_rotations(est, std::vector<Rotation>{}), InputError);
}

TEST_CASE("two nodes 10 degrees apart split the error") {
  std::vector<Rotation> est{Rotation(), Rotation()};
  std::vector<Rotation> truth{Rotation(), rot_z(10.0 * kPi / 180.0)};
  auto stats = rotation_error_stats(est, truth);
  CHECK(stats.per_node_deg[0] == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(stats.per_node_deg[1] == doctest::Approx(5.0).epsilon(1e-12));

  // Grid search over rotations about z for the chordal minimizer.
  double best = 0.0, best_cost = 1e300;
  for (int k = -20000; k <= 20000; ++k) {
    const double a = k * 1e-5;
    const double cost = (rot_z(a).matrix() - truth[0].matrix()).squaredNorm() +
                        (rot_z(a).matrix() - truth[1].matrix()).squaredNorm();
    if (cost < best_cost) {
      best_cost = cost;
      best = a;
    }
  }
  CHECK(std::abs(best * 180.0 / kPi - 5.0) <= 1e-3);
}

TEST_CASE("one node flipped by pi among many exact nodes") {
  Rng rng(31);
  auto truth = haar_rotations(200, rng);
  std::vector<Rotation> est = truth;
  est[17] = est[17] * Rotation::about_axis(Vec3(0.2, 1.0, -0.4), kPi);
  auto stats = rotation_error_stats(est, truth);
  CHECK(stats.per_node_deg[17] > 179.0);
  CHECK(stats.per_node_deg[17] <= 180.0);
  CHECK(stats.median_deg < 1.0);
}

TEST_CASE("property: alignment beats random candidates; errors are gauge invariant") {
  Rng rng(32);
  std::normal_distribution<double> normal(0.0, 0.2);
  for (int trial = 0; trial < 50; ++trial) {
    auto truth = haar_rotations(8, rng);
    std::vector<Rotation> est;
    for (const auto& r : truth) est.push_back(so3_exp(TangentVector(normal(rng), normal(rng), normal(rng))) * r);
    const Rotation g = align_rotations(est, truth);
    auto cost = [&](const Rotation& c) {
      double sum = 0.0;
      for (std::size_t i = 0; i < est.size(); ++i) sum += ((est[i] * c).matrix() - truth[i].matrix()).squaredNorm();
      return sum;
    };
    const double best = cost(g);
    bool ok = true;
    for (int k = 0; k < 1000; ++k) ok = ok && best <= cost(sample_haar(rng)) + 1e-12;
    CHECK(ok);

    const Rotation g0 = sample_haar(rng);
    std::vector<Rotation> moved;
    for (const auto& r : est) moved.push_back(r * g0);
    auto a = rotation_error_stats(est, truth);
    auto b = rotation_error_stats(moved, truth);
    CHECK(std::abs(a.mean_deg - b.mean_deg) <= 1e-9);
    CHECK(std::abs(a.median_deg - b.median_deg) <= 1e-9);
    for (double e : a.per_node_deg) {
      CHECK(e >= 0.0);
      CHECK(e <= 180.0);
    }
  }
}

TEST_CASE("alignment near a small perturbation matches a dense grid") {
  // Estimates are truth times a fixed small rotation plus noise; search a
  // dense grid of small rotations around the closed-form answer.
  Rng rng(33);
  std::normal_distribution<double> normal(0.0, 0.05);
  auto truth = haar_rotations(12, rng);
  const Rotation g0 = so3_exp(TangentVector(0.05, -0.02, 0.03));
  std::vector<Rotation> est;
  for (const auto& r : truth) est.push_back(so3_exp(TangentVector(normal(rng), normal(rng), normal(rng))) * r * g0);
  const Rotation g = align_rotations(est, truth);
  auto cost = [&](const Rotation& c) {
    double sum = 0.0;
    for (std::size_t i = 0; i < est.size(); ++i) sum += ((est[i] * c).matrix() - truth[i].matrix()).squaredNorm();
    return sum;
  };
  const double h = 2e-3;
  const TangentVector center = so3_log(g0.transpose());
  double best_cost = 1e300;
  TangentVector best = center;
  for (int a = -30; a <= 30; ++a)
    for (int b = -30; b <= 30; ++b)
      for (int c = -30; c <= 30; ++c) {
        const TangentVector v = center + h * TangentVector(a, b, c);
        const double cv = cost(so3_exp(v));
        if (cv < best_cost) {
          best_cost = cv;
          best = v;
        }
      }
  CHECK(cost(g) <= best_cost + 1e-12);
  CHECK(angular_distance(g, so3_exp(best)) * kPi <= std::sqrt(3.0) * h);
}
