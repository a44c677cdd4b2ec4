#include <doctest.h>

#include <cmath>
#include <random>

#include "support/testing.hpp"
#include "veda/error.hpp"
#include "veda/optimizer.hpp"

using namespace veda;

namespace {

OptimizerConfig config(double beta, std::size_t lambda = 0) {
  OptimizerConfig c;
  c.beta = beta;
  c.lambda_threshold = lambda;
  return c;
}

std::size_t probes(const Lattice& lat, Role r) {
  std::size_t n = 0;
  for (auto id : lat.alive()) n += lat.node(id).key.roles.test(r);
  return n;
}

/// CSR check: every id of every live node carries every role of the node's key.
std::size_t impure_nodes(const Lattice& lat, const AccessMatrix& am) {
  std::size_t bad = 0;
  for (auto id : lat.alive()) {
    const auto& key = lat.node(id).key.roles;
    bool ok = true;
    for (auto b : lat.blocks(id))
      for (auto v : lat.ex().block(b).ids) {
        auto row = am.row(v);
        key.for_each([&](Role r) { ok = ok && std::binary_search(row.begin(), row.end(), r); });
      }
    bad += !ok;
  }
  return bad;
}

}  // namespace

TEST_CASE("effveda: singleton tags only means nothing to copy") {
  auto ex = ExclusiveLattice::build(vtest::blocks_access({{{0}, 100}, {{1}, 200}, {{2}, 300}}, 3));
  EffVedaOptimizer e(ex, config(3.0));
  e.copy_phase();
  CHECK(e.copies().empty());
  CHECK(e.lattice().stored() == 600);
}

TEST_CASE("effveda: beta = 1 skips copying") {
  auto ex = ExclusiveLattice::build(vtest::toy3_access());
  EffVedaOptimizer e(ex, config(1.0));
  e.copy_phase();
  CHECK(e.copies().empty());
}

TEST_CASE("effveda: the top node splits into {0,1} and {2}, role 2 probes one index fewer") {
  auto ex = ExclusiveLattice::build(vtest::toy3_access());
  EffVedaOptimizer e(ex, config(1.1));
  CHECK(probes(e.lattice(), 2) == 4);
  e.copy_phase();
  REQUIRE(e.copies().size() == 1);
  const auto& c = e.copies()[0];
  CHECK(c.tau == RoleSet{0, 1, 2});
  CHECK(c.parts == std::vector<RoleSet>{RoleSet{0, 1}, RoleSet{2}});
  CHECK_FALSE(c.residual);
  CHECK(c.delta_s == 1000);
  CHECK_FALSE(e.lattice().find(RoleSet{0, 1, 2}));
  CHECK(probes(e.lattice(), 2) == 3);
  CHECK(e.lattice().stored() == 11000);
}

TEST_CASE("copy_gain: equal sizes and the two-plan difference") {
  Theta t{0.3, 0.2, 1.5};
  const std::size_t n = 800;
  CHECK(copy_gain(t, 100, n, n) ==
        doctest::Approx(2 * t.a * std::log2(n + 1.0) - t.a * std::log2(2.0 * n + 1) + t.b * 100 + t.c));

  // Roles 0 and 1 each route to their own node and to {0,1}; the copy folds {0,1} into both.
  auto ex = ExclusiveLattice::build(vtest::blocks_access({{{0}, n}, {{0, 1}, n}, {{1}, 300}}, 2));
  auto cfg = config(2.0);
  cfg.theta = t;
  EffVedaOptimizer e(ex, cfg);
  e.copy_phase(true);
  REQUIRE(e.copies().size() == 1);
  const auto& rec = e.copies()[0];
  const double direct = rec.cost_before - rec.cost_after;
  CHECK(direct == doctest::Approx((copy_gain(t, 100, n, n) + copy_gain(t, 100, 300, n)) / 2).epsilon(1e-12));
  CHECK(std::abs(rec.predicted_gain - direct) < 1e-9);
}

TEST_CASE("copy_gain: positive for any sizes") {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 1000; ++i) {
    Theta t{std::uniform_real_distribution<double>(0, 5)(rng), std::uniform_real_distribution<double>(1e-6, 1)(rng),
            std::uniform_real_distribution<double>(0, 3)(rng)};
    CHECK(copy_gain(t, 1 + rng() % 1000, 1 + rng() % 1000000, 1 + rng() % 1000000) > 0);
  }
}

TEST_CASE("partition_score: a three-way split pays for two extra copies") {
  auto ex = ExclusiveLattice::build(
      vtest::blocks_access({{{0}, 500}, {{1}, 600}, {{2}, 700}, {{0, 1}, 800}, {{0, 1, 2}, 400}}, 3));
  Lattice lat(ex);
  auto cfg = config(3.0);
  auto w = uniform_weights(3);
  auto top = *lat.find(RoleSet{0, 1, 2});
  auto n0 = *lat.find(RoleSet{0}), n1 = *lat.find(RoleSet{1}), n2 = *lat.find(RoleSet{2}),
       n01 = *lat.find(RoleSet{0, 1});
  const auto& t = cfg.theta;
  double three = partition_score(lat, top, {n0, n1, n2}, false, cfg, w);
  double num3 = copy_gain(t, 100, 500, 400) + copy_gain(t, 100, 600, 400) + copy_gain(t, 100, 700, 400);
  CHECK(three == doctest::Approx(num3 / (400.0 * 2)));
  double two = partition_score(lat, top, {n01, n2}, false, cfg, w);
  double num2 = 2 * copy_gain(t, 100, 800, 400) + copy_gain(t, 100, 700, 400);
  CHECK(two == doctest::Approx(num2 / (400.0 * 1)));
  CHECK_THROWS_AS(partition_score(lat, top, {n01}, false, cfg, w), InputError);
}

TEST_CASE("find_best_partition: two-way covers, no overlaps, residual fallback") {
  auto cfg = config(3.0);
  auto w = uniform_weights(3);
  {
    auto ex = ExclusiveLattice::build(vtest::blocks_access({{{0, 1}, 100}, {{2}, 100}, {{0, 1, 2}, 50}}, 3));
    Lattice lat(ex);
    auto top = *lat.find(RoleSet{0, 1, 2});
    std::vector<std::uint32_t> anc{*lat.find(RoleSet{0, 1}), *lat.find(RoleSet{2})};
    auto p = find_best_partition(lat, top, anc, 1000, cfg, w);
    CHECK(p.members == anc);
    CHECK_FALSE(p.residual);
    CHECK(p.score > 0);
    CHECK(find_best_partition(lat, top, anc, 49, cfg, w).members.empty());
    CHECK(find_best_partition(lat, top, {}, 1000, cfg, w).members.empty());
  }
  {
    // {0,1} and {1,2} overlap on role 1, so they never appear together.
    auto ex = ExclusiveLattice::build(vtest::blocks_access({{{0, 1}, 100}, {{1, 2}, 100}, {{0, 1, 2}, 50}}, 3));
    Lattice lat(ex);
    auto top = *lat.find(RoleSet{0, 1, 2});
    std::vector<std::uint32_t> anc{*lat.find(RoleSet{0, 1}), *lat.find(RoleSet{1, 2})};
    auto p = find_best_partition(lat, top, anc, 1000, cfg, w);
    REQUIRE(p.members.size() == 1);
    REQUIRE(p.residual);
    RoleSet covered = lat.node(p.members[0]).key.roles | *p.residual;
    CHECK(covered == RoleSet{0, 1, 2});
    CHECK_FALSE(lat.node(p.members[0]).key.roles.intersects(*p.residual));
  }
  {
    auto ex = ExclusiveLattice::build(vtest::blocks_access({{{0}, 100}, {{0, 1}, 50}}, 2));
    EffVedaOptimizer e(ex, cfg);
    e.copy_phase();
    REQUIRE(e.copies().size() == 1);
    CHECK(e.copies()[0].parts == std::vector<RoleSet>{RoleSet{0}});
    CHECK(*e.copies()[0].residual == RoleSet{1});
    auto relabeled = e.lattice().find(RoleSet{1});
    REQUIRE(relabeled);
    CHECK(e.lattice().node(*relabeled).size == 50);
    CHECK(e.lattice().node(*e.lattice().find(RoleSet{0})).size == 150);
  }
}

TEST_CASE("effveda copy: higher score commits first, the other waits for budget") {
  auto ex = ExclusiveLattice::build(vtest::blocks_access(
      {{{0}, 3000}, {{1}, 3000}, {{2}, 3000}, {{3}, 3000}, {{0, 1}, 1000}, {{2, 3}, 1500}}, 4));
  // |D| = 14500; budget 1.1 * 14500 = 15950 leaves 1450: enough for {0,1} only.
  auto cfg = config(1.1);
  Lattice probe(ex);
  auto w = uniform_weights(4);
  auto s01 = find_best_partition(probe, *probe.find(RoleSet{0, 1}),
                                 {*probe.find(RoleSet{0}), *probe.find(RoleSet{1})}, 1450, cfg, w);
  auto s23 = find_best_partition(probe, *probe.find(RoleSet{2, 3}),
                                 {*probe.find(RoleSet{2}), *probe.find(RoleSet{3})}, 1500, cfg, w);
  CHECK(s01.score > s23.score);
  EffVedaOptimizer e(ex, cfg);
  e.copy_phase();
  REQUIRE(e.copies().size() == 1);
  CHECK(e.copies()[0].tau == RoleSet{0, 1});
  CHECK(e.lattice().find(RoleSet{2, 3}));
}

TEST_CASE("effveda copy: every surviving node is pure for its key") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto am = vtest::random_blocks(5, 18, seed + 500);
    auto ex = ExclusiveLattice::build(am);
    EffVedaOptimizer e(ex, config(2.0));
    e.copy_phase();
    CHECK(impure_nodes(e.lattice(), am) == 0);
    for (auto id : e.lattice().alive()) CHECK(e.lattice().key_pure(id));
    CHECK(e.lattice().stored() <= e.budget());
  }
}

TEST_CASE("merge_benefit: disjoint equal nodes double every lambda") {
  auto ex = ExclusiveLattice::build(vtest::blocks_access({{{0}, 1000}, {{1}, 1000}}, 2));
  Lattice lat(ex);
  auto cfg = config(1.0, 5000);
  MergeState ms(lat, cfg);
  auto a = *lat.find(RoleSet{0}), b = *lat.find(RoleSet{1});
  const auto& t = cfg.theta;
  double before = 2 * (t.a * std::log2(1001.0) + t.b * 100 + t.c);
  double after = 2 * (t.a * std::log2(2001.0) + t.b * 2 * 100 + t.c);
  CHECK(ms.merge_benefit(a, b) == doctest::Approx(before - after));
  CHECK_THROWS_AS(ms.merge_benefit(a, a), InputError);
  CHECK_THROWS_AS(ms.merge(a, a), InputError);
}

TEST_CASE("merge state: lambdas of a merged node come from its records") {
  // Roles: 1 and 2. {1,2} = 3000 and {2} = 12000 merged: lambda_1 = 15000/3000 = 5, lambda_2 = 1.
  auto ex = ExclusiveLattice::build(vtest::blocks_access({{{1}, 10}, {{1, 2}, 3000}, {{2}, 12000}}, 3));
  Lattice lat(ex);
  auto cfg = config(1.0, 100000);
  MergeState ms(lat, cfg);
  auto n2 = *lat.find(RoleSet{2}), n12 = *lat.find(RoleSet{1, 2});
  ms.merge(n2, n12);
  const auto& t = cfg.theta;
  const double w = 3.0 / 3.0;  // uniform: w_r * |R|
  double expect = w * (t.a * std::log2(15001.0) + t.b * 5 * 100 + t.c) + w * (t.a * std::log2(15001.0) + t.b * 1 * 100 + t.c);
  CHECK(ms.h(n2) == doctest::Approx(expect));
  CHECK(ms.routed(n2) == RoleSet{1, 2});
  CHECK(ms.check().empty());
}

TEST_CASE("merge state: routing and partition invariants over random merges") {
  std::size_t sequences = 0;
  for (std::uint64_t seed = 1; sequences < 100; ++seed) {
    auto ex = ExclusiveLattice::build(vtest::random_blocks(5, 14, seed + 700));
    EffVedaOptimizer e(ex, config(1.5));
    e.copy_phase();
    Lattice& lat = e.lattice();
    MergeState ms(lat, config(1.5));
    std::mt19937_64 rng(seed);
    for (int step = 0; step < 8 && lat.n_alive() > 1; ++step) {
      auto alive = lat.alive();
      auto a = alive[rng() % alive.size()], b = alive[rng() % alive.size()];
      if (a == b) continue;
      ms.merge(a, b);
      auto why = ms.check();
      CHECK_MESSAGE(why.empty(), why);
    }
    ++sequences;
  }
}

TEST_CASE("effveda: chain of optimal, inherited and post-copy costs") {
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    auto ex = ExclusiveLattice::build(vtest::random_blocks(5, 12, seed + 900, 20, 1500));
    auto cfg = config(1.4, 1200);
    EffVedaOptimizer e(ex, cfg);
    e.run();
    const double post = e.post_copy_cost();
    const double inh = e.merge_state()->inherited_cost();
    PlanConfig pc;
    pc.theta = cfg.theta;
    pc.efs = cfg.efs;
    pc.exact = true;
    pc.fractional_lambda = true;
    const double opt = e.lattice().plan_all(pc, {}).avg;
    CHECK(inh <= post + 1e-9);
    CHECK(opt <= inh + 1e-9);
    CHECK(e.lattice().stored() <= e.budget());
  }
}

TEST_CASE("effveda: no merges when every node reaches the threshold") {
  auto ex = ExclusiveLattice::build(vtest::toy3_access());
  EffVedaOptimizer e(ex, config(1.0, 500));
  e.run();
  CHECK(e.merges() == 0);
}
