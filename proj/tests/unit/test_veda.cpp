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

/// Every authorized id of every role is reachable through its manifest plan.
void check_manifest_covers(const LayoutManifest& m, const ExclusiveLattice& ex) {
  m.validate(ex);
  for (Role r = 0; r < ex.n_roles(); ++r) {
    std::vector<std::uint32_t> got;
    for (const auto& it : m.plans[r]) {
      auto ids = unit_vector_ids(m.units[it.unit], ex);
      got.insert(got.end(), ids.begin(), ids.end());
    }
    std::sort(got.begin(), got.end());
    auto want = ex.authorized_ids(r);
    CHECK(std::includes(got.begin(), got.end(), want.begin(), want.end()));
  }
}

}  // namespace

TEST_CASE("veda: a single block admits no operation") {
  auto ex = ExclusiveLattice::build(vtest::blocks_access({{{0, 1}, 500}}, 2));
  VedaOptimizer v(ex, config(2.0));
  v.run();
  CHECK(v.trace().empty());
  CHECK(v.lattice().n_alive() == 1);
  CHECK(v.lattice().stored() == 500);
}

TEST_CASE("veda: beta = 1 skips copying") {
  auto ex = ExclusiveLattice::build(vtest::toy3_access());
  VedaOptimizer v(ex, config(1.0));
  CHECK(v.copy_phase() == 0);
  CHECK(v.lattice().stored() == 10000);
}

TEST_CASE("veda: the two toy copies are admissible and reach SA 1.2") {
  auto ex = ExclusiveLattice::build(vtest::toy3_access());
  VedaOptimizer v(ex, config(1.2));
  const auto& lat = v.lattice();
  auto n0 = *lat.find(RoleSet{0}), n01 = *lat.find(RoleSet{0, 1});
  auto n02 = *lat.find(RoleSet{0, 2}), n012 = *lat.find(RoleSet{0, 1, 2});
  CHECK(v.budget() == 12000);
  CHECK(v.copy_benefit(n0, n01) > 0);
  CHECK(v.copy_benefit(n02, n012) > 0);

  Lattice manual(ex);
  manual.add_block(n0, *ex.find(RoleSet{0, 1}));
  manual.add_block(n02, *ex.find(RoleSet{0, 1, 2}));
  CHECK(manual.sa() == doctest::Approx(1.2));

  v.run();
  CHECK(v.lattice().stored() <= 12000);
  CHECK(std::any_of(v.trace().begin(), v.trace().end(), [](const VedaOp& op) { return op.kind == OpKind::copy; }));
}

TEST_CASE("veda: copies charge the new block only and the trace is monotone") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    auto ex = ExclusiveLattice::build(vtest::random_blocks(4, 10, seed));
    VedaOptimizer v(ex, config(1.5));
    const double initial = v.plans().avg;
    v.run();
    std::size_t stored = ex.n_vectors();
    double avg = initial;
    for (const auto& op : v.trace()) {
      CHECK(op.avg_before == doctest::Approx(avg));
      CHECK(op.avg_after <= op.avg_before + 1e-9);
      CHECK(op.benefit > 0);
      if (op.kind == OpKind::copy) CHECK(op.stored_after == stored + ex.block(*ex.find(op.descendant.roles)).size());
      if (op.kind == OpKind::merge) CHECK(op.stored_after <= stored);
      CHECK(op.stored_after <= v.budget());
      stored = op.stored_after;
      avg = op.avg_after;
    }
    CHECK(v.plans().avg <= initial + 1e-9);
    CHECK(v.lattice().stored() == stored);
  }
}

TEST_CASE("veda: merge storage follows block overlap") {
  auto ex = ExclusiveLattice::build(vtest::toy3_access());
  Lattice lat(ex);
  auto n0 = *lat.find(RoleSet{0}), n01 = *lat.find(RoleSet{0, 1}), n1 = *lat.find(RoleSet{1});
  lat.absorb(n0, n01);  // disjoint
  CHECK(lat.stored() == 10000);

  Lattice lat2(ex);
  lat2.add_block(n1, *ex.find(RoleSet{0, 1}));
  CHECK(lat2.stored() == 11000);
  lat2.absorb(n01, n1);  // both hold the {0,1} block
  CHECK(lat2.stored() < 11000);
  CHECK(lat2.stored() == 10000);
}

TEST_CASE("veda: merge benefit for a role probing both nodes is the two-probe saving") {
  // Only role 0 carries weight, and it probes both nodes before and the union after.
  // The full saving is a*[log(na+1) + log(nc+1) - log(na+nc+1)] + b*efs + c.
  auto ex = ExclusiveLattice::build(vtest::blocks_access({{{0}, 700}, {{0, 1}, 1300}, {{1}, 5000}}, 2));
  auto cfg = config(1.0);
  cfg.weights = {1.0, 0.0};
  VedaOptimizer v(ex, cfg);
  auto a = *v.lattice().find(RoleSet{0}), c = *v.lattice().find(RoleSet{0, 1});
  const auto& t = cfg.theta;
  double expect = t.a * (std::log2(701.0) + std::log2(1301.0) - std::log2(2001.0)) + t.b * 100 + t.c;
  CHECK(v.merge_benefit(a, c) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(v.merge_benefit(a, c) == doctest::Approx(copy_gain(t, 100, 700, 1300)).epsilon(1e-12));
}

TEST_CASE("veda: merge count never exceeds the initial node count") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    auto ex = ExclusiveLattice::build(vtest::random_blocks(5, 14, seed + 100));
    VedaOptimizer v(ex, config(1.0));
    auto merges = v.merge_phase();
    CHECK(merges < ex.size());
    CHECK(v.lattice().n_alive() == ex.size() - merges);
  }
}

TEST_CASE("veda: copying never ends up costlier than merging the same pair") {
  std::size_t compared = 0;
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    auto ex = ExclusiveLattice::build(vtest::random_blocks(3, 6, seed + 200, 20, 3000));
    auto cfg = config(3.0);
    cfg.exact_plans = true;
    VedaOptimizer v(ex, cfg);
    const auto nodes = v.lattice().alive();
    for (auto a : nodes)
      for (auto c : nodes) {
        if (!v.lattice().node(a).key.roles.is_proper_subset_of(v.lattice().node(c).key.roles)) continue;
        if (v.copy_benefit(a, c) <= 0 || v.merge_benefit(a, c) <= 0) continue;
        CHECK(v.avg_after_copy(a, c) <= v.avg_after_merge(a, c) + 1e-9);
        ++compared;
      }
  }
  CHECK(compared > 0);
}

TEST_CASE("finalize: nothing to do on a pure lattice above the threshold") {
  auto ex = ExclusiveLattice::build(vtest::toy3_access());
  Lattice lat(ex);
  auto res = finalize(lat, config(1.0, 500), "none");
  CHECK(res.stats.split == 0);
  CHECK(res.stats.refined == 0);
  CHECK(res.stats.deleted == 0);
  CHECK(res.manifest.units.size() == 7);
  CHECK(res.manifest.sa == doctest::Approx(1.0));
  for (Role r = 0; r < 3; ++r)
    for (const auto& it : res.manifest.plans[r]) CHECK(it.pure);
  check_manifest_covers(res.manifest, ex);
}

TEST_CASE("finalize: a node refined away for its only role is deleted and its space returned") {
  // M = {0}-block + {1}-block; the {1}-block also has its own node, so role 1 never uses M.
  auto ex = ExclusiveLattice::build(vtest::blocks_access({{{0}, 4000}, {{1}, 4000}}, 2));
  Lattice lat(ex);
  auto a = *lat.find(RoleSet{0}), b = *lat.find(RoleSet{1});
  auto nb = lat.create(lat.free_key(RoleSet{1}), std::vector<std::uint32_t>{*ex.find(RoleSet{1})});
  lat.absorb(a, b);
  REQUIRE(lat.stored() == 12000);
  auto res = finalize(lat, config(2.0, 100), "test");
  CHECK(res.stats.refined == 1);
  CHECK(res.stats.deleted >= 1);
  CHECK(res.manifest.stored() == 8000);
  CHECK(res.manifest.units.size() == 2);
  CHECK_FALSE(lat.node(a).alive);
  CHECK(lat.node(nb).alive);
  check_manifest_covers(res.manifest, ex);
}

TEST_CASE("finalize: small nodes become per-block leftovers") {
  auto ex = ExclusiveLattice::build(vtest::blocks_access({{{0}, 50}, {{0, 1}, 40}, {{1}, 5000}}, 2));
  Lattice lat(ex);
  lat.absorb(*lat.find(RoleSet{0}), *lat.find(RoleSet{0, 1}));
  auto res = finalize(lat, config(1.0, 1000), "test");
  CHECK(res.stats.split == 1);
  CHECK(res.stats.leftovers == 2);
  std::size_t leftovers = 0;
  for (const auto& u : res.manifest.units) {
    if (u.kind == UnitKind::leftover) {
      ++leftovers;
      CHECK(u.blocks.size() == 1);
    }
  }
  CHECK(leftovers == 2);
  CHECK(res.manifest.sa == doctest::Approx(1.0));
  check_manifest_covers(res.manifest, ex);
}

TEST_CASE("finalize: SA stays within budget and plans cover on random instances") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto ex = ExclusiveLattice::build(vtest::random_blocks(4, 9, seed + 300, 20, 2500));
    for (double beta : {1.0, 1.3, 2.0}) {
      for (auto kind : {OptimizerKind::veda, OptimizerKind::effveda}) {
        auto cfg = config(beta, 600);
        auto out = optimize(ex, cfg, kind);
        CHECK(out.final.manifest.stored() <= budget_total(beta, ex.n_vectors()));
        CHECK(out.final.manifest.sa <= beta + 1e-12);
        check_manifest_covers(out.final.manifest, ex);
      }
    }
  }
}

TEST_CASE("manifest: JSON round trip preserves units and plans") {
  auto ex = ExclusiveLattice::build(vtest::random_blocks(4, 9, 7));
  auto out = optimize(ex, config(1.5, 300), OptimizerKind::veda);
  const auto& m = out.final.manifest;
  auto back = LayoutManifest::from_json(m.to_json());
  CHECK(back.to_json() == m.to_json());
  CHECK(back.modeled_cost() == doctest::Approx(m.modeled_cost()));
  back.validate(ex);
  CHECK_THROWS_AS(LayoutManifest::from_json("{\"units\": 3}"), InputError);
  auto broken = m;
  broken.plans[0].clear();
  if (!ex.blocks_of_role(0).empty()) CHECK_THROWS_AS(broken.validate(ex), CoverageError);
}
