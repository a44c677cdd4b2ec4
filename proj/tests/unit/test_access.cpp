#include <doctest.h>

#include <map>

#include "support/lattice_oracle.hpp"
#include "support/testing.hpp"
#include "veda/error.hpp"

using namespace veda;

namespace {

// Role ids 0,1,2 stand for r1,r2,r3. One vector per tag of the full 3-role lattice.
AccessMatrix toy_matrix() {
  return AccessMatrix::from_rows({{0}, {1}, {2}, {0, 1}, {0, 2}, {1, 2}, {0, 1, 2}}, 3);
}

std::uint32_t blk(const ExclusiveLattice& lat, RoleSet s) { return lat.find(s).value(); }

std::set<std::uint32_t> as_set(const std::vector<std::uint32_t>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST_CASE("RoleSet: set algebra and canonical order") {
  RoleSet a{0, 2}, b{1, 2}, c{0, 1, 2};
  CHECK(a.count() == 2);
  CHECK(a.is_proper_subset_of(c));
  CHECK_FALSE(a.is_subset_of(b));
  CHECK(a.intersects(b));
  CHECK((c - a) == RoleSet{1});
  CHECK(a < b);
  CHECK(b < c);
  CHECK(RoleSet{5} < RoleSet{0, 1});
  RoleSet hi{127, 64, 3};
  CHECK(hi.roles() == std::vector<Role>{3, 64, 127});
  CHECK(hi.span() == 128);
  CHECK_THROWS_AS(RoleSet{128}, InputError);
}

TEST_CASE("single tag gives a single block on a single layer") {
  auto am = AccessMatrix::from_rows(std::vector<std::vector<std::uint32_t>>(50, {0}), 1);
  auto lat = ExclusiveLattice::build(am);
  CHECK(lat.size() == 1);
  CHECK(lat.block(0).size() == 50);
  CHECK(lat.layers().size() == 2);
  CHECK(lat.layers()[1].size() == 1);
}

TEST_CASE("three-role toy lattice: blocks, layers, adjacency") {
  auto lat = ExclusiveLattice::build(toy_matrix());
  CHECK(lat.size() == 7);
  REQUIRE(lat.layers().size() == 4);
  CHECK(lat.layers()[1].size() == 3);
  CHECK(lat.layers()[2].size() == 3);
  CHECK(lat.layers()[3].size() == 1);

  auto r23 = blk(lat, {1, 2});
  CHECK(as_set(lat.parents(r23)) == std::set<std::uint32_t>{blk(lat, {1}), blk(lat, {2})});
  auto top = blk(lat, {0, 1, 2});
  CHECK(as_set(lat.parents(top)) == std::set<std::uint32_t>{blk(lat, {0, 1}), blk(lat, {0, 2}), r23});
  CHECK(as_set(lat.children(blk(lat, {1}))) == std::set<std::uint32_t>{blk(lat, {0, 1}), r23});
}

TEST_CASE("authorized blocks of r2 in the toy lattice") {
  auto lat = ExclusiveLattice::build(toy_matrix());
  std::set<std::uint32_t> want{blk(lat, {1}), blk(lat, {0, 1}), blk(lat, {1, 2}), blk(lat, {0, 1, 2})};
  CHECK(as_set(lat.blocks_of_role(1)) == want);
  CHECK(lat.authorized_ids(1) == std::vector<std::uint32_t>{1, 3, 5, 6});
  CHECK_THROWS_AS(lat.authorized_ids(3), InputError);
}

TEST_CASE("a role absent from every tag authorizes nothing") {
  auto am = AccessMatrix::from_rows({{0}, {0, 1}}, 3);
  auto lat = ExclusiveLattice::build(am);
  CHECK(lat.authorized_ids(2).empty());
}

TEST_CASE("an empty row is a policy error naming the vector") {
  auto am = AccessMatrix::from_rows({{0}, {}, {1}}, 2);
  try {
    ExclusiveLattice::build(am);
    FAIL("expected a policy error");
  } catch (const PolicyError& e) {
    CHECK(std::string(e.what()).find("vector 1") != std::string::npos);
  }
}

TEST_CASE("64-role random matrix: blocks match a group-by-signature oracle") {
  auto am = vtest::random_access(10000, 64, 300, 17, 5);
  auto lat = ExclusiveLattice::build(am);

  std::map<std::vector<std::uint32_t>, std::vector<std::uint32_t>> oracle;
  for (std::size_t i = 0; i < am.rows(); ++i) {
    auto r = am.row(i);
    oracle[{r.begin(), r.end()}].push_back(static_cast<std::uint32_t>(i));
  }
  REQUIRE(lat.size() == oracle.size());
  std::size_t total = 0;
  for (const auto& b : lat.blocks()) {
    auto roles = b.tag.roles();
    REQUIRE(oracle.count(roles));
    CHECK(b.ids == oracle[roles]);
    total += b.size();
  }
  CHECK(total == am.rows());
  for (std::uint32_t v = 0; v < am.rows(); v += 97) CHECK(lat.tag_of(v) == am.tag(v));

  // Parent edges: proper subsets with no present set strictly between.
  for (std::uint32_t c = 0; c < lat.size(); ++c)
    for (auto p : lat.parents(c)) {
      const auto &tp = lat.block(p).tag, &tc = lat.block(c).tag;
      CHECK(tp.is_proper_subset_of(tc));
      for (const auto& mid : lat.blocks())
        CHECK_FALSE((tp.is_proper_subset_of(mid.tag) && mid.tag.is_proper_subset_of(tc)));
    }
}

TEST_CASE("authorized_ids matches a per-row membership scan") {
  auto am = vtest::random_access(10000, 12, 60, 23, 4);
  auto lat = ExclusiveLattice::build(am);
  for (Role r = 0; r < 12; ++r) {
    std::vector<std::uint32_t> want;
    for (std::size_t i = 0; i < am.rows(); ++i)
      for (auto x : am.row(i))
        if (x == r) want.push_back(static_cast<std::uint32_t>(i));
    CHECK(lat.authorized_ids(r) == want);
    CHECK(lat.authorized_count(r) == want.size());
  }
}

TEST_CASE("hash grouping agrees with layered subtraction") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto am = vtest::random_access(2000, 6, 25, seed, 4);
    auto lat = ExclusiveLattice::build(am);
    auto oracle = vtest::layered_blocks(am);
    REQUIRE(lat.size() == oracle.size());
    for (const auto& b : lat.blocks()) CHECK(oracle.at(b.tag.roles()) == b.ids);
  }
}

TEST_CASE("relations: containment without adjacency, siblings") {
  auto am = AccessMatrix::from_rows({{0}, {0, 1, 2}, {0, 1}, {1, 2}}, 3);
  auto lat = ExclusiveLattice::build(am);
  auto rel = lat.relations();
  auto top = blk(lat, {0, 1, 2});
  auto r1 = blk(lat, {0});
  CHECK(as_set(rel.ancestors[top]).count(r1));
  CHECK(as_set(rel.siblings[blk(lat, {0, 1})]) == std::set<std::uint32_t>{blk(lat, {1, 2})});

  auto sparse = ExclusiveLattice::build(AccessMatrix::from_rows({{0}, {0, 1, 2}}, 3));
  auto srel = sparse.relations();
  CHECK(srel.ancestors[blk(sparse, {0, 1, 2})] == std::vector<std::uint32_t>{blk(sparse, {0})});
  CHECK(sparse.parents(blk(sparse, {0, 1, 2})) == std::vector<std::uint32_t>{blk(sparse, {0})});
}

TEST_CASE("relations on the full 3-role lattice match a powerset oracle") {
  auto lat = ExclusiveLattice::build(toy_matrix());
  auto rel = lat.relations();
  for (std::uint32_t i = 0; i < lat.size(); ++i) {
    std::set<std::uint32_t> anc, desc, sib;
    const auto ti = lat.block(i).tag.roles();
    for (std::uint32_t m = 1; m < 8; ++m) {
      std::vector<Role> s;
      for (Role r = 0; r < 3; ++r)
        if (m >> r & 1u) s.push_back(r);
      auto j = lat.find(RoleSet::from_range(s.begin(), s.end())).value();
      if (j == i) continue;
      bool sub = std::includes(ti.begin(), ti.end(), s.begin(), s.end());
      bool sup = std::includes(s.begin(), s.end(), ti.begin(), ti.end());
      std::vector<Role> common;
      std::set_intersection(ti.begin(), ti.end(), s.begin(), s.end(), std::back_inserter(common));
      if (sub) anc.insert(j);
      if (sup) desc.insert(j);
      if (s.size() == ti.size() && !common.empty()) sib.insert(j);
    }
    CHECK(as_set(rel.ancestors[i]) == anc);
    CHECK(as_set(rel.descendants[i]) == desc);
    CHECK(as_set(rel.siblings[i]) == sib);
  }
}

TEST_CASE("rebuilding from a permuted matrix gives the same lattice") {
  auto am = vtest::random_access(3000, 10, 40, 31, 4);
  std::vector<std::uint32_t> perm = vtest::iota_ids(am.rows());
  std::mt19937_64 rng(5);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<std::uint32_t>> rows(am.rows());
  for (std::size_t i = 0; i < am.rows(); ++i) {
    auto r = am.row(i);
    std::vector<std::uint32_t> shuffled(r.rbegin(), r.rend());
    rows[perm[i]] = shuffled;
  }
  auto a = ExclusiveLattice::build(am);
  auto b = ExclusiveLattice::build(AccessMatrix::from_rows(rows, am.n_roles));
  REQUIRE(a.size() == b.size());
  for (std::uint32_t i = 0; i < a.size(); ++i) {
    CHECK(a.block(i).tag == b.block(i).tag);
    std::vector<std::uint32_t> mapped;
    for (auto id : a.block(i).ids) mapped.push_back(perm[id]);
    std::sort(mapped.begin(), mapped.end());
    CHECK(mapped == b.block(i).ids);
    CHECK(a.parents(i) == b.parents(i));
  }
}

TEST_CASE("access files: binary and JSON lines round trip") {
  vtest::TempDir tmp("access");
  auto am = vtest::random_access(500, 9, 20, 3, 3);
  save_access(am, tmp / "a.bin");
  save_access(am, tmp / "a.jsonl");
  CHECK(load_access(tmp / "a.bin", 9) == am);
  CHECK(load_access(tmp / "a.jsonl", 9) == am);
  CHECK(std::filesystem::file_size(tmp / "a.bin") == 16 + 8 * (am.rows() + 1) + 4 * am.nnz());

  std::filesystem::resize_file(tmp / "a.bin", 100);
  CHECK_THROWS_AS(load_access(tmp / "a.bin"), FormatError);
}
