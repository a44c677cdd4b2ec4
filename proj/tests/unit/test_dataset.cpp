#include <doctest.h>

#include <cstring>
#include <fstream>

#include "support/testing.hpp"
#include "veda/error.hpp"

using namespace veda;

TEST_CASE("distance: identity and unit axes") {
  std::vector<float> z{0, 0}, x{1, 0}, y{0, 1};
  CHECK(distance(z, z) == 0.0f);
  CHECK(distance(x, y) == 2.0f);
}

TEST_CASE("distance: dimension mismatch is an input error") {
  std::vector<float> a{1, 2}, b{1, 2, 3};
  CHECK_THROWS_AS(distance(a, b), InputError);
}

TEST_CASE("distance: matches a double-precision loop on random 128-d pairs") {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 200; ++t) {
    auto a = vtest::random_query(128, rng), b = vtest::random_query(128, rng);
    double want = vtest::l2_double(a, b);
    float got = distance(a, b);
    CHECK(std::abs(got - want) <= 1e-4 * want);
    CHECK(distance(b, a) == got);
    CHECK(distance(a, a) == 0.0f);
  }
}

TEST_CASE("brute_force_topk: small hand cases") {
  Dataset ds(1, {0.0f, std::sqrt(2.0f), std::sqrt(8.0f)});
  std::vector<float> q{0.0f};
  auto r = brute_force_topk(ds, q, 2);
  REQUIRE(r.size() == 2);
  CHECK(r[0].id == 0);
  CHECK(r[1].id == 1);

  std::vector<std::uint32_t> one{2};
  auto s = brute_force_topk(ds, q, 5, one);
  REQUIRE(s.size() == 1);
  CHECK(s[0].id == 2);

  CHECK(brute_force_topk(ds, q, 3, std::vector<std::uint32_t>{}).empty());
}

TEST_CASE("brute_force_topk: ties go to the smaller id") {
  Dataset ds(1, {1.0f, -1.0f, 1.0f, 5.0f});
  std::vector<float> q{0.0f};
  auto r = brute_force_topk(ds, q, 3);
  CHECK(vtest::ids_of(r) == std::vector<std::uint32_t>{0, 1, 2});
}

TEST_CASE("brute_force_topk: agrees with an independent linear scan") {
  auto ds = vtest::random_dataset(1000, 16, 11);
  std::mt19937_64 rng(3);
  auto all = vtest::iota_ids(ds.size());
  for (int t = 0; t < 50; ++t) {
    auto q = vtest::random_query(16, rng);
    auto got = brute_force_topk(ds, q, 10);
    CHECK(vtest::ids_of(got) == vtest::naive_topk_ids(ds, q, 10, all));
    // Allowed = every id is the same as no filter.
    CHECK(brute_force_topk(ds, q, 10, all) == got);
    for (std::size_t i = 1; i < got.size(); ++i) CHECK(got[i - 1].dist <= got[i].dist);
  }
}

TEST_CASE("brute_force_topk: filtered results stay inside the allowed set") {
  auto ds = vtest::random_dataset(500, 8, 5);
  std::mt19937_64 rng(9);
  std::vector<std::uint32_t> evens;
  for (std::uint32_t i = 0; i < 500; i += 2) evens.push_back(i);
  auto q = vtest::random_query(8, rng);
  auto a = brute_force_topk(ds, q, 20, evens);
  auto b = brute_force_topk(ds, q, 20, IdFilter([](std::uint32_t id) { return id % 2 == 0; }));
  CHECK(a == b);
  for (auto& n : a) CHECK(n.id % 2 == 0);
  CHECK(vtest::ids_of(a) == vtest::naive_topk_ids(ds, q, 20, evens));
}

TEST_CASE("fvecs: format arithmetic and round trip") {
  vtest::TempDir tmp("fvecs");
  Dataset one(4, {1, 2, 3, 4});
  save_fvecs(one, tmp / "one.fvecs");
  CHECK(std::filesystem::file_size(tmp / "one.fvecs") == 20);

  auto ds = vtest::random_dataset(100, 12, 21);
  save_fvecs(ds, tmp / "a.fvecs");
  auto back = load_fvecs(tmp / "a.fvecs");
  CHECK(back.dim() == 12);
  REQUIRE(back.size() == 100);
  CHECK(std::memcmp(back.coords().data(), ds.coords().data(), 4 * ds.coords().size()) == 0);
}

TEST_CASE("fvecs: empty file takes the dimension override") {
  vtest::TempDir tmp("fvecs_empty");
  { std::ofstream(tmp / "e.fvecs", std::ios::binary); }
  auto ds = load_fvecs(tmp / "e.fvecs", 7);
  CHECK(ds.size() == 0);
  CHECK(ds.dim() == 7);
  CHECK_THROWS_AS(load_fvecs(tmp / "e.fvecs"), InputError);
}

TEST_CASE("fvecs: truncated and inconsistent records report the byte offset") {
  vtest::TempDir tmp("fvecs_bad");
  Dataset ds(3, {1, 2, 3, 4, 5, 6});
  save_fvecs(ds, tmp / "ok.fvecs");
  {
    // Chop the last two bytes off the second record (which starts at byte 16).
    std::filesystem::copy_file(tmp / "ok.fvecs", tmp / "trunc.fvecs");
    std::filesystem::resize_file(tmp / "trunc.fvecs", 30);
  }
  try {
    load_fvecs(tmp / "trunc.fvecs");
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 16);
  }
  {
    std::ofstream out(tmp / "mixed.fvecs", std::ios::binary);
    std::int32_t d3 = 3, d2 = 2;
    float v[3] = {1, 2, 3};
    out.write(reinterpret_cast<char*>(&d3), 4);
    out.write(reinterpret_cast<char*>(v), 12);
    out.write(reinterpret_cast<char*>(&d2), 4);
    out.write(reinterpret_cast<char*>(v), 8);
  }
  try {
    load_fvecs(tmp / "mixed.fvecs");
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 16);
  }
}

TEST_CASE("TopK keeps unique ids") {
  TopK t(3);
  CHECK(t.push({5, 1.0f}));
  CHECK_FALSE(t.push({5, 1.0f}));
  t.push({6, 0.5f});
  t.push({7, 2.0f});
  t.push({8, 0.1f});
  CHECK(vtest::ids_of(t.sorted()) == std::vector<std::uint32_t>{8, 6, 5});
  CHECK(t.bound() == 1.0f);
}
