#pragma once
// Shared generators and independent oracles for the test binaries.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "veda/access.hpp"
#include "veda/dataset.hpp"

namespace vtest {

inline veda::Dataset random_dataset(std::size_t n, std::uint32_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::vector<float> c(n * d);
  for (auto& x : c) x = g(rng);
  return veda::Dataset(d, std::move(c));
}

inline std::vector<float> random_query(std::uint32_t d, std::mt19937_64& rng) {
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::vector<float> q(d);
  for (auto& x : q) x = g(rng);
  return q;
}

inline double l2_double(std::span<const float> a, std::span<const float> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double t = double(a[i]) - double(b[i]);
    s += t * t;
  }
  return s;
}

/// Full sort of the candidates by double-precision distance; ids of the first k.
inline std::vector<std::uint32_t> naive_topk_ids(const veda::Dataset& ds, std::span<const float> q, std::size_t k,
                                                 const std::vector<std::uint32_t>& candidates) {
  std::vector<std::pair<double, std::uint32_t>> all;
  for (auto id : candidates) all.emplace_back(l2_double(q, ds[id]), id);
  std::sort(all.begin(), all.end());
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < all.size() && i < k; ++i) out.push_back(all[i].second);
  return out;
}

inline std::vector<std::uint32_t> iota_ids(std::size_t n) {
  std::vector<std::uint32_t> v(n);
  std::iota(v.begin(), v.end(), 0u);
  return v;
}

inline std::vector<std::uint32_t> ids_of(const std::vector<veda::Neighbor>& ns) {
  std::vector<std::uint32_t> v;
  for (const auto& n : ns) v.push_back(n.id);
  return v;
}

inline double recall(const std::vector<veda::Neighbor>& got, const std::vector<veda::Neighbor>& truth) {
  if (truth.empty()) return 1.0;
  std::size_t hit = 0;
  for (const auto& t : truth)
    for (const auto& g : got)
      if (g.id == t.id) {
        ++hit;
        break;
      }
  return double(hit) / double(truth.size());
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("veda_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Random access matrix: each vector picks a tag from a pool of `n_tags` random role sets.
inline veda::AccessMatrix random_access(std::size_t n, std::uint32_t n_roles, std::size_t n_tags, std::uint64_t seed,
                                        std::uint32_t max_roles_per_tag = 3) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::uint32_t>> pool;
  std::uniform_int_distribution<std::uint32_t> role(0, n_roles - 1);
  std::uniform_int_distribution<std::uint32_t> width(1, std::max(1u, max_roles_per_tag));
  for (std::size_t t = 0; t < n_tags; ++t) {
    std::vector<std::uint32_t> tag;
    auto w = width(rng);
    for (std::uint32_t i = 0; i < w; ++i) tag.push_back(role(rng));
    pool.push_back(tag);
  }
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::vector<std::vector<std::uint32_t>> rows(n);
  for (auto& r : rows) r = pool[pick(rng)];
  return veda::AccessMatrix::from_rows(rows, n_roles);
}

/// Access matrix with one block per (role list, size) entry, ids assigned in order.
inline veda::AccessMatrix blocks_access(const std::vector<std::pair<std::vector<std::uint32_t>, std::size_t>>& blocks,
                                        std::uint32_t n_roles = 0) {
  std::vector<std::vector<std::uint32_t>> rows;
  for (const auto& [roles, size] : blocks)
    for (std::size_t i = 0; i < size; ++i) rows.push_back(roles);
  return veda::AccessMatrix::from_rows(rows, n_roles);
}

/// Three roles, every non-empty role set present; 10,000 vectors at scale 1.
/// D(r0) = 4000, D(r1) = D(r2) = 5500.
inline veda::AccessMatrix toy3_access(std::size_t scale = 1) {
  return blocks_access({{{0}, 1000 * scale},
                        {{1}, 2500 * scale},
                        {{2}, 2500 * scale},
                        {{0, 1}, 1000 * scale},
                        {{0, 2}, 1000 * scale},
                        {{1, 2}, 1000 * scale},
                        {{0, 1, 2}, 1000 * scale}},
                       3);
}

/// Random instance: `n_tags` distinct random role sets with block sizes in [lo, hi].
/// Every role appears in some tag.
inline veda::AccessMatrix random_blocks(std::uint32_t n_roles, std::size_t n_tags, std::uint64_t seed,
                                        std::size_t lo = 20, std::size_t hi = 2000, std::uint32_t max_width = 0) {
  std::mt19937_64 rng(seed);
  if (max_width == 0) max_width = n_roles;
  std::set<std::vector<std::uint32_t>> tags;
  for (std::uint32_t r = 0; r < n_roles; ++r) tags.insert({r});
  const std::size_t cap = (std::size_t(1) << n_roles) - 1;
  std::uniform_int_distribution<std::uint32_t> width(2, std::max(2u, max_width));
  std::uniform_int_distribution<std::uint32_t> role(0, n_roles - 1);
  while (tags.size() < std::min(std::max(n_tags, std::size_t(n_roles)), cap)) {
    std::set<std::uint32_t> t;
    auto w = std::min(width(rng), n_roles);
    while (t.size() < w) t.insert(role(rng));
    tags.insert(std::vector<std::uint32_t>(t.begin(), t.end()));
  }
  std::vector<std::pair<std::vector<std::uint32_t>, std::size_t>> blocks;
  std::uniform_int_distribution<std::size_t> size(lo, hi);
  for (const auto& t : tags) blocks.emplace_back(t, size(rng));
  return blocks_access(blocks, n_roles);
}

}  // namespace vtest
