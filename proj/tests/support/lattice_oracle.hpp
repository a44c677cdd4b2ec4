#pragma once
// Layered-subtraction construction of exclusive blocks over an explicit role universe.
// Enumerates every role subset, so only usable with a handful of roles.

#include <map>
#include <set>
#include <vector>

#include "veda/access.hpp"

namespace vtest {

/// tag (sorted role list) -> sorted ids, built by intersecting per-role data areas and
/// subtracting the blocks of every larger role set, largest sets first.
inline std::map<std::vector<std::uint32_t>, std::vector<std::uint32_t>> layered_blocks(const veda::AccessMatrix& am) {
  const std::uint32_t R = am.n_roles;
  std::vector<std::set<std::uint32_t>> area(R);
  for (std::size_t i = 0; i < am.rows(); ++i)
    for (auto r : am.row(i)) area[r].insert(static_cast<std::uint32_t>(i));

  std::vector<std::uint32_t> masks;
  for (std::uint32_t m = 1; m < (1u << R); ++m) masks.push_back(m);
  std::stable_sort(masks.begin(), masks.end(),
                   [](std::uint32_t a, std::uint32_t b) { return __builtin_popcount(a) > __builtin_popcount(b); });

  std::set<std::uint32_t> claimed;
  std::map<std::vector<std::uint32_t>, std::vector<std::uint32_t>> out;
  for (auto m : masks) {
    std::vector<std::uint32_t> roles;
    for (std::uint32_t r = 0; r < R; ++r)
      if (m >> r & 1u) roles.push_back(r);
    std::set<std::uint32_t> cur = area[roles[0]];
    for (std::size_t j = 1; j < roles.size(); ++j) {
      std::set<std::uint32_t> nxt;
      for (auto x : cur)
        if (area[roles[j]].count(x)) nxt.insert(x);
      cur.swap(nxt);
    }
    std::vector<std::uint32_t> block;
    for (auto x : cur)
      if (!claimed.count(x)) block.push_back(x);
    if (block.empty()) continue;
    claimed.insert(block.begin(), block.end());
    out[roles] = block;
  }
  return out;
}

}  // namespace vtest
