#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace veda {

/// One role's covering problem: every pending block must be covered by one of its
/// candidate locations. Locations are opaque ids into `cost`.
struct CoverProblem {
  std::vector<std::vector<std::uint32_t>> choices;  ///< per pending block
  std::vector<double> cost;                         ///< per location id
};

struct CoverResult {
  std::vector<std::uint32_t> chosen;  ///< sorted location ids
  double objective = 0.0;
  bool exact = false;
};

/// Mandatory locations (sole candidate of some block) first, then the cheaper of a
/// coverage-per-cost greedy and a cheapest-location-per-block pass, with redundant picks
/// pruned. An incumbent cover, when given and still valid, is kept if it is cheaper.
CoverResult greedy_cover(const CoverProblem& p, const std::vector<std::uint32_t>* incumbent = nullptr);

/// Branch and bound over the non-mandatory candidates. Falls back to greedy_cover when
/// more than `limit` candidates remain.
CoverResult exact_cover(const CoverProblem& p, std::size_t limit = 24);

bool covers(const CoverProblem& p, std::span<const std::uint32_t> chosen);

/// Block -> locations holding it. Throws CoverageError for a block held nowhere.
std::vector<std::vector<std::uint32_t>> build_phi(const std::vector<std::vector<std::uint32_t>>& location_blocks,
                                                  std::size_t n_blocks);

}  // namespace veda
