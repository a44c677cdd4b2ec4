#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <unordered_set>
#include <vector>

#include "veda/dataset.hpp"

namespace veda {

struct HnswParams {
  std::uint32_t M = 16;
  std::uint32_t M0 = 0;  ///< base-layer cap; 0 means 2*M
  std::uint32_t efc = 200;
  std::uint64_t seed = 0x5eed;

  std::uint32_t base_cap() const noexcept { return M0 ? M0 : 2 * M; }
};

struct SearchParams {
  std::size_t k = 10;
  std::size_t efs = 100;
};

class HnswIndex;

/// Resumable base-layer traversal state for one query on one index. Single owner.
struct SearchCursor {
  using Entry = std::pair<float, std::uint32_t>;  // (dist, local node)

  std::vector<float> query;
  std::size_t k = 0;
  std::vector<Entry> frontier;  ///< min-heap of evaluated, unexpanded nodes
  std::unordered_set<std::uint32_t> visited;
  std::unordered_set<std::uint32_t> expanded;
  TopK local{0};  ///< authorized local results (global ids)
  std::size_t ef_spent = 0;  ///< distance evaluations on the base layer
  std::size_t ef_max = 0;
  float d_k_global = std::numeric_limits<float>::infinity();
  float unfiltered_kth = std::numeric_limits<float>::infinity();

  bool exhausted() const noexcept { return frontier.empty(); }
  /// Local k-th authorized distance, +inf while fewer than k.
  float d_max_local() const noexcept { return local.bound(); }
};

struct BoundedSearch {
  std::vector<Neighbor> local;  ///< authorized hits below the global bound, ascending
  SearchCursor cursor;
  /// True when no unseen node of this index can improve a full global heap.
  bool stopped_early = false;
};

/// Hierarchical navigable small-world graph over a subset of a dataset. Stores its own copy
/// of the vectors, so every index contributes its size to storage amplification.
class HnswIndex {
 public:
  HnswIndex() = default;

  /// Throws InputError for duplicate or out-of-range ids, or an empty id list.
  static HnswIndex build(const Dataset& ds, std::span<const std::uint32_t> ids, const HnswParams& params = {});

  std::size_t size() const noexcept { return ids_.size(); }
  std::uint32_t dim() const noexcept { return dim_; }
  const HnswParams& params() const noexcept { return params_; }

  std::vector<Neighbor> search(std::span<const float> q, const SearchParams& p) const;

  /// Inflated search: k' = ceil(lambda*k), efs' = ceil(lambda*efs), then keeps ids accepted by
  /// `allowed`. Falls back to an exact scan of the index when efs' exceeds its size.
  std::vector<Neighbor> search_filtered(std::span<const float> q, const SearchParams& p, const IdFilter& allowed,
                                        double lambda) const;

  /// Phase 1 of coordinated search: an unfiltered beam of width ef_default whose
  /// authorized hits below `global_bound` are returned. The cursor keeps the frontier and
  /// visited set so `resume` can spend up to ef_max - ef_default further evaluations.
  BoundedSearch search_bounded(std::span<const float> q, std::size_t k, std::size_t ef_default, std::size_t ef_max,
                               const IdFilter& allowed, float global_bound) const;

  /// Continues a cursor for at most `budget` distance evaluations (capped by ef_max),
  /// admitting only nodes closer than min(global_bound, local k-th). Returns the updated
  /// authorized local results.
  std::vector<Neighbor> resume(SearchCursor& cur, std::size_t budget, const IdFilter& allowed,
                               float global_bound) const;

  /// Exact filtered top-k over this index's contents.
  std::vector<Neighbor> scan(std::span<const float> q, std::size_t k, const IdFilter& allowed) const;

  void save(const std::filesystem::path& path) const;
  /// Vectors are re-read from `ds` through the stored id map.
  static HnswIndex load(const std::filesystem::path& path, const Dataset& ds);

  // Structure inspection.
  std::uint32_t global_id(std::uint32_t local) const { return ids_.at(local); }
  const std::vector<std::uint32_t>& ids() const noexcept { return ids_; }
  int max_level() const noexcept { return max_level_; }
  int level_of(std::uint32_t local) const { return levels_.at(local); }
  std::uint32_t entry_point() const noexcept { return entry_; }
  std::span<const std::uint32_t> neighbors(std::uint32_t local, int level) const;
  std::size_t edge_count() const;

 private:
  using Entry = SearchCursor::Entry;

  const float* vec(std::uint32_t local) const noexcept { return data_.data() + std::size_t(local) * dim_; }
  float dist_to(const float* q, std::uint32_t local) const noexcept { return l2sq(q, vec(local), dim_); }
  std::span<std::uint32_t> links(std::uint32_t local, int level);
  std::span<const std::uint32_t> links(std::uint32_t local, int level) const;

  std::uint32_t greedy_descend(const float* q, int from_level, int to_level, std::uint32_t ep) const;
  std::vector<Entry> search_layer(const float* q, std::uint32_t ep, std::size_t ef, int level) const;
  std::vector<std::uint32_t> select_neighbors(const float* base, std::vector<Entry> cands, std::size_t m) const;
  void connect(std::uint32_t node, int level, const std::vector<Entry>& cands);
  void insert(std::uint32_t local, int level);

  HnswParams params_;
  std::uint32_t dim_ = 0;
  std::vector<float> data_;
  std::vector<std::uint32_t> ids_;
  std::vector<std::uint8_t> levels_;
  // Base layer: fixed stride (1 + M0), slot 0 holds the degree.
  std::vector<std::uint32_t> base_;
  // Upper layers: upper_[node][level-1] is an adjacency list.
  std::vector<std::vector<std::vector<std::uint32_t>>> upper_;
  std::uint32_t entry_ = 0;
  int max_level_ = -1;
};

/// Keeps the first k entries of `hits` (ascending) whose id passes `allowed`.
std::vector<Neighbor> filter_authorized(const std::vector<Neighbor>& hits, const IdFilter& allowed, std::size_t k);

}  // namespace veda
