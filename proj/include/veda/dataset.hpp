#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <unordered_set>
#include <vector>

namespace veda {

/// A search hit. `dist` is squared L2.
struct Neighbor {
  std::uint32_t id = 0;
  float dist = 0.0f;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Orders by distance, then by smaller id. Every result list in the library uses this.
inline bool closer(const Neighbor& a, const Neighbor& b) noexcept {
  return a.dist < b.dist || (a.dist == b.dist && a.id < b.id);
}

/// Predicate over global vector ids. An empty filter admits everything.
using IdFilter = std::function<bool(std::uint32_t)>;

/// Dense float32 vectors with implicit ids 0..size()-1.
class Dataset {
 public:
  explicit Dataset(std::uint32_t dim);
  Dataset(std::uint32_t dim, std::vector<float> coords);

  std::uint32_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return dim_ == 0 ? 0 : coords_.size() / dim_; }
  bool empty() const noexcept { return coords_.empty(); }

  std::span<const float> operator[](std::size_t id) const noexcept {
    return {coords_.data() + id * dim_, dim_};
  }
  std::span<const float> at(std::size_t id) const;

  /// Appends a vector and returns its id.
  std::uint32_t add(std::span<const float> v);

  const std::vector<float>& coords() const noexcept { return coords_; }

 private:
  std::uint32_t dim_;
  std::vector<float> coords_;
};

/// Squared Euclidean distance; throws InputError on dimension mismatch.
float distance(std::span<const float> a, std::span<const float> b);

/// Unchecked hot-loop variant.
float l2sq(const float* a, const float* b, std::size_t d) noexcept;

/// Exact k nearest over the whole dataset.
std::vector<Neighbor> brute_force_topk(const Dataset& ds, std::span<const float> q, std::size_t k);

/// Exact k nearest restricted to `allowed` (distinct ids). Empty `allowed` gives an empty result.
std::vector<Neighbor> brute_force_topk(const Dataset& ds, std::span<const float> q, std::size_t k,
                                       std::span<const std::uint32_t> allowed);

/// Exact k nearest among ids accepted by `allowed`.
std::vector<Neighbor> brute_force_topk(const Dataset& ds, std::span<const float> q, std::size_t k,
                                       const IdFilter& allowed);

/// Reads an fvecs file. `dim_override` supplies the dimension of an empty file and, when
/// set, must match every record.
Dataset load_fvecs(const std::filesystem::path& path,
                   std::optional<std::uint32_t> dim_override = std::nullopt);
void save_fvecs(const Dataset& ds, const std::filesystem::path& path);

/// Bounded max-heap that keeps the k best neighbors under `closer`. Ignores ids it already
/// holds, so results gathered from overlapping indices stay unique.
class TopK {
 public:
  explicit TopK(std::size_t k) : k_(k) {}

  /// Returns true if the neighbor was admitted.
  bool push(Neighbor n);
  bool full() const noexcept { return heap_.size() >= k_; }
  std::size_t size() const noexcept { return heap_.size(); }
  std::size_t capacity() const noexcept { return k_; }
  /// k-th best distance, +inf while not full.
  float bound() const noexcept;
  const Neighbor& worst() const { return heap_.front(); }
  /// Sorted ascending; leaves the heap intact.
  std::vector<Neighbor> sorted() const;

 private:
  std::size_t k_;
  std::vector<Neighbor> heap_;
  std::unordered_set<std::uint32_t> ids_;
};

}  // namespace veda
