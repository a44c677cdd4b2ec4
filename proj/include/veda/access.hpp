#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "veda/role_set.hpp"

namespace veda {

/// Vector id -> sorted role ids, stored as CSR.
struct AccessMatrix {
  std::uint32_t n_roles = 0;
  std::vector<std::uint64_t> indptr{0};
  std::vector<std::uint32_t> indices;

  std::size_t rows() const noexcept { return indptr.size() - 1; }
  std::size_t nnz() const noexcept { return indices.size(); }
  std::span<const std::uint32_t> row(std::size_t i) const noexcept {
    return {indices.data() + indptr[i], static_cast<std::size_t>(indptr[i + 1] - indptr[i])};
  }
  RoleSet tag(std::size_t i) const;

  /// Builds from per-vector role lists; each list is sorted and deduplicated.
  /// `n_roles` of 0 means "max role + 1".
  static AccessMatrix from_rows(const std::vector<std::vector<std::uint32_t>>& rows, std::uint32_t n_roles = 0);

  /// Throws PolicyError naming the first vector with no role, or InputError for
  /// malformed arrays.
  void validate() const;

  friend bool operator==(const AccessMatrix&, const AccessMatrix&) = default;
};

/// Binary layout: u64 n_rows, u64 nnz, u64 indptr[n_rows+1], u32 indices[nnz]; little-endian.
void save_access_binary(const AccessMatrix& am, const std::filesystem::path& path);
AccessMatrix load_access_binary(const std::filesystem::path& path, std::uint32_t n_roles = 0);

/// One JSON object per line: {"id": 3, "roles": [0, 2]}.
void save_access_jsonl(const AccessMatrix& am, const std::filesystem::path& path);
AccessMatrix load_access_jsonl(const std::filesystem::path& path, std::uint32_t n_roles = 0);

/// Picks the format from the extension (.jsonl / .json -> JSON lines, otherwise binary).
AccessMatrix load_access(const std::filesystem::path& path, std::uint32_t n_roles = 0);
void save_access(const AccessMatrix& am, const std::filesystem::path& path);

struct ExclusiveBlock {
  RoleSet tag;
  std::vector<std::uint32_t> ids;  ///< sorted

  std::size_t size() const noexcept { return ids.size(); }
};

/// Per-block relation lists, all holding block indices in canonical order.
struct Relations {
  std::vector<std::vector<std::uint32_t>> parents;      ///< adjacent smaller role sets
  std::vector<std::vector<std::uint32_t>> ancestors;    ///< every present proper subset
  std::vector<std::vector<std::uint32_t>> descendants;  ///< every present proper superset
  std::vector<std::vector<std::uint32_t>> siblings;     ///< same size, overlapping, distinct
};

/// Blocks of vectors sharing an identical role set, ordered canonically by tag, with the
/// adjacency DAG between them.
class ExclusiveLattice {
 public:
  static ExclusiveLattice build(const AccessMatrix& am);

  std::uint32_t n_roles() const noexcept { return n_roles_; }
  std::size_t n_vectors() const noexcept { return block_of_.size(); }
  std::size_t size() const noexcept { return blocks_.size(); }
  const ExclusiveBlock& block(std::uint32_t b) const { return blocks_.at(b); }
  const std::vector<ExclusiveBlock>& blocks() const noexcept { return blocks_; }
  std::optional<std::uint32_t> find(const RoleSet& tag) const;

  std::uint32_t block_of(std::uint32_t vector_id) const { return block_of_.at(vector_id); }
  const RoleSet& tag_of(std::uint32_t vector_id) const { return blocks_[block_of_.at(vector_id)].tag; }

  /// Blocks grouped by |tag|; layers()[l] holds blocks with l roles (layers()[0] is empty).
  const std::vector<std::vector<std::uint32_t>>& layers() const noexcept { return layers_; }
  const std::vector<std::uint32_t>& parents(std::uint32_t b) const { return parents_.at(b); }
  const std::vector<std::uint32_t>& children(std::uint32_t b) const { return children_.at(b); }

  /// Blocks whose tag contains r. Throws InputError for r >= n_roles().
  const std::vector<std::uint32_t>& blocks_of_role(Role r) const;
  /// Sorted ids authorized for r.
  std::vector<std::uint32_t> authorized_ids(Role r) const;
  std::size_t authorized_count(Role r) const;
  /// |D(tau)|: vectors whose tag intersects tau.
  std::size_t authorized_count(const RoleSet& tau) const;

  Relations relations() const;

 private:
  std::uint32_t n_roles_ = 0;
  std::vector<ExclusiveBlock> blocks_;
  std::unordered_map<RoleSet, std::uint32_t> index_;
  std::vector<std::uint32_t> block_of_;
  std::vector<std::vector<std::uint32_t>> layers_;
  std::vector<std::vector<std::uint32_t>> parents_, children_;
  std::vector<std::vector<std::uint32_t>> role_blocks_;
};

}  // namespace veda
