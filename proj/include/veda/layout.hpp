#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "veda/access.hpp"
#include "veda/cost_model.hpp"
#include "veda/lattice.hpp"

namespace veda {

enum class UnitKind { index, leftover };

struct LayoutUnit {
  UnitKind kind = UnitKind::index;
  NodeKey key;
  std::vector<RoleSet> blocks;  ///< member block tags, canonical order
  std::size_t size = 0;
};

struct PlanItem {
  std::uint32_t unit = 0;
  bool pure = true;
  std::uint32_t lambda = 1;
  std::size_t authorized = 0;
};

/// A finished layout: what to store, and which units each role probes.
struct LayoutManifest {
  std::string optimizer;
  double beta = 1.0;
  double sa = 1.0;
  std::size_t n_vectors = 0;
  std::uint32_t n_roles = 0;
  std::size_t lambda_threshold = 0;
  std::size_t efs = 100;
  Theta theta;
  std::vector<LayoutUnit> units;
  std::vector<std::vector<PlanItem>> plans;  ///< per role

  std::size_t stored() const;
  std::size_t index_count() const;
  std::vector<PlanEntry> plan_entries(Role r) const;
  /// Weighted average plan cost with leftover units priced as scans. Empty weights = uniform.
  double modeled_cost(std::vector<double> weights = {}) const;
  double modeled_cost(Role r) const;

  /// Throws CoverageError when a plan misses authorized blocks, InputError for any
  /// other mismatch with the lattice.
  void validate(const ExclusiveLattice& ex) const;

  std::string to_json() const;
  static LayoutManifest from_json(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static LayoutManifest load(const std::filesystem::path& path);
};

/// Snapshot of the live nodes and the given plans.
LayoutManifest manifest_from_lattice(const Lattice& lat, const PlanSet& plans, const std::string& optimizer,
                                     double beta, std::size_t lambda_threshold, std::size_t efs, const Theta& theta);

/// Manifest entries resolved to vector ids.
std::vector<std::uint32_t> unit_vector_ids(const LayoutUnit& u, const ExclusiveLattice& ex);

}  // namespace veda
