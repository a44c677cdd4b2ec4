#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "veda/access.hpp"
#include "veda/dataset.hpp"
#include "veda/hnsw.hpp"
#include "veda/layout.hpp"

namespace veda {

enum class Strategy { coordinated, independent };

Strategy parse_strategy(const std::string& name);
std::string to_string(Strategy s);

/// Counters for one or more queries.
struct ExecStats {
  std::size_t queries = 0;
  std::size_t indices_touched = 0;
  std::size_t impure_touched = 0;
  std::size_t phase2_skips = 0;
  std::size_t leftover_ids_scanned = 0;
  std::size_t efs_used = 0;    ///< beam spent on impure indices
  std::size_t efs_budget = 0;  ///< inflated beam those indices would get
  std::size_t touched = 0;     ///< vectors held by probed units
  std::size_t touched_authorized = 0;
  double purity_sum = 0.0;  ///< per-query authorized fraction of touched data

  void add(const ExecStats& o);
  double skip_rate() const noexcept { return impure_touched ? double(phase2_skips) / double(impure_touched) : 0.0; }
  double efs_savings() const noexcept { return efs_budget ? 1.0 - double(efs_used) / double(efs_budget) : 0.0; }
  double purity() const noexcept { return queries ? purity_sum / double(queries) : 1.0; }
  double indices_per_query() const noexcept { return queries ? double(indices_touched) / double(queries) : 0.0; }
};

/// One unit to probe for a query, with its inflation factor for the querying scope.
struct Probe {
  std::uint32_t unit = 0;
  bool pure = true;
  std::uint32_t lambda = 1;
  std::size_t authorized = 0;
};

/// A manifest with its HNSW indices built (or loaded) and leftover ids resolved.
class Layout {
 public:
  Layout(const Dataset& ds, const ExclusiveLattice& ex, LayoutManifest m, const HnswParams& hp = {});
  /// Reads unit_<i>.hnsw files written by save_indices; leftovers need no files.
  static Layout load(const Dataset& ds, const ExclusiveLattice& ex, LayoutManifest m, const std::filesystem::path& dir);
  void save_indices(const std::filesystem::path& dir) const;

  const LayoutManifest& manifest() const noexcept { return m_; }
  const ExclusiveLattice& lattice() const noexcept { return *ex_; }
  const Dataset& dataset() const noexcept { return *ds_; }
  const std::vector<std::uint32_t>& unit_ids(std::uint32_t u) const { return ids_.at(u); }
  const HnswIndex& index(std::uint32_t u) const { return index_.at(u); }

  /// Throws AuthorizationError for a role outside the layout.
  std::vector<Probe> probes(Role r) const;
  /// Union of the member roles' probes, with purity and inflation taken for the whole set.
  std::vector<Probe> probes(const RoleSet& tau) const;

  std::vector<Neighbor> exec_independent(std::span<const float> q, Role r, std::size_t k, std::size_t efs,
                                         ExecStats* stats = nullptr) const;
  std::vector<Neighbor> exec_coordinated(std::span<const float> q, Role r, std::size_t k, std::size_t efs,
                                         ExecStats* stats = nullptr) const;
  std::vector<Neighbor> exec(std::span<const float> q, Role r, std::size_t k, std::size_t efs, Strategy s,
                             ExecStats* stats = nullptr) const;

  /// Role-set queries. With a global index and |D(tau)| > 0.8|D| the global index is
  /// searched (filtered unless tau sees everything); otherwise the role plans are unioned.
  std::vector<Neighbor> exec_multi_role(std::span<const float> q, const RoleSet& tau, std::size_t k, std::size_t efs,
                                        Strategy s, const HnswIndex* global = nullptr,
                                        ExecStats* stats = nullptr) const;

  std::vector<Neighbor> run_probes(std::span<const float> q, const std::vector<Probe>& probes, const IdFilter& allowed,
                                   std::size_t k, std::size_t efs, Strategy s, ExecStats* stats) const;

 private:
  struct NoBuild {};
  Layout(const Dataset& ds, const ExclusiveLattice& ex, LayoutManifest m, NoBuild);

  const Dataset* ds_;
  const ExclusiveLattice* ex_;
  LayoutManifest m_;
  std::vector<std::vector<std::uint32_t>> ids_;
  std::vector<HnswIndex> index_;  ///< empty for leftover units
};

/// Share of |D| above which role-set queries go to the global index.
inline constexpr double kGlobalRouteShare = 0.8;

}  // namespace veda
