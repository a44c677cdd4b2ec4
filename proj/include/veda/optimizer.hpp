#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <boost/dynamic_bitset.hpp>

#include "veda/access.hpp"
#include "veda/cost_model.hpp"
#include "veda/lattice.hpp"
#include "veda/layout.hpp"

namespace veda {

struct OptimizerConfig {
  Theta theta;
  std::size_t efs = 100;
  double beta = 1.0;
  std::size_t lambda_threshold = 0;  ///< Λ: smaller nodes become leftovers
  std::vector<double> weights;       ///< per role; empty = uniform
  bool refine = true;                ///< super-impure refinement during finalization
  bool exact_plans = false;          ///< exact covers while optimizing (slow; for tests)

  /// Modeled cost with integer inflation factors; greedy unless exact_plans.
  PlanConfig plan_config() const;
  std::vector<double> role_weights(std::uint32_t n_roles) const;
};

struct FinalizeStats {
  std::size_t split = 0;      ///< sub-threshold nodes turned into leftovers
  std::size_t leftovers = 0;  ///< leftover units created
  std::size_t refined = 0;    ///< (role, node) pairs redirected to standalone units
  std::size_t deleted = 0;    ///< nodes dropped when no plan referenced them
};

struct FinalizeResult {
  LayoutManifest manifest;
  PlanSet plans;
  FinalizeStats stats;
};

/// Leftover splitting, super-impure refinement under the remaining budget, then exact
/// replanning of every role. Unreferenced nodes are dropped.
FinalizeResult finalize(Lattice& lat, const OptimizerConfig& cfg, const std::string& optimizer);

// ---------------------------------------------------------------- Veda

enum class OpKind { copy, merge };

struct VedaOp {
  OpKind kind = OpKind::copy;
  NodeKey ancestor;
  NodeKey descendant;
  double benefit = 0.0;
  double avg_before = 0.0;
  double avg_after = 0.0;
  std::size_t stored_after = 0;
};

class VedaOptimizer {
 public:
  VedaOptimizer(const ExclusiveLattice& ex, OptimizerConfig cfg);

  /// Copy the exclusive block of `desc`'s key into `anc`. Benefit is the cost drop per added vector;
  /// -inf when the block is already there.
  double copy_benefit(std::uint32_t anc, std::uint32_t desc);
  /// `anc` absorbs `desc`.
  double merge_benefit(std::uint32_t anc, std::uint32_t desc);
  /// Cost the successor lattice would have (exact AvgCost after replanning affected roles).
  double avg_after_copy(std::uint32_t anc, std::uint32_t desc);
  double avg_after_merge(std::uint32_t anc, std::uint32_t desc);

  std::size_t copy_phase();
  std::size_t merge_phase();
  /// Alternates the phases until a pass commits nothing.
  void run();
  FinalizeResult finalize();

  const Lattice& lattice() const noexcept { return lat_; }
  const PlanSet& plans() const noexcept { return plans_; }
  const std::vector<VedaOp>& trace() const noexcept { return trace_; }
  std::size_t budget() const noexcept { return budget_; }
  std::size_t passes() const noexcept { return passes_; }

 private:
  struct Eval {
    double avg = 0.0;
    std::vector<std::pair<Role, RolePlan>> plans;
  };
  Eval eval_copy(std::uint32_t anc, std::uint32_t block);
  Eval eval_merge(std::uint32_t anc, std::uint32_t desc);
  Eval replan(const RoleSet& affected, std::uint32_t renamed_from, std::uint32_t renamed_to);
  void install(const Eval& e);
  std::optional<std::uint32_t> key_block(std::uint32_t node) const;

  OptimizerConfig cfg_;
  PlanConfig pc_;
  Lattice lat_;
  PlanSet plans_;
  std::size_t budget_;
  std::vector<VedaOp> trace_;
  std::size_t passes_ = 0;
};

// ---------------------------------------------------------------- EffVeda

/// Per-role gain of routing one probe instead of two: C(n_a) + C(n_c) - C(n_a + n_c).
double copy_gain(const Theta& t, std::size_t efs, std::size_t n_anc, std::size_t n_node);

struct PartitionChoice {
  std::vector<std::uint32_t> members;  ///< ancestor node ids
  std::optional<RoleSet> residual;
  double score = 0.0;
  std::size_t parts() const noexcept { return members.size() + (residual ? 1 : 0); }
};

/// Weighted predicted drop per stored vector for copying `node` into `members` (plus an optional residual).
double partition_score(const Lattice& lat, std::uint32_t node, const std::vector<std::uint32_t>& members,
                       bool has_residual, const OptimizerConfig& cfg, const std::vector<double>& w);

/// Best two-way cover by present ancestors; otherwise the best seed with greedy disjoint
/// extension and a residual. `ancestors` must be sorted by role count, largest first.
/// Returns an empty choice when nothing fits `buf`.
PartitionChoice find_best_partition(const Lattice& lat, std::uint32_t node, const std::vector<std::uint32_t>& ancestors,
                                    std::size_t buf, const OptimizerConfig& cfg, const std::vector<double>& w);

struct EffCopyRecord {
  RoleSet tau;
  std::vector<RoleSet> parts;
  std::optional<RoleSet> residual;
  double score = 0.0;
  double predicted_gain = 0.0;  ///< AvgCost drop implied by the per-role gains
  std::size_t delta_s = 0;
  double cost_before = 0.0;  ///< inherited-plan AvgCost, when recorded
  double cost_after = 0.0;
};

/// Frozen post-copy nodes and the bookkeeping for merges over them.
class MergeState {
 public:
  struct Record {
    NodeKey key;
    RoleSet tag;
    std::size_t size = 0;
    boost::dynamic_bitset<> members;
  };

  MergeState(Lattice& lat, const OptimizerConfig& cfg);

  double h(std::uint32_t node) const;
  double merge_benefit(std::uint32_t a, std::uint32_t b) const;
  /// `a` absorbs `b`.
  void merge(std::uint32_t a, std::uint32_t b);

  const std::vector<std::uint32_t>& records_of(std::uint32_t node) const { return vd_.at(node); }
  RoleSet routed(std::uint32_t node) const { return routed_.at(node); }
  const Record& record(std::uint32_t i) const { return records_.at(i); }
  std::size_t n_records() const noexcept { return records_.size(); }
  /// AvgCost under routed plans: every role probes the nodes it is routed to.
  double inherited_cost() const;
  /// Empty when both the routing and the partition invariants hold.
  std::string check() const;

 private:
  double h_of(const boost::dynamic_bitset<>& members, const std::vector<std::uint32_t>& recs, RoleSet routed) const;

  Lattice* lat_;
  OptimizerConfig cfg_;
  std::vector<double> w_;
  std::vector<Record> records_;
  std::map<std::uint32_t, std::vector<std::uint32_t>> vd_;
  std::map<std::uint32_t, RoleSet> routed_;
};

class EffVedaOptimizer {
 public:
  EffVedaOptimizer(const ExclusiveLattice& ex, OptimizerConfig cfg);

  /// Bottom-up copies; with `record_costs` each record carries inherited AvgCost before
  /// and after its commit.
  void copy_phase(bool record_costs = false);
  void merge_phase();
  void run();
  FinalizeResult finalize();

  /// Σ over live nodes of key-routed probe costs (the post-copy inherited AvgCost).
  double routed_cost() const;

  Lattice& lattice() noexcept { return lat_; }
  const Lattice& lattice() const noexcept { return lat_; }
  const std::vector<EffCopyRecord>& copies() const noexcept { return copies_; }
  const MergeState* merge_state() const noexcept { return merge_ ? &*merge_ : nullptr; }
  std::size_t merges() const noexcept { return merges_; }
  double post_copy_cost() const noexcept { return post_copy_cost_; }
  std::size_t budget() const noexcept { return budget_; }

 private:
  OptimizerConfig cfg_;
  std::vector<double> w_;
  Lattice lat_;
  std::size_t budget_;
  std::vector<EffCopyRecord> copies_;
  std::optional<MergeState> merge_;
  std::size_t merges_ = 0;
  double post_copy_cost_ = 0.0;
};

enum class OptimizerKind { veda, effveda };

struct OptimizeResult {
  FinalizeResult final;
  double seconds = 0.0;  ///< partitioning time including finalization
};

OptimizeResult optimize(const ExclusiveLattice& ex, const OptimizerConfig& cfg, OptimizerKind kind);
OptimizerKind parse_optimizer(const std::string& name);
std::string to_string(OptimizerKind k);

}  // namespace veda
