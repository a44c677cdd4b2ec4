#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <boost/dynamic_bitset.hpp>

#include "veda/access.hpp"
#include "veda/cost_model.hpp"
#include "veda/planner.hpp"
#include "veda/role_set.hpp"

namespace veda {

/// Node key: a role set plus a duplicate counter. A nonzero `copy` marks a node that had to
/// be keyed apart because its role set was already taken.
struct NodeKey {
  RoleSet roles;
  std::uint32_t copy = 0;

  friend bool operator==(const NodeKey&, const NodeKey&) = default;
  friend bool operator<(const NodeKey& x, const NodeKey& y) noexcept {
    if (x.roles != y.roles) return x.roles < y.roles;
    return x.copy < y.copy;
  }
  std::string to_string() const;
};

struct Node {
  NodeKey key;
  boost::dynamic_bitset<> members;  ///< over exclusive blocks
  std::size_t size = 0;
  std::vector<std::uint32_t> auth;  ///< authorized vectors per role
  RoleSet present;                  ///< union of member tags
  bool leftover = false;            ///< scanned linearly instead of indexed
  bool alive = true;
};

enum class PlanObjective { modeled, log_size };

struct PlanConfig {
  Theta theta;
  std::size_t efs = 100;
  PlanObjective objective = PlanObjective::modeled;
  bool exact = false;
  std::size_t exact_limit = 24;
  /// lambda = size/authorized without rounding, priced as b*lambda*efs.
  bool fractional_lambda = false;
};

struct RolePlan {
  std::vector<std::uint32_t> nodes;  ///< sorted node ids
  double cost = 0.0;
};

struct PlanSet {
  std::vector<RolePlan> plans;  ///< per role
  std::vector<double> weights;  ///< per role
  double avg = 0.0;
};

/// Mutable grouping of exclusive blocks into nodes, with the block -> nodes map kept in
/// step. Node ids are stable slots; removed nodes stay as dead slots.
class Lattice {
 public:
  explicit Lattice(const ExclusiveLattice& ex);

  const ExclusiveLattice& ex() const noexcept { return *ex_; }
  std::size_t slots() const noexcept { return nodes_.size(); }
  const Node& node(std::uint32_t id) const { return nodes_.at(id); }
  std::vector<std::uint32_t> alive() const;
  std::size_t n_alive() const noexcept { return n_alive_; }
  std::optional<std::uint32_t> find(const NodeKey& key) const;
  /// Node currently keyed by exactly `roles` with copy 0.
  std::optional<std::uint32_t> find(const RoleSet& roles) const { return find(NodeKey{roles, 0}); }
  /// First free key for `roles`.
  NodeKey free_key(const RoleSet& roles) const;

  const std::vector<std::uint32_t>& phi(std::uint32_t block) const { return phi_.at(block); }
  std::vector<std::uint32_t> blocks(std::uint32_t id) const;

  std::size_t stored() const noexcept { return stored_; }
  double sa() const noexcept { return double(stored_) / double(ex_->n_vectors()); }

  std::uint32_t create(NodeKey key, std::span<const std::uint32_t> blocks, bool leftover = false);
  /// Adds a block; returns false when it was already a member.
  bool add_block(std::uint32_t id, std::uint32_t block);
  void remove_block(std::uint32_t id, std::uint32_t block);
  /// `into` takes every block of `from`, which is removed. Returns the blocks `into` gained.
  std::vector<std::uint32_t> absorb(std::uint32_t into, std::uint32_t from);
  void remove(std::uint32_t id);
  void revive(std::uint32_t id);
  void relabel(std::uint32_t id, NodeKey key);

  bool pure_for(std::uint32_t id, Role r) const { return node(id).auth.at(r) == node(id).size; }
  /// Inflation factor of node `id` for role r (requires authorized vectors).
  double lambda(std::uint32_t id, Role r, bool fractional) const;
  double location_cost(std::uint32_t id, Role r, const PlanConfig& cfg) const;

  CoverProblem cover_problem(Role r, const PlanConfig& cfg) const;
  RolePlan plan(Role r, const PlanConfig& cfg, const std::vector<std::uint32_t>* incumbent = nullptr) const;
  double plan_cost(Role r, std::span<const std::uint32_t> nodes, const PlanConfig& cfg) const;
  PlanSet plan_all(const PlanConfig& cfg, std::vector<double> weights) const;

  /// Every alive node's ids are authorized for all roles of its key.
  bool key_pure(std::uint32_t id) const;

 private:
  void attach(std::uint32_t id, std::uint32_t block);
  void detach(std::uint32_t id, std::uint32_t block);
  void index_key(std::uint32_t id);

  const ExclusiveLattice* ex_;
  std::vector<Node> nodes_;
  std::vector<std::vector<std::uint32_t>> phi_;
  std::map<NodeKey, std::uint32_t> by_key_;
  std::size_t stored_ = 0;
  std::size_t n_alive_ = 0;
};

std::size_t budget_total(double beta, std::size_t n_vectors);

}  // namespace veda
