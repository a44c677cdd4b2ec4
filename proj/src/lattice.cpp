#include "veda/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "veda/error.hpp"

namespace veda {

std::string NodeKey::to_string() const {
  return copy ? "(-" + std::to_string(copy) + "," + roles.to_string() + ")" : roles.to_string();
}

std::size_t budget_total(double beta, std::size_t n_vectors) {
  if (!(beta >= 1.0)) throw InputError("storage budget beta must be >= 1");
  return static_cast<std::size_t>(std::floor(beta * double(n_vectors) + 1e-9));
}

Lattice::Lattice(const ExclusiveLattice& ex) : ex_(&ex), phi_(ex.size()) {
  for (std::uint32_t b = 0; b < ex.size(); ++b) create(NodeKey{ex.block(b).tag, 0}, std::span(&b, 1));
}

std::vector<std::uint32_t> Lattice::alive() const {
  std::vector<std::uint32_t> v;
  v.reserve(n_alive_);
  for (std::uint32_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].alive) v.push_back(i);
  return v;
}

std::optional<std::uint32_t> Lattice::find(const NodeKey& key) const {
  auto it = by_key_.find(key);
  if (it == by_key_.end()) return std::nullopt;
  return it->second;
}

NodeKey Lattice::free_key(const RoleSet& roles) const {
  NodeKey k{roles, 0};
  while (by_key_.count(k)) ++k.copy;
  return k;
}

std::vector<std::uint32_t> Lattice::blocks(std::uint32_t id) const {
  std::vector<std::uint32_t> v;
  const auto& m = node(id).members;
  for (auto b = m.find_first(); b != m.npos; b = m.find_next(b)) v.push_back(std::uint32_t(b));
  return v;
}

void Lattice::attach(std::uint32_t id, std::uint32_t block) {
  auto& p = phi_[block];
  p.insert(std::lower_bound(p.begin(), p.end(), id), id);
}

void Lattice::detach(std::uint32_t id, std::uint32_t block) {
  auto& p = phi_[block];
  auto it = std::lower_bound(p.begin(), p.end(), id);
  if (it != p.end() && *it == id) p.erase(it);
}

void Lattice::index_key(std::uint32_t id) {
  auto [it, ok] = by_key_.emplace(nodes_[id].key, id);
  if (!ok) throw InputError("node key " + nodes_[id].key.to_string() + " is already taken");
}

std::uint32_t Lattice::create(NodeKey key, std::span<const std::uint32_t> blocks, bool leftover) {
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  Node n;
  n.key = key;
  n.members.resize(ex_->size());
  n.auth.assign(ex_->n_roles(), 0);
  n.leftover = leftover;
  nodes_.push_back(std::move(n));
  index_key(id);
  ++n_alive_;
  for (auto b : blocks) add_block(id, b);
  return id;
}

bool Lattice::add_block(std::uint32_t id, std::uint32_t block) {
  auto& n = nodes_.at(id);
  if (n.members.test(block)) return false;
  const auto& eb = ex_->block(block);
  n.members.set(block);
  n.size += eb.size();
  eb.tag.for_each([&](Role r) { n.auth[r] += std::uint32_t(eb.size()); });
  n.present = n.present | eb.tag;
  if (n.alive) {
    stored_ += eb.size();
    attach(id, block);
  }
  return true;
}

void Lattice::remove_block(std::uint32_t id, std::uint32_t block) {
  auto& n = nodes_.at(id);
  if (!n.members.test(block)) return;
  const auto& eb = ex_->block(block);
  n.members.reset(block);
  n.size -= eb.size();
  eb.tag.for_each([&](Role r) { n.auth[r] -= std::uint32_t(eb.size()); });
  RoleSet present;
  for (auto b = n.members.find_first(); b != n.members.npos; b = n.members.find_next(b))
    present = present | ex_->block(std::uint32_t(b)).tag;
  n.present = present;
  if (n.alive) {
    stored_ -= eb.size();
    detach(id, block);
  }
}

std::vector<std::uint32_t> Lattice::absorb(std::uint32_t into, std::uint32_t from) {
  if (into == from) throw InputError("a node cannot absorb itself");
  if (!nodes_.at(into).alive || !nodes_.at(from).alive) throw InputError("absorb needs two live nodes");
  std::vector<std::uint32_t> gained;
  for (auto b : blocks(from))
    if (add_block(into, b)) gained.push_back(b);
  remove(from);
  return gained;
}

void Lattice::remove(std::uint32_t id) {
  auto& n = nodes_.at(id);
  if (!n.alive) return;
  for (auto b = n.members.find_first(); b != n.members.npos; b = n.members.find_next(b)) detach(id, std::uint32_t(b));
  stored_ -= n.size;
  n.alive = false;
  by_key_.erase(n.key);
  --n_alive_;
}

void Lattice::revive(std::uint32_t id) {
  auto& n = nodes_.at(id);
  if (n.alive) return;
  n.alive = true;
  index_key(id);
  for (auto b = n.members.find_first(); b != n.members.npos; b = n.members.find_next(b)) attach(id, std::uint32_t(b));
  stored_ += n.size;
  ++n_alive_;
}

void Lattice::relabel(std::uint32_t id, NodeKey key) {
  auto& n = nodes_.at(id);
  if (n.key == key) return;
  if (by_key_.count(key)) throw InputError("node key " + key.to_string() + " is already taken");
  if (n.alive) by_key_.erase(n.key);
  n.key = key;
  if (n.alive) by_key_.emplace(key, id);
}

double Lattice::lambda(std::uint32_t id, Role r, bool fractional) const {
  const auto& n = node(id);
  const auto a = n.auth.at(r);
  if (a == 0) throw InputError("node " + n.key.to_string() + " holds nothing for role " + std::to_string(r));
  if (fractional) return double(n.size) / double(a);
  return double(*inflation_factor(n.size, a));
}

double Lattice::location_cost(std::uint32_t id, Role r, const PlanConfig& cfg) const {
  const auto& n = node(id);
  if (n.leftover) return scan_cost(cfg.theta, n.size);
  if (cfg.objective == PlanObjective::log_size) return std::log2(double(n.size) + 1.0);
  const bool pure = n.auth[r] == n.size;
  if (pure) return c_theta(cfg.theta, double(n.size), double(cfg.efs));
  const double lam = lambda(id, r, cfg.fractional_lambda);
  if (cfg.fractional_lambda) return c_theta(cfg.theta, double(n.size), lam * double(cfg.efs));
  return cost_hnsw(cfg.theta, n.size, cfg.efs, false, lam).cost;
}

CoverProblem Lattice::cover_problem(Role r, const PlanConfig& cfg) const {
  CoverProblem p;
  const auto& rb = ex_->blocks_of_role(r);
  p.choices.reserve(rb.size());
  p.cost.assign(nodes_.size(), 0.0);
  std::vector<char> priced(nodes_.size(), 0);
  for (auto b : rb) {
    const auto& locs = phi_[b];
    if (locs.empty()) throw CoverageError("exclusive block " + ex_->block(b).tag.to_string() + " is held by no node");
    p.choices.push_back(locs);
    for (auto l : locs)
      if (!priced[l]) p.cost[l] = location_cost(l, r, cfg), priced[l] = 1;
  }
  return p;
}

RolePlan Lattice::plan(Role r, const PlanConfig& cfg, const std::vector<std::uint32_t>* incumbent) const {
  auto p = cover_problem(r, cfg);
  if (p.choices.empty()) return {};
  CoverResult res;
  if (cfg.exact) {
    res = exact_cover(p, cfg.exact_limit);
    if (incumbent && covers(p, *incumbent)) {
      double c = 0;
      for (auto l : *incumbent) c += p.cost[l];
      if (c < res.objective - 1e-12) {
        res = greedy_cover(p, incumbent);
      }
    }
  } else {
    res = greedy_cover(p, incumbent);
  }
  RolePlan out;
  out.nodes = std::move(res.chosen);
  out.cost = cfg.objective == PlanObjective::modeled ? res.objective : plan_cost(r, out.nodes, PlanConfig{cfg.theta, cfg.efs});
  return out;
}

double Lattice::plan_cost(Role r, std::span<const std::uint32_t> ids, const PlanConfig& cfg) const {
  double s = 0;
  for (auto id : ids) s += location_cost(id, r, cfg);
  return s;
}

PlanSet Lattice::plan_all(const PlanConfig& cfg, std::vector<double> weights) const {
  PlanSet ps;
  const auto R = ex_->n_roles();
  ps.weights = weights.empty() ? uniform_weights(R) : std::move(weights);
  if (ps.weights.size() != R) throw InputError("one workload weight per role is required");
  ps.plans.resize(R);
  for (Role r = 0; r < R; ++r) {
    ps.plans[r] = plan(r, cfg);
    ps.avg += ps.weights[r] * ps.plans[r].cost;
  }
  return ps;
}

bool Lattice::key_pure(std::uint32_t id) const {
  const auto& n = node(id);
  bool ok = true;
  n.key.roles.for_each([&](Role r) { ok = ok && r < n.auth.size() && n.auth[r] == n.size; });
  return ok;
}

}  // namespace veda
