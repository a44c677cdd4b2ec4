#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <tuple>

#include "veda/error.hpp"
#include "veda/optimizer.hpp"

namespace veda {

namespace {

constexpr double kEps = 1e-12;

struct Cand {
  double score;
  NodeKey anc, desc;
  std::uint32_t a, c;
  std::uint64_t epoch;
};

struct CandOrder {
  bool operator()(const Cand& x, const Cand& y) const {
    if (x.score != y.score) return x.score > y.score;
    return std::tie(x.anc, x.desc) < std::tie(y.anc, y.desc);
  }
};

/// Lazily re-verified candidate pool keyed by (ancestor, descendant) node ids.
class Pool {
 public:
  void put(const Cand& c) {
    drop(c.a, c.c);
    by_pair_[{c.a, c.c}] = set_.insert(c).first;
  }
  void drop(std::uint32_t a, std::uint32_t c) {
    auto it = by_pair_.find({a, c});
    if (it == by_pair_.end()) return;
    set_.erase(it->second);
    by_pair_.erase(it);
  }
  void drop_node(std::uint32_t n) {
    for (auto it = by_pair_.begin(); it != by_pair_.end();) {
      if (it->first.first == n || it->first.second == n) {
        set_.erase(it->second);
        it = by_pair_.erase(it);
      } else {
        ++it;
      }
    }
  }
  bool empty() const { return set_.empty(); }
  const Cand& top() const { return *set_.begin(); }

 private:
  std::set<Cand, CandOrder> set_;
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::set<Cand, CandOrder>::iterator> by_pair_;
};

bool is_da(const Lattice& lat, std::uint32_t a, std::uint32_t c) {
  const auto &na = lat.node(a), &nc = lat.node(c);
  return !na.leftover && !nc.leftover && na.key.roles.is_proper_subset_of(nc.key.roles);
}

}  // namespace

VedaOptimizer::VedaOptimizer(const ExclusiveLattice& ex, OptimizerConfig cfg)
    : cfg_(std::move(cfg)), pc_(cfg_.plan_config()), lat_(ex), budget_(budget_total(cfg_.beta, ex.n_vectors())) {
  plans_ = lat_.plan_all(pc_, cfg_.role_weights(ex.n_roles()));
}

std::optional<std::uint32_t> VedaOptimizer::key_block(std::uint32_t node) const {
  return lat_.ex().find(lat_.node(node).key.roles);
}

VedaOptimizer::Eval VedaOptimizer::replan(const RoleSet& affected, std::uint32_t from, std::uint32_t to) {
  Eval e;
  e.avg = plans_.avg;
  affected.for_each([&](Role r) {
    if (r >= plans_.plans.size()) return;
    auto inc = plans_.plans[r].nodes;
    if (from != to)
      for (auto& id : inc)
        if (id == from) id = to;
    std::sort(inc.begin(), inc.end());
    inc.erase(std::unique(inc.begin(), inc.end()), inc.end());
    auto p = lat_.plan(r, pc_, &inc);
    e.avg += plans_.weights[r] * (p.cost - plans_.plans[r].cost);
    e.plans.emplace_back(r, std::move(p));
  });
  return e;
}

VedaOptimizer::Eval VedaOptimizer::eval_copy(std::uint32_t anc, std::uint32_t block) {
  const RoleSet affected = lat_.node(anc).present | lat_.ex().block(block).tag;
  lat_.add_block(anc, block);
  auto e = replan(affected, anc, anc);
  lat_.remove_block(anc, block);
  return e;
}

VedaOptimizer::Eval VedaOptimizer::eval_merge(std::uint32_t anc, std::uint32_t desc) {
  const RoleSet affected = lat_.node(anc).present | lat_.node(desc).present;
  auto gained = lat_.absorb(anc, desc);
  auto e = replan(affected, desc, anc);
  for (auto b : gained) lat_.remove_block(anc, b);
  lat_.revive(desc);
  return e;
}

void VedaOptimizer::install(const Eval& e) {
  for (const auto& [r, p] : e.plans) plans_.plans[r] = p;
  plans_.avg = 0;
  for (Role r = 0; r < plans_.plans.size(); ++r) plans_.avg += plans_.weights[r] * plans_.plans[r].cost;
}

double VedaOptimizer::avg_after_copy(std::uint32_t anc, std::uint32_t desc) {
  auto b = key_block(desc);
  if (!b || lat_.node(anc).members.test(*b)) return plans_.avg;
  return eval_copy(anc, *b).avg;
}

double VedaOptimizer::avg_after_merge(std::uint32_t anc, std::uint32_t desc) { return eval_merge(anc, desc).avg; }

double VedaOptimizer::copy_benefit(std::uint32_t anc, std::uint32_t desc) {
  auto b = key_block(desc);
  if (!b || lat_.node(anc).members.test(*b)) return -std::numeric_limits<double>::infinity();
  const auto e = eval_copy(anc, *b);
  return (plans_.avg - e.avg) / (double(lat_.ex().block(*b).size()) + 1.0);
}

double VedaOptimizer::merge_benefit(std::uint32_t anc, std::uint32_t desc) {
  return plans_.avg - eval_merge(anc, desc).avg;
}

std::size_t VedaOptimizer::copy_phase() {
  if (lat_.stored() >= budget_) return 0;
  Pool pool;
  std::uint64_t epoch = 0;
  auto buf = [&] { return budget_ - lat_.stored(); };
  auto consider = [&](std::uint32_t a, std::uint32_t c) {
    auto b = key_block(c);
    if (!b || lat_.node(a).members.test(*b) || lat_.ex().block(*b).size() > buf()) {
      pool.drop(a, c);
      return;
    }
    pool.put({copy_benefit(a, c), lat_.node(a).key, lat_.node(c).key, a, c, epoch});
  };
  const auto nodes = lat_.alive();
  for (auto a : nodes)
    for (auto c : nodes)
      if (is_da(lat_, a, c)) consider(a, c);

  std::size_t committed = 0;
  while (!pool.empty()) {
    const Cand top = pool.top();
    if (top.score <= kEps) break;
    const auto b = *key_block(top.c);
    const auto size = lat_.ex().block(b).size();
    if (size > buf()) {
      pool.drop(top.a, top.c);
      continue;
    }
    if (top.epoch != epoch) {
      consider(top.a, top.c);
      continue;
    }
    const double before = plans_.avg;
    auto e = eval_copy(top.a, b);
    lat_.add_block(top.a, b);
    install(e);
    trace_.push_back({OpKind::copy, top.anc, top.desc, top.score, before, plans_.avg, lat_.stored()});
    ++committed;
    ++epoch;
    pool.drop(top.a, top.c);
    if (lat_.stored() >= budget_) break;
    for (auto c : lat_.alive())
      if (is_da(lat_, top.a, c)) consider(top.a, c);
  }
  return committed;
}

std::size_t VedaOptimizer::merge_phase() {
  Pool pool;
  std::uint64_t epoch = 0;
  auto consider = [&](std::uint32_t a, std::uint32_t c) {
    pool.put({merge_benefit(a, c), lat_.node(a).key, lat_.node(c).key, a, c, epoch});
  };
  auto nodes = lat_.alive();
  for (auto a : nodes)
    for (auto c : nodes)
      if (is_da(lat_, a, c)) consider(a, c);

  std::size_t committed = 0;
  while (!pool.empty()) {
    const Cand top = pool.top();
    if (top.score <= kEps) break;
    if (top.epoch != epoch) {
      consider(top.a, top.c);
      continue;
    }
    const double before = plans_.avg;
    auto e = eval_merge(top.a, top.c);
    lat_.absorb(top.a, top.c);
    install(e);
    trace_.push_back({OpKind::merge, top.anc, top.desc, top.score, before, plans_.avg, lat_.stored()});
    ++committed;
    ++epoch;
    pool.drop_node(top.c);
    for (auto x : lat_.alive()) {
      if (is_da(lat_, top.a, x)) consider(top.a, x);
      if (is_da(lat_, x, top.a)) consider(x, top.a);
    }
  }
  return committed;
}

void VedaOptimizer::run() {
  while (true) {
    const auto c = copy_phase();
    const auto m = merge_phase();
    ++passes_;
    if (c + m == 0) break;
  }
}

FinalizeResult VedaOptimizer::finalize() { return veda::finalize(lat_, cfg_, "veda"); }

}  // namespace veda
