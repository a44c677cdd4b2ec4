#include <algorithm>
#include <cmath>
#include <string>

#include "veda/error.hpp"
#include "veda/optimizer.hpp"

namespace veda {

double copy_gain(const Theta& t, std::size_t efs, std::size_t n_anc, std::size_t n_node) {
  return c_theta(t, double(n_anc), double(efs)) + c_theta(t, double(n_node), double(efs)) -
         c_theta(t, double(n_anc + n_node), double(efs));
}

namespace {

/// Σ_{r in tau} w_r * |R|: the uniform workload gives |tau|.
double role_mult(const RoleSet& tau, const std::vector<double>& w) {
  double m = 0;
  tau.for_each([&](Role r) { m += w.at(r) * double(w.size()); });
  return m;
}

double predicted_drop(const Lattice& lat, std::uint32_t node, const std::vector<std::uint32_t>& members,
                      const OptimizerConfig& cfg, const std::vector<double>& w) {
  const auto n = lat.node(node).size;
  double s = 0;
  for (auto m : members)
    s += role_mult(lat.node(m).key.roles, w) / double(w.size()) * copy_gain(cfg.theta, cfg.efs, lat.node(m).size, n);
  return s;
}

}  // namespace

double partition_score(const Lattice& lat, std::uint32_t node, const std::vector<std::uint32_t>& members,
                       bool has_residual, const OptimizerConfig& cfg, const std::vector<double>& w) {
  const auto parts = members.size() + (has_residual ? 1 : 0);
  if (parts < 2) throw InputError("a valid partition needs at least two parts");
  const double n = double(lat.node(node).size);
  return predicted_drop(lat, node, members, cfg, w) * double(w.size()) / (n * double(parts - 1));
}

PartitionChoice find_best_partition(const Lattice& lat, std::uint32_t node, const std::vector<std::uint32_t>& ancestors,
                                    std::size_t buf, const OptimizerConfig& cfg, const std::vector<double>& w) {
  PartitionChoice best;
  const auto& nd = lat.node(node);
  if (ancestors.empty() || nd.size > buf || nd.size == 0) return best;
  const RoleSet tau = nd.key.roles;

  for (auto a : ancestors) {
    const RoleSet rest = tau - lat.node(a).key.roles;
    auto b = lat.find(rest);
    if (rest.empty() || !b || !lat.node(*b).alive) continue;
    std::vector<std::uint32_t> m{a, *b};
    double s = partition_score(lat, node, m, false, cfg, w);
    if (best.members.empty() || s > best.score) best = {std::move(m), std::nullopt, s};
  }
  if (!best.members.empty()) return best;

  for (auto seed : ancestors) {
    std::vector<std::uint32_t> m{seed};
    RoleSet rest = tau - lat.node(seed).key.roles;
    for (auto a : ancestors) {
      const auto& k = lat.node(a).key.roles;
      if (a != seed && !rest.empty() && k.is_subset_of(rest)) {
        m.push_back(a);
        rest = rest - k;
      }
    }
    PartitionChoice c{std::move(m), rest.empty() ? std::nullopt : std::optional<RoleSet>(rest), 0.0};
    if (nd.size * (c.parts() - 1) > buf) continue;
    c.score = partition_score(lat, node, c.members, c.residual.has_value(), cfg, w);
    if (best.members.empty() || c.score > best.score) best = std::move(c);
  }
  return best;
}

// ---------------------------------------------------------------- merge state

MergeState::MergeState(Lattice& lat, const OptimizerConfig& cfg)
    : lat_(&lat), cfg_(cfg), w_(cfg.role_weights(lat.ex().n_roles())) {
  for (auto id : lat.alive()) {
    const auto& n = lat.node(id);
    vd_[id] = {std::uint32_t(records_.size())};
    routed_[id] = n.key.roles;
    records_.push_back({n.key, n.key.roles, n.size, n.members});
  }
}

double MergeState::h_of(const boost::dynamic_bitset<>& members, const std::vector<std::uint32_t>& recs,
                        RoleSet routed) const {
  const auto& ex = lat_->ex();
  auto size_of = [&](const boost::dynamic_bitset<>& m) {
    std::size_t s = 0;
    for (auto b = m.find_first(); b != m.npos; b = m.find_next(b)) s += ex.block(std::uint32_t(b)).size();
    return s;
  };
  const double n = double(size_of(members));
  const auto& t = cfg_.theta;
  double h = 0;
  routed.for_each([&](Role r) {
    boost::dynamic_bitset<> pure(members.size());
    for (auto i : recs)
      if (records_[i].tag.test(r)) pure |= records_[i].members;
    const double lam = n / double(size_of(pure));
    h += w_[r] * double(w_.size()) * (t.a * std::log2(n + 1.0) + t.b * lam * double(cfg_.efs) + t.c);
  });
  return h;
}

double MergeState::h(std::uint32_t node) const {
  return h_of(lat_->node(node).members, vd_.at(node), routed_.at(node));
}

double MergeState::merge_benefit(std::uint32_t a, std::uint32_t b) const {
  if (a == b) throw InputError("a node cannot be merged with itself");
  auto recs = vd_.at(a);
  const auto& rb = vd_.at(b);
  recs.insert(recs.end(), rb.begin(), rb.end());
  return h(a) + h(b) - h_of(lat_->node(a).members | lat_->node(b).members, recs, routed_.at(a) | routed_.at(b));
}

void MergeState::merge(std::uint32_t a, std::uint32_t b) {
  if (a == b) throw InputError("a node cannot be merged with itself");
  lat_->absorb(a, b);
  auto& ra = vd_.at(a);
  const auto& rb = vd_.at(b);
  ra.insert(ra.end(), rb.begin(), rb.end());
  routed_[a] = routed_.at(a) | routed_.at(b);
  vd_.erase(b);
  routed_.erase(b);
}

double MergeState::inherited_cost() const {
  double s = 0;
  for (const auto& [id, recs] : vd_) s += h(id);
  return s / double(w_.size());
}

std::string MergeState::check() const {
  std::vector<int> seen(records_.size(), 0);
  for (const auto& [id, recs] : vd_) {
    if (!lat_->node(id).alive) return "dead node " + std::to_string(id) + " still owns records";
    RoleSet u;
    for (auto i : recs) {
      u = u | records_[i].tag;
      ++seen[i];
      if (!records_[i].members.is_subset_of(lat_->node(id).members))
        return "node " + lat_->node(id).key.to_string() + " lost vectors of a record";
    }
    if (u != routed_.at(id)) return "routed roles of " + lat_->node(id).key.to_string() + " differ from its records";
  }
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (seen[i] != 1) return "record " + records_[i].key.to_string() + " owned " + std::to_string(seen[i]) + " times";
  if (vd_.size() != lat_->n_alive()) return "some live node has no records";
  return {};
}

// ---------------------------------------------------------------- optimizer

EffVedaOptimizer::EffVedaOptimizer(const ExclusiveLattice& ex, OptimizerConfig cfg)
    : cfg_(std::move(cfg)), w_(cfg_.role_weights(ex.n_roles())), lat_(ex),
      budget_(budget_total(cfg_.beta, ex.n_vectors())) {}

double EffVedaOptimizer::routed_cost() const {
  double s = 0;
  for (auto id : lat_.alive()) {
    const auto& n = lat_.node(id);
    s += role_mult(n.key.roles, w_) / double(w_.size()) * c_theta(cfg_.theta, double(n.size), double(cfg_.efs));
  }
  return s;
}

void EffVedaOptimizer::copy_phase(bool record_costs) {
  std::size_t buf = budget_ > lat_.stored() ? budget_ - lat_.stored() : 0;
  const auto& layers = lat_.ex().layers();
  for (std::size_t layer = layers.size(); buf > 0 && layer-- > 2;) {
    struct Scored {
      std::uint32_t node;
      PartitionChoice p;
    };
    std::vector<Scored> scored;
    const auto nodes = lat_.alive();
    for (auto id : nodes) {
      const auto& n = lat_.node(id);
      if (n.key.roles.count() != layer) continue;
      std::vector<std::uint32_t> anc;
      for (auto a : nodes)
        if (lat_.node(a).key.roles.is_proper_subset_of(n.key.roles)) anc.push_back(a);
      std::sort(anc.begin(), anc.end(), [&](auto x, auto y) {
        const auto &kx = lat_.node(x).key, &ky = lat_.node(y).key;
        if (kx.roles.count() != ky.roles.count()) return kx.roles.count() > ky.roles.count();
        return kx < ky;
      });
      auto p = find_best_partition(lat_, id, anc, buf, cfg_, w_);
      if (!p.members.empty()) scored.push_back({id, std::move(p)});
    }
    std::stable_sort(scored.begin(), scored.end(), [&](const Scored& x, const Scored& y) {
      if (x.p.score != y.p.score) return x.p.score > y.p.score;
      return lat_.node(x.node).key < lat_.node(y.node).key;
    });

    for (auto& s : scored) {
      auto& p = s.p;
      // A residual node created earlier on this layer becomes an ordinary partition member.
      if (p.residual)
        if (auto x = lat_.find(*p.residual)) {
          p.members.push_back(*x);
          p.residual.reset();
        }
      const auto n = lat_.node(s.node).size;
      const std::size_t ds = n * (p.parts() - 1);
      if (ds > buf) continue;

      EffCopyRecord rec;
      rec.tau = lat_.node(s.node).key.roles;
      for (auto m : p.members) rec.parts.push_back(lat_.node(m).key.roles);
      rec.residual = p.residual;
      rec.score = p.score;
      rec.predicted_gain = predicted_drop(lat_, s.node, p.members, cfg_, w_);
      rec.delta_s = ds;
      if (record_costs) rec.cost_before = routed_cost();

      const auto blocks = lat_.blocks(s.node);
      for (auto m : p.members)
        for (auto b : blocks) lat_.add_block(m, b);
      if (p.residual)
        lat_.relabel(s.node, NodeKey{*p.residual, 0});
      else
        lat_.remove(s.node);
      buf -= ds;
      if (record_costs) rec.cost_after = routed_cost();
      copies_.push_back(std::move(rec));
    }
  }
  post_copy_cost_ = routed_cost();
}

void EffVedaOptimizer::merge_phase() {
  merge_.emplace(lat_, cfg_);
  auto& ms = *merge_;
  const auto lam = cfg_.lambda_threshold;

  std::vector<std::uint32_t> order;
  for (auto id : lat_.alive())
    if (lat_.node(id).size < lam) order.push_back(id);
  std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) {
    const auto &a = lat_.node(x), &b = lat_.node(y);
    if (a.size != b.size) return a.size > b.size;
    return a.key < b.key;
  });

  for (std::size_t i = 0; i < order.size();) {
    const auto id = order[i];
    if (!lat_.node(id).alive || lat_.node(id).size >= lam) {
      ++i;
      continue;
    }
    const RoleSet tau = lat_.node(id).key.roles;
    std::vector<std::pair<double, std::uint32_t>> cands;
    for (auto x : lat_.alive()) {
      if (x == id) continue;
      const RoleSet k = lat_.node(x).key.roles;
      const bool related = k.is_proper_subset_of(tau) || tau.is_proper_subset_of(k) ||
                           (k.count() == tau.count() && k != tau && k.intersects(tau));
      if (related) cands.emplace_back(ms.merge_benefit(id, x), x);
    }
    std::stable_sort(cands.begin(), cands.end(), [&](const auto& x, const auto& y) {
      if (x.first != y.first) return x.first > y.first;
      return lat_.node(x.second).key < lat_.node(y.second).key;
    });

    bool progress = false;
    for (const auto& [cached, x] : cands) {
      if (lat_.node(id).size >= lam) break;
      if (!lat_.node(x).alive) continue;
      const double v = progress ? ms.merge_benefit(id, x) : cached;
      if (v <= 1e-12) {
        if (!progress) break;
        continue;
      }
      ms.merge(id, x);
      ++merges_;
      progress = true;
    }
    // Retry the same position with fresh candidates only while merges keep landing.
    if (!(progress && lat_.node(id).size < lam)) ++i;
  }
}

void EffVedaOptimizer::run() {
  copy_phase(false);
  merge_phase();
}

FinalizeResult EffVedaOptimizer::finalize() { return veda::finalize(lat_, cfg_, "effveda"); }

}  // namespace veda
