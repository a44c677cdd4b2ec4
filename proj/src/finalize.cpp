#include <algorithm>
#include <chrono>
#include <tuple>

#include "veda/error.hpp"
#include "veda/optimizer.hpp"

namespace veda {

PlanConfig OptimizerConfig::plan_config() const {
  PlanConfig pc;
  pc.theta = theta;
  pc.efs = efs;
  pc.exact = exact_plans;
  return pc;
}

std::vector<double> OptimizerConfig::role_weights(std::uint32_t n_roles) const {
  if (weights.empty()) return uniform_weights(n_roles);
  if (weights.size() != n_roles) throw InputError("one workload weight per role is required");
  return weights;
}

namespace {

std::optional<std::uint32_t> standalone_of(const Lattice& lat, std::uint32_t block) {
  for (auto id : lat.phi(block))
    if (lat.node(id).members.count() == 1) return id;
  return std::nullopt;
}

std::optional<std::uint32_t> leftover_of(const Lattice& lat, std::uint32_t block) {
  for (auto id : lat.phi(block))
    if (lat.node(id).leftover) return id;
  return std::nullopt;
}

}  // namespace

FinalizeResult finalize(Lattice& lat, const OptimizerConfig& cfg, const std::string& optimizer) {
  const auto& ex = lat.ex();
  const auto pc = cfg.plan_config();
  const auto lam_min = cfg.lambda_threshold;
  const std::size_t total = budget_total(cfg.beta, ex.n_vectors());
  FinalizeResult out;
  auto& st = out.stats;

  for (auto id : lat.alive()) {
    const auto& n = lat.node(id);
    if (n.leftover || n.size >= lam_min) continue;
    for (auto b : lat.blocks(id))
      if (!leftover_of(lat, b)) {
        lat.create(lat.free_key(ex.block(b).tag), std::span(&b, 1), true);
        ++st.leftovers;
      }
    lat.remove(id);
    ++st.split;
  }

  PlanSet ps = lat.plan_all(pc, cfg.role_weights(ex.n_roles()));

  if (cfg.refine && lat.stored() < total) {
    std::vector<std::size_t> ref(lat.slots(), 0);
    for (const auto& p : ps.plans)
      for (auto id : p.nodes) ++ref[id];
    struct Cand {
      double lambda;
      std::size_t pure_size;
      NodeKey key;
      Role r;
      std::uint32_t id;
    };
    std::vector<Cand> cands;
    for (Role r = 0; r < ps.plans.size(); ++r)
      for (auto id : ps.plans[r].nodes) {
        const auto& n = lat.node(id);
        if (!n.leftover && n.auth[r] < n.size) cands.push_back({lat.lambda(id, r, false), n.auth[r], n.key, r, id});
      }
    std::sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) {
      return std::tie(y.lambda, x.pure_size, x.key, x.r) < std::tie(x.lambda, y.pure_size, y.key, y.r);
    });

    for (const auto& c : cands) {
      auto& plan = ps.plans[c.r].nodes;
      if (!lat.node(c.id).alive || !std::binary_search(plan.begin(), plan.end(), c.id)) continue;
      const std::size_t buf = total - lat.stored();
      std::vector<std::uint32_t> reuse, make;
      std::size_t need = 0;
      double new_cost = 0;
      for (auto b : lat.blocks(c.id)) {
        const auto& eb = ex.block(b);
        if (!eb.tag.test(c.r)) continue;
        if (auto s = standalone_of(lat, b)) {
          reuse.push_back(*s);
          new_cost += lat.location_cost(*s, c.r, pc);
        } else {
          make.push_back(b);
          need += eb.size();
          new_cost += eb.size() >= lam_min ? c_theta(pc.theta, double(eb.size()), double(pc.efs))
                                           : scan_cost(pc.theta, eb.size());
        }
      }
      // Only redirect when it is actually cheaper for this role.
      if (need > buf || new_cost >= lat.location_cost(c.id, c.r, pc) - 1e-12) continue;
      for (auto b : make) {
        auto id = lat.create(lat.free_key(ex.block(b).tag), std::span(&b, 1), ex.block(b).size() < lam_min);
        st.leftovers += ex.block(b).size() < lam_min;
        ref.push_back(0);
        reuse.push_back(id);
      }
      plan.erase(std::find(plan.begin(), plan.end(), c.id));
      for (auto u : reuse)
        if (std::find(plan.begin(), plan.end(), u) == plan.end()) plan.push_back(u), ++ref[u];
      std::sort(plan.begin(), plan.end());
      ++st.refined;
      if (--ref[c.id] == 0) {
        lat.remove(c.id);
        ++st.deleted;
      }
    }
  }

  auto fpc = pc;
  fpc.exact = true;
  PlanSet fin;
  fin.weights = ps.weights;
  fin.plans.resize(ps.plans.size());
  for (Role r = 0; r < ps.plans.size(); ++r) {
    fin.plans[r] = lat.plan(r, fpc, &ps.plans[r].nodes);
    fin.avg += fin.weights[r] * fin.plans[r].cost;
  }
  std::vector<char> used(lat.slots(), 0);
  for (const auto& p : fin.plans)
    for (auto id : p.nodes) used[id] = 1;
  for (auto id : lat.alive())
    if (!used[id]) {
      lat.remove(id);
      ++st.deleted;
    }

  out.manifest = manifest_from_lattice(lat, fin, optimizer, cfg.beta, lam_min, cfg.efs, cfg.theta);
  out.plans = std::move(fin);
  return out;
}

OptimizeResult optimize(const ExclusiveLattice& ex, const OptimizerConfig& cfg, OptimizerKind kind) {
  OptimizeResult res;
  auto t0 = std::chrono::steady_clock::now();
  if (kind == OptimizerKind::veda) {
    VedaOptimizer v(ex, cfg);
    v.run();
    res.final = v.finalize();
  } else {
    EffVedaOptimizer e(ex, cfg);
    e.run();
    res.final = e.finalize();
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "veda") return OptimizerKind::veda;
  if (name == "effveda") return OptimizerKind::effveda;
  throw InputError("unknown optimizer '" + name + "' (expected veda or effveda)");
}

std::string to_string(OptimizerKind k) { return k == OptimizerKind::veda ? "veda" : "effveda"; }

}  // namespace veda
