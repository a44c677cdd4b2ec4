#include "veda/query.hpp"

#include <algorithm>
#include <cmath>

#include "veda/error.hpp"

namespace veda {

Strategy parse_strategy(const std::string& name) {
  if (name == "coordinated") return Strategy::coordinated;
  if (name == "independent") return Strategy::independent;
  throw InputError("unknown strategy '" + name + "' (expected coordinated or independent)");
}

std::string to_string(Strategy s) { return s == Strategy::coordinated ? "coordinated" : "independent"; }

void ExecStats::add(const ExecStats& o) {
  queries += o.queries;
  indices_touched += o.indices_touched;
  impure_touched += o.impure_touched;
  phase2_skips += o.phase2_skips;
  leftover_ids_scanned += o.leftover_ids_scanned;
  efs_used += o.efs_used;
  efs_budget += o.efs_budget;
  touched += o.touched;
  touched_authorized += o.touched_authorized;
  purity_sum += o.purity_sum;
}

Layout::Layout(const Dataset& ds, const ExclusiveLattice& ex, LayoutManifest m, NoBuild) : ds_(&ds), ex_(&ex), m_(std::move(m)) {
  m_.validate(ex);
  if (ds.size() != ex.n_vectors()) throw InputError("dataset and access data disagree on the number of vectors");
  for (const auto& u : m_.units) ids_.push_back(unit_vector_ids(u, ex));
  index_.resize(m_.units.size());
}

Layout::Layout(const Dataset& ds, const ExclusiveLattice& ex, LayoutManifest m, const HnswParams& hp)
    : Layout(ds, ex, std::move(m), NoBuild{}) {
  for (std::uint32_t u = 0; u < m_.units.size(); ++u)
    if (m_.units[u].kind == UnitKind::index) index_[u] = HnswIndex::build(ds, ids_[u], hp);
}

Layout Layout::load(const Dataset& ds, const ExclusiveLattice& ex, LayoutManifest m, const std::filesystem::path& dir) {
  Layout l(ds, ex, std::move(m), NoBuild{});
  for (std::uint32_t u = 0; u < l.m_.units.size(); ++u) {
    if (l.m_.units[u].kind != UnitKind::index) continue;
    l.index_[u] = HnswIndex::load(dir / ("unit_" + std::to_string(u) + ".hnsw"), ds);
    if (l.index_[u].ids() != l.ids_[u]) throw InputError("index file for unit " + std::to_string(u) + " holds other ids");
  }
  return l;
}

void Layout::save_indices(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  for (std::uint32_t u = 0; u < m_.units.size(); ++u)
    if (m_.units[u].kind == UnitKind::index) index_[u].save(dir / ("unit_" + std::to_string(u) + ".hnsw"));
}

std::vector<Probe> Layout::probes(Role r) const {
  if (r >= m_.n_roles) throw AuthorizationError("role " + std::to_string(r) + " is not part of this layout");
  std::vector<Probe> out;
  for (const auto& it : m_.plans[r]) out.push_back({it.unit, it.pure, it.lambda, it.authorized});
  return out;
}

std::vector<Probe> Layout::probes(const RoleSet& tau) const {
  std::vector<std::uint32_t> units;
  tau.for_each([&](Role r) {
    if (r >= m_.n_roles) throw AuthorizationError("role " + std::to_string(r) + " is not part of this layout");
    for (const auto& it : m_.plans[r]) units.push_back(it.unit);
  });
  std::sort(units.begin(), units.end());
  units.erase(std::unique(units.begin(), units.end()), units.end());
  std::vector<Probe> out;
  for (auto u : units) {
    std::size_t auth = 0;
    for (const auto& t : m_.units[u].blocks)
      if (t.intersects(tau)) auth += ex_->block(*ex_->find(t)).size();
    const auto size = m_.units[u].size;
    out.push_back({u, auth == size, std::uint32_t(*inflation_factor(size, auth)), auth});
  }
  return out;
}

std::vector<Neighbor> Layout::run_probes(std::span<const float> q, const std::vector<Probe>& probes,
                                         const IdFilter& allowed, std::size_t k, std::size_t efs, Strategy s,
                                         ExecStats* stats) const {
  if (k == 0) throw InputError("k must be at least 1");
  if (q.size() != ds_->dim()) throw InputError("query dimension does not match the dataset");
  ExecStats st;
  st.queries = 1;
  TopK rs(k);
  auto scan_unit = [&](const Probe& p) {
    for (auto id : ids_[p.unit])
      if (p.pure || allowed(id)) rs.push({id, l2sq(q.data(), (*ds_)[id].data(), ds_->dim())});
    st.leftover_ids_scanned += ids_[p.unit].size();
  };
  for (const auto& p : probes) {
    st.touched += m_.units[p.unit].size;
    st.touched_authorized += p.authorized;
  }
  st.purity_sum = st.touched ? double(st.touched_authorized) / double(st.touched) : 1.0;

  // Leftovers first, then pure indices, then impure ones by increasing inflation.
  std::vector<const Probe*> pure, impure;
  for (const auto& p : probes) {
    if (m_.units[p.unit].kind == UnitKind::leftover)
      scan_unit(p);
    else
      (p.pure ? pure : impure).push_back(&p);
  }
  for (const auto* p : pure) {
    const auto& idx = index_[p->unit];
    ++st.indices_touched;
    auto hits = efs >= idx.size() ? idx.scan(q, k, {}) : idx.search(q, {k, efs});
    for (const auto& h : hits) rs.push(h);
  }
  std::stable_sort(impure.begin(), impure.end(), [](auto* a, auto* b) { return a->lambda < b->lambda; });
  for (const auto* p : impure) {
    const auto& idx = index_[p->unit];
    ++st.indices_touched;
    ++st.impure_touched;
    const std::size_t inflated = std::size_t(p->lambda) * efs;
    st.efs_budget += inflated;
    if (s == Strategy::independent || inflated >= idx.size()) {
      // Independent execution, or the inflated beam covers the whole index anyway.
      for (const auto& h : idx.search_filtered(q, {k, efs}, allowed, double(p->lambda))) rs.push(h);
      st.efs_used += inflated;
      continue;
    }
    auto bs = idx.search_bounded(q, k, efs, inflated, allowed, rs.bound());
    for (const auto& h : bs.local) rs.push(h);
    if (bs.stopped_early) {
      ++st.phase2_skips;
      st.efs_used += std::min(efs, inflated);
      continue;
    }
    for (const auto& h : idx.resume(bs.cursor, inflated - efs, allowed, rs.bound())) rs.push(h);
    st.efs_used += bs.cursor.ef_spent;
  }
  if (stats) stats->add(st);
  return rs.sorted();
}

std::vector<Neighbor> Layout::exec(std::span<const float> q, Role r, std::size_t k, std::size_t efs, Strategy s,
                                   ExecStats* stats) const {
  auto pr = probes(r);
  const auto* ex = ex_;
  return run_probes(q, pr, [ex, r](std::uint32_t id) { return ex->tag_of(id).test(r); }, k, efs, s, stats);
}

std::vector<Neighbor> Layout::exec_independent(std::span<const float> q, Role r, std::size_t k, std::size_t efs,
                                               ExecStats* stats) const {
  return exec(q, r, k, efs, Strategy::independent, stats);
}

std::vector<Neighbor> Layout::exec_coordinated(std::span<const float> q, Role r, std::size_t k, std::size_t efs,
                                               ExecStats* stats) const {
  return exec(q, r, k, efs, Strategy::coordinated, stats);
}

std::vector<Neighbor> Layout::exec_multi_role(std::span<const float> q, const RoleSet& tau, std::size_t k,
                                              std::size_t efs, Strategy s, const HnswIndex* global,
                                              ExecStats* stats) const {
  if (tau.empty()) throw AuthorizationError("a query needs at least one role");
  if (tau.count() == 1) return exec(q, tau.roles()[0], k, efs, s, stats);
  const auto* ex = ex_;
  IdFilter allowed = [ex, tau](std::uint32_t id) { return ex->tag_of(id).intersects(tau); };
  const std::size_t auth = ex_->authorized_count(tau);
  if (global && double(auth) > kGlobalRouteShare * double(ex_->n_vectors())) {
    if (global->size() != ex_->n_vectors()) throw InputError("global index must hold every vector");
    ExecStats st;
    st.queries = 1;
    st.indices_touched = 1;
    st.touched = global->size();
    st.touched_authorized = auth;
    st.purity_sum = double(auth) / double(global->size());
    std::vector<Neighbor> out;
    if (auth == global->size()) {
      out = efs >= global->size() ? global->scan(q, k, {}) : global->search(q, {k, efs});
    } else {
      ++st.impure_touched;
      const auto lam = *inflation_factor(global->size(), auth);
      st.efs_budget = st.efs_used = lam * efs;
      out = global->search_filtered(q, {k, efs}, allowed, double(lam));
    }
    if (stats) stats->add(st);
    return out;
  }
  return run_probes(q, probes(tau), allowed, k, efs, s, stats);
}

}  // namespace veda
