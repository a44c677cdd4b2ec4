#include <algorithm>
#include <chrono>
#include <map>
#include <random>
#include <thread>

#include "veda/bench.hpp"
#include "veda/error.hpp"

namespace veda {

WorkloadKind parse_workload(const std::string& name) {
  for (auto k : kAllWorkloads)
    if (to_string(k) == name) return k;
  throw InputError("unknown workload '" + name +
                   "' (expected uniform-single, weighted-single, uniform-multi or weighted-multi)");
}

std::string to_string(WorkloadKind k) {
  switch (k) {
    case WorkloadKind::uniform_single: return "uniform-single";
    case WorkloadKind::weighted_single: return "weighted-single";
    case WorkloadKind::uniform_multi: return "uniform-multi";
    case WorkloadKind::weighted_multi: return "weighted-multi";
  }
  return "?";
}

std::vector<Query> gen_workload(const Dataset& ds, const ExclusiveLattice& ex, const WorkloadSpec& spec) {
  if (ds.size() != ex.n_vectors()) throw InputError("dataset and access data disagree on the number of vectors");
  if (spec.sensitivity < 0 || spec.sensitivity > 1) throw InputError("sensitivity must be in [0, 1]");
  std::mt19937_64 rng(spec.seed);

  std::vector<RoleSet> scopes;
  std::vector<double> weights;
  const bool single = spec.kind == WorkloadKind::uniform_single || spec.kind == WorkloadKind::weighted_single;
  if (single) {
    for (Role r = 0; r < ex.n_roles(); ++r) {
      const auto n = ex.authorized_count(r);
      if (n == 0) continue;
      RoleSet s;
      s.set(r);
      scopes.push_back(s);
      weights.push_back(spec.kind == WorkloadKind::weighted_single ? double(n) : 1.0);
    }
  } else {
    for (const auto& b : ex.blocks()) {
      if (b.tag.count() < 2 || b.size() == 0) continue;
      scopes.push_back(b.tag);
      weights.push_back(spec.kind == WorkloadKind::weighted_multi ? double(b.size()) : 1.0);
    }
  }
  if (scopes.empty()) throw InputError("workload " + to_string(spec.kind) + " has no eligible scopes in this data");
  std::discrete_distribution<std::size_t> pick_scope(weights.begin(), weights.end());

  // Authorized and unauthorized id lists, built once per scope.
  std::map<RoleSet, std::pair<std::vector<std::uint32_t>, std::vector<std::uint32_t>>> cache;
  auto lists = [&](const RoleSet& tau) -> const auto& {
    auto it = cache.find(tau);
    if (it != cache.end()) return it->second;
    auto& e = cache[tau];
    for (std::uint32_t v = 0; v < ex.n_vectors(); ++v) (ex.tag_of(v).intersects(tau) ? e.first : e.second).push_back(v);
    return e;
  };

  std::bernoulli_distribution inside(spec.sensitivity);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<Query> out;
  out.reserve(spec.n_queries);
  for (std::size_t i = 0; i < spec.n_queries; ++i) {
    Query q;
    q.tau = scopes[pick_scope(rng)];
    const auto& [auth, rest] = lists(q.tau);
    const bool in = inside(rng) || rest.empty();
    const auto& src = in ? auth : rest;
    const auto id = src[std::uniform_int_distribution<std::size_t>(0, src.size() - 1)(rng)];
    auto v = ds[id];
    q.x.assign(v.begin(), v.end());
    for (auto& c : q.x) c += float(spec.noise * noise(rng));
    out.push_back(std::move(q));
  }
  return out;
}

std::vector<std::vector<Neighbor>> ground_truth(const Dataset& ds, const ExclusiveLattice& ex,
                                                const std::vector<Query>& queries, std::size_t k) {
  std::vector<std::vector<Neighbor>> out;
  out.reserve(queries.size());
  for (const auto& q : queries) {
    const auto tau = q.tau;
    out.push_back(brute_force_topk(ds, q.x, k, [&ex, tau](std::uint32_t id) { return ex.tag_of(id).intersects(tau); }));
  }
  return out;
}

namespace {

std::vector<RoleSet> sorted_tags(const ExclusiveLattice& ex, const std::vector<std::uint32_t>& blocks) {
  std::vector<RoleSet> tags;
  for (auto b : blocks) tags.push_back(ex.block(b).tag);
  std::sort(tags.begin(), tags.end());
  return tags;
}

LayoutManifest empty_manifest(const ExclusiveLattice& ex, const Theta& theta, std::size_t efs, const char* name) {
  LayoutManifest m;
  m.optimizer = name;
  m.n_vectors = ex.n_vectors();
  m.n_roles = ex.n_roles();
  m.efs = efs;
  m.theta = theta;
  m.plans.resize(ex.n_roles());
  return m;
}

}  // namespace

LayoutManifest global_manifest(const ExclusiveLattice& ex, const Theta& theta, std::size_t efs) {
  auto m = empty_manifest(ex, theta, efs, "global");
  LayoutUnit u;
  std::vector<std::uint32_t> all(ex.size());
  for (std::uint32_t b = 0; b < ex.size(); ++b) {
    all[b] = b;
    u.key.roles = u.key.roles | ex.block(b).tag;
  }
  u.blocks = sorted_tags(ex, all);
  u.size = ex.n_vectors();
  m.units.push_back(u);
  for (Role r = 0; r < ex.n_roles(); ++r) {
    const auto auth = ex.authorized_count(r);
    if (auth) m.plans[r].push_back({0, auth == u.size, std::uint32_t(*inflation_factor(u.size, auth)), auth});
  }
  m.sa = m.beta = 1.0;
  return m;
}

LayoutManifest oracle_manifest(const ExclusiveLattice& ex, const Theta& theta, std::size_t efs,
                               std::size_t lambda_threshold) {
  auto m = empty_manifest(ex, theta, efs, "oracle");
  m.lambda_threshold = lambda_threshold;
  for (Role r = 0; r < ex.n_roles(); ++r) {
    const auto auth = ex.authorized_count(r);
    if (!auth) continue;
    LayoutUnit u;
    u.key.roles.set(r);
    u.blocks = sorted_tags(ex, ex.blocks_of_role(r));
    u.size = auth;
    u.kind = auth < lambda_threshold ? UnitKind::leftover : UnitKind::index;
    m.plans[r].push_back({std::uint32_t(m.units.size()), true, 1, auth});
    m.units.push_back(std::move(u));
  }
  m.sa = m.beta = double(m.stored()) / double(ex.n_vectors());
  return m;
}

double modeled_query_cost(const Layout& layout, const RoleSet& tau, std::size_t efs,
                          std::optional<std::size_t> global_size) {
  const auto& m = layout.manifest();
  const auto& ex = layout.lattice();
  if (tau.count() > 1 && global_size) {
    const auto auth = ex.authorized_count(tau);
    if (double(auth) > kGlobalRouteShare * double(ex.n_vectors())) {
      const auto lam = *inflation_factor(*global_size, auth);
      return cost_hnsw(m.theta, *global_size, efs, auth == *global_size, double(lam)).cost;
    }
  }
  std::vector<PlanEntry> plan;
  auto probes = tau.count() == 1 ? layout.probes(tau.roles()[0]) : layout.probes(tau);
  for (const auto& p : probes) {
    const auto& u = m.units[p.unit];
    plan.push_back({u.size, p.pure, double(p.lambda), u.kind == UnitKind::leftover});
  }
  return plan_cost(m.theta, plan, efs);
}

std::vector<std::size_t> lambda_grid(std::size_t lambda0) {
  std::vector<std::size_t> out;
  for (long d : {-1000L, -500L, 0L, 500L, 1000L}) out.push_back(std::size_t(std::max(1L, long(lambda0) + d)));
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

struct RunResult {
  std::vector<std::vector<Neighbor>> hits;
  std::vector<double> latency_us;
  ExecStats stats;
  double seconds = 0.0;
};

RunResult run_queries(const Layout& layout, const std::vector<Query>& queries, const MeasureOptions& opt) {
  using clock = std::chrono::steady_clock;
  RunResult out;
  out.hits.resize(queries.size());
  out.latency_us.resize(queries.size());
  const std::size_t threads = std::max<std::size_t>(1, std::min(opt.threads, queries.size()));
  std::vector<ExecStats> stats(threads);
  std::vector<std::exception_ptr> errors(threads);
  auto worker = [&](std::size_t t) {
    try {
      for (std::size_t i = t; i < queries.size(); i += threads) {
        const auto& q = queries[i];
        const auto t0 = clock::now();
        out.hits[i] = q.tau.count() == 1
                          ? layout.exec(q.x, q.tau.roles()[0], opt.k, opt.efs, opt.strategy, &stats[t])
                          : layout.exec_multi_role(q.x, q.tau, opt.k, opt.efs, opt.strategy, opt.global, &stats[t]);
        out.latency_us[i] = std::chrono::duration<double, std::micro>(clock::now() - t0).count();
      }
    } catch (...) {
      errors[t] = std::current_exception();
    }
  };
  const auto t0 = clock::now();
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
  }
  out.seconds = std::chrono::duration<double>(clock::now() - t0).count();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  for (const auto& s : stats) out.stats.add(s);
  return out;
}

double mean_modeled(const Layout& layout, const std::vector<Query>& queries, const MeasureOptions& opt) {
  if (queries.empty()) return 0.0;
  std::optional<std::size_t> gs;
  if (opt.global) gs = opt.global->size();
  double s = 0.0;
  for (const auto& q : queries) s += modeled_query_cost(layout, q.tau, opt.efs, gs);
  return s / double(queries.size());
}

}  // namespace

MetricsReport measure(const Layout& layout, const std::vector<Query>& queries,
                      const std::vector<std::vector<Neighbor>>& truth, const MeasureOptions& opt,
                      const Layout* reference) {
  if (truth.size() != queries.size()) throw InputError("ground truth does not match the queries");
  if (opt.repeats == 0) throw InputError("repeats must be at least 1");
  const auto& ex = layout.lattice();
  MetricsReport rep;
  rep.queries = queries.size();
  rep.sa = double(layout.manifest().stored()) / double(ex.n_vectors());
  rep.index_count = layout.manifest().index_count();
  rep.modeled_cost = mean_modeled(layout, queries, opt);

  double seconds = 0.0, latency = 0.0, recall = 0.0;
  ExecStats stats;
  for (std::size_t rpt = 0; rpt < opt.repeats; ++rpt) {
    auto run = run_queries(layout, queries, opt);
    seconds += run.seconds;
    stats.add(run.stats);
    for (std::size_t i = 0; i < queries.size(); ++i) {
      latency += run.latency_us[i];
      for (const auto& h : run.hits[i]) rep.unauthorized += !ex.tag_of(h.id).intersects(queries[i].tau);
      if (truth[i].empty()) {
        recall += 1.0;
        continue;
      }
      std::size_t hit = 0;
      for (const auto& t : truth[i])
        hit += std::any_of(run.hits[i].begin(), run.hits[i].end(), [&](const Neighbor& g) { return g.id == t.id; });
      recall += double(hit) / double(truth[i].size());
    }
  }
  const double total = double(queries.size() * opt.repeats);
  if (total > 0) {
    rep.recall = recall / total;
    rep.wall_us = latency / total;
    rep.qps = seconds > 0 ? total / seconds : 0.0;
  }
  rep.purity = stats.purity();
  rep.indices_per_query = stats.indices_per_query();
  rep.skip_rate = stats.skip_rate();
  rep.efs_savings = stats.efs_savings();

  if (reference) {
    const double ref_model = mean_modeled(*reference, queries, opt);
    rep.modeled_qa = ref_model > 0 ? rep.modeled_cost / ref_model : 0.0;
    double ref_latency = 0.0;
    for (std::size_t rpt = 0; rpt < opt.repeats; ++rpt) {
      auto run = run_queries(*reference, queries, opt);
      for (auto l : run.latency_us) ref_latency += l;
    }
    ref_latency /= std::max(1.0, total);
    rep.wall_qa = ref_latency > 0 ? rep.wall_us / ref_latency : 0.0;
  }
  return rep;
}

}  // namespace veda
