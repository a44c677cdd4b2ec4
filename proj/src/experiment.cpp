#include <fstream>
#include <algorithm>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "veda/bench.hpp"
#include "veda/error.hpp"

namespace veda {

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  ExperimentConfig c;
  try {
    auto j = nlohmann::json::parse(text);
    c.n = j.value("n", c.n);
    c.dim = j.value("dim", c.dim);
    c.clusters = j.value("clusters", c.clusters);
    c.seed = j.value("seed", c.seed);
    if (j.contains("data")) c.data = j["data"].get<std::string>();
    if (j.contains("access")) c.access = j["access"].get<std::string>();
    if (j.contains("policy")) c.policy = PolicySpec::from_json(j["policy"].dump());
    if (j.contains("theta")) c.theta = theta_from_json(j["theta"].dump());
    if (j.contains("hnsw")) {
      const auto& h = j["hnsw"];
      c.hnsw.M = h.value("M", c.hnsw.M);
      c.hnsw.M0 = h.value("M0", c.hnsw.M0);
      c.hnsw.efc = h.value("efc", c.hnsw.efc);
      c.hnsw.seed = h.value("seed", c.hnsw.seed);
    }
    c.k = j.value("k", c.k);
    c.efs_default = j.value("efs_default", c.efs_default);
    c.betas = j.value("betas", c.betas);
    c.efs = j.value("efs", c.efs);
    c.lambdas = j.value("lambdas", c.lambdas);
    c.sensitivities = j.value("sensitivities", c.sensitivities);
    if (j.contains("optimizers")) {
      c.optimizers.clear();
      for (const auto& o : j["optimizers"]) c.optimizers.push_back(parse_optimizer(o.get<std::string>()));
    }
    if (j.contains("workloads")) {
      c.workloads.clear();
      for (const auto& w : j["workloads"]) c.workloads.push_back(parse_workload(w.get<std::string>()));
    }
    c.query_betas = j.value("query_betas", c.query_betas);
    c.n_queries = j.value("n_queries", c.n_queries);
    c.repeats = j.value("repeats", c.repeats);
    c.threads = j.value("threads", c.threads);
    c.out_dir = j.value("out_dir", c.out_dir.string());
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("bad experiment config: ") + e.what());
  }
  for (auto b : c.betas)
    if (b < 1.0) throw InputError("every beta must be at least 1");
  if (c.k == 0 || c.efs_default == 0 || c.n_queries == 0 || c.repeats == 0)
    throw InputError("k, efs_default, n_queries and repeats must be positive");
  return c;
}

std::string ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["n"] = n;
  j["dim"] = dim;
  j["clusters"] = clusters;
  j["seed"] = seed;
  if (data) j["data"] = data->string();
  if (access) j["access"] = access->string();
  j["policy"] = nlohmann::json::parse(policy.to_json());
  j["theta"] = nlohmann::json::parse(theta_to_json(theta));
  j["hnsw"] = {{"M", hnsw.M}, {"M0", hnsw.M0}, {"efc", hnsw.efc}, {"seed", hnsw.seed}};
  j["k"] = k;
  j["efs_default"] = efs_default;
  j["betas"] = betas;
  j["efs"] = efs;
  j["lambdas"] = lambdas;
  j["sensitivities"] = sensitivities;
  j["optimizers"] = nlohmann::json::array();
  for (auto o : optimizers) j["optimizers"].push_back(to_string(o));
  j["workloads"] = nlohmann::json::array();
  for (auto w : workloads) j["workloads"].push_back(to_string(w));
  j["query_betas"] = query_betas;
  j["n_queries"] = n_queries;
  j["repeats"] = repeats;
  j["threads"] = threads;
  j["out_dir"] = out_dir.string();
  return j.dump(2);
}

namespace {

class Csv {
 public:
  Csv(const std::filesystem::path& path, const std::string& header) : out_(path) {
    if (!out_) throw InputError("cannot write " + path.string());
    out_ << header << '\n';
    out_ << std::setprecision(6);
  }
  template <typename... T>
  void row(const T&... v) {
    std::size_t i = 0;
    ((out_ << (i++ ? "," : "") << v), ...);
    out_ << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

std::string fmt_beta(double b) {
  std::ostringstream s;
  s << b;
  return s.str();
}

struct Built {
  std::string name;
  std::string optimizer;
  double beta = 0;
  std::unique_ptr<Layout> layout;
};

}  // namespace

ExperimentFiles run_experiment(const ExperimentConfig& cfg, std::ostream* log) {
  auto say = [&](const std::string& s) {
    if (log) *log << s << std::endl;
  };
  std::filesystem::create_directories(cfg.out_dir);

  const Dataset ds = cfg.data ? load_fvecs(*cfg.data) : gen_dataset(cfg.n, cfg.dim, cfg.clusters, cfg.seed);
  const AccessMatrix am = cfg.access ? load_access(*cfg.access) : gen_policy(cfg.policy, ds.size()).access;
  if (am.rows() != ds.size()) throw InputError("access data and vectors disagree on the number of rows");
  const auto ex = ExclusiveLattice::build(am);
  const std::size_t lambda0 = crossover_size(cfg.theta, cfg.efs_default);
  say("data: " + std::to_string(ds.size()) + " vectors, " + std::to_string(ex.n_roles()) + " roles, " +
      std::to_string(ex.size()) + " exclusive blocks; threshold " + std::to_string(lambda0));

  auto opt_cfg = [&](double beta, std::size_t lambda) {
    OptimizerConfig c;
    c.theta = cfg.theta;
    c.efs = cfg.efs_default;
    c.beta = beta;
    c.lambda_threshold = lambda;
    return c;
  };

  ExperimentFiles files{cfg.out_dir / "layouts.csv", cfg.out_dir / "queries.csv", cfg.out_dir / "sensitivity.csv",
                        cfg.out_dir / "lambda_sweep.csv"};

  // Layout grid: storage and modeled cost, no indices built.
  const auto gm = global_manifest(ex, cfg.theta, cfg.efs_default);
  const auto om = oracle_manifest(ex, cfg.theta, cfg.efs_default, lambda0);
  const double oracle_cost = om.modeled_cost();
  Csv layouts(files.layouts,
              "layout,optimizer,target_sa,lambda_threshold,achieved_sa,stored,index_count,leftover_count,"
              "modeled_cost,modeled_qa,partition_seconds");
  auto layout_row = [&](const std::string& name, const LayoutManifest& m, double target, double secs) {
    layouts.row(name, m.optimizer, target, m.lambda_threshold, m.sa, m.stored(), m.index_count(),
                m.units.size() - m.index_count(), m.modeled_cost(), m.modeled_cost() / oracle_cost, secs);
  };
  layout_row("global", gm, 1.0, 0.0);
  layout_row("oracle", om, om.sa, 0.0);
  std::vector<std::pair<std::pair<OptimizerKind, double>, LayoutManifest>> keep;
  for (auto kind : cfg.optimizers)
    for (auto beta : cfg.betas) {
      auto res = optimize(ex, opt_cfg(beta, lambda0), kind);
      say(to_string(kind) + " beta=" + fmt_beta(beta) + ": SA " + std::to_string(res.final.manifest.sa) + " in " +
          std::to_string(res.seconds) + " s");
      layout_row(to_string(kind) + "@" + fmt_beta(beta), res.final.manifest, beta, res.seconds);
      if (std::find(cfg.query_betas.begin(), cfg.query_betas.end(), beta) != cfg.query_betas.end())
        keep.push_back({{kind, beta}, res.final.manifest});
    }
  for (auto qb : cfg.query_betas)
    if (std::find(cfg.betas.begin(), cfg.betas.end(), qb) == cfg.betas.end())
      for (auto kind : cfg.optimizers) keep.push_back({{kind, qb}, optimize(ex, opt_cfg(qb, lambda0), kind).final.manifest});

  // Built layouts for query measurements.
  std::vector<Built> built;
  say("building global and oracle indices");
  built.push_back({"global", "global", 1.0, std::make_unique<Layout>(ds, ex, gm, cfg.hnsw)});
  built.push_back({"oracle", "oracle", om.sa, std::make_unique<Layout>(ds, ex, om, cfg.hnsw)});
  for (auto& [kb, m] : keep) {
    say("building " + to_string(kb.first) + "@" + fmt_beta(kb.second));
    built.push_back({to_string(kb.first) + "@" + fmt_beta(kb.second), to_string(kb.first), kb.second,
                     std::make_unique<Layout>(ds, ex, m, cfg.hnsw)});
  }
  const HnswIndex* global = &built[0].layout->index(0);
  const Layout* oracle = built[1].layout.get();

  Csv queries(files.queries,
              "layout,optimizer,beta,workload,strategy,efs,k,queries,recall,qps,wall_us,wall_qa,modeled_cost,"
              "modeled_qa,purity,indices_per_query,skip_rate,efs_savings,unauthorized");
  for (auto wk : cfg.workloads) {
    WorkloadSpec ws;
    ws.kind = wk;
    ws.n_queries = cfg.n_queries;
    ws.seed = cfg.seed + 101;
    std::vector<Query> qs;
    try {
      qs = gen_workload(ds, ex, ws);
    } catch (const InputError& e) {
      say(std::string("skipping workload: ") + e.what());
      continue;
    }
    const auto truth = ground_truth(ds, ex, qs, cfg.k);
    for (const auto& b : built)
      for (auto st : {Strategy::coordinated, Strategy::independent})
        for (auto efs : cfg.efs) {
          MeasureOptions mo{cfg.k, efs, st, cfg.repeats, cfg.threads, global};
          auto r = measure(*b.layout, qs, truth, mo, oracle);
          queries.row(b.name, b.optimizer, b.beta, to_string(wk), to_string(st), efs, cfg.k, qs.size(), r.recall,
                      r.qps, r.wall_us, r.wall_qa, r.modeled_cost, r.modeled_qa, r.purity, r.indices_per_query,
                      r.skip_rate, r.efs_savings, r.unauthorized);
        }
    say("workload " + to_string(wk) + " done");
  }

  Csv sens(files.sensitivity, "layout,optimizer,beta,sensitivity,efs,recall,qps,purity,unauthorized");
  for (auto s : cfg.sensitivities) {
    WorkloadSpec ws;
    ws.sensitivity = s;
    ws.n_queries = cfg.n_queries;
    ws.seed = cfg.seed + 202;
    const auto qs = gen_workload(ds, ex, ws);
    const auto truth = ground_truth(ds, ex, qs, cfg.k);
    for (const auto& b : built) {
      MeasureOptions mo{cfg.k, cfg.efs_default, Strategy::coordinated, cfg.repeats, cfg.threads, global};
      auto r = measure(*b.layout, qs, truth, mo);
      sens.row(b.name, b.optimizer, b.beta, s, cfg.efs_default, r.recall, r.qps, r.purity, r.unauthorized);
    }
  }
  say("sensitivity sweep done");

  auto lambdas = cfg.lambdas;
  if (lambdas.empty()) lambdas = lambda_grid(lambda0);
  const double sweep_beta = cfg.query_betas.empty() ? 1.3 : cfg.query_betas.front();
  Csv sweep(files.lambda_sweep,
            "optimizer,beta,lambda_threshold,achieved_sa,index_count,leftover_count,modeled_cost,recall,qps");
  {
    WorkloadSpec ws;
    ws.n_queries = cfg.n_queries;
    ws.seed = cfg.seed + 303;
    const auto qs = gen_workload(ds, ex, ws);
    const auto truth = ground_truth(ds, ex, qs, cfg.k);
    for (auto kind : cfg.optimizers)
      for (auto lam : lambdas) {
        auto m = optimize(ex, opt_cfg(sweep_beta, lam), kind).final.manifest;
        Layout lay(ds, ex, m, cfg.hnsw);
        MeasureOptions mo{cfg.k, cfg.efs_default, Strategy::coordinated, cfg.repeats, cfg.threads, nullptr};
        auto r = measure(lay, qs, truth, mo);
        sweep.row(to_string(kind), sweep_beta, lam, m.sa, m.index_count(), m.units.size() - m.index_count(),
                  m.modeled_cost(), r.recall, r.qps);
        say(to_string(kind) + " lambda=" + std::to_string(lam) + ": " + std::to_string(m.index_count()) + " indices");
      }
  }
  return files;
}

}  // namespace veda
