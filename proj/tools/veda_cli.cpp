// Command-line front end: data generation, calibration, layout builds, queries, benchmarks.

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "veda/bench.hpp"
#include "veda/error.hpp"

using namespace veda;

namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << text;
}

Theta load_theta(const std::string& path) {
  if (path.empty()) return Theta{};
  auto j = nlohmann::json::parse(read_text(path), nullptr, false);
  if (j.is_discarded()) throw InputError(path + " is not JSON");
  // Accept a bare theta or a calibration report that embeds one.
  return theta_from_json(j.contains("theta") ? j["theta"].dump() : j.dump());
}

/// One line per query: whitespace-separated role ids.
std::vector<RoleSet> read_roles(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path);
  std::vector<RoleSet> out;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    RoleSet s;
    long r;
    while (ls >> r) {
      if (r < 0) throw InputError("negative role id in " + path);
      s.set(Role(r));
    }
    if (!ls.eof()) throw InputError("bad role line '" + line + "' in " + path);
    out.push_back(s);
  }
  return out;
}

struct HnswOpts {
  std::uint32_t M = 16;
  std::uint32_t efc = 200;
  std::uint64_t seed = 0x5eed;
  HnswParams params() const { return {M, 0, efc, seed}; }
};

void add_hnsw(CLI::App* c, HnswOpts& h) {
  c->add_option("--M", h.M, "HNSW out-degree")->capture_default_str();
  c->add_option("--efc", h.efc, "HNSW construction beam")->capture_default_str();
  c->add_option("--hnsw-seed", h.seed, "HNSW level seed")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"veda: access-controlled vector search layouts"};
  app.require_subcommand(1);

  // dataset gen | inspect
  auto* dataset = app.add_subcommand("dataset", "Generate or inspect fvecs data");
  dataset->require_subcommand(1);
  std::size_t dg_n = 50000;
  std::uint32_t dg_dim = 16, dg_clusters = 32;
  std::uint64_t dg_seed = 1;
  std::string dg_out;
  auto* dgen = dataset->add_subcommand("gen", "Gaussian-mixture vectors");
  dgen->add_option("--n", dg_n)->capture_default_str();
  dgen->add_option("--dim", dg_dim)->capture_default_str();
  dgen->add_option("--clusters", dg_clusters)->capture_default_str();
  dgen->add_option("--seed", dg_seed)->capture_default_str();
  dgen->add_option("--out", dg_out, "fvecs output")->required();
  std::string di_path;
  auto* dinsp = dataset->add_subcommand("inspect", "Print size, dimension and value range");
  dinsp->add_option("path", di_path)->required();

  // gen policy | workload
  auto* gen = app.add_subcommand("gen", "Generate access policies and query workloads");
  gen->require_subcommand(1);
  PolicySpec pspec;
  std::size_t gp_n = 0;
  std::string gp_data, gp_out, gp_spec;
  auto* gpol = gen->add_subcommand("policy", "Department-based Zipf policy");
  gpol->add_option("--n", gp_n, "number of vectors (or take it from --data)");
  gpol->add_option("--data", gp_data, "fvecs file whose size to use");
  gpol->add_option("--spec", gp_spec, "policy JSON; flags below override it");
  gpol->add_option("--roles", pspec.n_roles)->capture_default_str();
  gpol->add_option("--departments", pspec.n_departments)->capture_default_str();
  gpol->add_option("--blocks", pspec.n_blocks)->capture_default_str();
  gpol->add_option("--block-s", pspec.block_s)->capture_default_str();
  gpol->add_option("--block-alpha", pspec.block_alpha)->capture_default_str();
  gpol->add_option("--perm-s", pspec.perm_s)->capture_default_str();
  gpol->add_option("--perm-alpha", pspec.perm_alpha)->capture_default_str();
  gpol->add_option("--seed", pspec.seed)->capture_default_str();
  gpol->add_option("--out", gp_out, "access output (.jsonl for JSON lines, otherwise binary CSR)")->required();

  WorkloadSpec wspec;
  std::string gw_kind = "uniform-single", gw_data, gw_access, gw_queries, gw_roles;
  auto* gwl = gen->add_subcommand("workload", "Query vectors plus a role file");
  gwl->add_option("--data", gw_data)->required();
  gwl->add_option("--access", gw_access)->required();
  gwl->add_option("--kind", gw_kind)->capture_default_str();
  gwl->add_option("--n-queries", wspec.n_queries)->capture_default_str();
  gwl->add_option("--sensitivity", wspec.sensitivity)->capture_default_str();
  gwl->add_option("--noise", wspec.noise)->capture_default_str();
  gwl->add_option("--seed", wspec.seed)->capture_default_str();
  gwl->add_option("--queries-out", gw_queries)->required();
  gwl->add_option("--roles-out", gw_roles)->required();

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "Fit the latency model on this host");
  std::uint32_t cal_dim = 16;
  std::string cal_out;
  bool cal_quick = false;
  HnswOpts cal_h;
  cal->add_option("--dim", cal_dim)->capture_default_str();
  cal->add_option("--out", cal_out, "report JSON (theta plus raw samples)")->required();
  cal->add_flag("--quick", cal_quick, "sizes up to 2^14 and a 2^13 efs sweep");
  add_hnsw(cal, cal_h);

  // build
  auto* build = app.add_subcommand("build", "Partition, plan and optionally materialize indices");
  std::string b_data, b_access, b_opt = "effveda", b_theta, b_out, b_index_dir;
  double b_beta = 1.5;
  std::size_t b_efs = 100;
  long b_lambda = -1;
  HnswOpts b_h;
  build->add_option("--data", b_data, "fvecs (needed with --index-dir)");
  build->add_option("--access", b_access)->required();
  build->add_option("--optimizer", b_opt)->check(CLI::IsMember({"veda", "effveda"}))->capture_default_str();
  build->add_option("--beta", b_beta, "storage budget")->capture_default_str();
  build->add_option("--lambda", b_lambda, "index threshold; default is the modeled scan crossover");
  build->add_option("--efs", b_efs)->capture_default_str();
  build->add_option("--theta", b_theta, "theta or calibration report JSON");
  build->add_option("--out", b_out, "manifest JSON")->required();
  build->add_option("--index-dir", b_index_dir, "write HNSW files here");
  add_hnsw(build, b_h);

  // plan inspect
  auto* plan = app.add_subcommand("plan", "Inspect query plans");
  plan->require_subcommand(1);
  std::string p_manifest;
  long p_role = -1;
  auto* pinsp = plan->add_subcommand("inspect", "Show the plan of one role (or a summary)");
  pinsp->add_option("--manifest", p_manifest)->required();
  pinsp->add_option("--role", p_role);

  // query
  auto* query = app.add_subcommand("query", "Run queries against a built layout");
  std::string q_data, q_access, q_manifest, q_index_dir, q_queries, q_roles, q_out_ids, q_out_stats;
  bool q_global = false;
  std::string q_strategy = "coordinated";
  long q_role = -1;
  std::size_t q_k = 10, q_efs = 100;
  HnswOpts q_h;
  query->add_option("--data", q_data)->required();
  query->add_option("--access", q_access)->required();
  query->add_option("--manifest", q_manifest)->required();
  query->add_option("--index-dir", q_index_dir, "load indices from here instead of building");
  query->add_option("--queries", q_queries, "query fvecs")->required();
  query->add_option("--role", q_role, "role for every query");
  query->add_option("--roles", q_roles, "role file, one line of role ids per query");
  query->add_option("--k", q_k)->capture_default_str();
  query->add_option("--efs", q_efs)->capture_default_str();
  query->add_option("--strategy", q_strategy)
      ->check(CLI::IsMember({"coordinated", "independent"}))
      ->capture_default_str();
  query->add_flag("--global-index", q_global, "keep a global index for broad role sets");
  query->add_option("--out-ids", q_out_ids, "CSV query,rank,id,dist (stdout when unset)");
  query->add_option("--out-stats", q_out_stats, "per-query stats CSV");
  add_hnsw(query, q_h);

  // bench
  auto* bench = app.add_subcommand("bench", "Run the experiment grid and write CSVs");
  std::string be_config, be_out;
  bool be_print = false;
  bench->add_option("--config", be_config, "experiment JSON");
  bench->add_option("--out-dir", be_out, "overrides out_dir");
  bench->add_flag("--print-config", be_print, "print the default config and exit");

  CLI11_PARSE(app, argc, argv);

  try {
    if (dgen->parsed()) {
      auto ds = gen_dataset(dg_n, dg_dim, dg_clusters, dg_seed);
      save_fvecs(ds, dg_out);
      std::cout << "wrote " << ds.size() << " x " << ds.dim() << " to " << dg_out << "\n";
    } else if (dinsp->parsed()) {
      auto ds = load_fvecs(di_path);
      float lo = 0, hi = 0;
      if (!ds.coords().empty()) {
        auto [a, b] = std::minmax_element(ds.coords().begin(), ds.coords().end());
        lo = *a, hi = *b;
      }
      std::cout << "vectors " << ds.size() << "\ndim " << ds.dim() << "\nmin " << lo << "\nmax " << hi << "\n";
    } else if (gpol->parsed()) {
      PolicySpec spec = pspec;
      if (!gp_spec.empty()) {
        auto j = nlohmann::json::parse(read_text(gp_spec));
        auto flags = nlohmann::json::parse(pspec.to_json());
        // Explicit flags win over the file.
        for (const auto& [name, opt] : std::vector<std::pair<std::string, std::string>>{
                 {"n_roles", "--roles"}, {"n_departments", "--departments"}, {"n_blocks", "--blocks"},
                 {"block_s", "--block-s"}, {"block_alpha", "--block-alpha"}, {"perm_s", "--perm-s"},
                 {"perm_alpha", "--perm-alpha"}, {"seed", "--seed"}})
          if (gpol->count(opt)) j[name] = flags[name];
        spec = PolicySpec::from_json(j.dump());
      }
      std::size_t n = gp_n;
      if (!gp_data.empty()) n = load_fvecs(gp_data).size();
      if (n == 0) throw InputError("give --n or --data");
      auto pol = gen_policy(spec, n);
      save_access(pol.access, gp_out);
      auto ex = ExclusiveLattice::build(pol.access);
      std::cout << "rows " << n << "\nroles " << spec.n_roles << "\ndistinct_permissions " << pol.distinct_permissions
                << "\nexclusive_blocks " << ex.size() << "\n";
    } else if (gwl->parsed()) {
      auto ds = load_fvecs(gw_data);
      auto ex = ExclusiveLattice::build(load_access(gw_access));
      wspec.kind = parse_workload(gw_kind);
      auto qs = gen_workload(ds, ex, wspec);
      std::vector<float> coords;
      std::ofstream roles(gw_roles);
      if (!roles) throw InputError("cannot write " + gw_roles);
      for (const auto& q : qs) {
        coords.insert(coords.end(), q.x.begin(), q.x.end());
        auto rs = q.tau.roles();
        for (std::size_t i = 0; i < rs.size(); ++i) roles << (i ? " " : "") << rs[i];
        roles << "\n";
      }
      save_fvecs(Dataset(ds.dim(), std::move(coords)), gw_queries);
      std::cout << "wrote " << qs.size() << " queries\n";
    } else if (cal->parsed()) {
      HostSweepRunner runner(cal_dim, cal_h.params());
      CalibrationOptions opt;
      if (cal_quick) {
        opt.sizes = {1u << 10, 1u << 11, 1u << 12, 1u << 13, 1u << 14};
        opt.idx0 = 1u << 13;
      }
      try {
        auto rep = calibrate(runner, opt);
        write_text(cal_out, rep.to_json());
        std::cout << theta_to_json(rep.theta) << "\n";
      } catch (const CalibrationFailure& f) {
        write_text(cal_out, f.report().to_json());
        std::cerr << "calibration failed: " << f.what() << " (raw samples in " << cal_out << ")\n";
        return 3;
      }
    } else if (build->parsed()) {
      auto am = load_access(b_access);
      auto ex = ExclusiveLattice::build(am);
      OptimizerConfig cfg;
      cfg.theta = load_theta(b_theta);
      cfg.efs = b_efs;
      cfg.beta = b_beta;
      cfg.lambda_threshold = b_lambda < 0 ? crossover_size(cfg.theta, b_efs) : std::size_t(b_lambda);
      auto res = optimize(ex, cfg, parse_optimizer(b_opt));
      res.final.manifest.save(b_out);
      std::cout << "optimizer " << b_opt << "\nbeta " << b_beta << "\nachieved_sa " << res.final.manifest.sa
                << "\nlambda_threshold " << cfg.lambda_threshold << "\nindices " << res.final.manifest.index_count()
                << "\nunits " << res.final.manifest.units.size() << "\nmodeled_cost "
                << res.final.manifest.modeled_cost() << "\nseconds " << res.seconds << "\n";
      if (!b_index_dir.empty()) {
        if (b_data.empty()) throw InputError("--index-dir needs --data");
        auto ds = load_fvecs(b_data);
        Layout lay(ds, ex, res.final.manifest, b_h.params());
        lay.save_indices(b_index_dir);
        std::cout << "indices written to " << b_index_dir << "\n";
      }
    } else if (pinsp->parsed()) {
      auto m = LayoutManifest::load(p_manifest);
      if (p_role < 0) {
        std::cout << "optimizer " << m.optimizer << "\nsa " << m.sa << "\nunits " << m.units.size() << "\nindices "
                  << m.index_count() << "\nmodeled_cost " << m.modeled_cost() << "\n";
        for (Role r = 0; r < m.n_roles; ++r)
          std::cout << "role " << r << ": " << m.plans[r].size() << " units, cost " << m.modeled_cost(r) << "\n";
      } else {
        if (Role(p_role) >= m.n_roles) throw AuthorizationError("role " + std::to_string(p_role) + " is not in the layout");
        const Role r = Role(p_role);
        std::cout << "role " << r << " cost " << m.modeled_cost(r) << "\nunit,kind,key,size,pure,lambda,authorized\n";
        for (const auto& it : m.plans[r]) {
          const auto& u = m.units[it.unit];
          std::cout << it.unit << "," << (u.kind == UnitKind::index ? "index" : "leftover") << ","
                    << u.key.to_string() << "," << u.size << "," << it.pure << "," << it.lambda << ","
                    << it.authorized << "\n";
        }
      }
    } else if (query->parsed()) {
      auto ds = load_fvecs(q_data);
      auto ex = ExclusiveLattice::build(load_access(q_access));
      auto m = LayoutManifest::load(q_manifest);
      auto lay = q_index_dir.empty() ? Layout(ds, ex, m, q_h.params()) : Layout::load(ds, ex, m, q_index_dir);
      auto qs = load_fvecs(q_queries);
      std::vector<RoleSet> scopes;
      if (!q_roles.empty()) {
        scopes = read_roles(q_roles);
        if (scopes.size() != qs.size()) throw InputError("role file and query file have different lengths");
      } else if (q_role >= 0) {
        RoleSet s;
        s.set(Role(q_role));
        scopes.assign(qs.size(), s);
      } else {
        throw InputError("give --role or --roles");
      }
      for (const auto& s : scopes)
        if (s.empty() || s.span() > ex.n_roles())
          throw AuthorizationError("role set " + s.to_string() + " is not part of this layout");
      std::unique_ptr<HnswIndex> global;
      if (q_global) {
        std::vector<std::uint32_t> all(ds.size());
        for (std::uint32_t i = 0; i < all.size(); ++i) all[i] = i;
        global = std::make_unique<HnswIndex>(HnswIndex::build(ds, all, q_h.params()));
      }
      const auto strategy = parse_strategy(q_strategy);
      std::ofstream ids_file, stats_file;
      std::ostream* ids = &std::cout;
      if (!q_out_ids.empty()) {
        ids_file.open(q_out_ids);
        if (!ids_file) throw InputError("cannot write " + q_out_ids);
        ids = &ids_file;
      }
      if (!q_out_stats.empty()) {
        stats_file.open(q_out_stats);
        if (!stats_file) throw InputError("cannot write " + q_out_stats);
        stats_file << "query,roles,results,indices_touched,impure_touched,phase2_skips,leftover_ids_scanned,"
                      "efs_used,efs_budget,purity,latency_us\n";
      }
      *ids << "query,rank,id,dist\n";
      ExecStats total;
      for (std::size_t i = 0; i < qs.size(); ++i) {
        ExecStats st;
        const auto t0 = std::chrono::steady_clock::now();
        auto hits = lay.exec_multi_role(qs[i], scopes[i], q_k, q_efs, strategy, global.get(), &st);
        const double us = std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - t0).count();
        for (std::size_t j = 0; j < hits.size(); ++j) *ids << i << "," << j << "," << hits[j].id << "," << hits[j].dist << "\n";
        if (stats_file.is_open()) {
          auto rs = scopes[i].roles();
          std::string roles;
          for (std::size_t j = 0; j < rs.size(); ++j) roles += (j ? " " : "") + std::to_string(rs[j]);
          stats_file << i << "," << roles << "," << hits.size() << "," << st.indices_touched << ","
                     << st.impure_touched << "," << st.phase2_skips << "," << st.leftover_ids_scanned << ","
                     << st.efs_used << "," << st.efs_budget << "," << st.purity() << "," << us << "\n";
        }
        total.add(st);
      }
      std::cerr << "queries " << total.queries << ", indices/query " << total.indices_per_query() << ", skip rate "
                << total.skip_rate() << ", efs savings " << total.efs_savings() << "\n";
    } else if (bench->parsed()) {
      if (be_print) {
        std::cout << ExperimentConfig{}.to_json() << "\n";
        return 0;
      }
      auto cfg = be_config.empty() ? ExperimentConfig{} : ExperimentConfig::from_json(read_text(be_config));
      if (!be_out.empty()) cfg.out_dir = be_out;
      auto files = run_experiment(cfg, &std::cerr);
      std::cout << files.layouts.string() << "\n"
                << files.queries.string() << "\n"
                << files.sensitivity.string() << "\n"
                << files.lambda_sweep.string() << "\n";
    }
  } catch (const AuthorizationError& e) {
    std::cerr << "authorization error: " << e.what() << "\n";
    return 4;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
