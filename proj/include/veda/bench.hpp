#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "veda/access.hpp"
#include "veda/cost_model.hpp"
#include "veda/dataset.hpp"
#include "veda/hnsw.hpp"
#include "veda/layout.hpp"
#include "veda/optimizer.hpp"
#include "veda/query.hpp"

namespace veda {

// ---------------------------------------------------------------- data and policies

/// Gaussian mixture with `clusters` centers drawn from N(0, spread^2) and unit noise.
Dataset gen_dataset(std::size_t n, std::uint32_t dim, std::uint32_t clusters, std::uint64_t seed,
                    double spread = 3.0);

/// Data is owned by departments; each role sees the union of its departments' data.
struct PolicySpec {
  std::uint32_t n_roles = 12;
  std::uint32_t n_departments = 24;
  std::size_t n_blocks = 200;
  double block_s = 1.0;  ///< block sizes follow (i + s)^-alpha, ranks from 1
  double block_alpha = 1.5;
  double perm_s = 2.0;  ///< blocks per department follow (j + s')^-alpha'
  double perm_alpha = 1.5;
  std::uint32_t max_departments_per_role = 4;
  std::uint32_t max_departments_per_block = 2;
  std::uint64_t seed = 1;

  /// Throws InputError for empty sizes or non-positive exponents.
  void validate() const;
  std::string to_json() const;
  static PolicySpec from_json(const std::string& text);
};

struct GeneratedPolicy {
  AccessMatrix access;
  std::vector<std::size_t> block_sizes;  ///< generated (pre-merge) block sizes
  std::size_t distinct_permissions = 0;  ///< distinct role sets over the data
};

/// Sizes proportional to (i + s)^-alpha, rounded by largest remainder to sum to `total`.
/// Every block gets at least one vector when total >= n_blocks.
std::vector<std::size_t> zipf_sizes(std::size_t n_blocks, double s, double alpha, std::size_t total);

/// Deterministic under spec.seed. Every vector gets at least one role.
GeneratedPolicy gen_policy(const PolicySpec& spec, std::size_t n_vectors);

// ---------------------------------------------------------------- workloads

enum class WorkloadKind { uniform_single, weighted_single, uniform_multi, weighted_multi };

WorkloadKind parse_workload(const std::string& name);
std::string to_string(WorkloadKind k);
inline constexpr WorkloadKind kAllWorkloads[] = {WorkloadKind::uniform_single, WorkloadKind::weighted_single,
                                                 WorkloadKind::uniform_multi, WorkloadKind::weighted_multi};

struct WorkloadSpec {
  WorkloadKind kind = WorkloadKind::uniform_single;
  std::size_t n_queries = 100;
  double sensitivity = 1.0;  ///< fraction of query vectors drawn from authorized data
  double noise = 0.1;        ///< gaussian perturbation added to the drawn vector
  std::uint64_t seed = 7;
};

struct Query {
  std::vector<float> x;
  RoleSet tau;  ///< one role for single-role workloads
};

/// Single-role kinds skip roles that see nothing. Multi-role kinds draw tau from the
/// multi-role tags present in the data and throw InputError when there are none.
std::vector<Query> gen_workload(const Dataset& ds, const ExclusiveLattice& ex, const WorkloadSpec& spec);

/// Exact authorized top-k for every query.
std::vector<std::vector<Neighbor>> ground_truth(const Dataset& ds, const ExclusiveLattice& ex,
                                                const std::vector<Query>& queries, std::size_t k);

// ---------------------------------------------------------------- baselines

/// One index over everything; every role probes it (impure unless it sees all data).
LayoutManifest global_manifest(const ExclusiveLattice& ex, const Theta& theta, std::size_t efs);
/// One pure unit per role holding exactly D(r); units below `lambda_threshold` are scanned.
LayoutManifest oracle_manifest(const ExclusiveLattice& ex, const Theta& theta, std::size_t efs,
                               std::size_t lambda_threshold = 0);

/// Modeled cost of one query: the role plan, or the union plan for role sets (global
/// routing applies when `global_size` is set).
double modeled_query_cost(const Layout& layout, const RoleSet& tau, std::size_t efs,
                          std::optional<std::size_t> global_size = std::nullopt);

/// Indexing thresholds around `lambda0` in steps of 500, as in the original threshold sweep
/// (1900..3900 around a 2900 crossover). Values stay >= 1.
std::vector<std::size_t> lambda_grid(std::size_t lambda0);

// ---------------------------------------------------------------- metrics

struct MeasureOptions {
  std::size_t k = 10;
  std::size_t efs = 100;
  Strategy strategy = Strategy::coordinated;
  std::size_t repeats = 1;
  std::size_t threads = 1;             ///< worker pool size for throughput
  const HnswIndex* global = nullptr;   ///< for role-set routing
};

struct MetricsReport {
  std::size_t queries = 0;  ///< per repeat
  double sa = 1.0;
  std::size_t index_count = 0;
  double modeled_cost = 0.0;  ///< mean modeled query cost over the workload
  double modeled_qa = 0.0;    ///< vs the reference layout, 0 when none given
  double wall_us = 0.0;       ///< mean per-query latency
  double wall_qa = 0.0;
  double qps = 0.0;
  double recall = 0.0;
  double purity = 1.0;
  double indices_per_query = 0.0;
  double skip_rate = 0.0;
  double efs_savings = 0.0;
  std::size_t unauthorized = 0;  ///< returned ids outside the query's authorized data
};

/// Runs the workload (all repeats) and scores it. `reference` (usually the Oracle) gives QA.
MetricsReport measure(const Layout& layout, const std::vector<Query>& queries,
                      const std::vector<std::vector<Neighbor>>& truth, const MeasureOptions& opt,
                      const Layout* reference = nullptr);

// ---------------------------------------------------------------- experiments

struct ExperimentConfig {
  std::size_t n = 20000;
  std::uint32_t dim = 16;
  std::uint32_t clusters = 32;
  std::uint64_t seed = 1;
  std::optional<std::filesystem::path> data;    ///< fvecs; generated when unset
  std::optional<std::filesystem::path> access;  ///< access file; generated when unset
  PolicySpec policy;
  Theta theta;
  HnswParams hnsw{16, 0, 200, 0x5eed};
  std::size_t k = 10;
  std::size_t efs_default = 100;
  std::vector<double> betas{1.0, 1.1, 1.3, 1.5, 2.0, 3.0};
  std::vector<std::size_t> efs{10, 50, 100, 300, 500, 1000};
  std::vector<std::size_t> lambdas{};          ///< empty: around the modeled crossover
  std::vector<double> sensitivities{0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<OptimizerKind> optimizers{OptimizerKind::veda, OptimizerKind::effveda};
  std::vector<WorkloadKind> workloads{WorkloadKind::uniform_single};
  std::vector<double> query_betas{1.3};        ///< betas whose layouts are built and queried
  std::size_t n_queries = 100;
  std::size_t repeats = 1;
  std::size_t threads = 1;
  std::filesystem::path out_dir = "bench_out";

  static ExperimentConfig from_json(const std::string& text);
  std::string to_json() const;
};

struct ExperimentFiles {
  std::filesystem::path layouts, queries, sensitivity, lambda_sweep;
};

/// Writes layouts.csv, queries.csv, sensitivity.csv and lambda_sweep.csv into out_dir.
ExperimentFiles run_experiment(const ExperimentConfig& cfg, std::ostream* log = nullptr);

// ---------------------------------------------------------------- host timing

/// Times HNSW search and brute-force scans on synthetic data of each requested size.
class HostSweepRunner : public SweepRunner {
 public:
  HostSweepRunner(std::uint32_t dim, const HnswParams& params, std::size_t n_queries = 200, std::uint64_t seed = 3);
  double time_search(std::size_t n, std::size_t efs) override;
  double time_scan(std::size_t n) override;

 private:
  const HnswIndex& index_for(std::size_t n);

  std::uint32_t dim_;
  HnswParams params_;
  std::uint64_t seed_;
  Dataset data_;
  std::vector<std::vector<float>> queries_;
  std::size_t built_n_ = 0;
  std::unique_ptr<HnswIndex> index_;
};

}  // namespace veda
