#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include <json.hpp>

#include "veda/bench.hpp"
#include "veda/error.hpp"

namespace veda {

Dataset gen_dataset(std::size_t n, std::uint32_t dim, std::uint32_t clusters, std::uint64_t seed, double spread) {
  if (n == 0 || dim == 0 || clusters == 0) throw InputError("dataset size, dimension and cluster count must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> centers(std::size_t(clusters) * dim);
  for (auto& c : centers) c = spread * g(rng);
  std::uniform_int_distribution<std::uint32_t> pick(0, clusters - 1);
  std::vector<float> coords(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = pick(rng);
    for (std::uint32_t j = 0; j < dim; ++j) coords[i * dim + j] = float(centers[std::size_t(c) * dim + j] + g(rng));
  }
  return Dataset(dim, std::move(coords));
}

void PolicySpec::validate() const {
  if (n_roles == 0 || n_roles > RoleSet::kMaxRoles) throw InputError("n_roles must be in [1, 128]");
  if (n_departments == 0 || n_blocks == 0) throw InputError("departments and blocks must be positive");
  if (!(block_alpha > 0) || !(perm_alpha > 0)) throw InputError("Zipf exponents must be positive");
  if (block_s < 0 || perm_s < 0) throw InputError("Zipf shifts must be non-negative");
  if (max_departments_per_role == 0 || max_departments_per_block == 0)
    throw InputError("departments per role and per block must be positive");
}

std::string PolicySpec::to_json() const {
  nlohmann::json j{{"n_roles", n_roles},
                   {"n_departments", n_departments},
                   {"n_blocks", n_blocks},
                   {"block_s", block_s},
                   {"block_alpha", block_alpha},
                   {"perm_s", perm_s},
                   {"perm_alpha", perm_alpha},
                   {"max_departments_per_role", max_departments_per_role},
                   {"max_departments_per_block", max_departments_per_block},
                   {"seed", seed}};
  return j.dump();
}

PolicySpec PolicySpec::from_json(const std::string& text) {
  PolicySpec p;
  try {
    auto j = nlohmann::json::parse(text);
    p.n_roles = j.value("n_roles", p.n_roles);
    p.n_departments = j.value("n_departments", p.n_departments);
    p.n_blocks = j.value("n_blocks", p.n_blocks);
    p.block_s = j.value("block_s", p.block_s);
    p.block_alpha = j.value("block_alpha", p.block_alpha);
    p.perm_s = j.value("perm_s", p.perm_s);
    p.perm_alpha = j.value("perm_alpha", p.perm_alpha);
    p.max_departments_per_role = j.value("max_departments_per_role", p.max_departments_per_role);
    p.max_departments_per_block = j.value("max_departments_per_block", p.max_departments_per_block);
    p.seed = j.value("seed", p.seed);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("bad policy spec: ") + e.what());
  }
  p.validate();
  return p;
}

std::vector<std::size_t> zipf_sizes(std::size_t n_blocks, double s, double alpha, std::size_t total) {
  if (n_blocks == 0) throw InputError("need at least one block");
  std::vector<double> w(n_blocks);
  for (std::size_t i = 0; i < n_blocks; ++i) w[i] = std::pow(double(i + 1) + s, -alpha);
  // One vector per block up front, the rest split by weight.
  const std::size_t base = total >= n_blocks ? 1 : 0;
  const std::size_t rest = total - base * n_blocks;
  const double sum = std::accumulate(w.begin(), w.end(), 0.0);
  std::vector<std::size_t> out(n_blocks, base);
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t given = 0;
  for (std::size_t i = 0; i < n_blocks; ++i) {
    const double share = double(rest) * w[i] / sum;
    const auto whole = std::size_t(std::floor(share));
    out[i] += whole;
    given += whole;
    rem.emplace_back(share - double(whole), i);
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; given < rest; ++i, ++given) ++out[rem[i % rem.size()].second];
  return out;
}

GeneratedPolicy gen_policy(const PolicySpec& spec, std::size_t n_vectors) {
  spec.validate();
  if (n_vectors == 0) throw InputError("cannot generate a policy for an empty dataset");
  std::mt19937_64 rng(spec.seed);

  // Department grants per role, then make sure every department is granted somewhere.
  std::vector<std::vector<std::uint32_t>> dept_roles(spec.n_departments);
  std::uniform_int_distribution<std::uint32_t> dept(0, spec.n_departments - 1);
  std::uniform_int_distribution<std::uint32_t> n_grants(1, std::min(spec.max_departments_per_role, spec.n_departments));
  for (std::uint32_t r = 0; r < spec.n_roles; ++r) {
    std::set<std::uint32_t> ds;
    for (auto want = n_grants(rng); ds.size() < want;) ds.insert(dept(rng));
    for (auto d : ds) dept_roles[d].push_back(r);
  }
  std::uniform_int_distribution<std::uint32_t> role(0, spec.n_roles - 1);
  for (auto& roles : dept_roles)
    if (roles.empty()) roles.push_back(role(rng));

  // Department popularity decides which departments own each block.
  std::vector<double> pw(spec.n_departments);
  for (std::uint32_t j = 0; j < spec.n_departments; ++j)
    pw[j] = std::pow(double(j + 1) + spec.perm_s, -spec.perm_alpha);
  std::discrete_distribution<std::uint32_t> owner(pw.begin(), pw.end());
  std::uniform_int_distribution<std::uint32_t> n_owners(1, std::min(spec.max_departments_per_block, spec.n_departments));

  GeneratedPolicy out;
  out.block_sizes = zipf_sizes(spec.n_blocks, spec.block_s, spec.block_alpha, n_vectors);
  std::vector<std::vector<std::uint32_t>> rows;
  rows.reserve(n_vectors);
  std::set<std::vector<std::uint32_t>> tags;
  for (auto size : out.block_sizes) {
    std::set<std::uint32_t> owners;
    for (auto want = n_owners(rng); owners.size() < want;) owners.insert(owner(rng));
    std::set<std::uint32_t> roles;
    for (auto d : owners) roles.insert(dept_roles[d].begin(), dept_roles[d].end());
    std::vector<std::uint32_t> tag(roles.begin(), roles.end());
    if (size) tags.insert(tag);
    for (std::size_t i = 0; i < size; ++i) rows.push_back(tag);
  }
  // Blocks are laid out in generation order; shuffle so ids carry no block structure.
  std::shuffle(rows.begin(), rows.end(), rng);
  out.access = AccessMatrix::from_rows(rows, spec.n_roles);
  out.distinct_permissions = tags.size();
  return out;
}

}  // namespace veda
