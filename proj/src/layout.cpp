#include "veda/layout.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "veda/error.hpp"

namespace veda {

namespace {

nlohmann::json roles_json(const RoleSet& s) { return s.roles(); }

RoleSet roles_from(const nlohmann::json& j) {
  RoleSet s;
  for (const auto& r : j) s.set(r.get<Role>());
  return s;
}

std::uint32_t find_block(const ExclusiveLattice& ex, const RoleSet& tag) {
  auto b = ex.find(tag);
  if (!b) throw InputError("layout names block " + tag.to_string() + " which the access data does not have");
  return *b;
}

}  // namespace

std::size_t LayoutManifest::stored() const {
  std::size_t s = 0;
  for (const auto& u : units) s += u.size;
  return s;
}

std::size_t LayoutManifest::index_count() const {
  return std::count_if(units.begin(), units.end(), [](const auto& u) { return u.kind == UnitKind::index; });
}

std::vector<PlanEntry> LayoutManifest::plan_entries(Role r) const {
  std::vector<PlanEntry> out;
  for (const auto& it : plans.at(r)) {
    const auto& u = units.at(it.unit);
    out.push_back({u.size, it.pure, double(it.lambda), u.kind == UnitKind::leftover});
  }
  return out;
}

double LayoutManifest::modeled_cost(Role r) const {
  auto e = plan_entries(r);
  return plan_cost(theta, e, efs);
}

double LayoutManifest::modeled_cost(std::vector<double> weights) const {
  if (weights.empty()) weights = uniform_weights(n_roles);
  std::vector<std::vector<PlanEntry>> all;
  for (Role r = 0; r < n_roles; ++r) all.push_back(plan_entries(r));
  return avg_cost(theta, all, weights, efs);
}

void LayoutManifest::validate(const ExclusiveLattice& ex) const {
  if (ex.n_vectors() != n_vectors) throw InputError("layout was built for a different number of vectors");
  if (ex.n_roles() != n_roles || plans.size() != n_roles) throw InputError("layout role count does not match");
  std::vector<std::vector<std::uint32_t>> unit_blocks;
  for (const auto& u : units) {
    std::vector<std::uint32_t> bs;
    std::size_t size = 0;
    for (const auto& t : u.blocks) {
      bs.push_back(find_block(ex, t));
      size += ex.block(bs.back()).size();
    }
    if (size != u.size) throw InputError("unit " + u.key.to_string() + " size does not match its blocks");
    unit_blocks.push_back(std::move(bs));
  }
  for (Role r = 0; r < n_roles; ++r) {
    std::vector<char> seen(ex.size(), 0);
    for (const auto& it : plans[r]) {
      if (it.unit >= units.size()) throw InputError("plan references a missing unit");
      std::size_t auth = 0;
      for (auto b : unit_blocks[it.unit])
        if (ex.block(b).tag.test(r)) auth += ex.block(b).size(), seen[b] = 1;
      if (auth != it.authorized || it.pure != (auth == units[it.unit].size) || auth == 0 ||
          it.lambda != *inflation_factor(units[it.unit].size, auth))
        throw InputError("plan entry for role " + std::to_string(r) + " disagrees with unit " +
                         units[it.unit].key.to_string());
    }
    for (auto b : ex.blocks_of_role(r))
      if (!seen[b])
        throw CoverageError("role " + std::to_string(r) + " plan misses block " + ex.block(b).tag.to_string());
  }
}

std::string LayoutManifest::to_json() const {
  nlohmann::json j;
  j["optimizer"] = optimizer;
  j["beta"] = beta;
  j["sa"] = sa;
  j["n_vectors"] = n_vectors;
  j["n_roles"] = n_roles;
  j["lambda_threshold"] = lambda_threshold;
  j["efs"] = efs;
  j["theta"] = nlohmann::json::parse(theta_to_json(theta));
  j["units"] = nlohmann::json::array();
  for (const auto& u : units) {
    nlohmann::json ju{{"key", roles_json(u.key.roles)},
                      {"copy", u.key.copy},
                      {"kind", u.kind == UnitKind::index ? "index" : "leftover"},
                      {"size", u.size}};
    ju["blocks"] = nlohmann::json::array();
    for (const auto& t : u.blocks) ju["blocks"].push_back(roles_json(t));
    j["units"].push_back(std::move(ju));
  }
  j["plans"] = nlohmann::json::array();
  for (Role r = 0; r < plans.size(); ++r) {
    nlohmann::json jp{{"role", r}, {"entries", nlohmann::json::array()}};
    for (const auto& it : plans[r])
      jp["entries"].push_back(
          {{"unit", it.unit}, {"pure", it.pure}, {"lambda", it.lambda}, {"authorized", it.authorized}});
    j["plans"].push_back(std::move(jp));
  }
  return j.dump(1);
}

LayoutManifest LayoutManifest::from_json(const std::string& text) {
  LayoutManifest m;
  try {
    auto j = nlohmann::json::parse(text);
    m.optimizer = j.at("optimizer").get<std::string>();
    m.beta = j.at("beta").get<double>();
    m.sa = j.at("sa").get<double>();
    m.n_vectors = j.at("n_vectors").get<std::size_t>();
    m.n_roles = j.at("n_roles").get<std::uint32_t>();
    m.lambda_threshold = j.at("lambda_threshold").get<std::size_t>();
    m.efs = j.at("efs").get<std::size_t>();
    m.theta = theta_from_json(j.at("theta").dump());
    for (const auto& ju : j.at("units")) {
      LayoutUnit u;
      u.key = NodeKey{roles_from(ju.at("key")), ju.at("copy").get<std::uint32_t>()};
      auto kind = ju.at("kind").get<std::string>();
      if (kind != "index" && kind != "leftover") throw InputError("unknown unit kind " + kind);
      u.kind = kind == "index" ? UnitKind::index : UnitKind::leftover;
      u.size = ju.at("size").get<std::size_t>();
      for (const auto& t : ju.at("blocks")) u.blocks.push_back(roles_from(t));
      m.units.push_back(std::move(u));
    }
    m.plans.resize(m.n_roles);
    for (const auto& jp : j.at("plans")) {
      auto r = jp.at("role").get<Role>();
      if (r >= m.n_roles) throw InputError("plan for unknown role " + std::to_string(r));
      for (const auto& e : jp.at("entries"))
        m.plans[r].push_back({e.at("unit").get<std::uint32_t>(), e.at("pure").get<bool>(),
                              e.at("lambda").get<std::uint32_t>(), e.at("authorized").get<std::size_t>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed layout manifest: ") + e.what());
  }
  return m;
}

void LayoutManifest::save(const std::filesystem::path& path) const {
  std::ofstream f(path);
  if (!f) throw InputError("cannot write " + path.string());
  f << to_json() << '\n';
}

LayoutManifest LayoutManifest::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return from_json(ss.str());
}

LayoutManifest manifest_from_lattice(const Lattice& lat, const PlanSet& plans, const std::string& optimizer,
                                     double beta, std::size_t lambda_threshold, std::size_t efs, const Theta& theta) {
  const auto& ex = lat.ex();
  LayoutManifest m;
  m.optimizer = optimizer;
  m.beta = beta;
  m.n_vectors = ex.n_vectors();
  m.n_roles = ex.n_roles();
  m.lambda_threshold = lambda_threshold;
  m.efs = efs;
  m.theta = theta;

  auto ids = lat.alive();
  std::sort(ids.begin(), ids.end(), [&](auto x, auto y) {
    const auto &a = lat.node(x), &b = lat.node(y);
    if (a.leftover != b.leftover) return !a.leftover;
    return a.key < b.key;
  });
  std::vector<std::uint32_t> unit_of(lat.slots(), UINT32_MAX);
  for (auto id : ids) {
    const auto& n = lat.node(id);
    LayoutUnit u;
    u.kind = n.leftover ? UnitKind::leftover : UnitKind::index;
    u.key = n.key;
    u.size = n.size;
    for (auto b : lat.blocks(id)) u.blocks.push_back(ex.block(b).tag);
    unit_of[id] = std::uint32_t(m.units.size());
    m.units.push_back(std::move(u));
  }
  m.plans.resize(m.n_roles);
  for (Role r = 0; r < m.n_roles; ++r) {
    for (auto id : plans.plans.at(r).nodes) {
      if (unit_of.at(id) == UINT32_MAX) throw InputError("plan references a removed node");
      const auto& n = lat.node(id);
      m.plans[r].push_back({unit_of[id], n.auth[r] == n.size, std::uint32_t(lat.lambda(id, r, false)), n.auth[r]});
    }
    std::sort(m.plans[r].begin(), m.plans[r].end(), [](auto& a, auto& b) { return a.unit < b.unit; });
  }
  m.sa = double(m.stored()) / double(m.n_vectors);
  return m;
}

std::vector<std::uint32_t> unit_vector_ids(const LayoutUnit& u, const ExclusiveLattice& ex) {
  std::vector<std::uint32_t> ids;
  ids.reserve(u.size);
  for (const auto& t : u.blocks) {
    const auto& b = ex.block(find_block(ex, t));
    ids.insert(ids.end(), b.ids.begin(), b.ids.end());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace veda
