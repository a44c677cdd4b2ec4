#include "veda/access.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "veda/error.hpp"

namespace veda {

RoleSet::RoleSet(std::initializer_list<Role> roles) {
  for (auto r : roles) set(r);
}

void RoleSet::set(Role r) {
  if (r >= kMaxRoles) throw InputError("role " + std::to_string(r) + " exceeds the 128-role limit");
  w_[r >> 6] |= 1ull << (r & 63);
}

std::vector<Role> RoleSet::roles() const {
  std::vector<Role> out;
  out.reserve(count());
  for_each([&](Role r) { out.push_back(r); });
  return out;
}

std::size_t RoleSet::span() const noexcept {
  if (w_[1]) return 128 - std::countl_zero(w_[1]);
  if (w_[0]) return 64 - std::countl_zero(w_[0]);
  return 0;
}

std::string RoleSet::to_string() const {
  std::string s = "{";
  bool first = true;
  for_each([&](Role r) {
    if (!first) s += ',';
    s += std::to_string(r);
    first = false;
  });
  return s + "}";
}

RoleSet AccessMatrix::tag(std::size_t i) const {
  auto r = row(i);
  return RoleSet::from_range(r.begin(), r.end());
}

AccessMatrix AccessMatrix::from_rows(const std::vector<std::vector<std::uint32_t>>& rows, std::uint32_t n_roles) {
  AccessMatrix am;
  am.indptr.reserve(rows.size() + 1);
  std::uint32_t max_role = 0;
  bool any = false;
  for (const auto& r : rows) {
    std::vector<std::uint32_t> sorted = r;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    for (auto x : sorted) {
      max_role = std::max(max_role, x);
      any = true;
    }
    am.indices.insert(am.indices.end(), sorted.begin(), sorted.end());
    am.indptr.push_back(am.indices.size());
  }
  am.n_roles = n_roles ? n_roles : (any ? max_role + 1 : 0);
  return am;
}

void AccessMatrix::validate() const {
  if (indptr.empty() || indptr.front() != 0 || indptr.back() != indices.size())
    throw InputError("access matrix indptr does not match indices");
  if (n_roles > RoleSet::kMaxRoles) throw InputError("at most 128 roles are supported");
  for (std::size_t i = 0; i < rows(); ++i) {
    if (indptr[i + 1] < indptr[i]) throw InputError("access matrix indptr is not monotone at row " + std::to_string(i));
    auto r = row(i);
    if (r.empty()) throw PolicyError("vector " + std::to_string(i) + " has no role");
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (r[j] >= n_roles)
        throw InputError("vector " + std::to_string(i) + " references unknown role " + std::to_string(r[j]));
      if (j > 0 && r[j] <= r[j - 1])
        throw InputError("roles of vector " + std::to_string(i) + " are not strictly increasing");
    }
  }
}

namespace {

std::uint32_t infer_roles(const std::vector<std::uint32_t>& indices, std::uint32_t n_roles) {
  if (n_roles) return n_roles;
  std::uint32_t m = 0;
  for (auto x : indices) m = std::max(m, x + 1);
  return m;
}

template <class T>
void read_exact(std::ifstream& in, T* dst, std::size_t count, std::uint64_t& offset, const char* what) {
  in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(sizeof(T) * count));
  if (static_cast<std::size_t>(in.gcount()) != sizeof(T) * count)
    throw FormatError(std::string("truncated ") + what, offset);
  offset += sizeof(T) * count;
}

}  // namespace

void save_access_binary(const AccessMatrix& am, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  std::uint64_t n = am.rows(), nnz = am.nnz();
  out.write(reinterpret_cast<const char*>(&n), 8);
  out.write(reinterpret_cast<const char*>(&nnz), 8);
  out.write(reinterpret_cast<const char*>(am.indptr.data()), static_cast<std::streamsize>(8 * am.indptr.size()));
  out.write(reinterpret_cast<const char*>(am.indices.data()), static_cast<std::streamsize>(4 * am.indices.size()));
  if (!out) throw InputError("write failed for " + path.string());
}

AccessMatrix load_access_binary(const std::filesystem::path& path, std::uint32_t n_roles) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::uint64_t offset = 0, n = 0, nnz = 0;
  read_exact(in, &n, 1, offset, "header");
  read_exact(in, &nnz, 1, offset, "header");
  AccessMatrix am;
  am.indptr.resize(n + 1);
  am.indices.resize(nnz);
  read_exact(in, am.indptr.data(), n + 1, offset, "indptr");
  read_exact(in, am.indices.data(), nnz, offset, "indices");
  am.n_roles = infer_roles(am.indices, n_roles);
  am.validate();
  return am;
}

void save_access_jsonl(const AccessMatrix& am, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  for (std::size_t i = 0; i < am.rows(); ++i) {
    auto r = am.row(i);
    nlohmann::json j{{"id", i}, {"roles", std::vector<std::uint32_t>(r.begin(), r.end())}};
    out << j.dump() << '\n';
  }
}

AccessMatrix load_access_jsonl(const std::filesystem::path& path, std::uint32_t n_roles) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<std::vector<std::uint32_t>> rows;
  std::string line;
  std::uint64_t offset = 0;
  while (std::getline(in, line)) {
    const std::uint64_t line_start = offset;
    offset += line.size() + 1;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("bad JSON line: ") + e.what(), line_start);
    }
    if (!j.contains("id") || !j.contains("roles")) throw FormatError("line needs id and roles", line_start);
    auto id = j["id"].get<std::size_t>();
    if (id >= rows.size()) rows.resize(id + 1);
    rows[id] = j["roles"].get<std::vector<std::uint32_t>>();
  }
  auto am = AccessMatrix::from_rows(rows, n_roles);
  am.validate();
  return am;
}

AccessMatrix load_access(const std::filesystem::path& path, std::uint32_t n_roles) {
  auto ext = path.extension().string();
  if (ext == ".jsonl" || ext == ".json") return load_access_jsonl(path, n_roles);
  return load_access_binary(path, n_roles);
}

void save_access(const AccessMatrix& am, const std::filesystem::path& path) {
  auto ext = path.extension().string();
  if (ext == ".jsonl" || ext == ".json") return save_access_jsonl(am, path);
  save_access_binary(am, path);
}

ExclusiveLattice ExclusiveLattice::build(const AccessMatrix& am) {
  am.validate();
  ExclusiveLattice lat;
  lat.n_roles_ = am.n_roles;

  std::unordered_map<RoleSet, std::vector<std::uint32_t>> groups;
  for (std::size_t i = 0; i < am.rows(); ++i) groups[am.tag(i)].push_back(static_cast<std::uint32_t>(i));

  lat.blocks_.reserve(groups.size());
  for (auto& [tag, ids] : groups) lat.blocks_.push_back({tag, std::move(ids)});
  std::sort(lat.blocks_.begin(), lat.blocks_.end(),
            [](const ExclusiveBlock& a, const ExclusiveBlock& b) { return a.tag < b.tag; });

  const auto nb = static_cast<std::uint32_t>(lat.blocks_.size());
  lat.block_of_.assign(am.rows(), 0);
  lat.role_blocks_.assign(lat.n_roles_, {});
  std::size_t max_layer = 0;
  for (std::uint32_t b = 0; b < nb; ++b) {
    const auto& blk = lat.blocks_[b];
    lat.index_.emplace(blk.tag, b);
    for (auto id : blk.ids) lat.block_of_[id] = b;
    blk.tag.for_each([&](Role r) { lat.role_blocks_[r].push_back(b); });
    max_layer = std::max(max_layer, blk.tag.count());
  }
  lat.layers_.assign(max_layer + 1, {});
  for (std::uint32_t b = 0; b < nb; ++b) lat.layers_[lat.blocks_[b].tag.count()].push_back(b);

  // Parents of a block are the maximal elements among its present proper subsets.
  lat.parents_.assign(nb, {});
  lat.children_.assign(nb, {});
  for (std::uint32_t c = 0; c < nb; ++c) {
    const auto& tc = lat.blocks_[c].tag;
    std::vector<std::uint32_t> anc;
    for (std::uint32_t a = 0; a < nb && lat.blocks_[a].tag.count() < tc.count(); ++a)
      if (lat.blocks_[a].tag.is_subset_of(tc)) anc.push_back(a);
    for (auto a : anc) {
      bool maximal = true;
      for (auto m : anc)
        if (m != a && lat.blocks_[a].tag.is_proper_subset_of(lat.blocks_[m].tag)) {
          maximal = false;
          break;
        }
      if (maximal) {
        lat.parents_[c].push_back(a);
        lat.children_[a].push_back(c);
      }
    }
  }
  return lat;
}

std::optional<std::uint32_t> ExclusiveLattice::find(const RoleSet& tag) const {
  auto it = index_.find(tag);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::vector<std::uint32_t>& ExclusiveLattice::blocks_of_role(Role r) const {
  if (r >= n_roles_) throw InputError("unknown role " + std::to_string(r));
  return role_blocks_[r];
}

std::vector<std::uint32_t> ExclusiveLattice::authorized_ids(Role r) const {
  std::vector<std::uint32_t> out;
  for (auto b : blocks_of_role(r)) out.insert(out.end(), blocks_[b].ids.begin(), blocks_[b].ids.end());
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t ExclusiveLattice::authorized_count(Role r) const {
  std::size_t n = 0;
  for (auto b : blocks_of_role(r)) n += blocks_[b].size();
  return n;
}

std::size_t ExclusiveLattice::authorized_count(const RoleSet& tau) const {
  std::size_t n = 0;
  for (const auto& blk : blocks_)
    if (blk.tag.intersects(tau)) n += blk.size();
  return n;
}

Relations ExclusiveLattice::relations() const {
  const auto nb = static_cast<std::uint32_t>(blocks_.size());
  Relations rel;
  rel.parents = parents_;
  rel.ancestors.assign(nb, {});
  rel.descendants.assign(nb, {});
  rel.siblings.assign(nb, {});
  for (std::uint32_t i = 0; i < nb; ++i)
    for (std::uint32_t j = 0; j < nb; ++j) {
      if (i == j) continue;
      const auto &ti = blocks_[i].tag, &tj = blocks_[j].tag;
      if (tj.is_proper_subset_of(ti)) rel.ancestors[i].push_back(j);
      if (ti.is_proper_subset_of(tj)) rel.descendants[i].push_back(j);
      if (ti.count() == tj.count() && ti.intersects(tj)) rel.siblings[i].push_back(j);
    }
  return rel;
}

}  // namespace veda
