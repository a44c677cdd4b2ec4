#include "veda/hnsw.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <queue>
#include <random>

#include "veda/error.hpp"

namespace veda {

namespace {

constexpr char kMagic[4] = {'V', 'H', 'N', 'S'};
constexpr std::uint32_t kVersion = 1;
constexpr int kMaxLevel = 32;

using Entry = SearchCursor::Entry;
using MinHeap = std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>>;
using MaxHeap = std::priority_queue<Entry>;

/// Epoch-tagged visited marks, one buffer per thread, reused across searches.
class VisitedMarks {
 public:
  void reset(std::size_t n) {
    if (tags_.size() < n) tags_.resize(n, 0);
    if (++epoch_ == 0) {
      std::fill(tags_.begin(), tags_.end(), 0);
      epoch_ = 1;
    }
  }
  bool test_and_set(std::uint32_t i) noexcept {
    if (tags_[i] == epoch_) return true;
    tags_[i] = epoch_;
    return false;
  }

 private:
  std::vector<std::uint32_t> tags_;
  std::uint32_t epoch_ = 0;
};

VisitedMarks& marks() {
  thread_local VisitedMarks m;
  return m;
}

std::size_t inflate(double lambda, std::size_t x) {
  return static_cast<std::size_t>(std::ceil(lambda * static_cast<double>(x) - 1e-9));
}

void check_dim(std::size_t got, std::uint32_t want) {
  if (got != want)
    throw InputError("dimension mismatch: index has d=" + std::to_string(want) + ", query has " + std::to_string(got));
}

template <class T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
void get(std::ifstream& in, T& v, std::uint64_t& offset) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (in.gcount() != sizeof(T)) throw FormatError("truncated index file", offset);
  offset += sizeof(T);
}

}  // namespace

std::vector<Neighbor> filter_authorized(const std::vector<Neighbor>& hits, const IdFilter& allowed, std::size_t k) {
  std::vector<Neighbor> out;
  for (const auto& h : hits) {
    if (out.size() >= k) break;
    if (!allowed || allowed(h.id)) out.push_back(h);
  }
  return out;
}

std::span<std::uint32_t> HnswIndex::links(std::uint32_t local, int level) {
  if (level == 0) {
    std::uint32_t* p = base_.data() + std::size_t(local) * (1 + params_.base_cap());
    return {p + 1, p[0]};
  }
  auto& l = upper_[local][level - 1];
  return {l.data(), l.size()};
}

std::span<const std::uint32_t> HnswIndex::links(std::uint32_t local, int level) const {
  return const_cast<HnswIndex*>(this)->links(local, level);
}

std::span<const std::uint32_t> HnswIndex::neighbors(std::uint32_t local, int level) const {
  if (local >= size() || level < 0 || level > levels_[local]) throw InputError("no such node/level");
  return links(local, level);
}

std::size_t HnswIndex::edge_count() const {
  std::size_t e = 0;
  for (std::uint32_t i = 0; i < size(); ++i)
    for (int l = 0; l <= levels_[i]; ++l) e += neighbors(i, l).size();
  return e;
}

HnswIndex HnswIndex::build(const Dataset& ds, std::span<const std::uint32_t> ids, const HnswParams& params) {
  if (ids.empty()) throw InputError("cannot build an index over zero vectors");
  if (params.M < 2) throw InputError("HNSW M must be at least 2");
  if (params.base_cap() < params.M) throw InputError("HNSW M0 must be at least M");

  HnswIndex idx;
  idx.params_ = params;
  idx.params_.M0 = params.base_cap();
  idx.dim_ = ds.dim();
  idx.ids_.assign(ids.begin(), ids.end());
  std::sort(idx.ids_.begin(), idx.ids_.end());
  for (std::size_t i = 0; i < idx.ids_.size(); ++i) {
    if (idx.ids_[i] >= ds.size()) throw InputError("vector id " + std::to_string(idx.ids_[i]) + " out of range");
    if (i > 0 && idx.ids_[i] == idx.ids_[i - 1])
      throw InputError("duplicate vector id " + std::to_string(idx.ids_[i]));
  }

  const std::size_t n = idx.ids_.size();
  idx.data_.resize(n * idx.dim_);
  for (std::size_t i = 0; i < n; ++i) std::memcpy(&idx.data_[i * idx.dim_], ds[idx.ids_[i]].data(), 4ull * idx.dim_);

  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double mult = 1.0 / std::log(static_cast<double>(params.M));
  idx.levels_.resize(n);
  idx.upper_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double u = unif(rng);
    if (u <= 0.0) u = std::numeric_limits<double>::min();
    int level = std::min(kMaxLevel, static_cast<int>(std::floor(-std::log(u) * mult)));
    idx.levels_[i] = static_cast<std::uint8_t>(level);
    idx.upper_[i].resize(level);
  }
  idx.base_.assign(n * (1 + idx.params_.M0), 0);
  for (std::size_t i = 0; i < n; ++i) idx.insert(static_cast<std::uint32_t>(i), idx.levels_[i]);
  return idx;
}

std::uint32_t HnswIndex::greedy_descend(const float* q, int from_level, int to_level, std::uint32_t ep) const {
  float best = dist_to(q, ep);
  for (int l = from_level; l >= to_level; --l) {
    bool changed = true;
    while (changed) {
      changed = false;
      for (auto nb : links(ep, l)) {
        float d = dist_to(q, nb);
        if (d < best || (d == best && nb < ep)) {
          best = d;
          ep = nb;
          changed = true;
        }
      }
    }
  }
  return ep;
}

std::vector<Entry> HnswIndex::search_layer(const float* q, std::uint32_t ep, std::size_t ef, int level) const {
  auto& vis = marks();
  vis.reset(size());
  MinHeap cand;
  MaxHeap best;
  Entry start{dist_to(q, ep), ep};
  vis.test_and_set(ep);
  cand.push(start);
  best.push(start);
  while (!cand.empty()) {
    Entry c = cand.top();
    if (best.size() >= ef && c > best.top()) break;
    cand.pop();
    for (auto nb : links(c.second, level)) {
      if (vis.test_and_set(nb)) continue;
      Entry e{dist_to(q, nb), nb};
      if (best.size() < ef || e < best.top()) {
        cand.push(e);
        best.push(e);
        if (best.size() > ef) best.pop();
      }
    }
  }
  std::vector<Entry> out;
  out.reserve(best.size());
  for (; !best.empty(); best.pop()) out.push_back(best.top());
  std::reverse(out.begin(), out.end());
  return out;
}

std::vector<std::uint32_t> HnswIndex::select_neighbors(const float*, std::vector<Entry> cands, std::size_t m) const {
  std::sort(cands.begin(), cands.end());
  std::vector<std::uint32_t> kept;
  std::vector<std::uint32_t> pruned;
  for (const auto& [d, e] : cands) {
    if (kept.size() >= m) break;
    bool diverse = true;
    for (auto r : kept)
      if (l2sq(vec(e), vec(r), dim_) < d) {
        diverse = false;
        break;
      }
    (diverse ? kept : pruned).push_back(e);
  }
  // Keep pruned connections: top up with the nearest discarded candidates.
  for (std::size_t i = 0; kept.size() < m && i < pruned.size(); ++i) kept.push_back(pruned[i]);
  return kept;
}

void HnswIndex::connect(std::uint32_t node, int level, const std::vector<Entry>& cands) {
  const std::size_t cap = level == 0 ? params_.M0 : params_.M;
  auto chosen = select_neighbors(vec(node), cands, params_.M);

  auto set_links = [&](std::uint32_t u, const std::vector<std::uint32_t>& nbrs) {
    if (level == 0) {
      std::uint32_t* p = base_.data() + std::size_t(u) * (1 + params_.M0);
      p[0] = static_cast<std::uint32_t>(nbrs.size());
      std::copy(nbrs.begin(), nbrs.end(), p + 1);
    } else {
      upper_[u][level - 1] = nbrs;
    }
  };
  set_links(node, chosen);

  for (auto nb : chosen) {
    auto cur = links(nb, level);
    if (std::find(cur.begin(), cur.end(), node) != cur.end()) continue;
    std::vector<std::uint32_t> next(cur.begin(), cur.end());
    if (next.size() < cap) {
      next.push_back(node);
    } else {
      std::vector<Entry> pool;
      pool.reserve(next.size() + 1);
      for (auto x : next) pool.emplace_back(l2sq(vec(nb), vec(x), dim_), x);
      pool.emplace_back(l2sq(vec(nb), vec(node), dim_), node);
      next = select_neighbors(vec(nb), std::move(pool), cap);
    }
    set_links(nb, next);
  }
}

void HnswIndex::insert(std::uint32_t local, int level) {
  if (max_level_ < 0) {
    entry_ = local;
    max_level_ = level;
    return;
  }
  const float* q = vec(local);
  std::uint32_t ep = entry_;
  if (level < max_level_) ep = greedy_descend(q, max_level_, level + 1, ep);
  for (int l = std::min(level, max_level_); l >= 0; --l) {
    auto w = search_layer(q, ep, params_.efc, l);
    connect(local, l, w);
    ep = w.front().second;
  }
  if (level > max_level_) {
    entry_ = local;
    max_level_ = level;
  }
}

std::vector<Neighbor> HnswIndex::search(std::span<const float> q, const SearchParams& p) const {
  if (p.k == 0) throw InputError("k must be at least 1");
  check_dim(q.size(), dim_);
  if (size() == 0) return {};
  std::uint32_t ep = greedy_descend(q.data(), max_level_, 1, entry_);
  auto w = search_layer(q.data(), ep, std::max(p.efs, p.k), 0);
  std::vector<Neighbor> out;
  out.reserve(std::min(p.k, w.size()));
  for (std::size_t i = 0; i < w.size() && i < p.k; ++i) out.push_back({ids_[w[i].second], w[i].first});
  return out;
}

std::vector<Neighbor> HnswIndex::scan(std::span<const float> q, std::size_t k, const IdFilter& allowed) const {
  check_dim(q.size(), dim_);
  TopK top(k);
  for (std::uint32_t i = 0; i < size(); ++i)
    if (!allowed || allowed(ids_[i])) top.push({ids_[i], dist_to(q.data(), i)});
  return top.sorted();
}

std::vector<Neighbor> HnswIndex::search_filtered(std::span<const float> q, const SearchParams& p,
                                                 const IdFilter& allowed, double lambda) const {
  if (p.k == 0) throw InputError("k must be at least 1");
  if (!(lambda >= 1.0)) throw InputError("inflation factor must be >= 1");
  check_dim(q.size(), dim_);
  if (size() == 0) return {};
  const std::size_t k_inf = inflate(lambda, p.k);
  const std::size_t efs_inf = inflate(lambda, std::max(p.efs, p.k));
  if (efs_inf > size()) return scan(q, p.k, allowed);
  // Filter the whole inflated beam rather than only its first k' entries; the beam holds
  // at least k' candidates, so this never returns fewer authorized hits.
  std::uint32_t ep = greedy_descend(q.data(), max_level_, 1, entry_);
  auto w = search_layer(q.data(), ep, std::max(efs_inf, k_inf), 0);
  std::vector<Neighbor> hits;
  hits.reserve(w.size());
  for (const auto& [d, local] : w) hits.push_back({ids_[local], d});
  return filter_authorized(hits, allowed, p.k);
}

BoundedSearch HnswIndex::search_bounded(std::span<const float> q, std::size_t k, std::size_t ef_default,
                                        std::size_t ef_max, const IdFilter& allowed, float global_bound) const {
  if (k == 0) throw InputError("k must be at least 1");
  check_dim(q.size(), dim_);
  BoundedSearch out;
  auto& cur = out.cursor;
  cur.query.assign(q.begin(), q.end());
  cur.k = k;
  cur.local = TopK(k);
  cur.ef_max = std::max(ef_max, ef_default);
  cur.d_k_global = global_bound;
  if (size() == 0 || !(global_bound > 0.0f)) {
    out.stopped_early = true;
    return out;
  }

  const float* qp = cur.query.data();
  auto admit = [&](std::uint32_t local, float d) {
    if (d < global_bound && (!allowed || allowed(ids_[local]))) cur.local.push({ids_[local], d});
  };

  const std::size_t ef = std::max(ef_default, k);
  std::uint32_t ep = greedy_descend(qp, max_level_, 1, entry_);
  MinHeap cand;
  MaxHeap best;
  std::vector<Entry> deferred;
  Entry start{dist_to(qp, ep), ep};
  cur.visited.insert(ep);
  admit(ep, start.first);
  cand.push(start);
  best.push(start);
  while (!cand.empty()) {
    Entry c = cand.top();
    if (best.size() >= ef && c > best.top()) break;
    cand.pop();
    cur.expanded.insert(c.second);
    for (auto nb : links(c.second, 0)) {
      if (!cur.visited.insert(nb).second) continue;
      Entry e{dist_to(qp, nb), nb};
      admit(nb, e.first);
      if (best.size() < ef || e < best.top()) {
        cand.push(e);
        best.push(e);
        if (best.size() > ef) {
          deferred.push_back(best.top());
          best.pop();
        }
      } else {
        deferred.push_back(e);
      }
    }
  }
  // Everything evaluated but not expanded stays on the frontier for phase 2.
  for (; !cand.empty(); cand.pop()) cur.frontier.push_back(cand.top());
  for (const auto& e : deferred)
    if (!cur.expanded.count(e.second)) cur.frontier.push_back(e);
  std::make_heap(cur.frontier.begin(), cur.frontier.end(), std::greater<Entry>());

  std::vector<Entry> w;
  for (; !best.empty(); best.pop()) w.push_back(best.top());
  std::reverse(w.begin(), w.end());
  cur.unfiltered_kth = w.size() >= k ? w[k - 1].first : std::numeric_limits<float>::infinity();
  cur.ef_spent = ef_default;
  out.stopped_early = cur.exhausted() || cur.unfiltered_kth >= global_bound;
  out.local = cur.local.sorted();
  return out;
}

std::vector<Neighbor> HnswIndex::resume(SearchCursor& cur, std::size_t budget, const IdFilter& allowed,
                                        float global_bound) const {
  cur.d_k_global = std::min(cur.d_k_global, global_bound);
  const float gb = cur.d_k_global;
  const std::size_t room = cur.ef_max > cur.ef_spent ? cur.ef_max - cur.ef_spent : 0;
  const std::size_t limit = std::min(budget, room);
  const float* qp = cur.query.data();
  auto cmp = std::greater<Entry>();
  std::size_t spent = 0;
  while (!cur.frontier.empty() && spent < limit) {
    const float bound = std::min(gb, cur.local.bound());
    Entry top = cur.frontier.front();
    if (top.first > bound) break;
    std::pop_heap(cur.frontier.begin(), cur.frontier.end(), cmp);
    cur.frontier.pop_back();
    if (cur.expanded.count(top.second)) continue;
    bool complete = true;
    for (auto nb : links(top.second, 0)) {
      if (cur.visited.count(nb)) continue;
      if (spent >= limit) {
        complete = false;
        break;
      }
      cur.visited.insert(nb);
      ++spent;
      float d = dist_to(qp, nb);
      if (d > std::min(gb, cur.local.bound())) continue;
      cur.frontier.emplace_back(d, nb);
      std::push_heap(cur.frontier.begin(), cur.frontier.end(), cmp);
      if (d < gb && (!allowed || allowed(ids_[nb]))) cur.local.push({ids_[nb], d});
    }
    if (complete) {
      cur.expanded.insert(top.second);
    } else {
      cur.frontier.push_back(top);
      std::push_heap(cur.frontier.begin(), cur.frontier.end(), cmp);
    }
  }
  cur.ef_spent += spent;
  return cur.local.sorted();
}

void HnswIndex::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out.write(kMagic, 4);
  put(out, kVersion);
  put(out, dim_);
  put(out, params_.M);
  put(out, params_.M0);
  put(out, static_cast<std::uint64_t>(size()));
  put(out, static_cast<std::int32_t>(max_level_));
  put(out, entry_);
  put(out, params_.efc);
  put(out, params_.seed);
  out.write(reinterpret_cast<const char*>(levels_.data()), static_cast<std::streamsize>(levels_.size()));
  out.write(reinterpret_cast<const char*>(base_.data()), static_cast<std::streamsize>(4 * base_.size()));
  for (std::size_t i = 0; i < size(); ++i)
    for (const auto& l : upper_[i]) {
      put(out, static_cast<std::uint32_t>(l.size()));
      out.write(reinterpret_cast<const char*>(l.data()), static_cast<std::streamsize>(4 * l.size()));
    }
  out.write(reinterpret_cast<const char*>(ids_.data()), static_cast<std::streamsize>(4 * ids_.size()));
  if (!out) throw InputError("write failed for " + path.string());
}

HnswIndex HnswIndex::load(const std::filesystem::path& path, const Dataset& ds) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::uint64_t offset = 0;
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) throw FormatError("not an HNSW index file", 0);
  offset = 4;
  std::uint32_t version = 0;
  get(in, version, offset);
  if (version != kVersion) throw FormatError("unsupported index version " + std::to_string(version), 4);

  HnswIndex idx;
  std::uint64_t n = 0;
  std::int32_t max_level = 0;
  get(in, idx.dim_, offset);
  get(in, idx.params_.M, offset);
  get(in, idx.params_.M0, offset);
  get(in, n, offset);
  get(in, max_level, offset);
  get(in, idx.entry_, offset);
  get(in, idx.params_.efc, offset);
  get(in, idx.params_.seed, offset);
  idx.max_level_ = max_level;
  if (idx.dim_ != ds.dim()) throw FormatError("index dimension does not match the dataset", 8);

  auto read_block = [&](void* dst, std::size_t bytes) {
    in.read(static_cast<char*>(dst), static_cast<std::streamsize>(bytes));
    if (static_cast<std::size_t>(in.gcount()) != bytes) throw FormatError("truncated index file", offset);
    offset += bytes;
  };
  idx.levels_.resize(n);
  read_block(idx.levels_.data(), n);
  idx.base_.resize(n * (1 + idx.params_.M0));
  read_block(idx.base_.data(), 4 * idx.base_.size());
  idx.upper_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    idx.upper_[i].resize(idx.levels_[i]);
    for (auto& l : idx.upper_[i]) {
      std::uint32_t cnt = 0;
      get(in, cnt, offset);
      if (cnt > idx.params_.M) throw FormatError("upper-layer degree exceeds M", offset - 4);
      l.resize(cnt);
      read_block(l.data(), 4ull * cnt);
    }
  }
  idx.ids_.resize(n);
  read_block(idx.ids_.data(), 4 * n);
  idx.data_.resize(n * idx.dim_);
  for (std::size_t i = 0; i < n; ++i) {
    if (idx.ids_[i] >= ds.size()) throw FormatError("id map references a vector outside the dataset", offset);
    std::memcpy(&idx.data_[i * idx.dim_], ds[idx.ids_[i]].data(), 4ull * idx.dim_);
  }
  return idx;
}

}  // namespace veda
