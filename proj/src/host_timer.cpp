#include <chrono>

#include "veda/bench.hpp"
#include "veda/error.hpp"

namespace veda {

namespace {

constexpr std::uint32_t kClusters = 16;

}  // namespace

HostSweepRunner::HostSweepRunner(std::uint32_t dim, const HnswParams& params, std::size_t n_queries,
                                 std::uint64_t seed)
    : dim_(dim), params_(params), seed_(seed), data_(dim) {
  if (n_queries == 0) throw InputError("the host sweep needs at least one query");
  auto qs = gen_dataset(n_queries, dim, kClusters, seed + 1);
  for (std::size_t i = 0; i < qs.size(); ++i) queries_.emplace_back(qs[i].begin(), qs[i].end());
}

const HnswIndex& HostSweepRunner::index_for(std::size_t n) {
  if (!index_ || built_n_ != n) {
    data_ = gen_dataset(n, dim_, kClusters, seed_);
    std::vector<std::uint32_t> ids(n);
    for (std::uint32_t i = 0; i < n; ++i) ids[i] = i;
    index_ = std::make_unique<HnswIndex>(HnswIndex::build(data_, ids, params_));
    built_n_ = n;
  }
  return *index_;
}

double HostSweepRunner::time_search(std::size_t n, std::size_t efs) {
  using clock = std::chrono::steady_clock;
  const auto& idx = index_for(n);
  const SearchParams p{10, efs};
  std::size_t sink = 0;
  for (std::size_t i = 0; i < std::min<std::size_t>(queries_.size(), 20); ++i) sink += idx.search(queries_[i], p).size();
  const auto t0 = clock::now();
  for (const auto& q : queries_) sink += idx.search(q, p).size();
  const double us = std::chrono::duration<double, std::micro>(clock::now() - t0).count();
  if (sink == 0) throw CalibrationError("host sweep returned no results");
  return us / double(queries_.size());
}

double HostSweepRunner::time_scan(std::size_t n) {
  using clock = std::chrono::steady_clock;
  auto ds = gen_dataset(n, dim_, kClusters, seed_ + 2);
  std::size_t sink = 0;
  const auto t0 = clock::now();
  for (const auto& q : queries_) sink += brute_force_topk(ds, q, 10).size();
  const double us = std::chrono::duration<double, std::micro>(clock::now() - t0).count();
  if (sink == 0) throw CalibrationError("host scan returned no results");
  return us / double(queries_.size());
}

}  // namespace veda
