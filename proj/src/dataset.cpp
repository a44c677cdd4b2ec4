#include "veda/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include "veda/error.hpp"

namespace veda {

static_assert(std::endian::native == std::endian::little, "fvecs I/O assumes a little-endian host");

Dataset::Dataset(std::uint32_t dim) : dim_(dim) {}

Dataset::Dataset(std::uint32_t dim, std::vector<float> coords) : dim_(dim), coords_(std::move(coords)) {
  if (dim_ == 0 && !coords_.empty()) throw InputError("dataset dimension must be positive");
  if (dim_ != 0 && coords_.size() % dim_ != 0)
    throw InputError("coordinate count is not a multiple of the dimension");
}

std::span<const float> Dataset::at(std::size_t id) const {
  if (id >= size()) throw InputError("vector id " + std::to_string(id) + " out of range");
  return (*this)[id];
}

std::uint32_t Dataset::add(std::span<const float> v) {
  if (dim_ == 0) throw InputError("dataset dimension must be positive");
  if (v.size() != dim_)
    throw InputError("dimension mismatch: dataset has d=" + std::to_string(dim_) + ", vector has " +
                     std::to_string(v.size()));
  auto id = static_cast<std::uint32_t>(size());
  coords_.insert(coords_.end(), v.begin(), v.end());
  return id;
}

float l2sq(const float* a, const float* b, std::size_t d) noexcept {
  // Four independent accumulators let the compiler vectorize without -ffast-math.
  float s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  std::size_t i = 0;
  for (; i + 4 <= d; i += 4) {
    float t0 = a[i] - b[i], t1 = a[i + 1] - b[i + 1];
    float t2 = a[i + 2] - b[i + 2], t3 = a[i + 3] - b[i + 3];
    s0 += t0 * t0;
    s1 += t1 * t1;
    s2 += t2 * t2;
    s3 += t3 * t3;
  }
  for (; i < d; ++i) {
    float t = a[i] - b[i];
    s0 += t * t;
  }
  return (s0 + s1) + (s2 + s3);
}

float distance(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size())
    throw InputError("dimension mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  return l2sq(a.data(), b.data(), a.size());
}

bool TopK::push(Neighbor n) {
  if (k_ == 0) return false;
  if (heap_.size() >= k_ && !closer(n, heap_.front())) return false;
  if (!ids_.insert(n.id).second) return false;
  if (heap_.size() >= k_) {
    std::pop_heap(heap_.begin(), heap_.end(), closer);
    ids_.erase(heap_.back().id);
    heap_.pop_back();
  }
  heap_.push_back(n);
  std::push_heap(heap_.begin(), heap_.end(), closer);
  return true;
}

float TopK::bound() const noexcept {
  return full() ? heap_.front().dist : std::numeric_limits<float>::infinity();
}

std::vector<Neighbor> TopK::sorted() const {
  std::vector<Neighbor> out = heap_;
  std::sort(out.begin(), out.end(), closer);
  return out;
}

namespace {

void check_query(const Dataset& ds, std::span<const float> q) {
  if (q.size() != ds.dim())
    throw InputError("dimension mismatch: dataset has d=" + std::to_string(ds.dim()) + ", query has " +
                     std::to_string(q.size()));
}

}  // namespace

std::vector<Neighbor> brute_force_topk(const Dataset& ds, std::span<const float> q, std::size_t k) {
  check_query(ds, q);
  TopK top(k);
  for (std::size_t i = 0; i < ds.size(); ++i)
    top.push({static_cast<std::uint32_t>(i), l2sq(q.data(), ds[i].data(), q.size())});
  return top.sorted();
}

std::vector<Neighbor> brute_force_topk(const Dataset& ds, std::span<const float> q, std::size_t k,
                                       std::span<const std::uint32_t> allowed) {
  check_query(ds, q);
  TopK top(k);
  for (auto id : allowed) {
    if (id >= ds.size()) throw InputError("allowed id " + std::to_string(id) + " out of range");
    top.push({id, l2sq(q.data(), ds[id].data(), q.size())});
  }
  return top.sorted();
}

std::vector<Neighbor> brute_force_topk(const Dataset& ds, std::span<const float> q, std::size_t k,
                                       const IdFilter& allowed) {
  if (!allowed) return brute_force_topk(ds, q, k);
  check_query(ds, q);
  TopK top(k);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto id = static_cast<std::uint32_t>(i);
    if (allowed(id)) top.push({id, l2sq(q.data(), ds[i].data(), q.size())});
  }
  return top.sorted();
}

Dataset load_fvecs(const std::filesystem::path& path, std::optional<std::uint32_t> dim_override) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const std::uint64_t file_size = static_cast<std::uint64_t>(in.tellg());
  in.seekg(0, std::ios::beg);

  std::optional<std::uint32_t> dim = dim_override;
  std::vector<float> coords;
  std::uint64_t offset = 0;
  while (offset < file_size) {
    if (file_size - offset < 4) throw FormatError("truncated record header", offset);
    std::int32_t d = 0;
    in.read(reinterpret_cast<char*>(&d), 4);
    if (d <= 0) throw FormatError("non-positive dimension " + std::to_string(d), offset);
    if (dim && static_cast<std::uint32_t>(d) != *dim)
      throw FormatError("inconsistent dimension " + std::to_string(d) + ", expected " + std::to_string(*dim),
                        offset);
    dim = static_cast<std::uint32_t>(d);
    const std::uint64_t payload = 4ull * static_cast<std::uint64_t>(d);
    if (file_size - offset - 4 < payload) throw FormatError("truncated record", offset);
    std::size_t at = coords.size();
    coords.resize(at + static_cast<std::size_t>(d));
    in.read(reinterpret_cast<char*>(coords.data() + at), static_cast<std::streamsize>(payload));
    offset += 4 + payload;
  }
  if (!dim) throw InputError("empty fvecs file " + path.string() + " needs a dimension override");
  return Dataset(*dim, std::move(coords));
}

void save_fvecs(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  const auto d = static_cast<std::int32_t>(ds.dim());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out.write(reinterpret_cast<const char*>(&d), 4);
    out.write(reinterpret_cast<const char*>(ds[i].data()), static_cast<std::streamsize>(4ull * ds.dim()));
  }
  if (!out) throw InputError("write failed for " + path.string());
}

}  // namespace veda
