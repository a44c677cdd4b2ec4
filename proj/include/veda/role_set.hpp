#pragma once

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

namespace veda {

using Role = std::uint32_t;

/// Set of role indices in [0, 128).
class RoleSet {
 public:
  static constexpr std::size_t kMaxRoles = 128;

  constexpr RoleSet() = default;
  RoleSet(std::initializer_list<Role> roles);
  template <class It>
  static RoleSet from_range(It first, It last) {
    RoleSet s;
    for (; first != last; ++first) s.set(static_cast<Role>(*first));
    return s;
  }

  /// Throws InputError for roles >= kMaxRoles.
  void set(Role r);
  void reset(Role r) noexcept {
    if (r < kMaxRoles) w_[r >> 6] &= ~(1ull << (r & 63));
  }
  bool test(Role r) const noexcept { return r < kMaxRoles && ((w_[r >> 6] >> (r & 63)) & 1u); }

  std::size_t count() const noexcept { return std::popcount(w_[0]) + std::popcount(w_[1]); }
  bool empty() const noexcept { return (w_[0] | w_[1]) == 0; }

  bool is_subset_of(const RoleSet& o) const noexcept {
    return (w_[0] & ~o.w_[0]) == 0 && (w_[1] & ~o.w_[1]) == 0;
  }
  bool is_proper_subset_of(const RoleSet& o) const noexcept { return is_subset_of(o) && *this != o; }
  bool intersects(const RoleSet& o) const noexcept { return (w_[0] & o.w_[0]) | (w_[1] & o.w_[1]); }

  RoleSet operator|(const RoleSet& o) const noexcept { return words(w_[0] | o.w_[0], w_[1] | o.w_[1]); }
  RoleSet operator&(const RoleSet& o) const noexcept { return words(w_[0] & o.w_[0], w_[1] & o.w_[1]); }
  /// Set difference.
  RoleSet operator-(const RoleSet& o) const noexcept { return words(w_[0] & ~o.w_[0], w_[1] & ~o.w_[1]); }
  RoleSet& operator|=(const RoleSet& o) noexcept { return *this = *this | o; }

  friend bool operator==(const RoleSet&, const RoleSet&) = default;

  /// Canonical order: smaller sets first, equal sizes compared lexicographically on the
  /// sorted role lists.
  friend bool operator<(const RoleSet& a, const RoleSet& b) noexcept {
    auto ca = a.count(), cb = b.count();
    if (ca != cb) return ca < cb;
    for (int i = 0; i < 2; ++i) {
      std::uint64_t diff = a.w_[i] ^ b.w_[i];
      if (diff) return (a.w_[i] >> std::countr_zero(diff)) & 1u;
    }
    return false;
  }

  std::vector<Role> roles() const;
  /// Highest role + 1, or 0 for the empty set.
  std::size_t span() const noexcept;
  std::string to_string() const;

  template <class F>
  void for_each(F&& f) const {
    for (int i = 0; i < 2; ++i)
      for (std::uint64_t w = w_[i]; w; w &= w - 1) f(static_cast<Role>(i * 64 + std::countr_zero(w)));
  }

  std::size_t hash() const noexcept {
    return std::hash<std::uint64_t>{}(w_[0] * 0x9e3779b97f4a7c15ull ^ (w_[1] + 0x632be59bd9b4e019ull));
  }

  const std::array<std::uint64_t, 2>& words() const noexcept { return w_; }

 private:
  static RoleSet words(std::uint64_t lo, std::uint64_t hi) noexcept {
    RoleSet s;
    s.w_ = {lo, hi};
    return s;
  }
  std::array<std::uint64_t, 2> w_{};
};

struct RoleSetHash {
  std::size_t operator()(const RoleSet& s) const noexcept { return s.hash(); }
};

}  // namespace veda

template <>
struct std::hash<veda::RoleSet> {
  std::size_t operator()(const veda::RoleSet& s) const noexcept { return s.hash(); }
};
