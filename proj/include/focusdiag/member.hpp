#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <vector>

namespace focusdiag {

/// An element of a dependency, conflict or confirmation set: either a
/// component at a time point, or an assumption "output(component)@time = value"
/// where `assumed` indexes the component's finite domain.
struct Member {
  std::uint32_t component = 0;
  std::int16_t time = 0;
  std::int16_t assumed = -1;

  static Member of(std::size_t component, int time) {
    return {static_cast<std::uint32_t>(component), static_cast<std::int16_t>(time), -1};
  }
  static Member assumption(std::size_t component, int time, std::size_t value_index) {
    return {static_cast<std::uint32_t>(component), static_cast<std::int16_t>(time),
            static_cast<std::int16_t>(value_index)};
  }

  bool is_assumption() const { return assumed >= 0; }

  std::uint64_t key() const {
    return (std::uint64_t{component} << 32) |
           (std::uint64_t{static_cast<std::uint16_t>(time)} << 16) |
           std::uint64_t{static_cast<std::uint16_t>(assumed)};
  }

  auto operator<=>(const Member&) const = default;
};

struct MemberHash {
  std::size_t operator()(const Member& m) const noexcept {
    std::uint64_t x = m.key();
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    return static_cast<std::size_t>(x);
  }
};

/// Sorted, duplicate-free vector of members.
using MemberSet = std::vector<Member>;

inline void normalize(MemberSet& s) {
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
}

inline bool contains(const MemberSet& s, const Member& m) {
  return std::binary_search(s.begin(), s.end(), m);
}

inline bool is_subset(const MemberSet& a, const MemberSet& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

inline MemberSet set_union(const MemberSet& a, const MemberSet& b) {
  MemberSet out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline MemberSet set_intersection(const MemberSet& a, const MemberSet& b) {
  MemberSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline MemberSet set_difference(const MemberSet& a, const MemberSet& b) {
  MemberSet out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline void insert(MemberSet& s, const Member& m) {
  auto it = std::lower_bound(s.begin(), s.end(), m);
  if (it == s.end() || *it != m) s.insert(it, m);
}

}  // namespace focusdiag
