// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <numeric>
#include <utility>
#include <vector>

namespace amdn {

// Disjoint sets where the representative of a set is always its smallest
// element, so merge results do not depend on union order.
class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }

  std::size_t find(std::size_t x) {
    std::size_t root = x;
    while (parent_[root] != root) root = parent_[root];
    while (parent_[x] != root) x = std::exchange(parent_[x], root);
    return root;
  }

  /// Returns true if the two sets were distinct.
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
    return true;
  }

  [[nodiscard]] std::size_t size() const { return parent_.size(); }

 private:
  std::vector<std::size_t> parent_;
};

/// Relabels arbitrary ids to 0..k-1 in order of first occurrence.
template <typename Int>
std::vector<int> canonical_labels(const std::vector<Int>& raw) {
  std::vector<int> out(raw.size());
  std::map<Int, int> seen;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto [it, inserted] = seen.try_emplace(raw[i], static_cast<int>(seen.size()));
    out[i] = it->second;
  }
  return out;
}

}  // namespace amdn
