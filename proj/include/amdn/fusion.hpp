// SPDX-License-Identifier: Apache-2.0
//
// Cross-product fusion of the CFR and ADCAM partitions, small-category
// cleansing and covering-rate bookkeeping.

#pragma once

#include <algorithm>
#include <map>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace amdn {

struct RegionLabels {
  static constexpr int kRemoved = -1;

  std::vector<int> cfr_label;
  std::vector<int> adcam_label;
  std::vector<int> fused_label;  // kRemoved for cleansed samples
  std::vector<bool> retained;
  int fused_count = 0;
  double covering_rate = 1.0;

  [[nodiscard]] std::size_t size() const { return fused_label.size(); }

  /// (cfr, adcam) pair behind each fused id.
  [[nodiscard]] std::vector<std::pair<int, int>> region_pairs() const {
    std::vector<std::pair<int, int>> out(static_cast<std::size_t>(fused_count), {-1, -1});
    for (std::size_t i = 0; i < size(); ++i)
      if (retained[i]) out[static_cast<std::size_t>(fused_label[i])] = {cfr_label[i], adcam_label[i]};
    return out;
  }
};

/// Distinct observed (cfr, adcam) pairs, numbered in lexicographic order.
inline RegionLabels fuse_labels(std::span<const int> cfr, std::span<const int> adcam) {
  if (cfr.size() != adcam.size()) throw std::invalid_argument("fuse_labels: label vectors differ in length");
  std::map<std::pair<int, int>, int> ids;
  for (std::size_t i = 0; i < cfr.size(); ++i) ids.emplace(std::pair{cfr[i], adcam[i]}, 0);
  int next = 0;
  for (auto& [pair, id] : ids) id = next++;

  RegionLabels out;
  out.cfr_label.assign(cfr.begin(), cfr.end());
  out.adcam_label.assign(adcam.begin(), adcam.end());
  out.fused_label.resize(cfr.size());
  for (std::size_t i = 0; i < cfr.size(); ++i) out.fused_label[i] = ids.at({cfr[i], adcam[i]});
  out.retained.assign(cfr.size(), true);
  out.fused_count = next;
  out.covering_rate = 1.0;
  return out;
}

/// Drops every fused category with at most `min_count` retained members and
/// renumbers the survivors contiguously (keeping their relative order).
inline RegionLabels cleanse(const RegionLabels& in, int min_count) {
  if (min_count < 0) throw std::invalid_argument("cleanse: min_count must be >= 0");
  std::vector<int> counts(static_cast<std::size_t>(in.fused_count), 0);
  for (std::size_t i = 0; i < in.size(); ++i)
    if (in.retained[i]) ++counts[static_cast<std::size_t>(in.fused_label[i])];

  std::vector<int> remap(counts.size(), RegionLabels::kRemoved);
  int next = 0;
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] > min_count) remap[c] = next++;
  if (next == 0) throw std::runtime_error("cleanse: every category was removed");

  RegionLabels out = in;
  std::size_t kept = 0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (!in.retained[i]) continue;
    const int id = remap[static_cast<std::size_t>(in.fused_label[i])];
    out.fused_label[i] = id;
    out.retained[i] = id != RegionLabels::kRemoved;
  }
  for (bool r : out.retained) kept += r ? 1 : 0;
  out.fused_count = next;
  out.covering_rate = in.size() == 0 ? 1.0 : static_cast<double>(kept) / static_cast<double>(in.size());
  return out;
}

}  // namespace amdn
