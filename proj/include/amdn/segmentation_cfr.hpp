// SPDX-License-Identifier: Apache-2.0
//
// Two-stage dual-template matched filter over CFR magnitude images.
//
// Stage one walks the images in order. Every still-unlabeled image founds a
// category and claims all later unlabeled images whose match score reaches
// tau_in. A founder that claims nothing is compared with the earlier images
// and joins the category of the first one it matches; only founders that keep
// their fresh category consume a class id.
//
// Stage two merges categories whose founders match each other at tau_out and
// iterates until no merge happens.
//
// The match score of a template pair against an image is min(E1, E2), with
// E1/E2 the NCC of the upper-left/lower-right corner templates.

#pragma once

#include "amdn/channel.hpp"
#include "amdn/ncc.hpp"
#include "amdn/union_find.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace amdn {

struct TemplateSize {
  std::size_t rows = 16;
  std::size_t cols = 16;

  bool operator==(const TemplateSize&) const = default;
};

/// Parses "HxW", e.g. "16x16" or "8x16".
inline TemplateSize parse_template_size(std::string_view s) {
  const auto x = s.find_first_of("xX");
  if (x == std::string_view::npos) throw std::invalid_argument("template size must look like HxW");
  TemplateSize t;
  auto parse = [&](std::string_view part, std::size_t& out) {
    const auto res = std::from_chars(part.data(), part.data() + part.size(), out);
    if (res.ec != std::errc{} || res.ptr != part.data() + part.size() || out == 0)
      throw std::invalid_argument("bad template size '" + std::string(s) + "'");
  };
  parse(s.substr(0, x), t.rows);
  parse(s.substr(x + 1), t.cols);
  return t;
}

struct TemplatePair {
  GrayImage t1;  // upper-left block
  GrayImage t2;  // lower-right block
  TemplateSize size;
  int founder_id = -1;
  NccTemplate m1;
  NccTemplate m2;
};

inline TemplatePair extract_templates(const GrayImage& image, TemplateSize size, int founder_id = -1) {
  if (size.rows == 0 || size.cols == 0 || size.rows > image.rows() || size.cols > image.cols())
    throw std::invalid_argument("extract_templates: template does not fit in the image");
  const auto a = static_cast<Eigen::Index>(size.rows);
  const auto b = static_cast<Eigen::Index>(size.cols);
  TemplatePair p;
  p.t1 = {image.pixels.topLeftCorner(a, b), image.tag};
  p.t2 = {image.pixels.bottomRightCorner(a, b), image.tag};
  p.size = size;
  p.founder_id = founder_id;
  p.m1 = NccTemplate(p.t1.pixels, image.rows(), image.cols());
  p.m2 = NccTemplate(p.t2.pixels, image.rows(), image.cols());
  return p;
}

/// True when both corner templates reach `tau` somewhere in the source.
inline bool dual_match(const TemplatePair& t, const NccSource& src, double tau) {
  return ncc(t.m1, src) >= tau && ncc(t.m2, src) >= tau;
}

/// min(E1, E2), fully evaluated.
inline double dual_score(const TemplatePair& t, const NccSource& src) {
  return std::min(ncc(t.m1, src), ncc(t.m2, src));
}

inline std::vector<NccSource> make_sources(std::span<const GrayImage> images, TemplateSize size) {
  std::vector<NccSource> out;
  out.reserve(images.size());
  for (const auto& img : images) out.emplace_back(img.pixels, size.rows, size.cols);
  return out;
}

struct Founder {
  std::size_t index = 0;  // position in the image list
  int sample_id = -1;
  int label = 0;
  TemplatePair templates;
};

struct CfrLabeling {
  static constexpr int kUnlabeled = std::numeric_limits<int>::max();

  std::vector<int> labels;
  std::vector<Founder> founders;  // stage-one founders; after merging several may share a label
  int class_count = 0;
  TemplateSize size;
};

inline CfrLabeling match_within(std::span<const GrayImage> images, std::span<const NccSource> sources, double tau_in,
                                TemplateSize size, std::span<const int> ids = {}) {
  if (!(tau_in > 0.0 && tau_in <= 1.0)) throw std::invalid_argument("match_within: tau_in must be in (0, 1]");
  if (images.size() != sources.size()) throw std::invalid_argument("match_within: images/sources size mismatch");
  if (!ids.empty() && ids.size() != images.size()) throw std::invalid_argument("match_within: ids size mismatch");

  CfrLabeling out;
  out.size = size;
  out.labels.assign(images.size(), CfrLabeling::kUnlabeled);
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (out.labels[i] != CfrLabeling::kUnlabeled) continue;
    const int id = ids.empty() ? static_cast<int>(i) : ids[i];
    TemplatePair pair = extract_templates(images[i], size, id);

    bool matched = false;
    for (std::size_t j = i + 1; j < images.size(); ++j) {
      if (out.labels[j] != CfrLabeling::kUnlabeled) continue;
      if (dual_match(pair, sources[j], tau_in)) {
        out.labels[j] = out.class_count;
        matched = true;
      }
    }
    if (!matched) {
      for (std::size_t k = 0; k < i; ++k)
        if (dual_match(pair, sources[k], tau_in)) {
          out.labels[i] = out.labels[k];
          break;
        }
      if (out.labels[i] != CfrLabeling::kUnlabeled) continue;
    }
    out.labels[i] = out.class_count;
    out.founders.push_back({i, id, out.class_count, std::move(pair)});
    ++out.class_count;
  }
  return out;
}

inline CfrLabeling match_within(std::span<const GrayImage> images, double tau_in, TemplateSize size,
                                std::span<const int> ids = {}) {
  if (images.empty()) return CfrLabeling{{}, {}, 0, size};
  const auto sources = make_sources(images, size);
  return match_within(images, sources, tau_in, size, ids);
}

inline CfrLabeling match_between(const CfrLabeling& in, std::span<const NccSource> sources, double tau_out) {
  if (!(tau_out > 0.0 && tau_out <= 1.0)) throw std::invalid_argument("match_between: tau_out must be in (0, 1]");

  const std::size_t nf = in.founders.size();
  UnionFind sets(static_cast<std::size_t>(in.class_count));
  std::vector<char> tested(nf * nf, 0);
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t a = 0; a < nf; ++a)
      for (std::size_t b = 0; b < nf; ++b) {
        if (a == b || tested[a * nf + b]) continue;
        const auto la = static_cast<std::size_t>(in.founders[a].label);
        const auto lb = static_cast<std::size_t>(in.founders[b].label);
        if (sets.find(la) == sets.find(lb)) continue;
        tested[a * nf + b] = 1;
        if (dual_match(in.founders[a].templates, sources[in.founders[b].index], tau_out) && sets.unite(la, lb))
          changed = true;
      }
  }

  std::vector<std::size_t> roots(in.labels.size());
  for (std::size_t i = 0; i < in.labels.size(); ++i) roots[i] = sets.find(static_cast<std::size_t>(in.labels[i]));
  CfrLabeling out = in;
  out.labels = canonical_labels(roots);
  out.class_count = out.labels.empty() ? 0 : *std::max_element(out.labels.begin(), out.labels.end()) + 1;
  for (auto& f : out.founders) f.label = out.labels[f.index];
  return out;
}

inline CfrLabeling match_between(const CfrLabeling& in, std::span<const GrayImage> images, double tau_out) {
  const auto sources = make_sources(images, in.size);
  return match_between(in, sources, tau_out);
}

inline CfrLabeling segment_cfr(std::span<const GrayImage> images, double tau_in, double tau_out, TemplateSize size,
                               std::span<const int> ids = {}) {
  if (images.empty()) return CfrLabeling{{}, {}, 0, size};
  const auto sources = make_sources(images, size);
  return match_between(match_within(images, sources, tau_in, size, ids), sources, tau_out);
}

}  // namespace amdn
