// SPDX-License-Identifier: Apache-2.0
//
// Full region segmentation of a training set: CFR matched filter, ADCAM
// clustering, fusion and cleansing.

#pragma once

#include "amdn/fusion.hpp"
#include "amdn/scenegen.hpp"
#include "amdn/segmentation_adcam.hpp"
#include "amdn/segmentation_cfr.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <span>
#include <vector>

namespace amdn {

struct SegmentOptions {
  double tau_in = 0.99;
  double tau_out = 0.99;
  TemplateSize template_size{16, 16};
  int min_count = 2;
  int k_min = 2;
  int k_max = 10;
  PathSelect path_select = PathSelect::strongest;
  std::uint64_t seed = 1;
  bool use_cfr = true;
  bool use_adcam = true;
};

struct SegmentationResult {
  SegmentOptions options;
  std::vector<int> sample_ids;
  CfrLabeling cfr;
  ClusterFeatures adcam_features;
  ClusterModel adcam;
  KSelection k_selection;
  RegionLabels regions;  // after cleansing
};

inline std::vector<GrayImage> magnitude_images(std::span<const Sample> samples) {
  std::vector<GrayImage> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(render_image(s.cfr, ChannelTag::cfr_magnitude));
  return out;
}

inline SegmentationResult segment_dataset(std::span<const Sample> samples, const SegmentOptions& opt) {
  if (samples.empty()) throw std::invalid_argument("segment_dataset: no samples");
  SegmentationResult r;
  r.options = opt;
  for (const auto& s : samples) r.sample_ids.push_back(s.id);

  if (opt.use_cfr) {
    const auto images = magnitude_images(samples);
    r.cfr = segment_cfr(images, opt.tau_in, opt.tau_out, opt.template_size, r.sample_ids);
  } else {
    r.cfr.labels.assign(samples.size(), 0);
    r.cfr.class_count = 1;
    r.cfr.size = opt.template_size;
  }

  r.adcam_features = build_features(samples, opt.path_select);
  const int n = static_cast<int>(samples.size());
  const int k_max = std::min(opt.k_max, n - 1);
  if (opt.use_adcam && k_max >= std::max(opt.k_min, 2)) {
    r.k_selection = select_k(r.adcam_features.points, opt.k_min, k_max, opt.seed);
    r.adcam = r.k_selection.model;
  } else {
    r.adcam = kmeans(r.adcam_features.points, 1, opt.seed);
  }

  r.regions = cleanse(fuse_labels(r.cfr.labels, r.adcam.assignment), opt.min_count);
  return r;
}

// segmentation.json: what training needs beyond region_map.csv.

namespace detail {

inline nlohmann::json to_json_vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Eigen::VectorXd vec_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline nlohmann::json to_json_mat(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(to_json_vec(m.row(r).transpose()));
  return rows;
}

inline Eigen::MatrixXd mat_from_json(const nlohmann::json& j) {
  if (j.empty()) return {};
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j.at(0).size()));
  for (std::size_t r = 0; r < j.size(); ++r) m.row(static_cast<Eigen::Index>(r)) = vec_from_json(j.at(r)).transpose();
  return m;
}

inline nlohmann::json to_json_std(const Standardizer& s) {
  return {{"mean", to_json_vec(s.mean)}, {"scale", to_json_vec(s.scale)}};
}

inline Standardizer std_from_json(const nlohmann::json& j) {
  return {vec_from_json(j.at("mean")), vec_from_json(j.at("scale"))};
}

}  // namespace detail

inline nlohmann::json segment_options_json(const SegmentOptions& o) {
  return {{"tau_in", o.tau_in},
          {"tau_out", o.tau_out},
          {"template", std::to_string(o.template_size.rows) + "x" + std::to_string(o.template_size.cols)},
          {"min_count", o.min_count},
          {"k_min", o.k_min},
          {"k_max", o.k_max},
          {"path_select", to_string(o.path_select)},
          {"seed", o.seed},
          {"use_cfr", o.use_cfr},
          {"use_adcam", o.use_adcam}};
}

inline nlohmann::json segmentation_to_json(const SegmentationResult& r) {
  nlohmann::json founders = nlohmann::json::array();
  for (const auto& f : r.cfr.founders) founders.push_back({{"sample_id", f.sample_id}, {"label", f.label}});
  // CH is +inf when the within-cluster scatter vanishes; JSON has no infinity.
  auto finite_or_null = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json scores = nlohmann::json::array();
  for (std::size_t i = 0; i < r.k_selection.silhouette_scores.size(); ++i)
    scores.push_back({{"k", r.k_selection.candidates[i]},
                      {"silhouette", finite_or_null(r.k_selection.silhouette_scores[i])},
                      {"calinski_harabasz", finite_or_null(r.k_selection.ch_scores[i])},
                      {"combined", finite_or_null(r.k_selection.combined[i])}});
  return {
      {"format", "amdnloc-segmentation"},
      {"version", 1},
      {"options", segment_options_json(r.options)},
      {"cfr", {{"class_count", r.cfr.class_count}, {"founders", founders}}},
      {"adcam",
       {{"k", r.adcam.k},
        {"standardizer", detail::to_json_std(r.adcam_features.standardizer)},
        {"centroids", detail::to_json_mat(r.adcam.centroids)},
        {"k_scores", scores}}},
      {"fused_count", r.regions.fused_count},
      {"covering_rate", r.regions.covering_rate},
  };
}

/// Rebuilds the parts of a segmentation that training reads. `labels` and
/// `ids` come from region_map.csv; founder templates are re-extracted from the
/// images returned by `founder_image(sample_id)`.
inline SegmentationResult segmentation_from_json(const nlohmann::json& j, std::vector<int> ids, RegionLabels labels,
                                                 const std::function<GrayImage(int)>& founder_image) {
  if (j.value("format", "") != "amdnloc-segmentation") throw std::runtime_error("segmentation.json: not an amdnloc segmentation");
  SegmentationResult r;
  const auto& o = j.at("options");
  r.options.tau_in = o.at("tau_in").get<double>();
  r.options.tau_out = o.at("tau_out").get<double>();
  r.options.template_size = parse_template_size(o.at("template").get<std::string>());
  r.options.min_count = o.at("min_count").get<int>();
  r.options.k_min = o.at("k_min").get<int>();
  r.options.k_max = o.at("k_max").get<int>();
  r.options.path_select = parse_path_select(o.at("path_select").get<std::string>());
  r.options.seed = o.at("seed").get<std::uint64_t>();
  r.options.use_cfr = o.at("use_cfr").get<bool>();
  r.options.use_adcam = o.at("use_adcam").get<bool>();

  r.sample_ids = std::move(ids);
  r.regions = std::move(labels);
  r.cfr.size = r.options.template_size;
  r.cfr.labels = r.regions.cfr_label;
  r.cfr.class_count = j.at("cfr").at("class_count").get<int>();
  for (const auto& fj : j.at("cfr").at("founders")) {
    Founder f;
    f.sample_id = fj.at("sample_id").get<int>();
    f.label = fj.at("label").get<int>();
    f.templates = extract_templates(founder_image(f.sample_id), r.cfr.size, f.sample_id);
    for (std::size_t i = 0; i < r.sample_ids.size(); ++i)
      if (r.sample_ids[i] == f.sample_id) f.index = i;
    r.cfr.founders.push_back(std::move(f));
  }
  const auto& a = j.at("adcam");
  r.adcam_features.standardizer = detail::std_from_json(a.at("standardizer"));
  r.adcam.centroids = detail::mat_from_json(a.at("centroids"));
  r.adcam.k = a.at("k").get<int>();
  r.adcam.assignment = r.regions.adcam_label;
  return r;
}

}  // namespace amdn
