// SPDX-License-Identifier: Apache-2.0
//
// Fingerprint -> position regression with one affine head per region.
//
// Feature extraction is deterministic (block means, row/column profiles and
// ADCAM peaks) and shared by all regions; only the heads are region specific.
// At test time a sample is routed to a region by re-running the training-time
// matchers: best founder template pair for the CFR label, nearest centroid for
// the ADCAM label, then the (cfr, adcam) lookup. Unknown or cleansed pairs fall
// back to the region whose mean training feature vector is nearest.

#pragma once

#include "amdn/channel.hpp"
#include "amdn/regions.hpp"
#include "amdn/scenegen.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace amdn {

struct FeatureConfig {
  std::size_t nt = 64;
  std::size_t nc = 64;
  std::size_t grid = 8;   // block-mean output is grid x grid
  std::size_t peaks = 5;  // ADCAM peaks kept

  [[nodiscard]] std::size_t cfr_length() const { return 2 * grid * grid + nt + nc; }
  [[nodiscard]] std::size_t adcam_length() const { return grid * grid + nt + nc + 3 * peaks; }
  [[nodiscard]] std::size_t fused_length() const { return cfr_length() + adcam_length(); }

  bool operator==(const FeatureConfig&) const = default;
};

namespace detail {

inline void check_dims(const GrayImage& img, const FeatureConfig& cfg, const char* who) {
  if (img.rows() != cfg.nt || img.cols() != cfg.nc)
    throw std::invalid_argument(std::string(who) + ": image is " + std::to_string(img.rows()) + "x" +
                                std::to_string(img.cols()) + ", expected " + std::to_string(cfg.nt) + "x" +
                                std::to_string(cfg.nc));
  if (cfg.grid == 0 || cfg.nt % cfg.grid != 0 || cfg.nc % cfg.grid != 0)
    throw std::invalid_argument(std::string(who) + ": image size must be a multiple of the block grid");
}

inline void put_block_means(const Eigen::MatrixXd& px, std::size_t grid, Eigen::VectorXd& out, Eigen::Index& at) {
  const auto bh = px.rows() / static_cast<Eigen::Index>(grid);
  const auto bw = px.cols() / static_cast<Eigen::Index>(grid);
  for (Eigen::Index gy = 0; gy < static_cast<Eigen::Index>(grid); ++gy)
    for (Eigen::Index gx = 0; gx < static_cast<Eigen::Index>(grid); ++gx) out(at++) = px.block(gy * bh, gx * bw, bh, bw).mean();
}

inline void put_profiles(const Eigen::MatrixXd& px, Eigen::VectorXd& out, Eigen::Index& at) {
  out.segment(at, px.rows()) = px.rowwise().mean();
  at += px.rows();
  out.segment(at, px.cols()) = px.colwise().mean().transpose();
  at += px.cols();
}

}  // namespace detail

/// Magnitude block means, phase block means, magnitude row and column means.
inline Eigen::VectorXd extract_features_cfr(const GrayImage& magnitude, const GrayImage& phase, const FeatureConfig& cfg) {
  detail::check_dims(magnitude, cfg, "extract_features_cfr");
  detail::check_dims(phase, cfg, "extract_features_cfr");
  Eigen::VectorXd f(static_cast<Eigen::Index>(cfg.cfr_length()));
  Eigen::Index at = 0;
  detail::put_block_means(magnitude.pixels, cfg.grid, f, at);
  detail::put_block_means(phase.pixels, cfg.grid, f, at);
  detail::put_profiles(magnitude.pixels, f, at);
  return f;
}

struct Peak {
  Eigen::Index row = 0;
  Eigen::Index col = 0;
  double value = 0.0;
};

/// The k largest pixels, row-major order breaking ties. Missing or
/// non-positive peaks are reported as (0, 0, 0).
inline std::vector<Peak> top_peaks(const Eigen::MatrixXd& px, std::size_t k) {
  std::vector<Peak> all;
  all.reserve(static_cast<std::size_t>(px.size()));
  for (Eigen::Index r = 0; r < px.rows(); ++r)
    for (Eigen::Index c = 0; c < px.cols(); ++c) all.push_back({r, c, px(r, c)});
  const std::size_t m = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(m), all.end(), [](const Peak& a, const Peak& b) {
    if (a.value != b.value) return a.value > b.value;
    if (a.row != b.row) return a.row < b.row;
    return a.col < b.col;
  });
  std::vector<Peak> out(k);
  for (std::size_t i = 0; i < m; ++i)
    if (all[i].value > 0.0) out[i] = all[i];
  return out;
}

/// ADCAM block means, row and column means, then (row, col, value) of the top peaks.
inline Eigen::VectorXd extract_features_adcam(const GrayImage& image, const FeatureConfig& cfg) {
  detail::check_dims(image, cfg, "extract_features_adcam");
  Eigen::VectorXd f(static_cast<Eigen::Index>(cfg.adcam_length()));
  Eigen::Index at = 0;
  detail::put_block_means(image.pixels, cfg.grid, f, at);
  detail::put_profiles(image.pixels, f, at);
  for (const auto& p : top_peaks(image.pixels, cfg.peaks)) {
    f(at++) = static_cast<double>(p.row);
    f(at++) = static_cast<double>(p.col);
    f(at++) = p.value;
  }
  return f;
}

inline Eigen::VectorXd fuse_features(const Eigen::VectorXd& f_cfr, const Eigen::VectorXd& f_adcam) {
  Eigen::VectorXd out(f_cfr.size() + f_adcam.size());
  out << f_cfr, f_adcam;
  return out;
}

/// Unnormalized fused feature vector of one sample.
inline Eigen::VectorXd sample_features(const Sample& s, const FeatureConfig& cfg) {
  return fuse_features(extract_features_cfr(render_image(s.cfr, ChannelTag::cfr_magnitude),
                                            render_image(s.cfr, ChannelTag::cfr_phase), cfg),
                       extract_features_adcam(render_image(s.adcam), cfg));
}

inline Eigen::MatrixXd feature_matrix(std::span<const Sample> samples, const FeatureConfig& cfg) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(cfg.fused_length()));
  for (std::size_t i = 0; i < samples.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = sample_features(samples[i], cfg).transpose();
  return x;
}

// Affine heads. W is 2 x (F + 1); the last column is the bias.

inline Eigen::MatrixXd augment(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd a(x.rows(), x.cols() + 1);
  a << x, Eigen::VectorXd::Ones(x.rows());
  return a;
}

inline Eigen::Vector2d apply_head(const Eigen::MatrixXd& w, const Eigen::VectorXd& x) {
  return w.leftCols(w.cols() - 1) * x + w.col(w.cols() - 1);
}

/// (1/n) sum ||W [x_i; 1] - y_i||^2
inline double mse_loss(const Eigen::MatrixXd& w, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  const Eigen::MatrixXd r = augment(x) * w.transpose() - y;
  return r.squaredNorm() / static_cast<double>(x.rows());
}

inline Eigen::MatrixXd mse_gradient(const Eigen::MatrixXd& w, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  const Eigen::MatrixXd xa = augment(x);
  const Eigen::MatrixXd r = xa * w.transpose() - y;
  return (2.0 / static_cast<double>(x.rows())) * r.transpose() * xa;
}

/// Ridge with an unpenalized bias: on column-centered X and y solves
/// (Xc^T Xc + lambda I) w = Xc^T yc, then bias = mean(y) - w mean(x).
inline Eigen::MatrixXd fit_ridge(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double lambda) {
  if (x.rows() == 0) throw std::invalid_argument("fit_ridge: no samples");
  if (x.rows() != y.rows()) throw std::invalid_argument("fit_ridge: row count mismatch");
  if (lambda < 0.0) throw std::invalid_argument("fit_ridge: lambda must be >= 0");
  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const Eigen::RowVectorXd y_mean = y.colwise().mean();
  const Eigen::MatrixXd xc = x.rowwise() - x_mean;
  const Eigen::MatrixXd yc = y.rowwise() - y_mean;
  Eigen::MatrixXd a = xc.transpose() * xc;
  a.diagonal().array() += lambda;
  const Eigen::MatrixXd b = xc.transpose() * yc;
  Eigen::MatrixXd w;  // F x 2
  if (lambda == 0.0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    if (qr.rank() < a.rows()) throw std::runtime_error("fit_ridge: singular normal equations (set lambda > 0)");
    w = qr.solve(b);
  } else {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    if (ldlt.info() != Eigen::Success) throw std::runtime_error("fit_ridge: factorization failed");
    w = ldlt.solve(b);
  }
  Eigen::MatrixXd out(y.cols(), x.cols() + 1);
  out.leftCols(x.cols()) = w.transpose();
  out.col(x.cols()) = (y_mean - x_mean * w).transpose();
  return out;
}

struct SgdOptions {
  int batch_size = 16;
  int epochs = 150;
  double learning_rate = 3e-3;
  int decay_every = 50;  // learning rate halves every this many epochs
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Seeded mini-batch Adam on the MSE loss. Targets are standardized
/// internally and the returned head maps back to the original units.
inline Eigen::MatrixXd fit_sgd(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const SgdOptions& opt, std::uint64_t seed) {
  if (x.rows() == 0) throw std::invalid_argument("fit_sgd: no samples");
  if (opt.batch_size < 1 || opt.epochs < 0) throw std::invalid_argument("fit_sgd: bad options");
  const Eigen::Index n = x.rows();
  const Eigen::RowVectorXd y_mean = y.colwise().mean();
  Eigen::RowVectorXd y_scale = ((y.rowwise() - y_mean).array().square().colwise().sum() / static_cast<double>(n)).sqrt();
  for (Eigen::Index d = 0; d < y_scale.size(); ++d)
    if (!(y_scale(d) > 0.0)) y_scale(d) = 1.0;
  const Eigen::MatrixXd yn = (y.rowwise() - y_mean).array().rowwise() / y_scale.array();

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(y.cols(), x.cols() + 1);
  Eigen::MatrixXd m1 = Eigen::MatrixXd::Zero(w.rows(), w.cols());
  Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(w.rows(), w.cols());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  long step = 0;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = opt.learning_rate * std::pow(0.5, opt.decay_every > 0 ? epoch / opt.decay_every : 0);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(opt.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(opt.batch_size));
      Eigen::MatrixXd xb(static_cast<Eigen::Index>(end - start), x.cols());
      Eigen::MatrixXd yb(static_cast<Eigen::Index>(end - start), y.cols());
      for (std::size_t i = start; i < end; ++i) {
        xb.row(static_cast<Eigen::Index>(i - start)) = x.row(order[i]);
        yb.row(static_cast<Eigen::Index>(i - start)) = yn.row(order[i]);
      }
      const Eigen::MatrixXd g = mse_gradient(w, xb, yb);
      ++step;
      m1 = opt.beta1 * m1 + (1.0 - opt.beta1) * g;
      m2 = opt.beta2 * m2 + (1.0 - opt.beta2) * g.cwiseAbs2();
      const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(step));
      w.array() -= lr * (m1.array() / c1) / ((m2.array() / c2).sqrt() + opt.epsilon);
    }
  }
  // Undo the target standardization.
  Eigen::MatrixXd out = w;
  for (Eigen::Index d = 0; d < y.cols(); ++d) {
    out.row(d) *= y_scale(d);
    out(d, out.cols() - 1) += y_mean(d);
  }
  return out;
}

enum class FitMethod { ridge_closed_form, sgd };

inline FitMethod parse_fit_method(std::string_view s) {
  if (s == "ridge" || s == "ridge_closed_form") return FitMethod::ridge_closed_form;
  if (s == "sgd") return FitMethod::sgd;
  throw std::invalid_argument("unknown training method '" + std::string(s) + "' (expected ridge or sgd)");
}

inline const char* to_string(FitMethod m) { return m == FitMethod::sgd ? "sgd" : "ridge"; }

struct TrainOptions {
  FitMethod method = FitMethod::ridge_closed_form;
  double ridge_lambda = 1e-3;
  SgdOptions sgd;
  std::uint64_t seed = 1;
  FeatureConfig features;
};

/// One head per region id in [0, count); rows with a negative id are ignored.
inline std::vector<Eigen::MatrixXd> fit_regions(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, std::span<const int> region,
                                                int count, const TrainOptions& opt) {
  std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < region.size(); ++i)
    if (region[i] >= 0) members[static_cast<std::size_t>(region[i])].push_back(static_cast<Eigen::Index>(i));
  std::vector<Eigen::MatrixXd> heads;
  for (int r = 0; r < count; ++r) {
    const auto& idx = members[static_cast<std::size_t>(r)];
    if (idx.empty()) throw std::runtime_error("train: region " + std::to_string(r) + " has no training samples");
    Eigen::MatrixXd xr(static_cast<Eigen::Index>(idx.size()), x.cols());
    Eigen::MatrixXd yr(static_cast<Eigen::Index>(idx.size()), y.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      xr.row(static_cast<Eigen::Index>(i)) = x.row(idx[i]);
      yr.row(static_cast<Eigen::Index>(i)) = y.row(idx[i]);
    }
    heads.push_back(opt.method == FitMethod::sgd ? fit_sgd(xr, yr, opt.sgd, opt.seed + static_cast<std::uint64_t>(r))
                                                 : fit_ridge(xr, yr, opt.ridge_lambda));
  }
  return heads;
}

struct ModelFounder {
  int sample_id = -1;
  int label = 0;
  TemplatePair templates;
};

struct RegionHead {
  int cfr_label = 0;
  int adcam_label = 0;
  Eigen::MatrixXd weights;   // 2 x (F + 1)
  Eigen::VectorXd centroid;  // mean normalized training feature
  std::size_t train_count = 0;
};

struct LocalizationModel {
  FeatureConfig features;
  Standardizer normalizer;
  FitMethod method = FitMethod::ridge_closed_form;
  double ridge_lambda = 1e-3;
  std::vector<RegionHead> regions;
  double covering_rate = 1.0;  // share of training samples in a retained region

  // Region assignment artifacts.
  TemplateSize template_size;
  std::vector<ModelFounder> founders;  // empty: CFR label is always 0
  PathSelect path_select = PathSelect::strongest;
  Standardizer cluster_standardizer;
  Eigen::MatrixXd adcam_centroids;

  [[nodiscard]] int region_of(int cfr, int adcam) const {
    for (std::size_t r = 0; r < regions.size(); ++r)
      if (regions[r].cfr_label == cfr && regions[r].adcam_label == adcam) return static_cast<int>(r);
    return -1;
  }
};

inline Eigen::MatrixXd positions_of(std::span<const Sample> samples) {
  Eigen::MatrixXd y(static_cast<Eigen::Index>(samples.size()), 2);
  for (std::size_t i = 0; i < samples.size(); ++i) y.row(static_cast<Eigen::Index>(i)) << samples[i].pos.x, samples[i].pos.y;
  return y;
}

/// Trains one head per retained region of `seg`. `samples` must be the list the
/// segmentation was computed on, in the same order.
inline LocalizationModel train(std::span<const Sample> samples, const SegmentationResult& seg, const TrainOptions& opt) {
  if (samples.size() != seg.regions.size()) throw std::invalid_argument("train: samples do not match the segmentation");
  LocalizationModel m;
  m.features = opt.features;
  m.method = opt.method;
  m.ridge_lambda = opt.ridge_lambda;

  const Eigen::MatrixXd raw = feature_matrix(samples, opt.features);
  m.normalizer = Standardizer::fit(raw);
  const Eigen::MatrixXd x = m.normalizer.apply_rows(raw);
  const Eigen::MatrixXd y = positions_of(samples);

  const auto heads = fit_regions(x, y, seg.regions.fused_label, seg.regions.fused_count, opt);
  const auto pairs = seg.regions.region_pairs();
  for (int r = 0; r < seg.regions.fused_count; ++r) {
    RegionHead h;
    h.cfr_label = pairs[static_cast<std::size_t>(r)].first;
    h.adcam_label = pairs[static_cast<std::size_t>(r)].second;
    h.weights = heads[static_cast<std::size_t>(r)];
    h.centroid = Eigen::VectorXd::Zero(x.cols());
    int count = 0;
    for (std::size_t i = 0; i < samples.size(); ++i)
      if (seg.regions.fused_label[i] == r) {
        h.centroid += x.row(static_cast<Eigen::Index>(i)).transpose();
        ++count;
      }
    h.centroid /= count;
    h.train_count = static_cast<std::size_t>(count);
    m.regions.push_back(std::move(h));
  }

  m.covering_rate = seg.regions.covering_rate;
  m.template_size = seg.cfr.size;
  m.path_select = seg.options.path_select;
  for (const auto& f : seg.cfr.founders) m.founders.push_back({f.sample_id, f.label, f.templates});
  m.cluster_standardizer = seg.adcam_features.standardizer;
  m.adcam_centroids = seg.adcam.centroids;
  return m;
}

/// Single affine head over every training sample (the unsegmented baseline).
inline LocalizationModel train_global(std::span<const Sample> samples, const TrainOptions& opt) {
  LocalizationModel m;
  m.features = opt.features;
  m.method = opt.method;
  m.ridge_lambda = opt.ridge_lambda;
  const Eigen::MatrixXd raw = feature_matrix(samples, opt.features);
  m.normalizer = Standardizer::fit(raw);
  const Eigen::MatrixXd x = m.normalizer.apply_rows(raw);
  const std::vector<int> all(samples.size(), 0);
  RegionHead h;
  h.weights = fit_regions(x, positions_of(samples), all, 1, opt).front();
  h.centroid = x.colwise().mean().transpose();
  h.train_count = samples.size();
  m.regions.push_back(std::move(h));
  m.adcam_centroids = Eigen::MatrixXd::Zero(1, kClusterDims);
  m.cluster_standardizer.mean = Eigen::VectorXd::Zero(kClusterDims);
  m.cluster_standardizer.scale = Eigen::VectorXd::Ones(kClusterDims);
  return m;
}

struct RegionAssignment {
  int region = 0;
  bool covered = false;  // the (cfr, adcam) pair is a retained training region
  int cfr_label = 0;
  int adcam_label = 0;
};

inline int nearest_region_centroid(const LocalizationModel& m, const Eigen::VectorXd& x) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < m.regions.size(); ++r) {
    const double d = (m.regions[r].centroid - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(r);
    }
  }
  return best;
}

/// CFR label of the founder whose template pair scores highest (first on ties).
inline int best_founder_label(const LocalizationModel& m, const GrayImage& magnitude) {
  if (m.founders.empty()) return 0;
  const NccSource src(magnitude.pixels, m.template_size.rows, m.template_size.cols);
  double best = -1.0;
  int label = m.founders.front().label;
  for (const auto& f : m.founders) {
    // min(E1, E2) <= E1, so E2 is only needed when E1 beats the current best.
    const double e1 = ncc(f.templates.m1, src);
    if (e1 <= best) continue;
    const double score = std::min(e1, ncc(f.templates.m2, src));
    if (score > best) {
      best = score;
      label = f.label;
    }
  }
  return label;
}

inline RegionAssignment assign_region(const LocalizationModel& m, const Sample& s, const Eigen::VectorXd& normalized_features) {
  RegionAssignment a;
  a.cfr_label = best_founder_label(m, render_image(s.cfr, ChannelTag::cfr_magnitude));
  a.adcam_label = nearest_centroid(m.adcam_centroids, m.cluster_standardizer.apply(raw_cluster_feature(s, m.path_select)));
  const int r = m.region_of(a.cfr_label, a.adcam_label);
  a.covered = r >= 0;
  a.region = a.covered ? r : nearest_region_centroid(m, normalized_features);
  return a;
}

inline RegionAssignment assign_region(const LocalizationModel& m, const Sample& s) {
  return assign_region(m, s, m.normalizer.apply(sample_features(s, m.features)));
}

struct Prediction {
  Vec2 pos;
  RegionAssignment assignment;
};

inline Prediction predict(const LocalizationModel& m, const Sample& s) {
  const Eigen::VectorXd x = m.normalizer.apply(sample_features(s, m.features));
  Prediction p;
  p.assignment = m.regions.size() == 1 && m.founders.empty() ? RegionAssignment{0, true, 0, 0} : assign_region(m, s, x);
  const Eigen::Vector2d v = apply_head(m.regions[static_cast<std::size_t>(p.assignment.region)].weights, x);
  p.pos = {v(0), v(1)};
  return p;
}

// model.json

inline nlohmann::json model_to_json(const LocalizationModel& m) {
  nlohmann::json founders = nlohmann::json::array();
  for (const auto& f : m.founders) founders.push_back({{"sample_id", f.sample_id}, {"label", f.label}});
  nlohmann::json regions = nlohmann::json::array();
  for (std::size_t r = 0; r < m.regions.size(); ++r) {
    const auto& h = m.regions[r];
    regions.push_back({{"id", r},
                       {"cfr_label", h.cfr_label},
                       {"adcam_label", h.adcam_label},
                       {"weights", detail::to_json_mat(h.weights)},
                       {"centroid", detail::to_json_vec(h.centroid)},
                       {"train_count", h.train_count}});
  }
  return {
      {"format", "amdnloc-model"},
      {"version", 1},
      {"features", {{"nt", m.features.nt}, {"nc", m.features.nc}, {"grid", m.features.grid}, {"peaks", m.features.peaks}}},
      {"normalizer", detail::to_json_std(m.normalizer)},
      {"method", to_string(m.method)},
      {"ridge_lambda", m.ridge_lambda},
      {"covering_rate", m.covering_rate},
      {"template", {m.template_size.rows, m.template_size.cols}},
      {"founders", founders},
      {"adcam",
       {{"path_select", to_string(m.path_select)},
        {"standardizer", detail::to_json_std(m.cluster_standardizer)},
        {"centroids", detail::to_json_mat(m.adcam_centroids)}}},
      {"regions", regions},
  };
}

/// Rebuilds a model; founder templates are re-extracted from the CFR
/// magnitude images returned by `founder_image(sample_id)`.
inline LocalizationModel model_from_json(const nlohmann::json& j, const std::function<GrayImage(int)>& founder_image) {
  if (j.value("format", "") != "amdnloc-model") throw std::runtime_error("model.json: not an amdnloc model");
  LocalizationModel m;
  const auto& f = j.at("features");
  m.features = {f.at("nt").get<std::size_t>(), f.at("nc").get<std::size_t>(), f.at("grid").get<std::size_t>(),
                f.at("peaks").get<std::size_t>()};
  m.normalizer = detail::std_from_json(j.at("normalizer"));
  m.method = parse_fit_method(j.at("method").get<std::string>());
  m.ridge_lambda = j.at("ridge_lambda").get<double>();
  m.covering_rate = j.value("covering_rate", 1.0);
  m.template_size = {j.at("template").at(0).get<std::size_t>(), j.at("template").at(1).get<std::size_t>()};
  for (const auto& fj : j.at("founders")) {
    ModelFounder mf;
    mf.sample_id = fj.at("sample_id").get<int>();
    mf.label = fj.at("label").get<int>();
    mf.templates = extract_templates(founder_image(mf.sample_id), m.template_size, mf.sample_id);
    m.founders.push_back(std::move(mf));
  }
  const auto& a = j.at("adcam");
  m.path_select = parse_path_select(a.at("path_select").get<std::string>());
  m.cluster_standardizer = detail::std_from_json(a.at("standardizer"));
  m.adcam_centroids = detail::mat_from_json(a.at("centroids"));
  for (const auto& rj : j.at("regions")) {
    RegionHead h;
    h.cfr_label = rj.at("cfr_label").get<int>();
    h.adcam_label = rj.at("adcam_label").get<int>();
    h.weights = detail::mat_from_json(rj.at("weights"));
    h.centroid = detail::vec_from_json(rj.at("centroid"));
    h.train_count = rj.value("train_count", std::size_t{0});
    m.regions.push_back(std::move(h));
  }
  return m;
}

}  // namespace amdn
