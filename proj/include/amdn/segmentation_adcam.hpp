// SPDX-License-Identifier: Apache-2.0
//
// Power/angle/delay-domain segmentation: k-means over standardized per-sample
// path features [aod, aoa, |gain|, pathloss_db], with the cluster count chosen
// by a combination of the silhouette coefficient and the Calinski-Harabasz index.

#pragma once

#include "amdn/channel.hpp"
#include "amdn/scenegen.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace amdn {

inline constexpr int kClusterDims = 4;

enum class PathSelect { strongest, first_arrival };

inline PathSelect parse_path_select(std::string_view s) {
  if (s == "strongest") return PathSelect::strongest;
  if (s == "first_arrival") return PathSelect::first_arrival;
  throw std::invalid_argument("unknown path selection '" + std::string(s) + "'");
}

inline const char* to_string(PathSelect p) { return p == PathSelect::strongest ? "strongest" : "first_arrival"; }

/// Per-dimension z-score; dimensions without spread are only centered.
struct Standardizer {
  static constexpr double kMinScale = 1e-9;

  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static Standardizer fit(const Eigen::MatrixXd& rows) {
    Standardizer s;
    const auto n = static_cast<double>(rows.rows());
    s.mean = rows.colwise().mean().transpose();
    s.scale = Eigen::VectorXd::Ones(rows.cols());
    for (Eigen::Index d = 0; d < rows.cols(); ++d) {
      // Round-off spread on a constant column is not a real scale.
      const double sd = std::sqrt((rows.col(d).array() - s.mean(d)).square().sum() / n);
      if (sd > kMinScale * std::max(1.0, std::abs(s.mean(d)))) s.scale(d) = sd;
    }
    return s;
  }

  [[nodiscard]] Eigen::VectorXd apply(const Eigen::VectorXd& x) const { return (x - mean).cwiseQuotient(scale); }

  [[nodiscard]] Eigen::MatrixXd apply_rows(const Eigen::MatrixXd& rows) const {
    Eigen::MatrixXd out = rows.rowwise() - mean.transpose();
    return out.array().rowwise() / scale.transpose().array();
  }
};

/// Unscaled k(i) of one sample.
inline Eigen::Vector4d raw_cluster_feature(const Sample& s, PathSelect select) {
  if (s.paths.empty()) throw std::invalid_argument("build_features: sample " + std::to_string(s.id) + " has no paths");
  const PathRecord* p = &s.paths.front();
  for (const auto& q : s.paths) {
    const bool better = select == PathSelect::strongest ? q.pathloss_db < p->pathloss_db : q.delay_samples < p->delay_samples;
    if (better) p = &q;
  }
  return {p->aod, p->aoa, std::abs(p->gain), p->pathloss_db};
}

struct ClusterFeatures {
  Eigen::MatrixXd points;  // n x 4, standardized
  Standardizer standardizer;
};

inline ClusterFeatures build_features(std::span<const Sample> samples, PathSelect select) {
  Eigen::MatrixXd raw(static_cast<Eigen::Index>(samples.size()), kClusterDims);
  for (std::size_t i = 0; i < samples.size(); ++i)
    raw.row(static_cast<Eigen::Index>(i)) = raw_cluster_feature(samples[i], select).transpose();
  ClusterFeatures out;
  if (samples.empty()) return out;
  out.standardizer = Standardizer::fit(raw);
  out.points = out.standardizer.apply_rows(raw);
  return out;
}

struct ClusterModel {
  int k = 0;
  Eigen::MatrixXd centroids;  // k x d
  std::vector<int> assignment;
  double wcss = 0.0;
  std::vector<double> wcss_history;  // after every assignment step
  int iterations = 0;
};

inline std::size_t count_distinct_rows(const Eigen::MatrixXd& points) {
  std::set<std::vector<double>> rows;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(points.cols()));
    for (Eigen::Index d = 0; d < points.cols(); ++d) r[static_cast<std::size_t>(d)] = points(i, d);
    rows.insert(std::move(r));
  }
  return rows.size();
}

/// Index of the nearest centroid (lowest index on ties).
inline int nearest_centroid(const Eigen::MatrixXd& centroids, const Eigen::VectorXd& x) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const double d = (centroids.row(c).transpose() - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

namespace detail {

inline double assign_points(const Eigen::MatrixXd& pts, const Eigen::MatrixXd& cents, std::vector<int>& assignment) {
  double wcss = 0.0;
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    const int c = nearest_centroid(cents, pts.row(i).transpose());
    assignment[static_cast<std::size_t>(i)] = c;
    wcss += (pts.row(i) - cents.row(c)).squaredNorm();
  }
  return wcss;
}

inline double wcss_of(const Eigen::MatrixXd& pts, const Eigen::MatrixXd& cents, const std::vector<int>& assignment) {
  double w = 0.0;
  for (Eigen::Index i = 0; i < pts.rows(); ++i) w += (pts.row(i) - cents.row(assignment[static_cast<std::size_t>(i)])).squaredNorm();
  return w;
}

/// Point with the largest distance to its centroid among clusters with more
/// than one member; -1 if none.
inline Eigen::Index farthest_point(const Eigen::MatrixXd& pts, const Eigen::MatrixXd& cents,
                                   const std::vector<int>& assignment, const std::vector<int>& counts) {
  Eigen::Index best = -1;
  double best_d = -1.0;
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    const int c = assignment[static_cast<std::size_t>(i)];
    if (counts[static_cast<std::size_t>(c)] < 2) continue;
    const double d = (pts.row(i) - cents.row(c)).squaredNorm();
    if (d > best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

}  // namespace detail

/// Lloyd's algorithm from a seeded k-means++ start. Empty clusters are reseeded
/// from the point farthest from its centroid.
inline ClusterModel kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int max_iter = 100, double tol = 1e-6) {
  const Eigen::Index n = points.rows();
  if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
  if (static_cast<std::size_t>(k) > count_distinct_rows(points))
    throw std::invalid_argument("kmeans: k exceeds the number of distinct points");

  std::mt19937_64 rng(seed);
  Eigen::MatrixXd cents(k, points.cols());
  {
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    cents.row(0) = points.row(pick(rng));
    std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
    for (int c = 1; c < k; ++c) {
      double total = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        auto& d = d2[static_cast<std::size_t>(i)];
        d = std::min(d, (points.row(i) - cents.row(c - 1)).squaredNorm());
        total += d;
      }
      std::uniform_real_distribution<double> u(0.0, total);
      double r = u(rng);
      Eigen::Index chosen = -1;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double d = d2[static_cast<std::size_t>(i)];
        if (d <= 0.0) continue;
        chosen = i;
        if (r < d) break;
        r -= d;
      }
      cents.row(c) = points.row(chosen);
    }
  }

  ClusterModel m;
  m.k = k;
  m.assignment.assign(static_cast<std::size_t>(n), 0);
  m.wcss = detail::assign_points(points, cents, m.assignment);
  m.wcss_history.push_back(m.wcss);

  std::vector<int> counts(static_cast<std::size_t>(k));
  for (int it = 0; it < max_iter; ++it) {
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(k, points.cols());
    std::fill(counts.begin(), counts.end(), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = m.assignment[static_cast<std::size_t>(i)];
      next.row(c) += points.row(i);
      ++counts[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < k; ++c)
      if (counts[static_cast<std::size_t>(c)] > 0) next.row(c) /= counts[static_cast<std::size_t>(c)];
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      const auto far = detail::farthest_point(points, next, m.assignment, counts);
      if (far < 0) break;
      next.row(c) = points.row(far);
      --counts[static_cast<std::size_t>(m.assignment[static_cast<std::size_t>(far)])];
      m.assignment[static_cast<std::size_t>(far)] = c;
      counts[static_cast<std::size_t>(c)] = 1;
    }
    const double shift = (next - cents).rowwise().norm().maxCoeff();
    cents = next;
    m.wcss = detail::assign_points(points, cents, m.assignment);
    m.wcss_history.push_back(m.wcss);
    m.iterations = it + 1;
    if (shift < tol) break;
  }

  // The final assignment step may leave a cluster empty; hand it a point.
  for (bool repaired = true; repaired;) {
    repaired = false;
    std::fill(counts.begin(), counts.end(), 0);
    for (int a : m.assignment) ++counts[static_cast<std::size_t>(a)];
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      const auto far = detail::farthest_point(points, cents, m.assignment, counts);
      if (far < 0) break;
      m.assignment[static_cast<std::size_t>(far)] = c;
      repaired = true;
      break;
    }
    if (repaired) {
      cents.setZero();
      std::fill(counts.begin(), counts.end(), 0);
      for (Eigen::Index i = 0; i < n; ++i) {
        const int c = m.assignment[static_cast<std::size_t>(i)];
        cents.row(c) += points.row(i);
        ++counts[static_cast<std::size_t>(c)];
      }
      for (int c = 0; c < k; ++c)
        if (counts[static_cast<std::size_t>(c)] > 0) cents.row(c) /= counts[static_cast<std::size_t>(c)];
      m.wcss = detail::wcss_of(points, cents, m.assignment);
      m.wcss_history.push_back(m.wcss);
    }
  }
  m.centroids = cents;
  return m;
}

namespace detail {

inline int cluster_count_checked(std::span<const int> assignment, const char* who) {
  if (assignment.empty()) throw std::invalid_argument(std::string(who) + ": empty assignment");
  const int k = *std::max_element(assignment.begin(), assignment.end()) + 1;
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (int a : assignment) {
    if (a < 0) throw std::invalid_argument(std::string(who) + ": negative cluster id");
    ++counts[static_cast<std::size_t>(a)];
  }
  if (std::find(counts.begin(), counts.end(), 0) != counts.end())
    throw std::invalid_argument(std::string(who) + ": cluster ids must cover 0..k-1 without gaps");
  return k;
}

}  // namespace detail

/// Mean silhouette; singleton clusters score 0.
inline double silhouette(const Eigen::MatrixXd& points, std::span<const int> assignment) {
  const int k = detail::cluster_count_checked(assignment, "silhouette");
  if (k < 2) throw std::invalid_argument("silhouette: needs at least 2 clusters");
  if (static_cast<Eigen::Index>(assignment.size()) != points.rows())
    throw std::invalid_argument("silhouette: assignment length mismatch");

  const auto n = static_cast<std::size_t>(points.rows());
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (int a : assignment) ++counts[static_cast<std::size_t>(a)];

  double total = 0.0;
  std::vector<double> sums(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < n; ++i) {
    const int own = assignment[i];
    if (counts[static_cast<std::size_t>(own)] == 1) continue;
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      sums[static_cast<std::size_t>(assignment[j])] +=
          (points.row(static_cast<Eigen::Index>(i)) - points.row(static_cast<Eigen::Index>(j))).norm();
    }
    const double a = sums[static_cast<std::size_t>(own)] / (counts[static_cast<std::size_t>(own)] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c)
      if (c != own) b = std::min(b, sums[static_cast<std::size_t>(c)] / counts[static_cast<std::size_t>(c)]);
    const double den = std::max(a, b);
    if (den > 0.0) total += (b - a) / den;
  }
  return total / static_cast<double>(n);
}

/// Calinski-Harabasz index; +infinity when the within-cluster scatter is zero.
inline double calinski_harabasz(const Eigen::MatrixXd& points, std::span<const int> assignment) {
  const int k = detail::cluster_count_checked(assignment, "calinski_harabasz");
  const auto n = static_cast<int>(points.rows());
  if (static_cast<int>(assignment.size()) != n) throw std::invalid_argument("calinski_harabasz: assignment length mismatch");
  if (k < 2 || k > n - 1) throw std::invalid_argument("calinski_harabasz: cluster count must be in [2, n-1]");

  Eigen::MatrixXd cents = Eigen::MatrixXd::Zero(k, points.cols());
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (int i = 0; i < n; ++i) {
    cents.row(assignment[static_cast<std::size_t>(i)]) += points.row(i);
    ++counts[static_cast<std::size_t>(assignment[static_cast<std::size_t>(i)])];
  }
  for (int c = 0; c < k; ++c) cents.row(c) /= counts[static_cast<std::size_t>(c)];
  const Eigen::RowVectorXd global = points.colwise().mean();

  double trace_b = 0.0;
  for (int c = 0; c < k; ++c) trace_b += counts[static_cast<std::size_t>(c)] * (cents.row(c) - global).squaredNorm();
  double trace_w = 0.0;
  for (int i = 0; i < n; ++i) trace_w += (points.row(i) - cents.row(assignment[static_cast<std::size_t>(i)])).squaredNorm();
  if (trace_w == 0.0) return std::numeric_limits<double>::infinity();
  return trace_b * (n - k) / (trace_w * (k - 1));
}

struct KSelection {
  int k = 0;
  ClusterModel model;
  std::vector<int> candidates;
  std::vector<double> silhouette_scores;
  std::vector<double> ch_scores;
  std::vector<double> combined;
};

namespace detail {

// Min-max over the finite values; +inf maps to 1 and a flat curve to 0.
inline std::vector<double> normalize_scores(const std::vector<double>& v) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (double x : v)
    if (std::isfinite(x)) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  std::vector<double> out(v.size(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (std::isinf(v[i])) {
      out[i] = v[i] > 0 ? 1.0 : 0.0;
    } else if (hi > lo) {
      out[i] = (v[i] - lo) / (hi - lo);
    }
  }
  return out;
}

}  // namespace detail

/// Sweeps k over [k_min, k_max] and keeps the k maximizing the mean of the
/// min-max normalized silhouette and CH curves (smaller k wins ties).
inline KSelection select_k(const Eigen::MatrixXd& points, int k_min, int k_max, std::uint64_t seed) {
  const auto n = static_cast<int>(points.rows());
  if (k_min < 1 || k_max < k_min) throw std::invalid_argument("select_k: bad k range");
  if (k_max >= n) throw std::invalid_argument("select_k: k_max must be < number of points");
  const int distinct = static_cast<int>(count_distinct_rows(points));
  const int hi = std::min(k_max, distinct);
  const int lo = std::min(k_min, hi);

  KSelection sel;
  if (hi == lo || hi < 2) {
    sel.k = hi;
    sel.model = kmeans(points, hi, seed);
    sel.candidates = {hi};
    return sel;
  }
  const int start = std::max(lo, 2);
  std::vector<ClusterModel> models;
  for (int k = start; k <= hi; ++k) {
    models.push_back(kmeans(points, k, seed));
    sel.candidates.push_back(k);
    sel.silhouette_scores.push_back(silhouette(points, models.back().assignment));
    sel.ch_scores.push_back(calinski_harabasz(points, models.back().assignment));
  }
  const auto sn = detail::normalize_scores(sel.silhouette_scores);
  const auto cn = detail::normalize_scores(sel.ch_scores);
  std::size_t best = 0;
  for (std::size_t i = 0; i < sn.size(); ++i) {
    sel.combined.push_back(0.5 * (sn[i] + cn[i]));
    if (sel.combined[i] > sel.combined[best]) best = i;
  }
  sel.k = sel.candidates[best];
  sel.model = std::move(models[best]);
  return sel;
}

}  // namespace amdn
