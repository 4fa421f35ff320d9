// SPDX-License-Identifier: Apache-2.0

#include "amdn/segmentation_adcam.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace amdn;

namespace {

Eigen::MatrixXd column(std::initializer_list<double> v) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

Sample with_paths(int id, std::vector<PathRecord> p) {
  Sample s;
  s.id = id;
  s.paths = std::move(p);
  return s;
}

// Mirrors the documented rule on top of the reference indices.
int reference_select(const Eigen::MatrixXd& pts, int lo, int hi, std::uint64_t seed) {
  std::vector<double> sc, ch;
  for (int k = lo; k <= hi; ++k) {
    const auto m = kmeans(pts, k, seed);
    sc.push_back(oracle::silhouette(pts, m.assignment));
    ch.push_back(oracle::calinski_harabasz(pts, m.assignment));
  }
  auto norm = [](std::vector<double> v) {
    double a = 1e300, b = -1e300;
    for (double x : v)
      if (std::isfinite(x)) {
        a = std::min(a, x);
        b = std::max(b, x);
      }
    for (double& x : v) x = std::isinf(x) ? 1.0 : (b > a ? (x - a) / (b - a) : 0.0);
    return v;
  };
  const auto sn = norm(sc), cn = norm(ch);
  int best = 0;
  for (int i = 1; i < static_cast<int>(sn.size()); ++i)
    if (sn[i] + cn[i] > sn[best] + cn[best]) best = i;
  return lo + best;
}

}  // namespace

TEST(Features, SingleSampleIsZero) {
  const std::vector<Sample> s{with_paths(0, {{1.0, 2.0, {0.6, 0.8}, 3, 70.0}})};
  const auto f = build_features(s, PathSelect::strongest);
  EXPECT_EQ(f.points.rows(), 1);
  EXPECT_EQ(f.points.cols(), 4);
  EXPECT_EQ(f.points.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Features, TwoSamplesArePlusMinusOne) {
  const std::vector<Sample> s{with_paths(0, {{1.0, 2.0, {1, 0}, 3, 70.0}}), with_paths(1, {{1.5, 2.0, {1, 0}, 4, 75.0}})};
  const auto f = build_features(s, PathSelect::strongest);
  // Feature order is aod, aoa, |gain|, pathloss; the samples differ in aoa.
  EXPECT_DOUBLE_EQ(f.points(0, 1), -1.0);
  EXPECT_DOUBLE_EQ(f.points(1, 1), 1.0);
  EXPECT_DOUBLE_EQ(f.points(0, 3), -1.0);
  EXPECT_DOUBLE_EQ(f.points(1, 3), 1.0);
  EXPECT_EQ(f.points(0, 0), 0.0);
  EXPECT_EQ(f.points(1, 2), 0.0);
}

TEST(Features, StandardizedMoments) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  std::vector<Sample> s;
  for (int i = 0; i < 50; ++i)
    s.push_back(with_paths(i, {{u(rng), u(rng), {1, 0}, 1, 60.0 + 10 * u(rng)}, {u(rng), u(rng), {1, 0}, 5, 90.0}}));
  const auto f = build_features(s, PathSelect::strongest);
  for (Eigen::Index d = 0; d < 4; ++d) {
    const double mean = f.points.col(d).mean();
    const double var = (f.points.col(d).array() - mean).square().mean();
    EXPECT_NEAR(mean, 0.0, 1e-9);
    if (d != 2) {  // |gain| is constant
      EXPECT_NEAR(var, 1.0, 1e-9) << d;
    }
  }
  EXPECT_EQ(f.points.col(2).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Features, PathSelection) {
  const Sample s = with_paths(0, {{0.5, 0.6, {1, 0}, 2, 90.0}, {1.5, 1.6, {1, 0}, 7, 70.0}});
  EXPECT_EQ(raw_cluster_feature(s, PathSelect::strongest), Eigen::Vector4d(1.6, 1.5, 1.0, 70.0));
  EXPECT_EQ(raw_cluster_feature(s, PathSelect::first_arrival)(0), 0.6);
  EXPECT_THROW(raw_cluster_feature(with_paths(1, {}), PathSelect::strongest), std::invalid_argument);
  EXPECT_EQ(parse_path_select("first_arrival"), PathSelect::first_arrival);
  EXPECT_THROW(parse_path_select("weakest"), std::invalid_argument);
}

TEST(Standardizer, ConstantColumnOnlyCentered) {
  Eigen::MatrixXd m(3, 2);
  m << 1.0, 5.0, 2.0, 5.0, 3.0, 5.0 + 1e-12;
  const auto s = Standardizer::fit(m);
  EXPECT_EQ(s.scale(1), 1.0);
  EXPECT_GT(s.scale(0), 0.8);
}

TEST(Kmeans, KEqualsNGivesZeroWcss) {
  std::mt19937_64 rng(2);
  Eigen::MatrixXd p = Eigen::MatrixXd::Random(7, 3);
  const auto m = kmeans(p, 7, 1);
  EXPECT_NEAR(m.wcss, 0.0, 1e-20);
  std::set<int> used(m.assignment.begin(), m.assignment.end());
  EXPECT_EQ(used.size(), 7u);
}

TEST(Kmeans, ExactOneDimensionalClusters) {
  const auto m = kmeans(column({0, 0, 10, 10}), 2, 3);
  std::vector<double> c{m.centroids(0, 0), m.centroids(1, 0)};
  std::sort(c.begin(), c.end());
  EXPECT_EQ(c, (std::vector<double>{0.0, 10.0}));
  EXPECT_EQ(m.wcss, 0.0);
  EXPECT_TRUE(oracle::same_partition(m.assignment, {0, 0, 1, 1}));
}

TEST(Kmeans, RecoversBlobs) {
  std::mt19937_64 rng(3);
  const auto p = oracle::blobs(3, 20, 4, 10.0, 0.5, rng);
  std::vector<int> truth;
  for (int c = 0; c < 3; ++c) truth.insert(truth.end(), 20, c);
  const auto m = kmeans(p, 3, 7);
  EXPECT_TRUE(oracle::same_partition(m.assignment, truth));
}

TEST(Kmeans, WcssNonIncreasingAndDeterministic) {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd p = Eigen::MatrixXd::Random(200, 4);
  for (int k : {2, 5, 9}) {
    const auto m = kmeans(p, k, 11);
    for (std::size_t i = 1; i < m.wcss_history.size(); ++i) EXPECT_LE(m.wcss_history[i], m.wcss_history[i - 1] + 1e-12);
    const auto again = kmeans(p, k, 11);
    EXPECT_EQ(m.assignment, again.assignment);
    EXPECT_EQ(m.centroids, again.centroids);
    std::vector<int> counts(k, 0);
    for (int a : m.assignment) {
      ASSERT_GE(a, 0);
      ASSERT_LT(a, k);
      ++counts[a];
    }
    for (int c : counts) EXPECT_GT(c, 0);
  }
}

TEST(Kmeans, RejectsTooFewDistinctPoints) {
  EXPECT_THROW(kmeans(column({1, 1, 1, 2}), 3, 1), std::invalid_argument);
  EXPECT_THROW(kmeans(column({1, 2}), 0, 1), std::invalid_argument);
}

TEST(Silhouette, Examples) {
  EXPECT_DOUBLE_EQ(silhouette(column({0, 0, 10, 10}), std::vector<int>{0, 0, 1, 1}), 1.0);
  const double s = silhouette(column({0, 1, 9, 10}), std::vector<int>{0, 0, 1, 1});
  EXPECT_NEAR(s, 0.8885, 5e-5);
  EXPECT_NEAR(s, oracle::silhouette(column({0, 1, 9, 10}), {0, 0, 1, 1}), 1e-12);
  EXPECT_THROW(silhouette(column({0, 1}), std::vector<int>{0, 0}), std::invalid_argument);
}

TEST(Silhouette, SingletonScoresZero) {
  const auto p = column({0, 1, 50});
  EXPECT_NEAR(silhouette(p, std::vector<int>{0, 0, 1}), oracle::silhouette(p, {0, 0, 1}), 1e-12);
}

TEST(CalinskiHarabasz, Examples) {
  EXPECT_DOUBLE_EQ(calinski_harabasz(column({0, 1, 9, 10}), std::vector<int>{0, 0, 1, 1}), 162.0);
  EXPECT_TRUE(std::isinf(calinski_harabasz(column({0, 0, 10, 10}), std::vector<int>{0, 0, 1, 1})));
  EXPECT_THROW(calinski_harabasz(column({0, 1, 2}), std::vector<int>{0, 1, 2}), std::invalid_argument);
  EXPECT_THROW(calinski_harabasz(column({0, 1, 2}), std::vector<int>{0, 0, 0}), std::invalid_argument);
}

TEST(ClusterIndices, RandomInstancesMatchReference) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 10 + trial;
    const int k = 2 + trial % 5;
    Eigen::MatrixXd p(n, 4);
    std::normal_distribution<double> g(0.0, 1.0);
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = g(rng);
    std::vector<int> lab(n);
    for (int i = 0; i < n; ++i) lab[i] = i < k ? i : static_cast<int>(rng() % k);
    EXPECT_NEAR(silhouette(p, lab), oracle::silhouette(p, lab), 1e-9);
    const double ch = calinski_harabasz(p, lab);
    EXPECT_NEAR(ch, oracle::calinski_harabasz(p, lab), 1e-9 * std::max(1.0, ch));
    const double s = silhouette(p, lab);
    EXPECT_GE(s, -1.0);
    EXPECT_LE(s, 1.0);
  }
}

TEST(ClusterIndices, PermutationInvariant) {
  std::mt19937_64 rng(6);
  const auto p = oracle::blobs(3, 10, 4, 5.0, 1.0, rng);
  std::vector<int> lab(30), perm(30);
  for (int i = 0; i < 30; ++i) {
    lab[i] = i / 10;
    perm[i] = (lab[i] + 1) % 3;
  }
  EXPECT_NEAR(silhouette(p, lab), silhouette(p, perm), 1e-12);
  EXPECT_NEAR(calinski_harabasz(p, lab), calinski_harabasz(p, perm), 1e-9);
}

TEST(SelectK, ThreeBlobs) {
  std::mt19937_64 rng(7);
  const auto p = oracle::blobs(3, 20, 4, 10.0, 0.7, rng);
  const auto sel = select_k(p, 2, 8, 1);
  EXPECT_EQ(sel.k, 3);
  EXPECT_EQ(sel.k, reference_select(p, 2, 8, 1));
  EXPECT_EQ(sel.candidates.size(), 7u);
}

TEST(SelectK, TwoBlobs) {
  std::mt19937_64 rng(8);
  const auto p = oracle::blobs(2, 25, 4, 10.0, 0.7, rng);
  const auto sel = select_k(p, 2, 8, 1);
  EXPECT_EQ(sel.k, 2);
  EXPECT_EQ(sel.k, reference_select(p, 2, 8, 1));
}

TEST(SelectK, SingleCandidate) {
  std::mt19937_64 rng(9);
  const auto p = oracle::blobs(3, 10, 4, 10.0, 0.7, rng);
  EXPECT_EQ(select_k(p, 5, 5, 1).k, 5);
}

TEST(SelectK, AgreesWithReferenceOnNoise) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::MatrixXd p(60, 4);
    std::normal_distribution<double> g(0.0, 1.0);
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = g(rng);
    EXPECT_EQ(select_k(p, 2, 9, trial).k, reference_select(p, 2, 9, trial));
  }
}

TEST(SelectK, RejectsBadRange) {
  const auto p = column({0, 1, 2, 3});
  EXPECT_THROW(select_k(p, 2, 4, 1), std::invalid_argument);
  EXPECT_THROW(select_k(p, 3, 2, 1), std::invalid_argument);
}
