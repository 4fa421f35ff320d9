// SPDX-License-Identifier: Apache-2.0

#include "amdn/channel.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>
#include <vector>

using namespace amdn;

namespace {

std::vector<PathRecord> random_paths(std::mt19937_64& rng, int count, std::size_t nc) {
  std::uniform_real_distribution<double> ang(0.05, std::numbers::pi - 0.05);
  std::uniform_real_distribution<double> ph(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> pl(0.0, 30.0);
  std::uniform_int_distribution<std::uint32_t> dl(0, static_cast<std::uint32_t>(nc - 1));
  std::vector<PathRecord> out;
  for (int i = 0; i < count; ++i) out.push_back({ang(rng), ang(rng), std::polar(1.0, ph(rng)), dl(rng), pl(rng)});
  return out;
}

}  // namespace

TEST(ArrayResponse, BroadsideIsAllOnes) {
  const auto e = array_response(std::numbers::pi / 2, 8);
  for (Eigen::Index k = 0; k < e.size(); ++k) EXPECT_NEAR(std::abs(e(k) - cplx(1.0, 0.0)), 0.0, 1e-12);
}

TEST(ArrayResponse, EndfireAlternatesSign) {
  const auto e = array_response(0.0, 4);
  const double expect[] = {1, -1, 1, -1};
  for (int k = 0; k < 4; ++k) {
    EXPECT_NEAR(e(k).real(), expect[k], 1e-12);
    EXPECT_NEAR(e(k).imag(), 0.0, 1e-12);
  }
}

TEST(ArrayResponse, UnitModulus) {
  const auto e = array_response(1.234, 64);
  for (Eigen::Index k = 0; k < e.size(); ++k) EXPECT_NEAR(std::abs(e(k)), 1.0, 1e-12);
}

TEST(ArrayResponse, RejectsBadInput) {
  EXPECT_THROW(array_response(-0.1, 4), std::invalid_argument);
  EXPECT_THROW(array_response(4.0, 4), std::invalid_argument);
  EXPECT_THROW(array_response(1.0, 0), std::invalid_argument);
  EXPECT_THROW(array_response(1.0, 4, 0.0), std::invalid_argument);
}

TEST(Cfr, EmptyPathListIsZero) {
  const auto h = cfr_from_paths({}, 4, 8);
  EXPECT_EQ(h.entries.rows(), 4);
  EXPECT_EQ(h.entries.cols(), 8);
  EXPECT_EQ(h.entries.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Cfr, SingleBroadsidePathIsAllOnes) {
  const std::vector<PathRecord> p{{std::numbers::pi / 2, std::numbers::pi / 2, {1.0, 0.0}, 0, 0.0}};
  const auto h = cfr_from_paths(p, 4, 8);
  EXPECT_LT((h.entries - Eigen::MatrixXcd::Ones(4, 8)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Cfr, MatchesDirectSum) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const auto paths = random_paths(rng, 1 + trial % 5, 32);
    const auto h = cfr_from_paths(paths, 16, 32);
    EXPECT_LT((h.entries - oracle::cfr(paths, 16, 32)).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Cfr, DelayOutsideWindowThrows) {
  const std::vector<PathRecord> p{{1.0, 1.0, {1.0, 0.0}, 8, 0.0}};
  EXPECT_THROW(cfr_from_paths(p, 4, 8), std::invalid_argument);
}

TEST(Cfr, AngleAtBoundaryThrows) {
  const std::vector<PathRecord> p{{0.0, 1.0, {1.0, 0.0}, 0, 0.0}};
  EXPECT_THROW(cfr_from_paths(p, 4, 8), std::invalid_argument);
}

TEST(Dft, MatricesAreUnitary) {
  for (std::size_t n : {1u, 2u, 3u, 8u, 17u, 64u, 128u}) {
    const auto d = dft_matrices(n, n);
    const auto id = Eigen::MatrixXcd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    EXPECT_LT((d.v.adjoint() * d.v - id).cwiseAbs().maxCoeff(), 1e-10) << n;
    EXPECT_LT((d.f.adjoint() * d.f - id).cwiseAbs().maxCoeff(), 1e-10) << n;
  }
}

TEST(Dft, EntriesMatchDefinition) {
  const auto d = dft_matrices(8, 6);
  EXPECT_LT((d.v - oracle::v_matrix(8)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((d.f - oracle::f_matrix(6)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Adcam, MatchesTripleLoopProduct) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const auto paths = random_paths(rng, 3, 16);
    const CfrMatrix h{oracle::cfr(paths, 16, 16)};
    EXPECT_LT((adcam(h).entries - oracle::adcam(h.entries)).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Adcam, ZeroCfrGivesZero) {
  const auto a = adcam(CfrMatrix(8, 8));
  EXPECT_EQ(a.entries.maxCoeff(), 0.0);
}

TEST(Adcam, BroadsideZeroDelayPeak) {
  const std::size_t nt = 64, nc = 64;
  const std::vector<PathRecord> p{{std::numbers::pi / 2, std::numbers::pi / 2, {1.0, 0.0}, 0, 0.0}};
  const auto a = adcam(cfr_from_paths(p, nt, nc));
  Eigen::Index r = 0, c = 0;
  const double peak = a.entries.maxCoeff(&r, &c);
  EXPECT_EQ(r, 32);
  EXPECT_EQ(c, 0);
  EXPECT_NEAR(peak, 64.0, 1e-9);
  // All energy sits in the one bin.
  EXPECT_NEAR(a.entries.squaredNorm(), 64.0 * 64.0, 1e-6);
}

TEST(Adcam, DelayedPathColumn) {
  // With F as defined the energy of delay n lands in column (nc - n) mod nc.
  const std::size_t nt = 16, nc = 32;
  for (std::uint32_t n : {0u, 1u, 5u, 31u}) {
    const std::vector<PathRecord> p{{std::numbers::pi / 2, std::numbers::pi / 2, {1.0, 0.0}, n, 0.0}};
    const auto a = adcam(cfr_from_paths(p, nt, nc));
    Eigen::Index r = 0, c = 0;
    const double peak = a.entries.maxCoeff(&r, &c);
    EXPECT_EQ(r, 8);
    EXPECT_EQ(static_cast<std::size_t>(c), adcam_delay_column(n, nc)) << n;
    EXPECT_NEAR(peak, std::sqrt(double(nt * nc)), 1e-9);
  }
  EXPECT_EQ(adcam_delay_column(0, 64), 0u);
  EXPECT_EQ(adcam_delay_column(3, 64), 61u);
}

TEST(Adcam, EnergyPreserved) {
  std::mt19937_64 rng(9);
  const auto h = cfr_from_paths(random_paths(rng, 4, 32), 32, 32);
  EXPECT_NEAR(adcam(h).entries.squaredNorm(), h.entries.squaredNorm(), 1e-8 * h.entries.squaredNorm());
}

TEST(RenderImage, MagnitudeMinMax) {
  CfrMatrix h(2, 2);
  h.entries << cplx(1, 0), cplx(0, 3), cplx(0, 0), cplx(-2, 0);
  const auto img = render_image(h, ChannelTag::cfr_magnitude);
  EXPECT_EQ(img.tag, ChannelTag::cfr_magnitude);
  EXPECT_NEAR(img.pixels(0, 0), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(img.pixels(0, 1), 1.0, 1e-15);
  EXPECT_NEAR(img.pixels(1, 0), 0.0, 1e-15);
  EXPECT_NEAR(img.pixels(1, 1), 2.0 / 3.0, 1e-15);
}

TEST(RenderImage, ConstantMagnitudeRendersZero) {
  const std::vector<PathRecord> p{{std::numbers::pi / 2, 1.0, {1.0, 0.0}, 0, 0.0}};
  const auto img = render_image(cfr_from_paths(p, 4, 4), ChannelTag::cfr_magnitude);
  EXPECT_EQ(img.pixels.cwiseAbs().maxCoeff(), 0.0);
}

TEST(RenderImage, PhaseInUnitInterval) {
  std::mt19937_64 rng(3);
  const auto h = cfr_from_paths(random_paths(rng, 3, 8), 8, 8);
  const auto img = render_image(h, ChannelTag::cfr_phase);
  EXPECT_GE(img.pixels.minCoeff(), 0.0);
  EXPECT_LE(img.pixels.maxCoeff(), 1.0);
  EXPECT_NEAR(img.pixels(0, 0), (std::arg(h.entries(0, 0)) + std::numbers::pi) / (2 * std::numbers::pi), 1e-15);
}

TEST(RenderImage, AdcamOnlyToAdcamChannel) {
  EXPECT_THROW(render_image(AdcamMatrix{Eigen::MatrixXd::Ones(2, 2)}, ChannelTag::cfr_phase), std::invalid_argument);
}

TEST(Noise, InfiniteSnrIsIdentity) {
  std::mt19937_64 rng(1);
  const auto h = cfr_from_paths(random_paths(rng, 2, 8), 8, 8);
  EXPECT_EQ(add_noise(h, kNoNoise, 7).entries, h.entries);
}

TEST(Noise, SeededAndScaled) {
  std::mt19937_64 rng(1);
  const auto h = cfr_from_paths(random_paths(rng, 2, 64), 64, 64);
  const auto a = add_noise(h, 10.0, 42);
  const auto b = add_noise(h, 10.0, 42);
  EXPECT_EQ(a.entries, b.entries);
  EXPECT_NE(a.entries, add_noise(h, 10.0, 43).entries);
  const double p_sig = h.entries.cwiseAbs2().mean();
  const double p_noise = (a.entries - h.entries).cwiseAbs2().mean();
  EXPECT_NEAR(10.0 * std::log10(p_sig / p_noise), 10.0, 0.3);
}

TEST(Noise, ZeroChannelThrows) { EXPECT_THROW(add_noise(CfrMatrix(4, 4), 10.0, 1), std::domain_error); }
