// SPDX-License-Identifier: Apache-2.0
//
// OFDM/ULA channel model: steering vectors, CFR synthesis from path lists,
// angle-delay amplitude maps (ADCAM), grayscale rendering and AWGN injection.
//
// Conventions
//   H is Nt x Nc (rows = BS antennas, columns = subcarriers).
//   Column l of H is  sum_p a_p * e(aoa_p) * exp(-j 2 pi l n_p / Nc).
//   ADCAM is |V^H H F| with the shifted DFT V (Nt x Nt) and plain DFT F (Nc x Nc).
//   A single path with sample delay n lands in ADCAM column (Nc - n) mod Nc,
//   see adcam_delay_column().

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace amdn {

using cplx = std::complex<double>;

/// One propagation path between the BS array and an MT.
///
/// `aoa` is the ray angle at the BS array measured against the array axis and
/// drives the steering vector; `aod` is the ray angle at the MT end measured
/// against the same axis. Both lie in the open interval (0, pi).
struct PathRecord {
  double aoa = std::numbers::pi / 2;
  double aod = std::numbers::pi / 2;
  cplx gain{1.0, 0.0};
  std::uint32_t delay_samples = 0;
  double pathloss_db = 0.0;

  /// Linear amplitude the path contributes to the CFR.
  [[nodiscard]] cplx effective_gain() const {
    return gain * std::pow(10.0, -pathloss_db / 20.0);
  }

  bool operator==(const PathRecord&) const = default;
};

/// Throws std::invalid_argument unless the record is usable in an Nc-wide window.
inline void validate_path(const PathRecord& p, std::size_t nc) {
  if (!(p.aoa > 0.0 && p.aoa < std::numbers::pi))
    throw std::invalid_argument("PathRecord: aoa outside (0, pi)");
  if (!(p.aod > 0.0 && p.aod < std::numbers::pi))
    throw std::invalid_argument("PathRecord: aod outside (0, pi)");
  if (p.delay_samples >= nc)
    throw std::invalid_argument("PathRecord: delay_samples " + std::to_string(p.delay_samples) +
                                " outside cyclic window of " + std::to_string(nc));
  if (!(p.pathloss_db >= 0.0) || !std::isfinite(p.pathloss_db))
    throw std::invalid_argument("PathRecord: pathloss_db must be finite and >= 0");
}

struct CfrMatrix {
  Eigen::MatrixXcd entries;

  CfrMatrix() = default;
  CfrMatrix(std::size_t nt, std::size_t nc)
      : entries(Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(nt), static_cast<Eigen::Index>(nc))) {}
  explicit CfrMatrix(Eigen::MatrixXcd m) : entries(std::move(m)) {}

  [[nodiscard]] std::size_t nt() const { return static_cast<std::size_t>(entries.rows()); }
  [[nodiscard]] std::size_t nc() const { return static_cast<std::size_t>(entries.cols()); }
};

struct AdcamMatrix {
  Eigen::MatrixXd entries;

  AdcamMatrix() = default;
  explicit AdcamMatrix(Eigen::MatrixXd m) : entries(std::move(m)) {}

  [[nodiscard]] std::size_t nt() const { return static_cast<std::size_t>(entries.rows()); }
  [[nodiscard]] std::size_t nc() const { return static_cast<std::size_t>(entries.cols()); }
};

enum class ChannelTag { cfr_magnitude, cfr_phase, adcam };

inline const char* to_string(ChannelTag t) {
  switch (t) {
    case ChannelTag::cfr_magnitude: return "cfr_magnitude";
    case ChannelTag::cfr_phase: return "cfr_phase";
    case ChannelTag::adcam: return "adcam";
  }
  return "unknown";
}

/// Grayscale image with pixels in [0, 1]; rows map to antennas, columns to
/// subcarriers (or delay bins for ADCAM).
struct GrayImage {
  Eigen::MatrixXd pixels;
  ChannelTag tag = ChannelTag::cfr_magnitude;

  [[nodiscard]] std::size_t rows() const { return static_cast<std::size_t>(pixels.rows()); }
  [[nodiscard]] std::size_t cols() const { return static_cast<std::size_t>(pixels.cols()); }
};

/// ULA response e(phi): entry k = exp(-j 2 pi k (d/lambda) cos(phi)).
inline Eigen::VectorXcd array_response(double phi, std::size_t nt, double spacing_ratio = 0.5) {
  if (nt == 0) throw std::invalid_argument("array_response: nt must be >= 1");
  if (!(phi >= 0.0 && phi <= std::numbers::pi))
    throw std::invalid_argument("array_response: phi outside [0, pi]");
  if (!(spacing_ratio > 0.0)) throw std::invalid_argument("array_response: spacing_ratio must be > 0");

  Eigen::VectorXcd e(static_cast<Eigen::Index>(nt));
  const double step = -2.0 * std::numbers::pi * spacing_ratio * std::cos(phi);
  for (std::size_t k = 0; k < nt; ++k) e(static_cast<Eigen::Index>(k)) = std::polar(1.0, step * static_cast<double>(k));
  return e;
}

inline CfrMatrix cfr_from_paths(std::span<const PathRecord> paths, std::size_t nt, std::size_t nc,
                                double spacing_ratio = 0.5) {
  if (nt == 0 || nc == 0) throw std::invalid_argument("cfr_from_paths: nt and nc must be >= 1");
  CfrMatrix h(nt, nc);
  const double two_pi = 2.0 * std::numbers::pi;
  for (const auto& p : paths) {
    validate_path(p, nc);
    const Eigen::VectorXcd e = array_response(p.aoa, nt, spacing_ratio) * p.effective_gain();
    for (std::size_t l = 0; l < nc; ++l) {
      // l * n_p can be reduced mod Nc before scaling to keep the phase argument small.
      const auto turns = static_cast<double>((l * p.delay_samples) % nc) / static_cast<double>(nc);
      h.entries.col(static_cast<Eigen::Index>(l)) += e * std::polar(1.0, -two_pi * turns);
    }
  }
  return h;
}

struct DftPair {
  Eigen::MatrixXcd v;  // nt x nt, column index shifted by nt/2
  Eigen::MatrixXcd f;  // nc x nc
};

inline DftPair dft_matrices(std::size_t nt, std::size_t nc) {
  if (nt == 0 || nc == 0) throw std::invalid_argument("dft_matrices: sizes must be >= 1");
  const double two_pi = 2.0 * std::numbers::pi;
  const auto nt_d = static_cast<double>(nt);
  const auto nc_d = static_cast<double>(nc);

  DftPair out{Eigen::MatrixXcd(nt, nt), Eigen::MatrixXcd(nc, nc)};
  const double sv = 1.0 / std::sqrt(nt_d);
  for (std::size_t z = 0; z < nt; ++z)
    for (std::size_t q = 0; q < nt; ++q)
      out.v(static_cast<Eigen::Index>(z), static_cast<Eigen::Index>(q)) =
          std::polar(sv, -two_pi * static_cast<double>(z) * (static_cast<double>(q) - nt_d / 2.0) / nt_d);

  const double sf = 1.0 / std::sqrt(nc_d);
  for (std::size_t z = 0; z < nc; ++z)
    for (std::size_t q = 0; q < nc; ++q) {
      const auto turns = static_cast<double>((z * q) % nc) / nc_d;
      out.f(static_cast<Eigen::Index>(z), static_cast<Eigen::Index>(q)) = std::polar(sf, -two_pi * turns);
    }
  return out;
}

/// Single-realization ADCAM: elementwise |V^H H F|.
inline AdcamMatrix adcam(const CfrMatrix& h) {
  if (h.entries.size() == 0) return AdcamMatrix{Eigen::MatrixXd(h.entries.rows(), h.entries.cols())};
  const auto dft = dft_matrices(h.nt(), h.nc());
  const Eigen::MatrixXcd ad = dft.v.adjoint() * h.entries * dft.f;
  return AdcamMatrix{ad.cwiseAbs()};
}

/// ADCAM column holding the energy of a path with sample delay n.
constexpr std::size_t adcam_delay_column(std::size_t delay, std::size_t nc) {
  return (nc - delay % nc) % nc;
}

namespace detail {

inline Eigen::MatrixXd minmax_normalize(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return m;
  const double lo = m.minCoeff();
  const double hi = m.maxCoeff();
  if (!(hi > lo)) return Eigen::MatrixXd::Zero(m.rows(), m.cols());
  return ((m.array() - lo) / (hi - lo)).matrix();
}

}  // namespace detail

/// Renders a CFR into one of its two grayscale channels.
inline GrayImage render_image(const CfrMatrix& h, ChannelTag tag) {
  switch (tag) {
    case ChannelTag::cfr_magnitude:
      return {detail::minmax_normalize(h.entries.cwiseAbs()), tag};
    case ChannelTag::cfr_phase: {
      Eigen::MatrixXd ph = h.entries.unaryExpr([](const cplx& c) {
        return (std::arg(c) + std::numbers::pi) / (2.0 * std::numbers::pi);
      }).real();
      return {ph, tag};
    }
    case ChannelTag::adcam:
      return {detail::minmax_normalize(h.entries.cwiseAbs()), tag};
  }
  throw std::invalid_argument("render_image: unknown channel tag");
}

inline GrayImage render_image(const AdcamMatrix& a, ChannelTag tag = ChannelTag::adcam) {
  if (tag != ChannelTag::adcam) throw std::invalid_argument("render_image: ADCAM only renders to the adcam channel");
  return {detail::minmax_normalize(a.entries), tag};
}

/// Sentinel for "no noise".
inline constexpr double kNoNoise = std::numeric_limits<double>::infinity();

/// H + N with N ~ CN(0, P_avg / 10^(snr/10)) i.i.d., P_avg = mean |H|^2.
inline CfrMatrix add_noise(const CfrMatrix& h, double snr_db, std::uint64_t seed) {
  if (std::isinf(snr_db) && snr_db > 0) return h;
  if (std::isnan(snr_db)) throw std::invalid_argument("add_noise: snr_db is NaN");
  const double p_avg = h.entries.cwiseAbs2().mean();
  if (!(p_avg > 0.0)) throw std::domain_error("add_noise: SNR undefined for an all-zero channel");

  const double sigma2 = p_avg / std::pow(10.0, snr_db / 10.0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, std::sqrt(sigma2 / 2.0));
  CfrMatrix out = h;
  // Row-major draw order keeps the sequence independent of Eigen's storage order.
  for (Eigen::Index r = 0; r < out.entries.rows(); ++r)
    for (Eigen::Index c = 0; c < out.entries.cols(); ++c) {
      const double re = gauss(rng);
      const double im = gauss(rng);
      out.entries(r, c) += cplx(re, im);
    }
  return out;
}

}  // namespace amdn
