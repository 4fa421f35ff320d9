// SPDX-License-Identifier: Apache-2.0
//
// Placement-maximized normalized cross-correlation for nonnegative images.
//
//   E(T, I) = max_{x,y} sum T(x',y') I(x+x',y+y') / sqrt(sum T^2 * sum I(x+x',y+y')^2)
//
// Placements whose template or window energy is zero contribute nothing, so an
// all-zero template (or source) scores 0.
//
// The correlation surface is computed with a circular FFT of the source size.
// Valid placements never wrap (y + r <= rows - 1), so the circular result equals
// the linear one on every placement that is scanned.

#pragma once

#include "amdn/channel.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <utility>
#include <vector>

namespace amdn {

namespace detail {

struct FftwDeleter {
  void operator()(void* p) const { fftw_free(p); }
};

template <typename T>
using FftwPtr = std::unique_ptr<T[], FftwDeleter>;

template <typename T>
FftwPtr<T> fftw_alloc(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * std::max<std::size_t>(n, 1)));
  if (p == nullptr) throw std::bad_alloc();
  return FftwPtr<T>(p);
}

/// Forward r2c / inverse c2r plans for one 2D size plus per-size scratch.
/// Plans use FFTW_ESTIMATE so results are reproducible run to run.
class FftWorkspace {
 public:
  FftWorkspace(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), half_(cols / 2 + 1), real_(fftw_alloc<double>(rows * cols)),
        spec_(fftw_alloc<fftw_complex>(rows * half_)) {
    const int r = static_cast<int>(rows);
    const int c = static_cast<int>(cols);
    fwd_ = fftw_plan_dft_r2c_2d(r, c, real_.get(), spec_.get(), FFTW_ESTIMATE);
    inv_ = fftw_plan_dft_c2r_2d(r, c, spec_.get(), real_.get(), FFTW_ESTIMATE);
    if (fwd_ == nullptr || inv_ == nullptr) throw std::runtime_error("FFTW plan creation failed");
  }
  FftWorkspace(const FftWorkspace&) = delete;
  FftWorkspace& operator=(const FftWorkspace&) = delete;
  ~FftWorkspace() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
  }

  [[nodiscard]] std::size_t spectrum_size() const { return rows_ * half_; }

  /// Zero-padded (top-left anchored) forward transform of a row-major block.
  std::vector<std::complex<double>> forward(const double* px, std::size_t rows, std::size_t cols) {
    std::fill(real_.get(), real_.get() + rows_ * cols_, 0.0);
    for (std::size_t r = 0; r < rows; ++r) std::memcpy(real_.get() + r * cols_, px + r * cols, cols * sizeof(double));
    fftw_execute(fwd_);
    std::vector<std::complex<double>> out(spectrum_size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = {spec_[i][0], spec_[i][1]};
    return out;
  }

  /// Circular cross-correlation surface sum_n t[n] s[n + k], row-major in the
  /// workspace's real buffer.
  const double* correlate(const std::vector<std::complex<double>>& t_hat, const std::vector<std::complex<double>>& s_hat) {
    const double norm = 1.0 / static_cast<double>(rows_ * cols_);
    for (std::size_t i = 0; i < spectrum_size(); ++i) {
      const std::complex<double> v = std::conj(t_hat[i]) * s_hat[i] * norm;
      spec_[i][0] = v.real();
      spec_[i][1] = v.imag();
    }
    fftw_execute(inv_);
    return real_.get();
  }

  static FftWorkspace& get(std::size_t rows, std::size_t cols) {
    // FFTW planning is not thread-safe; one workspace set per thread.
    static std::mutex plan_mutex;
    thread_local std::map<std::pair<std::size_t, std::size_t>, std::unique_ptr<FftWorkspace>> cache;
    auto& slot = cache[{rows, cols}];
    if (!slot) {
      std::lock_guard<std::mutex> lock(plan_mutex);
      slot = std::make_unique<FftWorkspace>(rows, cols);
    }
    return *slot;
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::size_t half_;
  FftwPtr<double> real_;
  FftwPtr<fftw_complex> spec_;
  fftw_plan fwd_ = nullptr;
  fftw_plan inv_ = nullptr;
};

}  // namespace detail

/// Row-major copy of a template with its energy and, optionally, its
/// zero-padded spectrum for sources of one fixed size.
class NccTemplate {
 public:
  NccTemplate() = default;
  explicit NccTemplate(const Eigen::MatrixXd& px, std::size_t pad_rows = 0, std::size_t pad_cols = 0)
      : rows_(static_cast<std::size_t>(px.rows())), cols_(static_cast<std::size_t>(px.cols())), px_(rows_ * cols_) {
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) {
        const double v = px(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        px_[r * cols_ + c] = v;
        energy_ += v * v;
      }
    if (pad_rows >= rows_ && pad_cols >= cols_ && pad_rows > 0 && pad_cols > 0) {
      pad_rows_ = pad_rows;
      pad_cols_ = pad_cols;
      spectrum_ = detail::FftWorkspace::get(pad_rows, pad_cols).forward(px_.data(), rows_, cols_);
    }
  }

  [[nodiscard]] std::size_t rows() const { return rows_; }
  [[nodiscard]] std::size_t cols() const { return cols_; }
  [[nodiscard]] double energy() const { return energy_; }
  [[nodiscard]] const double* data() const { return px_.data(); }
  [[nodiscard]] bool has_spectrum_for(std::size_t rows, std::size_t cols) const {
    return !spectrum_.empty() && pad_rows_ == rows && pad_cols_ == cols;
  }
  [[nodiscard]] const std::vector<std::complex<double>>& spectrum() const { return spectrum_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> px_;
  double energy_ = 0.0;
  std::size_t pad_rows_ = 0;
  std::size_t pad_cols_ = 0;
  std::vector<std::complex<double>> spectrum_;
};

/// Source image prepared for one template size: pixels, spectrum and the
/// energy of every placement window.
class NccSource {
 public:
  NccSource() = default;
  NccSource(const Eigen::MatrixXd& px, std::size_t win_rows, std::size_t win_cols)
      : rows_(static_cast<std::size_t>(px.rows())), cols_(static_cast<std::size_t>(px.cols())),
        win_rows_(win_rows), win_cols_(win_cols), px_(rows_ * cols_) {
    if (win_rows == 0 || win_cols == 0 || win_rows > rows_ || win_cols > cols_)
      throw std::invalid_argument("NccSource: template window larger than source");
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c)
        px_[r * cols_ + c] = px(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));

    // Each window energy is a fresh sum of nonnegative terms, no running
    // subtraction, so empty windows come out exactly zero.
    const std::size_t ny = placements_y();
    const std::size_t nx = placements_x();
    window_energy_.assign(ny * nx, 0.0);
    std::vector<double> colsq(cols_);
    for (std::size_t y = 0; y < ny; ++y) {
      std::fill(colsq.begin(), colsq.end(), 0.0);
      for (std::size_t r = 0; r < win_rows_; ++r) {
        const double* row = &px_[(y + r) * cols_];
        for (std::size_t c = 0; c < cols_; ++c) colsq[c] += row[c] * row[c];
      }
      for (std::size_t x = 0; x < nx; ++x) {
        double e = 0.0;
        for (std::size_t c = 0; c < win_cols_; ++c) e += colsq[x + c];
        window_energy_[y * nx + x] = e;
      }
    }
    spectrum_ = detail::FftWorkspace::get(rows_, cols_).forward(px_.data(), rows_, cols_);
  }

  NccSource(const GrayImage& img, std::size_t win_rows, std::size_t win_cols) : NccSource(img.pixels, win_rows, win_cols) {}

  [[nodiscard]] std::size_t rows() const { return rows_; }
  [[nodiscard]] std::size_t cols() const { return cols_; }
  [[nodiscard]] std::size_t win_rows() const { return win_rows_; }
  [[nodiscard]] std::size_t win_cols() const { return win_cols_; }
  [[nodiscard]] std::size_t placements_y() const { return rows_ - win_rows_ + 1; }
  [[nodiscard]] std::size_t placements_x() const { return cols_ - win_cols_ + 1; }
  [[nodiscard]] const double* data() const { return px_.data(); }
  [[nodiscard]] const std::vector<std::complex<double>>& spectrum() const { return spectrum_; }
  [[nodiscard]] double window_energy(std::size_t y, std::size_t x) const { return window_energy_[y * placements_x() + x]; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t win_rows_ = 0;
  std::size_t win_cols_ = 0;
  std::vector<double> px_;
  std::vector<double> window_energy_;
  std::vector<std::complex<double>> spectrum_;
};

namespace detail {

inline double ncc_scan(const NccTemplate& t, const NccSource& s, const double* corr, std::size_t stride) {
  double best = 0.0;
  for (std::size_t y = 0; y < s.placements_y(); ++y)
    for (std::size_t x = 0; x < s.placements_x(); ++x) {
      const double den = t.energy() * s.window_energy(y, x);
      if (!(den > 0.0)) continue;
      const double v = std::min(1.0, corr[y * stride + x] / std::sqrt(den));
      best = std::max(best, v);
    }
  return best;
}

inline double ncc_spatial(const NccTemplate& t, const NccSource& s) {
  const std::size_t ny = s.placements_y();
  const std::size_t nx = s.placements_x();
  std::vector<double> corr(ny * nx, 0.0);
  for (std::size_t y = 0; y < ny; ++y)
    for (std::size_t r = 0; r < t.rows(); ++r) {
      const double* srow = s.data() + (y + r) * s.cols();
      for (std::size_t c = 0; c < t.cols(); ++c) {
        const double tv = t.data()[r * t.cols() + c];
        if (tv == 0.0) continue;
        for (std::size_t x = 0; x < nx; ++x) corr[y * nx + x] += tv * srow[x + c];
      }
    }
  return ncc_scan(t, s, corr.data(), nx);
}

}  // namespace detail

/// Max NCC over all placements of `t` inside `s`.
inline double ncc(const NccTemplate& t, const NccSource& s) {
  if (t.rows() != s.win_rows() || t.cols() != s.win_cols())
    throw std::invalid_argument("ncc: template size does not match the source window size");
  if (!(t.energy() > 0.0)) return 0.0;
  if (!t.has_spectrum_for(s.rows(), s.cols())) return detail::ncc_spatial(t, s);
  const double* corr = detail::FftWorkspace::get(s.rows(), s.cols()).correlate(t.spectrum(), s.spectrum());
  return detail::ncc_scan(t, s, corr, s.cols());
}

/// Convenience overload for one-off comparisons.
inline double ncc(const GrayImage& templ, const GrayImage& source) {
  if (templ.rows() > source.rows() || templ.cols() > source.cols())
    throw std::invalid_argument("ncc: template larger than source");
  if (templ.rows() == 0 || templ.cols() == 0) throw std::invalid_argument("ncc: empty template");
  if (templ.pixels.minCoeff() < 0.0 || source.pixels.minCoeff() < 0.0)
    throw std::invalid_argument("ncc: pixels must be nonnegative");
  return ncc(NccTemplate(templ.pixels, source.rows(), source.cols()), NccSource(source.pixels, templ.rows(), templ.cols()));
}

}  // namespace amdn
