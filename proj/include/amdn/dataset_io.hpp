// SPDX-License-Identifier: Apache-2.0
//
// Dataset directory layout:
//   scene.json     scene the dataset was generated from
//   positions.csv  id,x,y,is_los
//   paths.csv      id,path_id,aoa_rad,aod_rad,gain_re,gain_im,delay_samples,pathloss_db
//   cfr.bin        "AMDN" | u32 version | u32 count | u32 nt | u32 nc | f32 re,im row-major per sample
//   adcam.bin      same header, f32 row-major per sample
// All binary fields are little-endian.

#pragma once

#include "amdn/scenegen.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace amdn {

inline constexpr std::array<char, 4> kBinMagic{'A', 'M', 'D', 'N'};
inline constexpr std::uint32_t kBinVersion = 1;

/// Shortest round-trip decimal representation.
inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  const std::array<unsigned char, 4> b{static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                       static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b.data()), 4);
}

inline void put_f32(std::ostream& os, double v) { put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(v))); }

inline std::uint32_t get_u32(std::istream& is) {
  std::array<unsigned char, 4> b{};
  is.read(reinterpret_cast<char*>(b.data()), 4);
  if (!is) throw std::runtime_error("binary dataset: unexpected end of file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline float get_f32(std::istream& is) { return std::bit_cast<float>(get_u32(is)); }

struct BinHeader {
  std::uint32_t version = kBinVersion;
  std::uint32_t count = 0;
  std::uint32_t nt = 0;
  std::uint32_t nc = 0;
};

inline void write_header(std::ostream& os, const BinHeader& h) {
  os.write(kBinMagic.data(), 4);
  put_u32(os, h.version);
  put_u32(os, h.count);
  put_u32(os, h.nt);
  put_u32(os, h.nc);
}

inline BinHeader read_header(std::istream& is) {
  std::array<char, 4> magic{};
  is.read(magic.data(), 4);
  if (!is || magic != kBinMagic) throw std::runtime_error("binary dataset: bad magic");
  BinHeader h;
  h.version = get_u32(is);
  if (h.version != kBinVersion) throw std::runtime_error("binary dataset: unsupported version " + std::to_string(h.version));
  h.count = get_u32(is);
  h.nt = get_u32(is);
  h.nc = get_u32(is);
  return h;
}

inline std::ofstream open_out(const std::filesystem::path& p, bool binary = false) {
  std::ofstream os(p, binary ? std::ios::binary | std::ios::out : std::ios::out);
  if (!os) throw std::runtime_error("cannot open " + p.string() + " for writing");
  return os;
}

inline std::ifstream open_in(const std::filesystem::path& p, bool binary = false) {
  std::ifstream is(p, binary ? std::ios::binary | std::ios::in : std::ios::in);
  if (!is) throw std::runtime_error("cannot open " + p.string());
  return is;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace detail

inline void write_cfr_bin(const std::filesystem::path& file, const std::vector<Sample>& samples, std::size_t nt,
                          std::size_t nc) {
  auto os = detail::open_out(file, true);
  detail::write_header(os, {kBinVersion, static_cast<std::uint32_t>(samples.size()), static_cast<std::uint32_t>(nt),
                            static_cast<std::uint32_t>(nc)});
  for (const auto& s : samples) {
    if (s.cfr.nt() != nt || s.cfr.nc() != nc) throw std::invalid_argument("write_cfr_bin: sample dimension mismatch");
    for (Eigen::Index r = 0; r < s.cfr.entries.rows(); ++r)
      for (Eigen::Index c = 0; c < s.cfr.entries.cols(); ++c) {
        detail::put_f32(os, s.cfr.entries(r, c).real());
        detail::put_f32(os, s.cfr.entries(r, c).imag());
      }
  }
}

inline void write_adcam_bin(const std::filesystem::path& file, const std::vector<Sample>& samples, std::size_t nt,
                            std::size_t nc) {
  auto os = detail::open_out(file, true);
  detail::write_header(os, {kBinVersion, static_cast<std::uint32_t>(samples.size()), static_cast<std::uint32_t>(nt),
                            static_cast<std::uint32_t>(nc)});
  for (const auto& s : samples) {
    if (s.adcam.nt() != nt || s.adcam.nc() != nc) throw std::invalid_argument("write_adcam_bin: sample dimension mismatch");
    for (Eigen::Index r = 0; r < s.adcam.entries.rows(); ++r)
      for (Eigen::Index c = 0; c < s.adcam.entries.cols(); ++c) detail::put_f32(os, s.adcam.entries(r, c));
  }
}

inline void write_dataset(const std::filesystem::path& dir, const SceneConfig& scene, const std::vector<Sample>& samples) {
  std::filesystem::create_directories(dir);
  {
    auto os = detail::open_out(dir / "scene.json");
    os << nlohmann::json(scene).dump(2) << '\n';
  }
  {
    auto os = detail::open_out(dir / "positions.csv");
    os << "id,x,y,is_los\n";
    for (const auto& s : samples)
      os << s.id << ',' << format_double(s.pos.x) << ',' << format_double(s.pos.y) << ',' << (s.is_los ? 1 : 0) << '\n';
  }
  {
    auto os = detail::open_out(dir / "paths.csv");
    os << "id,path_id,aoa_rad,aod_rad,gain_re,gain_im,delay_samples,pathloss_db\n";
    for (const auto& s : samples)
      for (std::size_t k = 0; k < s.paths.size(); ++k) {
        const auto& p = s.paths[k];
        os << s.id << ',' << k << ',' << format_double(p.aoa) << ',' << format_double(p.aod) << ','
           << format_double(p.gain.real()) << ',' << format_double(p.gain.imag()) << ',' << p.delay_samples << ','
           << format_double(p.pathloss_db) << '\n';
      }
  }
  write_cfr_bin(dir / "cfr.bin", samples, scene.nt, scene.nc);
  write_adcam_bin(dir / "adcam.bin", samples, scene.nt, scene.nc);
}

struct Dataset {
  SceneConfig scene;
  std::vector<Sample> samples;
};

inline Dataset read_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  {
    auto is = detail::open_in(dir / "scene.json");
    ds.scene = nlohmann::json::parse(is).get<SceneConfig>();
  }
  std::map<int, std::size_t> index;
  {
    auto is = detail::open_in(dir / "positions.csv");
    std::string line;
    std::getline(is, line);
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const auto cells = detail::split_csv(line);
      if (cells.size() != 4) throw std::runtime_error("positions.csv: malformed row '" + line + "'");
      Sample s;
      s.id = std::stoi(cells[0]);
      s.pos = {std::stod(cells[1]), std::stod(cells[2])};
      s.is_los = cells[3] == "1";
      index[s.id] = ds.samples.size();
      ds.samples.push_back(std::move(s));
    }
  }
  {
    auto is = detail::open_in(dir / "paths.csv");
    std::string line;
    std::getline(is, line);
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const auto c = detail::split_csv(line);
      if (c.size() != 8) throw std::runtime_error("paths.csv: malformed row '" + line + "'");
      const auto it = index.find(std::stoi(c[0]));
      if (it == index.end()) throw std::runtime_error("paths.csv: unknown sample id " + c[0]);
      PathRecord p;
      p.aoa = std::stod(c[2]);
      p.aod = std::stod(c[3]);
      p.gain = {std::stod(c[4]), std::stod(c[5])};
      p.delay_samples = static_cast<std::uint32_t>(std::stoul(c[6]));
      p.pathloss_db = std::stod(c[7]);
      ds.samples[it->second].paths.push_back(p);
    }
  }
  {
    auto is = detail::open_in(dir / "cfr.bin", true);
    const auto h = detail::read_header(is);
    if (h.count != ds.samples.size()) throw std::runtime_error("cfr.bin: sample count does not match positions.csv");
    for (auto& s : ds.samples) {
      s.cfr = CfrMatrix(h.nt, h.nc);
      for (Eigen::Index r = 0; r < s.cfr.entries.rows(); ++r)
        for (Eigen::Index c = 0; c < s.cfr.entries.cols(); ++c) {
          const double re = detail::get_f32(is);
          const double im = detail::get_f32(is);
          s.cfr.entries(r, c) = {re, im};
        }
    }
  }
  {
    auto is = detail::open_in(dir / "adcam.bin", true);
    const auto h = detail::read_header(is);
    if (h.count != ds.samples.size()) throw std::runtime_error("adcam.bin: sample count does not match positions.csv");
    for (auto& s : ds.samples) {
      s.adcam = AdcamMatrix(Eigen::MatrixXd(h.nt, h.nc));
      for (Eigen::Index r = 0; r < s.adcam.entries.rows(); ++r)
        for (Eigen::Index c = 0; c < s.adcam.entries.cols(); ++c) s.adcam.entries(r, c) = detail::get_f32(is);
    }
  }
  return ds;
}

}  // namespace amdn
