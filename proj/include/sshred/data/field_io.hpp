#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "sshred/core/binio.hpp"
#include "sshred/data/field.hpp"

namespace sshred {

// FLD1 layout, little-endian:
//   "FLD1" | u32 version=1 | u8 ndims | u64 dims[ndims] | u64 T | u64 N |
//   f64 dt | u8 has_scale | f64 min | f64 max | f32 payload[T*N] (time-major)
inline constexpr char kFieldMagic[4] = {'F', 'L', 'D', '1'};
inline constexpr std::uint32_t kFieldVersion = 1;

inline void write_field(std::ostream& os, const Field& f) {
  f.check();
  if (f.grid.size() > 255) throw DimensionError("FLD1: too many grid dimensions");
  binio::put_bytes(os, kFieldMagic, 4);
  binio::put<std::uint32_t>(os, kFieldVersion);
  binio::put<std::uint8_t>(os, static_cast<std::uint8_t>(f.grid.size()));
  for (auto d : f.grid) binio::put<std::uint64_t>(os, d);
  binio::put<std::uint64_t>(os, f.frames());
  binio::put<std::uint64_t>(os, f.points());
  binio::put<double>(os, f.dt);
  binio::put<std::uint8_t>(os, f.scale ? 1 : 0);
  binio::put<double>(os, f.scale ? f.scale->min : 0.0);
  binio::put<double>(os, f.scale ? f.scale->max : 0.0);
  std::vector<float> row(f.points());
  for (Eigen::Index t = 0; t < f.data.rows(); ++t) {
    for (Eigen::Index j = 0; j < f.data.cols(); ++j) row[static_cast<std::size_t>(j)] = binio::to_le(static_cast<float>(f.data(t, j)));
    binio::put_bytes(os, row.data(), row.size() * sizeof(float));
  }
  if (!os) throw Error("FLD1: write failed");
}

inline Field read_field(std::istream& is) {
  char magic[4] = {};
  binio::get_bytes(is, magic, 4, "FLD1 magic");
  if (std::memcmp(magic, kFieldMagic, 4) != 0) throw FormatError("not a field file: expected magic \"FLD1\"");
  const auto version = binio::get<std::uint32_t>(is, "FLD1 version");
  if (version != kFieldVersion)
    throw VersionError("FLD1: unsupported version " + std::to_string(version) + " (expected 1)");
  Field f;
  const auto ndims = binio::get<std::uint8_t>(is, "FLD1 ndims");
  if (ndims > 3) throw DimensionError("FLD1: grid metadata has " + std::to_string(ndims) + " dims (max 3)");
  for (int i = 0; i < ndims; ++i) f.grid.push_back(binio::get<std::uint64_t>(is, "FLD1 grid dims"));
  const auto T = binio::get<std::uint64_t>(is, "FLD1 frame count");
  const auto N = binio::get<std::uint64_t>(is, "FLD1 point count");
  f.dt = binio::get<double>(is, "FLD1 dt");
  const auto has_scale = binio::get<std::uint8_t>(is, "FLD1 scale flag");
  const double lo = binio::get<double>(is, "FLD1 scale");
  const double hi = binio::get<double>(is, "FLD1 scale");
  if (has_scale > 1) throw FormatError("FLD1: bad scale flag");
  if (has_scale) f.scale = Scale{lo, hi};

  constexpr std::uint64_t limit = static_cast<std::uint64_t>(std::numeric_limits<Eigen::Index>::max()) / sizeof(double);
  if (T == 0 || N == 0) throw DimensionError("FLD1: zero frames or points");
  if (T > limit / N) throw DimensionError("FLD1: T*N overflows");
  if (!f.grid.empty()) {
    std::uint64_t prod = 1;
    for (auto d : f.grid) {
      if (d == 0 || prod > std::numeric_limits<std::uint64_t>::max() / d)
        throw DimensionError("FLD1: grid dimensions overflow");
      prod *= d;
    }
    if (prod != N) throw DimensionError("FLD1: grid product " + std::to_string(prod) + " != N " + std::to_string(N));
  }

  f.data.resize(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(N));
  std::vector<float> row(N);
  for (std::uint64_t t = 0; t < T; ++t) {
    binio::get_bytes(is, row.data(), N * sizeof(float), "FLD1 payload");
    for (std::uint64_t j = 0; j < N; ++j)
      f.data(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = binio::to_le(row[j]);
  }
  return f;
}

inline void save_field(const Field& f, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  write_field(os, f);
}

inline Field load_field(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open field file " + path.string());
  return read_field(is);
}

}  // namespace sshred
