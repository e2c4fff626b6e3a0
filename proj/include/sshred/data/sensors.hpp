#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sshred/core/rng.hpp"
#include "sshred/data/field.hpp"

namespace sshred {

struct SensorSet {
  std::vector<std::size_t> indices;  // strictly increasing
  std::uint64_t seed = 0;

  std::size_t size() const { return indices.size(); }

  void validate(std::size_t points) const {
    for (std::size_t i = 0; i < indices.size(); ++i) {
      if (indices[i] >= points)
        throw ConfigError("sensor index " + std::to_string(indices[i]) + " out of range [0, " + std::to_string(points) + ")");
      if (i && indices[i] <= indices[i - 1]) throw ConfigError("sensor indices must be strictly increasing and unique");
    }
  }
};

// Locations whose value changes at least once over the record.
inline std::vector<std::size_t> informative_points(const Field& f) {
  std::vector<std::size_t> out;
  for (Eigen::Index j = 0; j < f.data.cols(); ++j)
    if (f.data.col(j).maxCoeff() > f.data.col(j).minCoeff()) out.push_back(static_cast<std::size_t>(j));
  return out;
}

// Uniform sample without replacement, returned sorted. With drop_constant,
// locations that never change are excluded from the pool.
inline SensorSet select_sensors(const Field& f, std::size_t count, std::uint64_t seed, bool drop_constant = false) {
  std::vector<std::size_t> pool;
  if (drop_constant) {
    pool = informative_points(f);
  } else {
    pool.resize(f.points());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  }
  if (count > pool.size())
    throw ConfigError("select_sensors: requested " + std::to_string(count) + " sensors but only " +
                      std::to_string(pool.size()) + (drop_constant ? " informative" : "") + " locations exist");
  Rng rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  SensorSet s;
  s.seed = seed;
  s.indices.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(count));
  std::sort(s.indices.begin(), s.indices.end());
  return s;
}

// One 0-based index per line; blank lines and '#' comments are skipped.
inline SensorSet read_sensor_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open sensor file " + path.string());
  SensorSet s;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line.erase(std::remove_if(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c) || c == ','; }), line.end());
    if (line.empty()) continue;
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(line, &pos);
    } catch (...) {
      pos = 0;
    }
    if (pos != line.size()) throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": not a sensor index");
    s.indices.push_back(static_cast<std::size_t>(v));
  }
  std::sort(s.indices.begin(), s.indices.end());
  if (std::adjacent_find(s.indices.begin(), s.indices.end()) != s.indices.end())
    throw ConfigError(path.string() + ": duplicate sensor index");
  return s;
}

inline void write_sensor_csv(const SensorSet& s, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  for (auto i : s.indices) os << i << '\n';
}

}  // namespace sshred
