#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sshred/diff/tensor.hpp"

namespace sshred {

struct Scale {
  double min = 0.0;
  double max = 1.0;
  bool operator==(const Scale&) const = default;
};

// Time-major snapshots: row t is the flattened spatial field at frame t.
struct Field {
  RowMat data;
  std::vector<std::size_t> grid;  // optional (H, W) or (H, W, D)
  std::optional<Scale> scale;     // set once standardized
  double dt = 1.0;                // physical time per frame

  std::size_t frames() const { return static_cast<std::size_t>(data.rows()); }
  std::size_t points() const { return static_cast<std::size_t>(data.cols()); }

  void check() const {
    if (!grid.empty() && shape_numel(grid) != points())
      throw ShapeError("Field: grid " + shape_str(grid) + " does not match " + std::to_string(points()) + " points");
  }
};

// x' = (x - min) / (max - min) with the global min and max over all frames.
inline Field standardize(const Field& f) {
  if (f.data.size() == 0) throw ShapeError("standardize: empty field");
  const double lo = f.data.minCoeff();
  const double hi = f.data.maxCoeff();
  if (!(hi > lo)) throw ConfigError("standardize: degenerate scale (field is constant)");
  Field out = f;
  out.data = ((f.data.array() - lo) / (hi - lo)).matrix();
  out.scale = Scale{lo, hi};
  return out;
}

inline RowMat destandardize(const Eigen::Ref<const RowMat>& x, const Scale& s) {
  return (x.array() * (s.max - s.min) + s.min).matrix();
}

inline Field destandardize(const Field& f) {
  if (!f.scale) throw ConfigError("destandardize: field carries no scale");
  Field out = f;
  out.data = destandardize(f.data, *f.scale);
  out.scale.reset();
  return out;
}

}  // namespace sshred
