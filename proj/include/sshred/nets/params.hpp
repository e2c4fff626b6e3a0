#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "sshred/core/rng.hpp"
#include "sshred/diff/var.hpp"

namespace sshred {

using NamedParams = std::vector<std::pair<std::string, Var>>;

// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)), drawn in row-major order.
inline Var uniform_param(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(-bound, bound);
  return Var::param(std::move(t));
}

inline std::size_t count_params(const NamedParams& ps) {
  std::size_t n = 0;
  for (const auto& [_, p] : ps) n += p.value().numel();
  return n;
}

}  // namespace sshred
