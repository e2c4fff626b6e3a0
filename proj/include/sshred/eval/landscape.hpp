#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "sshred/core/parallel.hpp"
#include "sshred/shred/loss.hpp"

namespace sshred {

using ModelLoss = std::function<double(const ShredModel&)>;

struct LandscapeGrid {
  double alpha = 0.0;
  std::uint64_t seed_x = 0, seed_y = 0;
  std::size_t n = 0;
  double base_loss = 0.0;
  RowMat loss;  // loss(i, j) at (t[i], t[j])

  double t(std::size_t i) const { return -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1); }
};

// One Gaussian tensor per network parameter, each scaled to unit Frobenius
// norm. Xi is not perturbed.
inline std::vector<Tensor> landscape_direction(const ShredModel& model, std::uint64_t seed) {
  std::vector<Tensor> dir;
  const auto params = model.network_params();
  for (std::size_t k = 0; k < params.size(); ++k) {
    Rng rng(split_seed(seed, k));
    Tensor t(params[k].second.shape());
    double sq = 0.0;
    for (auto& v : t.values()) {
      v = rng.normal();
      sq += v * v;
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (auto& v : t.values()) v *= inv;
    dir.push_back(std::move(t));
  }
  return dir;
}

// theta = theta0 + alpha * (tx * rx + ty * ry) on an independent copy.
inline ShredModel perturbed_model(const ShredModel& base, const std::vector<Tensor>& rx, const std::vector<Tensor>& ry,
                                  double alpha, double tx, double ty) {
  ShredModel m = base.clone();
  const auto params = m.network_params();
  for (std::size_t k = 0; k < params.size(); ++k) {
    Var p = params[k].second;
    Tensor& w = p.mutable_value();
    for (std::size_t i = 0; i < w.numel(); ++i) w[i] += alpha * (tx * rx[k][i] + ty * ry[k][i]);
  }
  return m;
}

namespace detail {
inline double guarded_loss(const ModelLoss& f, const ShredModel& m) {
  double v;
  try {
    v = f(m);
  } catch (const NumericalError&) {  // includes DivergenceError
    v = std::numeric_limits<double>::infinity();
  }
  return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}
}  // namespace detail

inline LandscapeGrid landscape_scan(const ShredModel& model, const ModelLoss& loss, double alpha, std::size_t n,
                                    std::uint64_t seed_x, std::uint64_t seed_y) {
  if (n < 3 || n % 2 == 0) throw ConfigError("landscape_scan: grid size must be odd and >= 3, got " + std::to_string(n));
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("landscape_scan: alpha must be finite and >= 0");
  LandscapeGrid g;
  g.alpha = alpha;
  g.seed_x = seed_x;
  g.seed_y = seed_y;
  g.n = n;
  g.loss.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  g.base_loss = detail::guarded_loss(loss, model);
  const auto rx = landscape_direction(model, seed_x);
  const auto ry = landscape_direction(model, seed_y);
  parallel_for(n * n, [&](std::size_t idx) {
    const std::size_t i = idx / n, j = idx % n;
    g.loss(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
        detail::guarded_loss(loss, perturbed_model(model, rx, ry, alpha, g.t(i), g.t(j)));
  });
  return g;
}

// Eval-mode combined loss over a fixed set of windows.
inline ModelLoss fixed_batch_loss(const WindowedDataset& ds, std::vector<std::size_t> starts, std::size_t limit) {
  return [&ds, starts = std::move(starts), limit](const ShredModel& m) {
    NoGradGuard ng;
    return combined_loss(starts, m, ds, limit, false, nullptr, true).total.item();
  };
}

struct ConvexityViolation {
  std::size_t segment = 0;
  std::size_t a = 0, mid = 0, b = 0;  // sample indices
  double fa = 0.0, fmid = 0.0, fb = 0.0;
};

struct ConvexityResult {
  std::size_t segments = 0;
  std::size_t passing_segments = 0;
  std::size_t triples = 0;
  std::vector<ConvexityViolation> violations;

  bool passed() const { return violations.empty(); }
  double pass_fraction() const {
    return segments == 0 ? 1.0 : static_cast<double>(passing_segments) / static_cast<double>(segments);
  }
};

// Each segment holds losses at equally spaced collinear points. Every triple
// (a, (a+b)/2, b) with an integer midpoint must satisfy
// f(mid) <= (f(a) + f(b)) / 2 + tol.
inline ConvexityResult convexity_check(const std::vector<std::vector<double>>& segments, double tol = 1e-7) {
  ConvexityResult r;
  r.segments = segments.size();
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const auto& f = segments[s];
    if (f.size() < 3) throw ShapeError("convexity_check: segment " + std::to_string(s) + " has fewer than 3 samples");
    bool ok = true;
    for (std::size_t a = 0; a < f.size(); ++a) {
      for (std::size_t b = a + 2; b < f.size(); b += 2) {
        const std::size_t mid = (a + b) / 2;
        ++r.triples;
        if (!(f[mid] <= 0.5 * (f[a] + f[b]) + tol)) {
          ok = false;
          r.violations.push_back({s, a, mid, b, f[a], f[mid], f[b]});
        }
      }
    }
    if (ok) ++r.passing_segments;
  }
  return r;
}

// Rows of the grid, columns of the grid and both diagonals as segments.
inline std::vector<std::vector<double>> grid_segments(const LandscapeGrid& g) {
  std::vector<std::vector<double>> out;
  const auto n = static_cast<Eigen::Index>(g.n);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> row, col;
    for (Eigen::Index j = 0; j < n; ++j) {
      row.push_back(g.loss(i, j));
      col.push_back(g.loss(j, i));
    }
    out.push_back(std::move(row));
    out.push_back(std::move(col));
  }
  std::vector<double> d1, d2;
  for (Eigen::Index i = 0; i < n; ++i) {
    d1.push_back(g.loss(i, i));
    d2.push_back(g.loss(i, n - 1 - i));
  }
  out.push_back(std::move(d1));
  out.push_back(std::move(d2));
  return out;
}

// Random straight segments in the (t_x, t_y) square [-1, 1]^2 of the same
// plane the grid spans, each sampled at `samples` equally spaced points.
inline std::vector<std::vector<double>> sample_segments(const ShredModel& model, const ModelLoss& loss, double alpha,
                                                        std::uint64_t seed_x, std::uint64_t seed_y,
                                                        std::size_t count, std::size_t samples, std::uint64_t seed) {
  if (samples < 3) throw ConfigError("sample_segments: need at least 3 samples per segment");
  const auto rx = landscape_direction(model, seed_x);
  const auto ry = landscape_direction(model, seed_y);
  std::vector<std::array<double, 4>> ends(count);
  Rng rng(seed);
  for (auto& e : ends)
    for (auto& v : e) v = rng.uniform(-1.0, 1.0);
  std::vector<std::vector<double>> out(count, std::vector<double>(samples));
  parallel_for(count * samples, [&](std::size_t idx) {
    const std::size_t s = idx / samples, k = idx % samples;
    const double u = static_cast<double>(k) / static_cast<double>(samples - 1);
    const auto& e = ends[s];
    out[s][k] = detail::guarded_loss(loss, perturbed_model(model, rx, ry, alpha, e[0] + u * (e[2] - e[0]),
                                                           e[1] + u * (e[3] - e[1])));
  });
  return out;
}

}  // namespace sshred
