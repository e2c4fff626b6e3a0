#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "sshred/core/rng.hpp"
#include "sshred/data/field.hpp"

namespace sshred {

template <typename F>
Eigen::VectorXd rk4_step(const F& f, const Eigen::VectorXd& y, double h) {
  const Eigen::VectorXd k1 = f(y);
  const Eigen::VectorXd k2 = f(y + 0.5 * h * k1);
  const Eigen::VectorXd k3 = f(y + 0.5 * h * k2);
  const Eigen::VectorXd k4 = f(y + h * k3);
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Integrates y' = f(y) with `substeps` RK4 steps per frame; row i is y(i*dt).
template <typename F>
RowMat integrate_rk4(const F& f, const Eigen::VectorXd& y0, std::size_t frames, double dt, int substeps = 1) {
  if (!(dt > 0.0)) throw ConfigError("integrate_rk4: dt must be positive");
  if (substeps < 1) throw ConfigError("integrate_rk4: substeps must be >= 1");
  RowMat out(static_cast<Eigen::Index>(frames), y0.size());
  Eigen::VectorXd y = y0;
  const double h = dt / substeps;
  for (std::size_t i = 0; i < frames; ++i) {
    out.row(static_cast<Eigen::Index>(i)) = y.transpose();
    if (i + 1 == frames) break;
    for (int s = 0; s < substeps; ++s) y = rk4_step(f, y, h);
    if (!y.allFinite()) throw NumericalError("integrate_rk4: trajectory diverged at frame " + std::to_string(i + 1));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Modal field: superposition of fixed orthogonal spatial patterns oscillating
// at known frequencies.

struct ModeSpec {
  std::size_t pattern = 0;
  double amplitude = 1.0;
  double omega = 2.0 * std::numbers::pi;
  double phase = 0.0;
};

// Discrete sine basis on an (H, W) grid; distinct ids are exactly orthogonal.
inline Eigen::RowVectorXd spatial_pattern(std::size_t id, std::size_t H, std::size_t W) {
  if (id >= H * W) throw ConfigError("spatial_pattern: id out of range for grid");
  const double a = static_cast<double>(id / W + 1);
  const double b = static_cast<double>(id % W + 1);
  Eigen::RowVectorXd phi(static_cast<Eigen::Index>(H * W));
  for (std::size_t i = 0; i < H; ++i)
    for (std::size_t j = 0; j < W; ++j)
      phi[static_cast<Eigen::Index>(i * W + j)] =
          std::sin(std::numbers::pi * a * static_cast<double>(i + 1) / static_cast<double>(H + 1)) *
          std::sin(std::numbers::pi * b * static_cast<double>(j + 1) / static_cast<double>(W + 1));
  return phi;
}

struct ModalFieldResult {
  Field field;
  nlohmann::json truth;
};

// u(x, t) = sum_i a_i phi_i(x) cos(omega_i t + phase_i) + N(0, sigma^2), t = frame*dt.
inline ModalFieldResult gen_modal_field(std::size_t H, std::size_t W, const std::vector<ModeSpec>& modes,
                                        std::size_t T, double dt, double sigma, std::uint64_t seed) {
  if (T < 2 || !(dt > 0.0)) throw ConfigError("gen_modal_field: need T >= 2 and dt > 0");
  if (H == 0 || W == 0) throw ConfigError("gen_modal_field: empty grid");
  if (sigma < 0) throw ConfigError("gen_modal_field: sigma must be >= 0");
  ModalFieldResult r;
  r.field.grid = {H, W};
  r.field.dt = dt;
  r.field.data = RowMat::Zero(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(H * W));
  nlohmann::json jm = nlohmann::json::array();
  for (const auto& m : modes) {
    const Eigen::RowVectorXd phi = spatial_pattern(m.pattern, H, W);
    for (std::size_t t = 0; t < T; ++t)
      r.field.data.row(static_cast<Eigen::Index>(t)) +=
          m.amplitude * std::cos(m.omega * static_cast<double>(t) * dt + m.phase) * phi;
    jm.push_back({{"pattern", m.pattern}, {"amplitude", m.amplitude}, {"omega", m.omega}, {"phase", m.phase}});
  }
  if (sigma > 0) {
    Rng rng(seed);
    for (Eigen::Index i = 0; i < r.field.data.size(); ++i) r.field.data.data()[i] += sigma * rng.normal();
  }
  r.truth = {{"kind", "modal"}, {"grid", {H, W}}, {"frames", T}, {"dt", dt}, {"sigma", sigma},
             {"seed", seed}, {"modes", jm}};
  return r;
}

// ---------------------------------------------------------------------------
// Pendulum: z'' = quad z'^2 + cubic z'^3 + grav sin(z) + sin_vel sin(z')
// Defaults are the damped pendulum discovered from video.

struct PendulumCoeffs {
  double quad = 0.17;
  double cubic = -0.06;
  double grav = -10.87;
  double sin_vel = 0.48;
};

struct PendulumSpec {
  double theta0 = 1.0;
  double omega0 = 0.0;
  PendulumCoeffs coeffs;
  std::size_t frames = 300;
  double dt = 1.0 / 30.0;
  std::size_t height = 24;
  std::size_t width = 24;
  int substeps = 10;
  double noise = 0.0;
  std::uint64_t seed = 0;
};

struct PendulumResult {
  Field field;
  RowMat truth;  // (T, 2): angle, angular velocity
  nlohmann::json meta;
};

inline Eigen::VectorXd pendulum_rhs(const PendulumCoeffs& c, const Eigen::VectorXd& y) {
  Eigen::VectorXd d(2);
  const double v = y[1];
  d[0] = v;
  d[1] = c.quad * v * v + c.cubic * v * v * v + c.grav * std::sin(y[0]) + c.sin_vel * std::sin(v);
  return d;
}

inline double pendulum_energy(const PendulumCoeffs& c, double z, double v) {
  // First integral of z'' = grav sin z (exact when the damping terms vanish).
  return 0.5 * v * v + c.grav * std::cos(z);
}

// Anti-aliased rod from the grid centre, intensity in [0, 1].
inline Eigen::RowVectorXd rasterize_rod(double angle, std::size_t H, std::size_t W) {
  const double cy = 0.5 * static_cast<double>(H - 1), cx = 0.5 * static_cast<double>(W - 1);
  const double len = 0.45 * static_cast<double>(std::min(H, W));
  const double tx = cx + len * std::sin(angle), ty = cy + len * std::cos(angle);
  const double dx = tx - cx, dy = ty - cy, l2 = dx * dx + dy * dy;
  Eigen::RowVectorXd img(static_cast<Eigen::Index>(H * W));
  for (std::size_t i = 0; i < H; ++i) {
    for (std::size_t j = 0; j < W; ++j) {
      const double px = static_cast<double>(j), py = static_cast<double>(i);
      double s = ((px - cx) * dx + (py - cy) * dy) / l2;
      s = std::clamp(s, 0.0, 1.0);
      const double ex = px - (cx + s * dx), ey = py - (cy + s * dy);
      const double dist = std::sqrt(ex * ex + ey * ey);
      img[static_cast<Eigen::Index>(i * W + j)] = std::clamp(1.0 - dist, 0.0, 1.0);
    }
  }
  return img;
}

inline PendulumResult gen_pendulum(const PendulumSpec& s) {
  if (!(s.dt > 0.0) || s.dt > 1.0 / 30.0 + 1e-15)
    throw ConfigError("gen_pendulum: dt must be in (0, 1/30]");
  if (s.frames < 2 || s.height == 0 || s.width == 0) throw ConfigError("gen_pendulum: bad frame count or grid");
  PendulumResult r;
  Eigen::VectorXd y0(2);
  y0 << s.theta0, s.omega0;
  const auto c = s.coeffs;
  try {
    r.truth = integrate_rk4([&](const Eigen::VectorXd& y) { return pendulum_rhs(c, y); }, y0, s.frames, s.dt, s.substeps);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("gen_pendulum: divergent trajectory: ") + e.what());
  }
  r.field.grid = {s.height, s.width};
  r.field.dt = s.dt;
  r.field.data.resize(static_cast<Eigen::Index>(s.frames), static_cast<Eigen::Index>(s.height * s.width));
  Rng rng(s.seed);
  for (std::size_t t = 0; t < s.frames; ++t) {
    Eigen::RowVectorXd img = rasterize_rod(r.truth(static_cast<Eigen::Index>(t), 0), s.height, s.width);
    if (s.noise > 0)
      for (auto& v : img) v = std::clamp(v + s.noise * rng.normal(), 0.0, 1.0);
    r.field.data.row(static_cast<Eigen::Index>(t)) = img;
  }
  r.meta = {{"kind", "pendulum"},
            {"coefficients", {{"zdot^2", c.quad}, {"zdot^3", c.cubic}, {"sin(z)", c.grav}, {"sin(zdot)", c.sin_vel}}},
            {"theta0", s.theta0}, {"omega0", s.omega0}, {"frames", s.frames}, {"dt", s.dt},
            {"grid", {s.height, s.width}}, {"substeps", s.substeps}, {"noise", s.noise}, {"seed", s.seed}};
  return r;
}

// ---------------------------------------------------------------------------
// x'' = -sin(x) as the first-order system (x, v).

inline Eigen::VectorXd sine_rhs(const Eigen::VectorXd& y) {
  Eigen::VectorXd d(2);
  d << y[1], -std::sin(y[0]);
  return d;
}

inline double sine_energy(double x, double v) { return 0.5 * v * v - std::cos(x); }

inline RowMat gen_sine_ode(double x0, double v0, std::size_t frames, double dt, int substeps = 1) {
  Eigen::VectorXd y0(2);
  y0 << x0, v0;
  return integrate_rk4(sine_rhs, y0, frames, dt, substeps);
}

}  // namespace sshred
