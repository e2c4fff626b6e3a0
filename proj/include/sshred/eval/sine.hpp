#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <json.hpp>

#include "sshred/data/generators.hpp"
#include "sshred/diff/optim.hpp"
#include "sshred/eval/scaling.hpp"
#include "sshred/nets/decoder.hpp"
#include "sshred/nets/gru.hpp"
#include "sshred/sindy/io.hpp"
#include "sshred/sindy/cell.hpp"
#include "sshred/sindy/stlsq.hpp"

namespace sshred {

// x'' = -sin(x): SINDy with a trig library against a small autoregressive GRU,
// both fitted on the first half of one trajectory and rolled out over the
// second half.
struct SineConfig {
  double x0 = 2.0, v0 = 0.0;
  std::size_t frames = 2000;
  double dt = 0.02;
  int gen_substeps = 10;
  double stlsq_threshold = 0.05;
  // GRU baseline works on every `stride`-th frame.
  std::size_t stride = 5;
  std::size_t gru_lag = 10;
  std::size_t gru_hidden = 32;
  std::size_t gru_epochs = 300;
  std::size_t gru_batch = 32;
  double gru_lr = 1e-2;
  std::uint64_t seed = 11;
};

struct SineReport {
  RowMat sindy_coefficients;
  std::vector<std::string> term_names;
  std::string equations;
  double sin_coefficient = 0.0;  // coefficient of sin(x) in dv/dt
  double sindy_mse = 0.0;        // x, second half, on the GRU's grid
  double gru_mse = 0.0;
  double gru_final_train_loss = 0.0;

  bool sindy_wins() const { return sindy_mse < gru_mse; }
  bool sin_recovered(double tol = 1e-3) const { return std::abs(sin_coefficient + 1.0) < tol; }
  bool passed() const { return sindy_wins() && sin_recovered(); }

  nlohmann::json to_json() const {
    return {{"equations", equations},
            {"sin_coefficient", sin_coefficient},
            {"sindy_extrapolation_mse", sindy_mse},
            {"gru_extrapolation_mse", gru_mse},
            {"gru_final_train_loss", gru_final_train_loss},
            {"sindy_wins", sindy_wins()},
            {"sin_recovered", sin_recovered()},
            {"passed", passed()}};
  }
};

inline LibrarySpec sine_library() {
  return {2, true, 1, {{TrigTerm::Kind::Sin, 1.0}, {TrigTerm::Kind::Cos, 1.0}}};
}

inline SineReport sine_comparison(const SineConfig& cfg) {
  if (cfg.frames < 8 || cfg.stride == 0 || cfg.gru_lag == 0) throw ConfigError("sine_comparison: bad config");
  const RowMat traj = gen_sine_ode(cfg.x0, cfg.v0, cfg.frames, cfg.dt, cfg.gen_substeps);
  const std::size_t half = cfg.frames / 2;
  SineReport r;

  // (a) SINDy on the training half, RK4 rollout of the discovered system.
  const RowMat train = traj.topRows(static_cast<Eigen::Index>(half));
  const LibrarySpec spec = sine_library();
  const SindyModel fit = fit_stlsq(train, central_difference(train, cfg.dt), spec, {cfg.stlsq_threshold, 10, 0.0}, cfg.dt, 1);
  r.sindy_coefficients = fit.coefficients();
  r.term_names = term_names(spec, "x");
  r.equations = equations_text(fit);
  r.sin_coefficient = r.sindy_coefficients(3, 1);  // terms: 1, x1, x2, sin(x1), ...
  const RowMat xi = r.sindy_coefficients;
  auto f_hat = [&](const Eigen::VectorXd& y) -> Eigen::VectorXd { return xi.transpose() * evaluate_library(y, spec); };
  const RowMat roll = integrate_rk4(f_hat, train.row(static_cast<Eigen::Index>(half - 1)).transpose(),
                                    cfg.frames - half + 1, cfg.dt, cfg.gen_substeps);

  // (b) GRU on the subsampled x series, scaled by the training max |x|.
  std::vector<double> xs;
  for (std::size_t i = 0; i < cfg.frames; i += cfg.stride) xs.push_back(traj(static_cast<Eigen::Index>(i), 0));
  const std::size_t train_pts = (half + cfg.stride - 1) / cfg.stride;
  double scale = 0.0;
  for (std::size_t i = 0; i < train_pts; ++i) scale = std::max(scale, std::abs(xs[i]));
  if (scale == 0.0) scale = 1.0;
  for (auto& v : xs) v /= scale;
  if (train_pts <= cfg.gru_lag + 1) throw ConfigError("sine_comparison: training half too short for the GRU lag");

  Rng rng(cfg.seed);
  GruParams gru = init_gru(1, {cfg.gru_hidden}, rng);
  DecoderParams head = init_decoder(cfg.gru_hidden, {}, 1, 0.0, rng);
  std::vector<Var> params;
  for (auto& [_, p] : gru.named()) params.push_back(p);
  for (auto& [_, p] : head.named()) params.push_back(p);
  AdamW opt(params, {cfg.gru_lr, 0.9, 0.999, 1e-8, 0.0, 0.0});

  auto batch_inputs = [&](const std::vector<std::size_t>& starts) {
    std::vector<Var> steps;
    for (std::size_t l = 0; l < cfg.gru_lag; ++l) {
      Tensor t = Tensor::matrix(starts.size(), 1);
      for (std::size_t b = 0; b < starts.size(); ++b) t[b] = xs[starts[b] + l];
      steps.push_back(Var::constant(std::move(t)));
    }
    return steps;
  };
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + cfg.gru_lag < train_pts; ++s) starts.push_back(s);
  for (std::size_t e = 0; e < cfg.gru_epochs; ++e) {
    for (std::size_t i = starts.size(); i > 1; --i) std::swap(starts[i - 1], starts[rng.below(i)]);
    double sum = 0.0;
    std::size_t nb = 0;
    for (std::size_t off = 0; off < starts.size(); off += cfg.gru_batch, ++nb) {
      const std::vector<std::size_t> b(starts.begin() + static_cast<std::ptrdiff_t>(off),
                                       starts.begin() + static_cast<std::ptrdiff_t>(std::min(starts.size(), off + cfg.gru_batch)));
      Tensor target = Tensor::matrix(b.size(), 1);
      for (std::size_t k = 0; k < b.size(); ++k) target[k] = xs[b[k] + cfg.gru_lag];
      const Var loss = ops::mse(decode(encode(batch_inputs(b), gru), head, false), Var::constant(std::move(target)));
      sum += loss.item();
      backward(loss);
      opt.step();
    }
    r.gru_final_train_loss = sum / static_cast<double>(nb);
  }

  // Autoregressive rollout from the last training window.
  std::vector<double> hist(xs.begin() + static_cast<std::ptrdiff_t>(train_pts - cfg.gru_lag),
                           xs.begin() + static_cast<std::ptrdiff_t>(train_pts));
  double se_gru = 0.0, se_sindy = 0.0;
  std::size_t count = 0;
  {
    NoGradGuard ng;
    for (std::size_t i = train_pts; i < xs.size(); ++i) {
      std::vector<Var> steps;
      for (std::size_t l = 0; l < cfg.gru_lag; ++l) steps.push_back(Var::constant(Tensor::matrix(1, 1, hist[hist.size() - cfg.gru_lag + l])));
      const double next = decode(encode(steps, gru), head, false).item();
      hist.push_back(next);
      const double truth = xs[i] * scale;
      const double g = next * scale;
      const double s = roll(static_cast<Eigen::Index>(i * cfg.stride - (half - 1)), 0);
      se_gru += (g - truth) * (g - truth);
      se_sindy += (s - truth) * (s - truth);
      ++count;
    }
  }
  r.gru_mse = se_gru / static_cast<double>(count);
  r.sindy_mse = se_sindy / static_cast<double>(count);
  if (!std::isfinite(r.gru_mse)) r.gru_mse = std::numeric_limits<double>::infinity();
  return r;
}

// Qualitative comparison of multi-step error growth: a k-layer ReLU network
// x_{t+1} = x_t + f(x_t) against SINDy, both fitted on one trajectory of a
// damped linear oscillator and rolled out from fresh initial states.
struct GrowthConfig {
  RowMat system = (RowMat(2, 2) << -0.1, 2.0, -2.0, -0.1).finished();
  double dt = 0.05;
  std::size_t train_frames = 400;
  std::vector<std::size_t> hidden{32, 32};
  std::size_t epochs = 400;
  double lr = 5e-3;
  std::vector<std::size_t> horizons{1, 2, 4, 8, 16, 32, 64, 128};
  std::size_t test_states = 8;
  std::uint64_t seed = 13;
};

struct GrowthReport {
  std::vector<std::size_t> horizons;
  std::vector<double> nn_error, sindy_error;  // mean squared state error at each horizon
  double weight_norm_bound = 0.0;             // product of layer Frobenius norms
  std::size_t depth = 0;
  LineFit nn_growth, sindy_growth;            // log error vs log H

  bool nn_worse_at_long_horizon() const { return nn_error.back() > sindy_error.back(); }

  nlohmann::json to_json() const {
    return {{"horizons", horizons},
            {"nn_error", nn_error},
            {"sindy_error", sindy_error},
            {"weight_norm_bound", weight_norm_bound},
            {"depth", depth},
            {"nn_loglog_slope", nn_growth.slope},
            {"sindy_loglog_slope", sindy_growth.slope},
            {"nn_worse_at_long_horizon", nn_worse_at_long_horizon()}};
  }
};

inline GrowthReport error_growth_comparison(const GrowthConfig& cfg) {
  const auto d = static_cast<std::size_t>(cfg.system.rows());
  auto f = [&](const Eigen::VectorXd& y) -> Eigen::VectorXd { return cfg.system * y; };
  const RowMat traj = integrate_rk4(f, Eigen::VectorXd::Ones(static_cast<Eigen::Index>(d)), cfg.train_frames, cfg.dt, 10);

  const LibrarySpec spec{d, true, 1, {}};
  const SindyModel sindy = fit_stlsq(traj, central_difference(traj, cfg.dt), spec, {0.01, 10, 0.0}, cfg.dt, 10);

  Rng rng(cfg.seed);
  DecoderParams net = init_decoder(d, cfg.hidden, d, 0.0, rng);
  std::vector<Var> params;
  for (auto& [_, p] : net.named()) params.push_back(p);
  AdamW opt(params, {cfg.lr, 0.9, 0.999, 1e-8, 0.0, 0.0});
  const auto n = static_cast<Eigen::Index>(cfg.train_frames - 1);
  const Var X = Var::constant(Tensor::from_eigen(traj.topRows(n)));
  const Var dX = Var::constant(Tensor::from_eigen(traj.bottomRows(n) - traj.topRows(n)));
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    const Var loss = ops::mse(decode(X, net, false), dX);
    backward(loss);
    opt.step();
  }

  GrowthReport r;
  r.horizons = cfg.horizons;
  r.depth = net.layers.size();
  r.weight_norm_bound = 1.0;
  for (const auto& l : net.layers) r.weight_norm_bound *= l.w.value().mat().norm();
  const std::size_t hmax = *std::max_element(cfg.horizons.begin(), cfg.horizons.end());
  std::vector<double> nn_se(hmax + 1, 0.0), s_se(hmax + 1, 0.0);
  NoGradGuard ng;
  for (std::size_t k = 0; k < cfg.test_states; ++k) {
    Eigen::VectorXd y0(static_cast<Eigen::Index>(d));
    for (auto& v : y0) v = rng.uniform(-1.0, 1.0);
    const RowMat truth = integrate_rk4(f, y0, hmax + 1, cfg.dt, 10);
    RowMat srol;
    try {
      srol = sindy_rollout(y0, sindy, hmax);
    } catch (const DivergenceError&) {
      srol = RowMat::Constant(static_cast<Eigen::Index>(hmax + 1), static_cast<Eigen::Index>(d),
                              std::numeric_limits<double>::infinity());
    }
    RowMat y = y0.transpose();
    for (std::size_t h = 1; h <= hmax; ++h) {
      y += decode(Var::constant(Tensor::from_eigen(y)), net, false).value().mat();
      const auto hi = static_cast<Eigen::Index>(h);
      nn_se[h] += (y - truth.row(hi)).squaredNorm();
      s_se[h] += (srol.row(hi) - truth.row(hi)).squaredNorm();
    }
  }
  std::vector<double> lh, ln, ls;
  for (std::size_t h : cfg.horizons) {
    r.nn_error.push_back(nn_se[h] / static_cast<double>(cfg.test_states));
    r.sindy_error.push_back(s_se[h] / static_cast<double>(cfg.test_states));
    lh.push_back(std::log(static_cast<double>(h)));
    ln.push_back(std::log(r.nn_error.back()));
    ls.push_back(std::log(r.sindy_error.back()));
  }
  if (lh.size() >= 3) {
    r.nn_growth = fit_line(lh, ln);
    r.sindy_growth = fit_line(lh, ls);
  }
  return r;
}

}  // namespace sshred
