#pragma once

#include <cmath>
#include <complex>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "sshred/data/windows.hpp"
#include "sshred/shred/model.hpp"
#include "sshred/sindy/cell.hpp"

namespace sshred {

// Row 0 is the decoded latent of the initial window (its target frame); rows
// 1..H are pure latent rollout steps, decoded. No sensor feedback.
struct ForecastReport {
  RowMat fields;   // (H+1, N)
  RowMat latents;  // (H+1, d)
  std::size_t horizon() const { return static_cast<std::size_t>(fields.rows()) - 1; }
};

inline ForecastReport forecast(const ShredModel& model, const SindyModel& dynamics, const Eigen::Ref<const RowMat>& init_window,
                               std::size_t horizon) {
  if (static_cast<std::size_t>(init_window.rows()) != model.config.lag)
    throw ShapeError("forecast: initial window has " + std::to_string(init_window.rows()) + " rows, lag is " +
                     std::to_string(model.config.lag));
  if (static_cast<std::size_t>(init_window.cols()) != model.sensors())
    throw ShapeError("forecast: initial window has the wrong sensor count");
  ForecastReport r;
  const Tensor z0 = encode_window(Tensor::from_eigen(init_window), model.gru);
  Eigen::VectorXd z(static_cast<Eigen::Index>(z0.numel()));
  for (std::size_t i = 0; i < z0.numel(); ++i) z[static_cast<Eigen::Index>(i)] = z0[i];
  r.latents = sindy_rollout(z, dynamics, horizon);
  NoGradGuard ng;
  r.fields = decode(Var::constant(Tensor::from_eigen(r.latents)), model.decoder, false).value().mat();
  return r;
}

struct HorizonRow {
  std::size_t begin = 0, end = 0;
  double mse = 0.0;
};

struct HorizonTable {
  std::vector<HorizonRow> rows;
  double total = 0.0;  // over the union of the windows
};

// Parses "0:100,100:200,200:275".
inline std::vector<IndexRange> parse_windows(const std::string& spec) {
  std::vector<IndexRange> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("window spec '" + item + "' must look like begin:end");
    try {
      std::size_t p1 = 0, p2 = 0;
      const std::string a = item.substr(0, colon), b = item.substr(colon + 1);
      const auto lo = std::stoull(a, &p1), hi = std::stoull(b, &p2);
      if (p1 != a.size() || p2 != b.size()) throw std::invalid_argument("trailing");
      if (hi <= lo) throw ConfigError("window '" + item + "' is empty");
      out.push_back({static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)});
    } catch (const ConfigError&) {
      throw;
    } catch (...) {
      throw ConfigError("window spec '" + item + "' must look like begin:end");
    }
  }
  if (out.empty()) throw ConfigError("empty window spec");
  return out;
}

// Per-window and total MSE between aligned predicted and true frames.
inline HorizonTable horizon_mse(const Eigen::Ref<const RowMat>& pred, const Eigen::Ref<const RowMat>& truth,
                                const std::vector<IndexRange>& windows) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
    throw ShapeError("horizon_mse: prediction and truth differ in shape");
  HorizonTable t;
  double sse = 0.0;
  std::size_t count = 0;
  for (const auto& w : windows) {
    if (w.end > static_cast<std::size_t>(pred.rows()) || w.begin >= w.end)
      throw ShapeError("horizon_mse: window [" + std::to_string(w.begin) + ", " + std::to_string(w.end) +
                       ") exceeds " + std::to_string(pred.rows()) + " frames");
    const auto b = static_cast<Eigen::Index>(w.begin), n = static_cast<Eigen::Index>(w.size());
    const double s = (pred.middleRows(b, n) - truth.middleRows(b, n)).squaredNorm();
    t.rows.push_back({w.begin, w.end, s / static_cast<double>(n * pred.cols())});
    sse += s;
    count += w.size() * static_cast<std::size_t>(pred.cols());
  }
  t.total = sse / static_cast<double>(count);
  return t;
}

struct SensorTrace {
  std::size_t index = 0;
  std::vector<double> predicted;
  std::vector<double> truth;
};

inline std::vector<SensorTrace> sensor_traces(const Eigen::Ref<const RowMat>& pred, const Eigen::Ref<const RowMat>& truth,
                                              const std::vector<std::size_t>& held_out, const SensorSet& training) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
    throw ShapeError("sensor_traces: prediction and truth differ in shape");
  std::vector<SensorTrace> out;
  for (auto idx : held_out) {
    if (idx >= static_cast<std::size_t>(pred.cols()))
      throw ConfigError("sensor_traces: index " + std::to_string(idx) + " out of range");
    if (std::binary_search(training.indices.begin(), training.indices.end(), idx))
      throw ConfigError("sensor_traces: location " + std::to_string(idx) + " is a training sensor");
    SensorTrace tr;
    tr.index = idx;
    const auto c = static_cast<Eigen::Index>(idx);
    for (Eigen::Index t = 0; t < pred.rows(); ++t) {
      tr.predicted.push_back(pred(t, c));
      tr.truth.push_back(truth(t, c));
    }
    out.push_back(std::move(tr));
  }
  return out;
}

// Angular frequency of the dominant FFT peak (mean removed), refined by
// parabolic interpolation of the magnitude around the peak bin.
inline double dominant_frequency(const Eigen::Ref<const Eigen::VectorXd>& series, double dt) {
  const auto n = series.size();
  if (n < 4) throw ShapeError("dominant_frequency: need at least 4 samples");
  std::vector<double> x(static_cast<std::size_t>(n));
  const double mean = series.mean();
  for (Eigen::Index i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = series[i] - mean;
  std::vector<std::complex<double>> spec;
  Eigen::FFT<double> fft;
  fft.fwd(spec, x);
  const auto half = static_cast<std::size_t>(n / 2);
  std::size_t k = 1;
  for (std::size_t i = 2; i < half; ++i)
    if (std::abs(spec[i]) > std::abs(spec[k])) k = i;
  double shift = 0.0;
  if (k + 1 < half) {
    const double a = std::abs(spec[k - 1]), b = std::abs(spec[k]), c = std::abs(spec[k + 1]);
    const double den = a - 2.0 * b + c;
    if (den != 0.0) shift = 0.5 * (a - c) / den;
  }
  return 2.0 * M_PI * (static_cast<double>(k) + shift) / (static_cast<double>(n) * dt);
}

}  // namespace sshred
