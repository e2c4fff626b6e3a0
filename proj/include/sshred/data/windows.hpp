#pragma once

#include <string>
#include <vector>

#include "sshred/data/sensors.hpp"
#include "sshred/diff/var.hpp"

namespace sshred {

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool contains(std::size_t i) const { return i >= begin && i < end; }
};

struct SplitFractions {
  double train = 0.7;
  double validation = 0.1;
};

// Lag windows over sensor series. Window b reads frames [b, b+lag) at the
// sensor locations; its target is the full frame b+lag-1 (the last frame in
// the window). Windows b and b+1 are adjacent in time. Splits are contiguous
// blocks of window indices: train, then validation, then test.
struct WindowedDataset {
  std::size_t lag = 0;
  RowMat sensor_series;  // (T, S)
  RowMat frames;         // (T, N)
  IndexRange train, validation, test;

  std::size_t count() const { return static_cast<std::size_t>(frames.rows()) - lag; }
  std::size_t sensors() const { return static_cast<std::size_t>(sensor_series.cols()); }
  std::size_t points() const { return static_cast<std::size_t>(frames.cols()); }

  RowMat window(std::size_t b) const {
    return sensor_series.middleRows(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(lag));
  }
  Eigen::RowVectorXd target(std::size_t b) const { return frames.row(static_cast<Eigen::Index>(b + lag - 1)); }
  std::size_t target_frame(std::size_t b) const { return b + lag - 1; }

  // The lag steps of a batch of windows, each (batch, S), ready for encode().
  std::vector<Var> batch_steps(const std::vector<std::size_t>& idx) const {
    std::vector<Var> steps;
    steps.reserve(lag);
    const auto S = sensor_series.cols();
    for (std::size_t t = 0; t < lag; ++t) {
      Tensor x = Tensor::matrix(idx.size(), static_cast<std::size_t>(S));
      for (std::size_t i = 0; i < idx.size(); ++i)
        x.mat().row(static_cast<Eigen::Index>(i)) = sensor_series.row(static_cast<Eigen::Index>(idx[i] + t));
      steps.push_back(Var::constant(std::move(x)));
    }
    return steps;
  }

  Var batch_targets(const std::vector<std::size_t>& idx) const {
    Tensor y = Tensor::matrix(idx.size(), points());
    for (std::size_t i = 0; i < idx.size(); ++i)
      y.mat().row(static_cast<Eigen::Index>(i)) = frames.row(static_cast<Eigen::Index>(idx[i] + lag - 1));
    return Var::constant(std::move(y));
  }
};

inline WindowedDataset make_windows(const Field& f, const SensorSet& sensors, std::size_t lag,
                                    SplitFractions split = {}) {
  if (lag == 0) throw ConfigError("make_windows: lag must be positive");
  if (f.frames() <= lag)
    throw ConfigError("make_windows: need more frames (" + std::to_string(f.frames()) + ") than lag (" +
                      std::to_string(lag) + ")");
  if (sensors.indices.empty()) throw ConfigError("make_windows: no sensors");
  sensors.validate(f.points());
  if (split.train < 0 || split.validation < 0 || split.train + split.validation > 1.0)
    throw ConfigError("make_windows: bad split fractions");

  WindowedDataset ds;
  ds.lag = lag;
  ds.frames = f.data;
  ds.sensor_series.resize(f.data.rows(), static_cast<Eigen::Index>(sensors.size()));
  for (std::size_t s = 0; s < sensors.size(); ++s)
    ds.sensor_series.col(static_cast<Eigen::Index>(s)) = f.data.col(static_cast<Eigen::Index>(sensors.indices[s]));
  const std::size_t B = ds.count();
  const auto ntr = static_cast<std::size_t>(split.train * static_cast<double>(B));
  const auto nva = static_cast<std::size_t>(split.validation * static_cast<double>(B));
  ds.train = {0, ntr};
  ds.validation = {ntr, ntr + nva};
  ds.test = {ntr + nva, B};
  return ds;
}

}  // namespace sshred
