#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "sshred/sindy/library.hpp"

namespace sshred {

using MaskMat = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Latent ODE dz/dt = Theta(z) Xi integrated with k explicit Euler mini-steps of
// size dt/k. Xi is (p, dim); column j holds the coefficients of dz_j/dt.
// Xi is a trainable leaf so the same object drives both training and rollout;
// copies share it, use clone() for an independent model.
struct SindyModel {
  LibrarySpec spec;
  Var xi;
  MaskMat mask;
  double dt = 1.0;
  int substeps = 1;

  SindyModel() = default;
  SindyModel(LibrarySpec s, const RowMat& coeffs, double dt_, int k) : spec(std::move(s)), dt(dt_), substeps(k) {
    const auto p = static_cast<Eigen::Index>(library_size(spec));
    if (coeffs.rows() != p || coeffs.cols() != static_cast<Eigen::Index>(spec.dim))
      throw ShapeError("SindyModel: coefficients must be (" + std::to_string(p) + ", " + std::to_string(spec.dim) + ")");
    if (!(dt > 0.0) || k < 1) throw ConfigError("SindyModel: need dt > 0 and k >= 1");
    xi = Var::param(Tensor::from_eigen(coeffs));
    mask = MaskMat::Constant(p, coeffs.cols(), true);
  }

  static SindyModel zeros(LibrarySpec s, double dt_, int k) {
    const auto p = static_cast<Eigen::Index>(library_size(s));
    const auto d = static_cast<Eigen::Index>(s.dim);
    return SindyModel(std::move(s), RowMat::Zero(p, d), dt_, k);
  }

  std::size_t dim() const { return spec.dim; }
  std::size_t terms() const { return static_cast<std::size_t>(mask.rows()); }
  double step_size() const { return dt / substeps; }
  std::size_t nnz() const { return static_cast<std::size_t>(mask.count()); }

  RowMat coefficients() const { return xi.value().mat(); }

  void set_coefficients(const RowMat& c) {
    if (c.rows() != mask.rows() || c.cols() != mask.cols()) throw ShapeError("SindyModel::set_coefficients: shape");
    xi.mutable_value().mat() = c;
    apply_mask();
  }

  // Zeroes coefficients of inactive terms.
  void apply_mask() {
    Tensor& w = xi.mutable_value();
    for (Eigen::Index i = 0; i < mask.size(); ++i)
      if (!mask.data()[i]) w[static_cast<std::size_t>(i)] = 0.0;
  }

  Tensor mask_tensor() const {
    Tensor m = Tensor::matrix(static_cast<std::size_t>(mask.rows()), static_cast<std::size_t>(mask.cols()));
    for (Eigen::Index i = 0; i < mask.size(); ++i) m[static_cast<std::size_t>(i)] = mask.data()[i] ? 1.0 : 0.0;
    return m;
  }

  SindyModel clone() const {
    SindyModel c = *this;
    c.xi = xi.detached_copy();
    return c;
  }
};

// Mask entries clear where |Xi| < threshold and never come back.
inline void threshold_prune(SindyModel& m, double threshold) {
  if (threshold < 0.0) throw ConfigError("threshold_prune: threshold must be >= 0");
  const Tensor& w = m.xi.value();
  for (Eigen::Index i = 0; i < m.mask.size(); ++i)
    if (std::abs(w[static_cast<std::size_t>(i)]) < threshold) m.mask.data()[i] = false;
  m.apply_mask();
}

// B members sharing one library, each pruned at its own threshold.
struct EnsembleSindy {
  std::vector<SindyModel> models;
  std::vector<double> thresholds;

  std::size_t size() const { return models.size(); }

  EnsembleSindy clone() const {
    EnsembleSindy e;
    e.thresholds = thresholds;
    for (const auto& m : models) e.models.push_back(m.clone());
    return e;
  }

  bool all_null() const {
    for (const auto& m : models)
      if (m.nnz() > 0) return false;
    return true;
  }
};

// Thresholds evenly spaced over [lo, hi] (a single member takes lo).
inline std::vector<double> threshold_ladder(std::size_t count, double lo, double hi) {
  if (count == 0) throw ConfigError("threshold_ladder: need at least one member");
  if (lo < 0.0 || hi < lo) throw ConfigError("threshold_ladder: need 0 <= lo <= hi");
  std::vector<double> t(count, lo);
  for (std::size_t i = 1; i < count; ++i)
    t[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  return t;
}

inline EnsembleSindy make_ensemble(const LibrarySpec& spec, std::size_t count, double lo, double hi, double dt, int k) {
  EnsembleSindy e;
  e.thresholds = threshold_ladder(count, lo, hi);
  for (std::size_t i = 0; i < count; ++i) e.models.push_back(SindyModel::zeros(spec, dt, k));
  return e;
}

}  // namespace sshred
