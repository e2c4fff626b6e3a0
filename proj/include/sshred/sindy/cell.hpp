#pragma once

#include <cmath>
#include <string>

#include "sshred/sindy/model.hpp"

namespace sshred {

namespace detail {
inline bool all_finite(const Tensor& t) {
  for (double v : t.values())
    if (!std::isfinite(v)) return false;
  return true;
}
}  // namespace detail

// One SINDy recurrent step on a batch of states (batch, dim): k Euler
// mini-steps z <- z + Theta(z) (Xi*mask) h. Differentiable in z and Xi.
inline Var sindy_cell(const Var& z, const SindyModel& m) {
  if (z.cols() != m.dim()) throw ShapeError("sindy_cell: state " + shape_str(z.shape()) + " vs dim " + std::to_string(m.dim()));
  const Var coeffs = m.xi * Var::constant(m.mask_tensor());
  const double h = m.step_size();
  Var cur = z;
  for (int i = 0; i < m.substeps; ++i) {
    cur = cur + ops::scale(ops::matmul(ops::library(cur, m.spec), coeffs), h);
    if (!detail::all_finite(cur.value()))
      throw DivergenceError("sindy_cell: non-finite state at mini-step " + std::to_string(i), 0, i);
  }
  return cur;
}

// Plain evaluation of one step for a single state.
inline Eigen::VectorXd sindy_step(const Eigen::VectorXd& z, const SindyModel& m) {
  const RowMat c = m.coefficients();
  const double h = m.step_size();
  Eigen::VectorXd cur = z;
  for (int i = 0; i < m.substeps; ++i) {
    cur += h * (c.transpose() * evaluate_library(cur, m.spec));
    if (!cur.allFinite())
      throw DivergenceError("sindy_step: non-finite state at mini-step " + std::to_string(i), 0, i);
  }
  return cur;
}

// Rows z_0 .. z_steps.
inline RowMat sindy_rollout(const Eigen::VectorXd& z0, const SindyModel& m, std::size_t steps) {
  RowMat out(static_cast<Eigen::Index>(steps + 1), z0.size());
  out.row(0) = z0.transpose();
  Eigen::VectorXd cur = z0;
  for (std::size_t s = 1; s <= steps; ++s) {
    try {
      cur = sindy_step(cur, m);
    } catch (const DivergenceError& e) {
      throw DivergenceError("rollout diverged at step " + std::to_string(s) + ": " + e.what(),
                            static_cast<long>(s), e.substep());
    }
    out.row(static_cast<Eigen::Index>(s)) = cur.transpose();
  }
  return out;
}

// Sum over members of the mean squared one-step rollout error
//   sum_i mean_b || z1_b - cell_i(z0_b) ||^2
inline Var ensemble_sindy_loss(const Var& z0, const Var& z1, const EnsembleSindy& ens) {
  if (z0.shape() != z1.shape()) throw ShapeError("ensemble_sindy_loss: latent pair shapes differ");
  if (ens.models.empty()) throw ConfigError("ensemble_sindy_loss: empty ensemble");
  Var total;
  for (const auto& m : ens.models) {
    Var term = ops::mean_sq_norm(z1, sindy_cell(z0, m));
    total = total.valid() ? total + term : term;
  }
  return total;
}

}  // namespace sshred
