#pragma once

#include <string>
#include <vector>

#include "sshred/sindy/cell.hpp"

namespace sshred {

// Linear terms only: Xi becomes the transpose of the generator G in dz/dt = G z.
inline LibrarySpec koopman_restrict(const LibrarySpec& spec) {
  return LibrarySpec{spec.dim, false, 1, {}};
}

inline bool is_linear_library(const LibrarySpec& spec) {
  return spec == koopman_restrict(spec);
}

// Generator from the linear-term rows of Xi (other terms are ignored).
inline RowMat linear_generator(const SindyModel& m) {
  const auto terms = library_terms(m.spec);
  const RowMat c = m.coefficients();
  const auto d = static_cast<Eigen::Index>(m.dim());
  RowMat G = RowMat::Zero(d, d);
  bool found = false;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const auto& t = terms[i];
    if (t.kind == LibraryTerm::Kind::Monomial && t.factors.size() == 1) {
      G.col(static_cast<Eigen::Index>(t.factors[0])) = c.row(static_cast<Eigen::Index>(i)).transpose();
      found = true;
    }
  }
  if (!found) throw ConfigError("linear_generator: library has no linear terms");
  return G;
}

// Discrete one-step operator of the Euler-integrated generator, (I + hG)^k,
// built on the tape from Xi = G^T. Acts on row states as z K^T.
inline Var koopman_operator(const SindyModel& m) {
  if (!is_linear_library(m.spec)) throw ConfigError("koopman_operator: model library must be linear-only");
  const auto d = m.dim();
  Var xi = m.xi * Var::constant(m.mask_tensor());
  // Row convention: z_{next} = z (I + h Xi)  =>  K^T = (I + h Xi)^k
  Var step = Var::constant(Tensor::identity(d)) + ops::scale(xi, m.step_size());
  Var kt = step;
  for (int i = 1; i < m.substeps; ++i) kt = ops::matmul(kt, step);
  return ops::transpose(kt);
}

// Mean over all (t, m) pairs, m = 1..m_max, of || z_{t+m} - K^m z_t ||^2.
// `seq` is a (T, d) latent sequence.
inline Var koopman_loss(const Var& seq, const Var& K, std::size_t m_max) {
  if (m_max < 1) throw ConfigError("koopman_loss: m_max must be >= 1");
  if (seq.rows() <= m_max)
    throw ShapeError("koopman_loss: sequence of " + std::to_string(seq.rows()) + " states is too short for m_max " +
                     std::to_string(m_max));
  if (K.rows() != seq.cols() || K.cols() != seq.cols()) throw ShapeError("koopman_loss: K must be (d, d)");
  const std::size_t T = seq.rows();
  Var kt = ops::transpose(K);
  Var power = kt;
  Var total;
  double count = 0.0;
  for (std::size_t m = 1; m <= m_max; ++m) {
    if (m > 1) power = ops::matmul(power, kt);
    Var pred = ops::matmul(ops::slice_rows(seq, 0, T - m), power);
    Var diff = ops::sub(ops::slice_rows(seq, m, T), pred);
    Var s = ops::sum(diff * diff);
    total = total.valid() ? total + s : s;
    count += static_cast<double>(T - m);
  }
  return ops::scale(total, 1.0 / count);
}

// Batched form used in training: `steps[m]` holds z_{b+m} for every batch start
// b, m = 0..m_max. Mean over (b, m) of || z_{b+m} - K^m z_b ||^2.
inline Var koopman_loss(const std::vector<Var>& steps, const Var& K) {
  if (steps.size() < 2) throw ShapeError("koopman_loss: need at least one step pair");
  Var kt = ops::transpose(K);
  Var power = kt;
  Var total;
  for (std::size_t m = 1; m < steps.size(); ++m) {
    if (m > 1) power = ops::matmul(power, kt);
    Var term = ops::mean_sq_norm(steps[m], ops::matmul(steps[0], power));
    total = total.valid() ? total + term : term;
  }
  return ops::scale(total, 1.0 / static_cast<double>(steps.size() - 1));
}

}  // namespace sshred
