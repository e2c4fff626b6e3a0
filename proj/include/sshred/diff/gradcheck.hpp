#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "sshred/diff/var.hpp"

namespace sshred {

// Compares reverse-mode gradients of a scalar function against central
// differences. Returns max |analytic - numeric| / max(1, |numeric|) over every
// entry of every parameter; +inf if anything is non-finite.
inline double finite_diff_check(const std::function<Var()>& f, std::vector<Var> params, double h = 1e-6) {
  for (auto& p : params) p.zero_grad();
  Var loss = f();
  backward(loss);

  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) analytic.push_back(p.has_grad() ? p.grad() : Tensor(p.shape(), 0.0));

  double worst = 0.0;
  NoGradGuard ng;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& w = params[k].mutable_value();
    for (std::size_t i = 0; i < w.numel(); ++i) {
      const double orig = w[i];
      w[i] = orig + h;
      const double fp = f().item();
      w[i] = orig - h;
      const double fm = f().item();
      w[i] = orig;
      const double num = (fp - fm) / (2.0 * h);
      const double err = std::abs(analytic[k][i] - num) / std::max(1.0, std::abs(num));
      if (!std::isfinite(err)) return std::numeric_limits<double>::infinity();
      worst = std::max(worst, err);
    }
  }
  for (auto& p : params) p.zero_grad();
  return worst;
}

}  // namespace sshred
