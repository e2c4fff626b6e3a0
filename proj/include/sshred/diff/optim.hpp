#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sshred/diff/var.hpp"

namespace sshred {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;
  double clip_norm = 0.0;  // global grad-norm clip; 0 disables
};

// Adaptive moments with decoupled weight decay:
//   p <- p - lr*wd*p
//   p <- p - lr * mhat / (sqrt(vhat) + eps)
class AdamW {
 public:
  struct Slot {
    Tensor m;
    Tensor v;
  };

  AdamW() = default;
  AdamW(std::vector<Var> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    slots_.reserve(params_.size());
    for (const auto& p : params_) slots_.push_back({Tensor(p.shape(), 0.0), Tensor(p.shape(), 0.0)});
  }

  const AdamWConfig& config() const { return cfg_; }
  AdamWConfig& config() { return cfg_; }
  std::uint64_t steps() const { return step_; }
  void set_steps(std::uint64_t s) { step_ = s; }
  std::vector<Slot>& slots() { return slots_; }
  const std::vector<Slot>& slots() const { return slots_; }
  const std::vector<Var>& params() const { return params_; }

  double grad_norm() const {
    double s = 0.0;
    for (const auto& p : params_)
      if (p.has_grad())
        for (double g : p.grad().values()) s += g * g;
    return std::sqrt(s);
  }

  void step() {
    for (std::size_t i = 0; i < params_.size(); ++i)
      if (!params_[i].has_grad())
        throw Error("AdamW::step: parameter " + std::to_string(i) + " has no gradient");

    double clip = 1.0;
    if (cfg_.clip_norm > 0.0) {
      const double gn = grad_norm();
      if (gn > cfg_.clip_norm) clip = cfg_.clip_norm / gn;
    }

    ++step_;
    const double t = static_cast<double>(step_);
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Var& p = params_[i];
      Tensor& w = p.mutable_value();
      Tensor& g = p.mutable_grad();
      Slot& s = slots_[i];
      for (std::size_t j = 0; j < w.numel(); ++j) {
        const double gj = g[j] * clip;
        w[j] -= cfg_.lr * cfg_.weight_decay * w[j];
        s.m[j] = cfg_.beta1 * s.m[j] + (1.0 - cfg_.beta1) * gj;
        s.v[j] = cfg_.beta2 * s.v[j] + (1.0 - cfg_.beta2) * gj * gj;
        const double mh = s.m[j] / bc1;
        const double vh = s.v[j] / bc2;
        w[j] -= cfg_.lr * mh / (std::sqrt(vh) + cfg_.eps);
      }
      g.fill(0.0);
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

 private:
  std::vector<Var> params_;
  std::vector<Slot> slots_;
  AdamWConfig cfg_;
  std::uint64_t step_ = 0;
};

}  // namespace sshred
