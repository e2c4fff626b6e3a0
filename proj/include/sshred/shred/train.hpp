#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sshred/diff/optim.hpp"
#include "sshred/shred/loss.hpp"
#include "sshred/sindy/refit.hpp"

namespace sshred {

struct EpochLog {
  std::size_t epoch = 0;
  double total = 0.0;
  double recon = 0.0;
  double dynamics = 0.0;
  std::vector<std::size_t> nnz;
  bool pruned = false;
  bool refit = false;
  bool sindy_init = false;
  double wall_time = -1.0;  // seconds; negative when not recorded

  nlohmann::json to_json() const {
    nlohmann::json j{{"epoch", epoch}, {"total", total}, {"recon", recon}, {"dynamics", dynamics},
                     {"nnz", nnz}, {"pruned", pruned}, {"refit", refit}, {"sindy_init", sindy_init}};
    if (wall_time >= 0) j["wall_time"] = wall_time;
    return j;
  }
};

// Resumable training loop:
//   for each epoch: shuffle window starts, per batch minimise
//     recon + weight * dynamics with AdamW, re-apply masks;
//   every threshold_interval epochs refit Xi on the current latents, prune
//   each member at its own threshold, refit the survivors.
// Before the first dynamics epoch Xi is initialised by least squares on the
// current latents (unless disabled).
class Trainer {
 public:
  Trainer(ShredModel& model, const WindowedDataset& ds)
      : model_(model), ds_(ds), rng_(stream_seed(model.config.seed, SeedStream::Train)) {
    model_.check_consistency();
    if (ds_.sensors() != model_.sensors() || ds_.points() != model_.points())
      throw ShapeError("Trainer: dataset dimensions do not match the model");
    const auto& c = model_.config;
    std::vector<Var> params;
    for (auto& [_, p] : model_.named_params()) params.push_back(p);
    opt_ = AdamW(params, {c.lr, c.beta1, c.beta2, c.eps, c.weight_decay, c.clip_norm});
    if (c.lag != ds_.lag) throw ConfigError("Trainer: config lag differs from dataset lag");
    if (ds_.train.size() <= c.lookahead()) throw ConfigError("Trainer: training split too small for adjacent pairs");
  }

  std::size_t epoch() const { return epoch_; }
  bool sindy_initialized() const { return sindy_initialized_; }
  AdamW& optimizer() { return opt_; }
  const AdamW& optimizer() const { return opt_; }
  Rng& rng() { return rng_; }
  Rng::State rng_state() const { return rng_.state(); }
  const std::vector<EpochLog>& log() const { return log_; }
  std::size_t pruning_events() const { return pruning_events_; }

  // Restores counters after loading a checkpoint.
  void restore(std::size_t epoch, std::uint64_t steps, const Rng::State& rs, bool sindy_initialized,
               std::size_t pruning_events) {
    epoch_ = epoch;
    opt_.set_steps(steps);
    rng_.set_state(rs);
    sindy_initialized_ = sindy_initialized;
    pruning_events_ = pruning_events;
  }

  std::function<void(const EpochLog&)> on_epoch;

  // Trains until `until` epochs have completed (defaults to config.epochs).
  const std::vector<EpochLog>& run(std::size_t until = static_cast<std::size_t>(-1)) {
    const auto& c = model_.config;
    until = std::min(until, c.epochs);
    while (epoch_ < until) run_epoch();
    return log_;
  }

  EpochLog run_epoch() {
    const auto& c = model_.config;
    const auto t0 = std::chrono::steady_clock::now();
    EpochLog entry;
    entry.epoch = epoch_;

    const bool dynamics_on = epoch_ >= c.pretrain_epochs;
    if (dynamics_on && c.init_sindy_fit && !sindy_initialized_) {
      initial_sindy_fit();
      entry.sindy_init = true;
    }
    if (dynamics_on) sindy_initialized_ = true;

    std::vector<std::size_t> starts = epoch_starts();
    double sum_total = 0, sum_recon = 0, sum_dyn = 0;
    std::size_t nb = 0;
    const std::size_t limit = ds_.train.end;
    for (std::size_t off = 0; off < starts.size(); off += c.batch_size, ++nb) {
      std::vector<std::size_t> batch(starts.begin() + static_cast<std::ptrdiff_t>(off),
                                     starts.begin() + static_cast<std::ptrdiff_t>(std::min(starts.size(), off + c.batch_size)));
      LossTerms lt = combined_loss(batch, model_, ds_, limit, true, &rng_, dynamics_on);
      const double tot = lt.total.item();
      if (!std::isfinite(tot)) {
        std::ostringstream os;
        os << "non-finite loss at epoch " << epoch_ << " batch " << nb << " (recon=" << lt.recon
           << ", dynamics=" << lt.dynamics << ")";
        throw NumericalError(os.str());
      }
      backward(lt.total);
      // Xi that did not enter the graph (pre-training, null ensemble) still
      // needs a zero gradient for the optimizer.
      for (auto& m : model_.ensemble.models) m.xi.mutable_grad();
      opt_.step();
      reapply_masks();
      sum_total += tot;
      sum_recon += lt.recon;
      sum_dyn += lt.dynamics;
    }

    const bool event = (epoch_ + 1) % c.threshold_interval == 0;
    if (event && c.refit && sindy_initialized_) {
      refit_members();
      entry.refit = true;
    }
    if (c.mode == Mode::Sindy && event) {
      const bool was_null = model_.ensemble.all_null();
      for (std::size_t i = 0; i < model_.ensemble.size(); ++i)
        threshold_prune(model_.ensemble.models[i], model_.ensemble.thresholds[i]);
      reapply_masks();
      entry.pruned = true;
      ++pruning_events_;
      if (!was_null && model_.ensemble.all_null())
        std::cerr << "warning: every ensemble member pruned to the null model; continuing with reconstruction only\n";
      if (entry.refit) refit_members();
    }

    entry.total = sum_total / static_cast<double>(nb);
    entry.recon = sum_recon / static_cast<double>(nb);
    entry.dynamics = sum_dyn / static_cast<double>(nb);
    for (const auto& m : model_.ensemble.models) entry.nnz.push_back(m.nnz());
    if (c.log_wall_time)
      entry.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ++epoch_;
    log_.push_back(entry);
    if (on_epoch) on_epoch(entry);
    return entry;
  }

  // Ridge least-squares estimate of every member's Xi from the latents of the
  // training windows; derivatives by central differences.
  void initial_sindy_fit() {
    const auto& c = model_.config;
    const RowMat Z = encode_range(model_, ds_, ds_.train);
    if (Z.rows() < 3) return;
    const RowMat dZ = central_difference(Z, c.dt);
    const SindyModel fit = fit_stlsq(Z, dZ, model_.ensemble.models.front().spec, {0.0, 1, c.init_ridge}, c.dt, c.substeps);
    for (auto& m : model_.ensemble.models) m.set_coefficients(fit.coefficients());
    if (c.refit && Z.rows() > 1) {
      refit_rollout(model_.ensemble.models.front(), Z, refit_options(Z.rows()));
      for (auto& m : model_.ensemble.models) m.set_coefficients(model_.ensemble.models.front().coefficients());
    }
    sindy_initialized_ = true;
  }

  // Gauss-Newton refit of every member's active coefficients against the
  // rollout error of the current training latents. Adam moments of Xi restart.
  void refit_members() {
    const RowMat Z = encode_range(model_, ds_, ds_.train);
    if (Z.rows() < 2) return;
    for (auto& m : model_.ensemble.models) refit_rollout(m, Z, refit_options(Z.rows()));
    const auto params = opt_.params();
    for (auto& m : model_.ensemble.models)
      for (std::size_t k = 0; k < params.size(); ++k)
        if (params[k].node() == m.xi.node()) {
          opt_.slots()[k].m.fill(0.0);
          opt_.slots()[k].v.fill(0.0);
        }
  }

 private:
  // Horizon covers at least the training lookahead and is capped by the data.
  RefitOptions refit_options(Eigen::Index rows) const {
    const auto& c = model_.config;
    const auto cap = static_cast<std::size_t>(rows - 1);
    const std::size_t horizon = std::min(cap, std::max(c.refit_horizon, c.lookahead()));
    return {static_cast<int>(c.refit_iters), c.init_ridge, horizon, horizon == 1 ? 1 : c.refit_stride};
  }

  std::vector<std::size_t> epoch_starts() {
    const auto& c = model_.config;
    const std::size_t last = ds_.train.end - c.lookahead();  // exclusive
    std::vector<std::size_t> starts;
    for (std::size_t b = ds_.train.begin; b < last; ++b) starts.push_back(b);
    if (c.duplicate_tail_fraction > 0) {
      const auto n = static_cast<std::size_t>(c.duplicate_tail_fraction * static_cast<double>(starts.size()));
      const std::vector<std::size_t> tail(starts.end() - static_cast<std::ptrdiff_t>(n), starts.end());
      starts.insert(starts.end(), tail.begin(), tail.end());
    }
    for (std::size_t i = starts.size(); i > 1; --i) std::swap(starts[i - 1], starts[rng_.below(i)]);
    return starts;
  }

  void reapply_masks() {
    const auto params = opt_.params();
    for (auto& m : model_.ensemble.models) {
      m.apply_mask();
      for (std::size_t k = 0; k < params.size(); ++k) {
        if (params[k].node() != m.xi.node()) continue;
        auto& slot = opt_.slots()[k];
        for (Eigen::Index i = 0; i < m.mask.size(); ++i)
          if (!m.mask.data()[i]) slot.m[static_cast<std::size_t>(i)] = slot.v[static_cast<std::size_t>(i)] = 0.0;
      }
    }
  }

  ShredModel& model_;
  const WindowedDataset& ds_;
  AdamW opt_;
  Rng rng_;
  std::size_t epoch_ = 0;
  bool sindy_initialized_ = false;
  std::size_t pruning_events_ = 0;
  std::vector<EpochLog> log_;
};

inline std::vector<EpochLog> train(ShredModel& model, const WindowedDataset& ds) {
  Trainer t(model, ds);
  return t.run();
}

}  // namespace sshred
