#pragma once

#include <vector>

#include "sshred/shred/model.hpp"

namespace sshred {

struct LossTerms {
  Var total;
  double recon = 0.0;
  double dynamics = 0.0;
};

// Reconstruction MSE of windows `starts` plus the weighted latent-dynamics
// term. Every start b is encoded together with its partners b+1..b+m (m = 1,
// or koopman_m_max in Koopman mode) so that latents come from the live encoder.
// `limit` bounds the window indices a batch may touch.
inline LossTerms combined_loss(const std::vector<std::size_t>& starts, const ShredModel& model,
                               const WindowedDataset& ds, std::size_t limit, bool train_mode, Rng* rng,
                               bool with_dynamics = true) {
  if (starts.empty()) throw ConfigError("combined_loss: empty batch");
  const std::size_t ahead = model.config.lookahead();
  const std::size_t B = starts.size();
  std::vector<std::size_t> all;
  all.reserve(B * (ahead + 1));
  for (std::size_t m = 0; m <= ahead; ++m) {
    for (auto b : starts) {
      if (b + ahead >= limit || b + ahead >= ds.count())
        throw ConfigError("combined_loss: window " + std::to_string(b) + " has no adjacent partner within the split");
      all.push_back(b + m);
    }
  }
  const Var Z = encode(ds.batch_steps(all), model.gru);
  std::vector<Var> steps;
  for (std::size_t m = 0; m <= ahead; ++m) steps.push_back(ops::slice_rows(Z, m * B, (m + 1) * B));

  LossTerms out;
  const Var recon = ops::mse(decode(steps[0], model.decoder, train_mode, rng), ds.batch_targets(starts));
  out.recon = recon.item();
  out.total = recon;
  if (!with_dynamics || model.config.sindy_weight == 0.0) return out;

  Var dyn;
  if (model.mode() == Mode::Koopman) {
    dyn = koopman_loss(steps, koopman_operator(model.ensemble.models.front()));
  } else {
    if (model.ensemble.all_null()) return out;
    dyn = ensemble_sindy_loss(steps[0], steps[1], model.ensemble);
  }
  out.dynamics = dyn.item();
  out.total = recon + ops::scale(dyn, model.config.sindy_weight);
  return out;
}

}  // namespace sshred
