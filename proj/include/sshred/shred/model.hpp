#pragma once

#include <string>

#include "sshred/core/rng.hpp"
#include "sshred/data/windows.hpp"
#include "sshred/nets/decoder.hpp"
#include "sshred/nets/gru.hpp"
#include "sshred/shred/config.hpp"
#include "sshred/sindy/koopman.hpp"

namespace sshred {

// Seed streams split from the top-level seed.
enum class SeedStream : std::uint64_t { Init = 1, Train = 2, Landscape = 3, Sensors = 4, Data = 5 };

inline std::uint64_t stream_seed(std::uint64_t seed, SeedStream s) {
  return split_seed(seed, static_cast<std::uint64_t>(s));
}

// GRU encoder, shallow decoder and the latent dynamics. In Koopman mode the
// ensemble holds a single linear-only member whose Xi is the transposed
// generator.
struct ShredModel {
  GruParams gru;
  DecoderParams decoder;
  EnsembleSindy ensemble;
  TrainConfig config;

  std::size_t latent() const { return config.latent; }
  std::size_t sensors() const { return gru.input_width(); }
  std::size_t points() const { return decoder.output_width(); }
  Mode mode() const { return config.mode; }

  // Network weights only (no Xi).
  NamedParams network_params() const {
    auto out = gru.named();
    auto d = decoder.named();
    out.insert(out.end(), d.begin(), d.end());
    return out;
  }

  NamedParams named_params() const {
    auto out = network_params();
    for (std::size_t i = 0; i < ensemble.size(); ++i) out.emplace_back("xi." + std::to_string(i), ensemble.models[i].xi);
    return out;
  }

  ShredModel clone() const { return {gru.clone(), decoder.clone(), ensemble.clone(), config}; }

  void check_consistency() const {
    if (gru.latent_width() != config.latent || decoder.input_width() != config.latent)
      throw ShapeError("ShredModel: latent width mismatch across encoder, decoder and config");
    for (const auto& m : ensemble.models)
      if (m.dim() != config.latent) throw ShapeError("ShredModel: library dimension differs from latent width");
  }
};

inline ShredModel init_model(const TrainConfig& cfg, std::size_t sensors, std::size_t points) {
  cfg.validate();
  Rng rng(stream_seed(cfg.seed, SeedStream::Init));
  ShredModel m;
  m.config = cfg;
  m.gru = init_gru(sensors, cfg.gru_widths(), rng);
  m.decoder = init_decoder(cfg.latent, cfg.decoder_hidden, points, cfg.dropout, rng);
  const std::size_t members = cfg.mode == Mode::Koopman ? 1 : cfg.ensemble_size;
  m.ensemble = make_ensemble(cfg.library(), members, cfg.threshold_low, cfg.threshold_high, cfg.dt, cfg.substeps);
  return m;
}

// Eval-mode latents of windows [range.begin, range.end), one row each.
inline RowMat encode_range(const ShredModel& m, const WindowedDataset& ds, IndexRange range, std::size_t chunk = 512) {
  RowMat Z(static_cast<Eigen::Index>(range.size()), static_cast<Eigen::Index>(m.latent()));
  NoGradGuard ng;
  for (std::size_t b = range.begin; b < range.end; b += chunk) {
    std::vector<std::size_t> idx;
    for (std::size_t i = b; i < std::min(range.end, b + chunk); ++i) idx.push_back(i);
    const Var z = encode(ds.batch_steps(idx), m.gru);
    Z.middleRows(static_cast<Eigen::Index>(b - range.begin), static_cast<Eigen::Index>(idx.size())) = z.value().mat();
  }
  return Z;
}

// Eval-mode reconstruction of each window's target frame.
inline RowMat reconstruct_range(const ShredModel& m, const WindowedDataset& ds, IndexRange range) {
  const RowMat Z = encode_range(m, ds, range);
  NoGradGuard ng;
  return decode(Var::constant(Tensor::from_eigen(Z)), m.decoder, false).value().mat();
}

}  // namespace sshred
