#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "sshred/sindy/io.hpp"

namespace sshred {

enum class Mode { Sindy, Koopman };

inline std::string to_string(Mode m) { return m == Mode::Sindy ? "sindy" : "koopman"; }
inline Mode mode_from_string(const std::string& s) {
  if (s == "sindy") return Mode::Sindy;
  if (s == "koopman") return Mode::Koopman;
  throw ConfigError("mode must be \"sindy\" or \"koopman\", got \"" + s + "\"");
}

// Training hyper-parameters. Defaults follow the sea-surface-temperature setup
// (AdamW 1e-3 / 1e-2, batch 128, 1000 epochs, ten thresholds on [0.1, 1.0]
// applied every 100 epochs, decoder 350/400, dropout 0.1).
struct TrainConfig {
  std::size_t lag = 52;
  std::size_t latent = 3;
  std::size_t gru_layers = 2;
  std::size_t gru_hidden = 0;  // intermediate GRU width; 0 means `latent`
  std::vector<std::size_t> decoder_hidden{350, 400};
  double dropout = 0.1;

  std::size_t epochs = 1000;
  std::size_t batch_size = 128;
  double lr = 1e-3;
  double weight_decay = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 0.0;

  double dt = 1.0;  // time between consecutive windows
  int substeps = 10;
  std::size_t threshold_interval = 100;
  double threshold_low = 0.1;
  double threshold_high = 1.0;
  std::size_t ensemble_size = 10;
  bool include_constant = true;
  int max_degree = 1;
  std::vector<TrigTerm> trig;

  Mode mode = Mode::Sindy;
  std::size_t koopman_m_max = 1;
  double sindy_weight = 1.0;

  std::size_t pretrain_epochs = 0;  // reconstruction-only epochs before the SINDy term switches on
  bool init_sindy_fit = true;       // least-squares estimate of Xi from the current latents
  double init_ridge = 1e-6;
  bool refit = true;  // Gauss-Newton refit of Xi on the latents at every threshold event
  std::size_t refit_iters = 10;
  std::size_t refit_horizon = 25;  // rollout steps matched by the refit
  std::size_t refit_stride = 4;    // spacing of refit start windows
  double duplicate_tail_fraction = 0.0;

  double train_fraction = 0.7;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;
  bool log_wall_time = true;

  LibrarySpec library() const {
    LibrarySpec s{latent, include_constant, max_degree, trig};
    return mode == Mode::Koopman ? LibrarySpec{latent, false, 1, {}} : s;
  }

  std::vector<std::size_t> gru_widths() const {
    std::vector<std::size_t> w(gru_layers, gru_hidden ? gru_hidden : latent);
    if (!w.empty()) w.back() = latent;
    return w;
  }

  std::size_t lookahead() const { return mode == Mode::Koopman ? koopman_m_max : 1; }

  void validate() const {
    auto need = [](bool ok, const std::string& msg) {
      if (!ok) throw ConfigError("config: " + msg);
    };
    need(lag > 0, "lag must be positive");
    need(latent > 0, "latent must be positive");
    need(gru_layers > 0, "gru_layers must be positive");
    for (auto w : decoder_hidden) need(w > 0, "decoder widths must be positive");
    need(dropout >= 0 && dropout < 1, "dropout must be in [0, 1)");
    need(batch_size > 0, "batch_size must be positive");
    need(lr > 0, "lr must be positive");
    need(weight_decay >= 0, "weight_decay must be >= 0");
    need(dt > 0, "dt must be positive");
    need(substeps >= 1, "substeps must be >= 1");
    need(threshold_interval > 0, "threshold_interval must be positive");
    need(threshold_low >= 0 && threshold_low <= threshold_high, "need 0 <= threshold_low <= threshold_high");
    need(ensemble_size > 0, "ensemble_size must be positive");
    need(max_degree >= 0, "max_degree must be >= 0");
    need(koopman_m_max >= 1, "koopman_m_max must be >= 1");
    need(sindy_weight >= 0, "sindy_weight must be >= 0");
    need(init_ridge >= 0, "init_ridge must be >= 0");
    need(refit_horizon >= 1 && refit_stride >= 1, "refit_horizon and refit_stride must be positive");
    need(duplicate_tail_fraction >= 0 && duplicate_tail_fraction <= 1, "duplicate_tail_fraction must be in [0, 1]");
    need(train_fraction > 0 && validation_fraction >= 0 && train_fraction + validation_fraction <= 1,
         "bad split fractions");
    library_terms(library());
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json trig = nlohmann::json::array();
  for (const auto& t : c.trig) trig.push_back({{"kind", t.kind == TrigTerm::Kind::Sin ? "sin" : "cos"}, {"freq", t.freq}});
  return {{"lag", c.lag},
          {"latent", c.latent},
          {"gru_layers", c.gru_layers},
          {"gru_hidden", c.gru_hidden},
          {"decoder_hidden", c.decoder_hidden},
          {"dropout", c.dropout},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr", c.lr},
          {"weight_decay", c.weight_decay},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"eps", c.eps},
          {"clip_norm", c.clip_norm},
          {"dt", c.dt},
          {"substeps", c.substeps},
          {"threshold_interval", c.threshold_interval},
          {"threshold_low", c.threshold_low},
          {"threshold_high", c.threshold_high},
          {"ensemble_size", c.ensemble_size},
          {"include_constant", c.include_constant},
          {"max_degree", c.max_degree},
          {"trig", trig},
          {"mode", to_string(c.mode)},
          {"koopman_m_max", c.koopman_m_max},
          {"sindy_weight", c.sindy_weight},
          {"pretrain_epochs", c.pretrain_epochs},
          {"init_sindy_fit", c.init_sindy_fit},
          {"init_ridge", c.init_ridge},
          {"refit", c.refit},
          {"refit_iters", c.refit_iters},
          {"refit_horizon", c.refit_horizon},
          {"refit_stride", c.refit_stride},
          {"duplicate_tail_fraction", c.duplicate_tail_fraction},
          {"train_fraction", c.train_fraction},
          {"validation_fraction", c.validation_fraction},
          {"seed", c.seed},
          {"log_wall_time", c.log_wall_time}};
}

// Missing keys keep their defaults; unknown keys are rejected.
inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  TrainConfig c;
  const nlohmann::json defaults = to_json(c);
  for (const auto& [k, _] : j.items())
    if (!defaults.contains(k)) throw ConfigError("config: unknown key '" + k + "'");
  try {
    auto get = [&](const char* k, auto& dst) {
      if (!j.contains(k)) return;
      using T = std::decay_t<decltype(dst)>;
      if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>)
        if (!j.at(k).is_number_integer() || j.at(k).template get<std::int64_t>() < 0) throw ConfigError(std::string("config: '") + k + "' must be a non-negative integer");
      dst = j.at(k).get<T>();
    };
    get("lag", c.lag);
    get("latent", c.latent);
    get("gru_layers", c.gru_layers);
    get("gru_hidden", c.gru_hidden);
    get("decoder_hidden", c.decoder_hidden);
    get("dropout", c.dropout);
    get("epochs", c.epochs);
    get("batch_size", c.batch_size);
    get("lr", c.lr);
    get("weight_decay", c.weight_decay);
    get("beta1", c.beta1);
    get("beta2", c.beta2);
    get("eps", c.eps);
    get("clip_norm", c.clip_norm);
    get("dt", c.dt);
    get("substeps", c.substeps);
    get("threshold_interval", c.threshold_interval);
    get("threshold_low", c.threshold_low);
    get("threshold_high", c.threshold_high);
    get("ensemble_size", c.ensemble_size);
    get("include_constant", c.include_constant);
    get("max_degree", c.max_degree);
    if (j.contains("trig")) {
      for (const auto& t : j.at("trig")) {
        const auto kind = t.at("kind").get<std::string>();
        if (kind != "sin" && kind != "cos") throw ConfigError("config: trig kind must be sin or cos");
        c.trig.push_back({kind == "sin" ? TrigTerm::Kind::Sin : TrigTerm::Kind::Cos, t.value("freq", 1.0)});
      }
    }
    if (j.contains("mode")) c.mode = mode_from_string(j.at("mode").get<std::string>());
    get("koopman_m_max", c.koopman_m_max);
    get("sindy_weight", c.sindy_weight);
    get("pretrain_epochs", c.pretrain_epochs);
    get("init_sindy_fit", c.init_sindy_fit);
    get("init_ridge", c.init_ridge);
    get("refit", c.refit);
    get("refit_iters", c.refit_iters);
    get("refit_horizon", c.refit_horizon);
    get("refit_stride", c.refit_stride);
    get("duplicate_tail_fraction", c.duplicate_tail_fraction);
    get("train_fraction", c.train_fraction);
    get("validation_fraction", c.validation_fraction);
    get("seed", c.seed);
    get("log_wall_time", c.log_wall_time);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace sshred
