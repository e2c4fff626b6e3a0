#pragma once

#include <string>
#include <vector>

#include "sshred/nets/params.hpp"

namespace sshred {

struct Linear {
  Var w;  // (in, out)
  Var b;  // (1, out)
};

// Shallow decoder: (affine -> ReLU -> dropout) per hidden width, then a final
// affine map to the flattened field.
struct DecoderParams {
  std::vector<Linear> layers;
  double dropout = 0.0;

  std::size_t input_width() const { return layers.front().w.rows(); }
  std::size_t output_width() const { return layers.back().w.cols(); }

  NamedParams named() const {
    NamedParams out;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      out.emplace_back("dec." + std::to_string(i) + ".w", layers[i].w);
      out.emplace_back("dec." + std::to_string(i) + ".b", layers[i].b);
    }
    return out;
  }

  DecoderParams clone() const {
    DecoderParams c;
    c.dropout = dropout;
    for (const auto& l : layers) c.layers.push_back({l.w.detached_copy(), l.b.detached_copy()});
    return c;
  }
};

inline DecoderParams init_decoder(std::size_t latent, const std::vector<std::size_t>& hidden,
                                  std::size_t output, double dropout, Rng& rng) {
  if (latent == 0 || output == 0) throw ConfigError("init_decoder: widths must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("init_decoder: dropout must be in [0, 1)");
  DecoderParams d;
  d.dropout = dropout;
  std::size_t in = latent;
  auto widths = hidden;
  widths.push_back(output);
  for (std::size_t w : widths) {
    if (w == 0) throw ConfigError("init_decoder: zero width");
    d.layers.push_back({uniform_param({in, w}, in, rng), uniform_param({1, w}, in, rng)});
    in = w;
  }
  return d;
}

// Inverted dropout in train mode (kept units scaled by 1/(1-rate)); identity in
// eval mode. `rng` is only touched in train mode with a nonzero rate.
inline Var decode(const Var& z, const DecoderParams& p, bool train_mode, Rng* rng = nullptr) {
  using namespace ops;
  if (z.cols() != p.input_width())
    throw ShapeError("decode: latent " + shape_str(z.shape()) + " does not fit decoder input " +
                     std::to_string(p.input_width()));
  Var a = z;
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    a = add(matmul(a, p.layers[i].w), p.layers[i].b);
    if (i + 1 == p.layers.size()) break;
    a = relu(a);
    if (train_mode && p.dropout > 0.0) {
      if (!rng) throw ConfigError("decode: train-mode dropout needs an rng");
      const double keep = 1.0 - p.dropout;
      Tensor mask(a.shape());
      for (auto& m : mask.values()) m = rng->uniform() < keep ? 1.0 / keep : 0.0;
      a = a * Var::constant(std::move(mask));
    }
  }
  return a;
}

}  // namespace sshred
