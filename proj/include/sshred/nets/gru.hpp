#pragma once

#include <string>
#include <vector>

#include "sshred/nets/params.hpp"

namespace sshred {

// One GRU layer in row-vector convention: x is (batch, in), h is (batch, hidden).
struct GruLayer {
  Var w_u, w_r, w_h;  // (in, hidden)
  Var u_u, u_r, u_h;  // (hidden, hidden)
  Var b_u, b_r, b_h;  // (1, hidden)

  std::size_t input_width() const { return w_u.rows(); }
  std::size_t hidden_width() const { return w_u.cols(); }

  NamedParams named(const std::string& prefix) const {
    return {{prefix + "w_u", w_u}, {prefix + "w_r", w_r}, {prefix + "w_h", w_h},
            {prefix + "u_u", u_u}, {prefix + "u_r", u_r}, {prefix + "u_h", u_h},
            {prefix + "b_u", b_u}, {prefix + "b_r", b_r}, {prefix + "b_h", b_h}};
  }
};

struct GruParams {
  std::vector<GruLayer> layers;

  std::size_t input_width() const { return layers.front().input_width(); }
  std::size_t latent_width() const { return layers.back().hidden_width(); }

  NamedParams named() const {
    NamedParams out;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      auto n = layers[i].named("gru." + std::to_string(i) + ".");
      out.insert(out.end(), n.begin(), n.end());
    }
    return out;
  }

  GruParams clone() const {
    GruParams c;
    for (const auto& l : layers) {
      c.layers.push_back({l.w_u.detached_copy(), l.w_r.detached_copy(), l.w_h.detached_copy(),
                          l.u_u.detached_copy(), l.u_r.detached_copy(), l.u_h.detached_copy(),
                          l.b_u.detached_copy(), l.b_r.detached_copy(), l.b_h.detached_copy()});
    }
    return c;
  }
};

// `widths` lists hidden sizes bottom to top; the last entry is the latent size.
inline GruParams init_gru(std::size_t input_width, const std::vector<std::size_t>& widths, Rng& rng) {
  if (input_width == 0 || widths.empty()) throw ConfigError("init_gru: widths must be positive");
  GruParams p;
  std::size_t in = input_width;
  for (std::size_t h : widths) {
    if (h == 0) throw ConfigError("init_gru: zero hidden width");
    GruLayer l;
    l.w_u = uniform_param({in, h}, in, rng);
    l.w_r = uniform_param({in, h}, in, rng);
    l.w_h = uniform_param({in, h}, in, rng);
    l.u_u = uniform_param({h, h}, h, rng);
    l.u_r = uniform_param({h, h}, h, rng);
    l.u_h = uniform_param({h, h}, h, rng);
    l.b_u = uniform_param({1, h}, h, rng);
    l.b_r = uniform_param({1, h}, h, rng);
    l.b_h = uniform_param({1, h}, h, rng);
    p.layers.push_back(std::move(l));
    in = h;
  }
  return p;
}

// h' = (1-u)*h + u*h~ with
//   u  = sigmoid(x W_u + h U_u + b_u)
//   r  = sigmoid(x W_r + h U_r + b_r)
//   h~ = tanh(x W_h + (r*h) U_h + b_h)
inline Var gru_cell(const Var& x, const Var& h, const GruLayer& p) {
  using namespace ops;
  if (x.cols() != p.input_width() || h.cols() != p.hidden_width() || x.rows() != h.rows())
    throw ShapeError("gru_cell: x " + shape_str(x.shape()) + ", h " + shape_str(h.shape()) +
                     " do not fit layer (" + std::to_string(p.input_width()) + " -> " +
                     std::to_string(p.hidden_width()) + ")");
  Var u = sigmoid(add(matmul(x, p.w_u) + matmul(h, p.u_u), p.b_u));
  Var r = sigmoid(add(matmul(x, p.w_r) + matmul(h, p.u_r), p.b_r));
  Var cand = ops::tanh(add(matmul(x, p.w_h) + matmul(r * h, p.u_h), p.b_h));
  return h + u * (cand - h);
}

// Runs the stacked GRU over a lag window given as L time slices, each
// (batch, sensors), from zero initial state. Returns the top layer's final
// hidden state, (batch, latent).
inline Var encode(const std::vector<Var>& steps, const GruParams& p) {
  if (steps.empty()) throw ShapeError("encode: empty lag window");
  const std::size_t batch = steps.front().rows();
  std::vector<Var> seq = steps;
  for (const auto& layer : p.layers) {
    Var h = Var::constant(Tensor::matrix(batch, layer.hidden_width()));
    std::vector<Var> next;
    next.reserve(seq.size());
    for (const auto& x : seq) {
      h = gru_cell(x, h, layer);
      next.push_back(h);
    }
    seq = std::move(next);
  }
  return seq.back();
}

// Single window (L, sensors) -> latent vector, evaluated without recording.
inline Tensor encode_window(const Tensor& window, const GruParams& p, std::size_t expected_lag = 0) {
  if (window.ndim() != 2) throw ShapeError("encode_window: window must be (L, sensors)");
  if (expected_lag != 0 && window.rows() != expected_lag)
    throw ShapeError("encode_window: expected lag " + std::to_string(expected_lag) + ", got " +
                     std::to_string(window.rows()));
  NoGradGuard ng;
  std::vector<Var> steps;
  for (std::size_t t = 0; t < window.rows(); ++t) {
    Tensor row = Tensor::matrix(1, window.cols());
    for (std::size_t j = 0; j < window.cols(); ++j) row[j] = window(t, j);
    steps.push_back(Var::constant(std::move(row)));
  }
  Tensor z = encode(steps, p).value();
  return z.reshaped({z.numel()});
}

}  // namespace sshred
