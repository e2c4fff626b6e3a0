#pragma once

// Define-by-run reverse-mode differentiation over Tensor values.
//
// Every primitive returns a Var whose node remembers its inputs and a backward
// rule when at least one input requires a gradient. backward() walks the graph
// once in reverse topological order and then releases the recorded edges, so
// a graph is rebuilt for every training step.

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "sshred/diff/tensor.hpp"

namespace sshred {

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;  // allocated lazily, same shape as value
  bool has_grad = false;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<NodePtr> inputs;
  std::function<void(Node&)> backward_fn;

  bool is_leaf() const { return inputs.empty(); }

  Tensor& grad_buffer() {
    if (!has_grad) {
      grad = Tensor(value.shape(), 0.0);
      has_grad = true;
    }
    return grad;
  }
};

namespace detail {
inline bool& grad_enabled_flag() {
  thread_local bool enabled = true;
  return enabled;
}
}  // namespace detail

inline bool grad_enabled() { return detail::grad_enabled_flag(); }

// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : prev_(detail::grad_enabled_flag()) { detail::grad_enabled_flag() = false; }
  ~NoGradGuard() { detail::grad_enabled_flag() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

class Var {
 public:
  Var() = default;

  static Var constant(Tensor t) {
    auto n = std::make_shared<Node>();
    n->value = std::move(t);
    return Var(std::move(n));
  }

  static Var param(Tensor t) {
    auto n = std::make_shared<Node>();
    n->value = std::move(t);
    n->requires_grad = true;
    return Var(std::move(n));
  }

  // Records an op node. `fn` receives the node and should accumulate into the
  // grad buffers of those inputs that require a gradient.
  static Var make(const char* op, Tensor value, std::vector<Var> inputs,
                  std::function<void(Node&)> fn) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->op = op;
    bool any = false;
    for (const auto& v : inputs) any = any || v.requires_grad();
    if (any && grad_enabled()) {
      n->requires_grad = true;
      n->inputs.reserve(inputs.size());
      for (auto& v : inputs) n->inputs.push_back(v.node_);
      n->backward_fn = std::move(fn);
    }
    return Var(std::move(n));
  }

  bool valid() const { return static_cast<bool>(node_); }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  double item() const { return node_->value.item(); }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool has_grad() const { return node_->has_grad; }
  const Tensor& grad() const {
    if (!node_->has_grad) node_->grad_buffer();
    return node_->grad;
  }
  Tensor& mutable_grad() { return node_->grad_buffer(); }
  void zero_grad() {
    if (node_->has_grad) node_->grad.fill(0.0);
  }

  Node* node() const { return node_.get(); }
  const NodePtr& node_ptr() const { return node_; }

  // Deep copy of a leaf's value into a fresh leaf with the same grad flag.
  Var detached_copy() const {
    return node_->requires_grad ? param(node_->value) : constant(node_->value);
  }

 private:
  explicit Var(NodePtr n) : node_(std::move(n)) {}
  NodePtr node_;
};

// Populates grads of every requires-grad leaf reachable from `loss` and frees
// the recorded graph.
inline void backward(const Var& loss) {
  if (loss.value().numel() != 1)
    throw ShapeError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  if (!loss.requires_grad()) return;

  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node(), 0}};
  seen.insert(loss.node());
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->inputs.size()) {
      Node* c = n->inputs[i++].get();
      if (c->requires_grad && seen.insert(c).second) stack.emplace_back(c, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  Node* root = loss.node();
  root->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->has_grad) n->backward_fn(*n);
  }
  for (Node* n : order) {
    if (!n->is_leaf()) {
      n->inputs.clear();
      n->backward_fn = nullptr;
      n->grad = Tensor();
      n->has_grad = false;
    }
  }
}

namespace ops {

namespace detail {

inline void require(bool ok, const char* op, const std::string& msg) {
  if (!ok) throw ShapeError(std::string(op) + ": " + msg);
}

inline bool wants(const Node& n, std::size_t i) { return n.inputs[i]->requires_grad; }
inline Tensor& g_of(Node& n, std::size_t i) { return n.inputs[i]->grad_buffer(); }

// Elementwise unary op with derivative expressed through input x and output y.
template <typename F, typename D>
Var unary(const char* name, const Var& a, F f, D dfdx) {
  Tensor out(a.shape());
  const auto& x = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = f(x[i]);
  return Var::make(name, std::move(out), {a}, [dfdx](Node& n) {
    const auto& x = n.inputs[0]->value;
    Tensor& gx = g_of(n, 0);
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += n.grad[i] * dfdx(x[i], n.value[i]);
  });
}

// a is (m,n); b is either (m,n) or a single row (1,n)/(n) broadcast over rows.
inline bool row_broadcast(const Tensor& a, const Tensor& b) {
  return !a.same_shape(b) && b.rows() == 1 && b.cols() == a.cols() && b.numel() == a.cols();
}

inline void check_binary(const char* op, const Tensor& a, const Tensor& b) {
  require(a.same_shape(b) || row_broadcast(a, b), op,
          "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

}  // namespace detail

inline Var matmul(const Var& a, const Var& b) {
  const auto& A = a.value();
  const auto& B = b.value();
  detail::require(A.ndim() == 2 && B.ndim() == 2 && A.cols() == B.rows(), "matmul",
                  "shape mismatch " + shape_str(A.shape()) + " x " + shape_str(B.shape()));
  Tensor out = Tensor::matrix(A.rows(), B.cols());
  out.mat().noalias() = A.mat() * B.mat();
  return Var::make("matmul", std::move(out), {a, b}, [](Node& n) {
    const auto G = n.grad.mat();
    if (detail::wants(n, 0)) detail::g_of(n, 0).mat().noalias() += G * n.inputs[1]->value.mat().transpose();
    if (detail::wants(n, 1)) detail::g_of(n, 1).mat().noalias() += n.inputs[0]->value.mat().transpose() * G;
  });
}

inline Var transpose(const Var& a) {
  detail::require(a.value().ndim() == 2, "transpose", "expects 2-D, got " + shape_str(a.shape()));
  Tensor out = Tensor::matrix(a.cols(), a.rows());
  out.mat() = a.value().mat().transpose();
  return Var::make("transpose", std::move(out), {a}, [](Node& n) {
    detail::g_of(n, 0).mat() += n.grad.mat().transpose();
  });
}

namespace detail {
template <int Sign>
Var add_like(const char* name, const Var& a, const Var& b) {
  const auto& A = a.value();
  const auto& B = b.value();
  check_binary(name, A, B);
  Tensor out = A;
  const bool bc = row_broadcast(A, B);
  if (bc)
    out.mat().rowwise() += static_cast<double>(Sign) * B.mat().row(0);
  else
    out.mat() += static_cast<double>(Sign) * B.mat();
  return Var::make(name, std::move(out), {a, b}, [bc](Node& n) {
    if (wants(n, 0)) g_of(n, 0).mat() += n.grad.mat();
    if (wants(n, 1)) {
      Tensor& gb = g_of(n, 1);
      if (bc)
        gb.mat().row(0) += static_cast<double>(Sign) * n.grad.mat().colwise().sum();
      else
        gb.mat() += static_cast<double>(Sign) * n.grad.mat();
    }
  });
}
}  // namespace detail

inline Var add(const Var& a, const Var& b) { return detail::add_like<1>("add", a, b); }
inline Var sub(const Var& a, const Var& b) { return detail::add_like<-1>("sub", a, b); }

// Hadamard product; b may be a broadcast row.
inline Var mul(const Var& a, const Var& b) {
  const auto& A = a.value();
  const auto& B = b.value();
  detail::check_binary("mul", A, B);
  const bool bc = detail::row_broadcast(A, B);
  Tensor out = A;
  if (bc)
    out.mat().array().rowwise() *= B.mat().row(0).array();
  else
    out.mat().array() *= B.mat().array();
  return Var::make("mul", std::move(out), {a, b}, [bc](Node& n) {
    const auto& A = n.inputs[0]->value;
    const auto& B = n.inputs[1]->value;
    const auto G = n.grad.mat().array();
    if (detail::wants(n, 0)) {
      auto ga = detail::g_of(n, 0).mat().array();
      if (bc)
        ga += G.rowwise() * B.mat().row(0).array();
      else
        ga += G * B.mat().array();
    }
    if (detail::wants(n, 1)) {
      Tensor& gb = detail::g_of(n, 1);
      if (bc)
        gb.mat().row(0).array() += (G * A.mat().array()).colwise().sum();
      else
        gb.mat().array() += G * A.mat().array();
    }
  });
}

inline Var scale(const Var& a, double s) {
  Tensor out = a.value();
  for (auto& v : out.values()) v *= s;
  return Var::make("scale", std::move(out), {a}, [s](Node& n) {
    Tensor& ga = detail::g_of(n, 0);
    for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += s * n.grad[i];
  });
}

inline Var add_scalar(const Var& a, double s) {
  Tensor out = a.value();
  for (auto& v : out.values()) v += s;
  return Var::make("add_scalar", std::move(out), {a}, [](Node& n) {
    Tensor& ga = detail::g_of(n, 0);
    for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += n.grad[i];
  });
}

inline Var sigmoid(const Var& a) {
  return detail::unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

inline Var tanh(const Var& a) {
  return detail::unary("tanh", a, [](double x) { return std::tanh(x); },
                       [](double, double y) { return 1.0 - y * y; });
}

inline Var relu(const Var& a) {
  return detail::unary("relu", a, [](double x) { return x > 0 ? x : 0.0; },
                       [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

inline Var sin(const Var& a) {
  return detail::unary("sin", a, [](double x) { return std::sin(x); },
                       [](double x, double) { return std::cos(x); });
}

inline Var cos(const Var& a) {
  return detail::unary("cos", a, [](double x) { return std::cos(x); },
                       [](double x, double) { return -std::sin(x); });
}

inline Var pow(const Var& a, double p) {
  return detail::unary("pow", a, [p](double x) { return std::pow(x, p); },
                       [p](double x, double) { return p == 0.0 ? 0.0 : p * std::pow(x, p - 1.0); });
}

// Concatenates 2-D tensors along `axis` (0 = rows, 1 = columns).
inline Var concat(const std::vector<Var>& parts, int axis = 1) {
  detail::require(!parts.empty(), "concat", "no inputs");
  detail::require(axis == 0 || axis == 1, "concat", "axis must be 0 or 1");
  std::size_t r = parts[0].rows(), c = parts[0].cols();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (axis == 1) {
      detail::require(p.rows() == r, "concat",
                      "row mismatch " + shape_str(parts[0].shape()) + " vs " + shape_str(p.shape()));
      total += p.cols();
    } else {
      detail::require(p.cols() == c, "concat",
                      "column mismatch " + shape_str(parts[0].shape()) + " vs " + shape_str(p.shape()));
      total += p.rows();
    }
  }
  Tensor out = axis == 1 ? Tensor::matrix(r, total) : Tensor::matrix(total, c);
  std::vector<std::size_t> offs;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offs.push_back(off);
    if (axis == 1) {
      out.mat().block(0, static_cast<Eigen::Index>(off), static_cast<Eigen::Index>(r),
                      static_cast<Eigen::Index>(p.cols())) = p.value().mat();
      off += p.cols();
    } else {
      out.mat().block(static_cast<Eigen::Index>(off), 0, static_cast<Eigen::Index>(p.rows()),
                      static_cast<Eigen::Index>(c)) = p.value().mat();
      off += p.rows();
    }
  }
  return Var::make("concat", std::move(out), parts, [offs, axis](Node& n) {
    const auto G = n.grad.mat();
    for (std::size_t i = 0; i < n.inputs.size(); ++i) {
      if (!detail::wants(n, i)) continue;
      Tensor& gi = detail::g_of(n, i);
      const auto o = static_cast<Eigen::Index>(offs[i]);
      if (axis == 1)
        gi.mat() += G.block(0, o, G.rows(), static_cast<Eigen::Index>(gi.cols()));
      else
        gi.mat() += G.block(o, 0, static_cast<Eigen::Index>(gi.rows()), G.cols());
    }
  });
}

// Rows [r0, r1) and columns [c0, c1) of a 2-D tensor.
inline Var slice(const Var& a, std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1) {
  detail::require(r0 < r1 && r1 <= a.rows() && c0 < c1 && c1 <= a.cols(), "slice",
                  "range out of bounds for " + shape_str(a.shape()));
  const auto R0 = static_cast<Eigen::Index>(r0), C0 = static_cast<Eigen::Index>(c0);
  const auto R = static_cast<Eigen::Index>(r1 - r0), C = static_cast<Eigen::Index>(c1 - c0);
  Tensor out = Tensor::matrix(r1 - r0, c1 - c0);
  out.mat() = a.value().mat().block(R0, C0, R, C);
  return Var::make("slice", std::move(out), {a}, [R0, C0, R, C](Node& n) {
    detail::g_of(n, 0).mat().block(R0, C0, R, C) += n.grad.mat();
  });
}

inline Var slice_rows(const Var& a, std::size_t r0, std::size_t r1) { return slice(a, r0, r1, 0, a.cols()); }
inline Var slice_cols(const Var& a, std::size_t c0, std::size_t c1) { return slice(a, 0, a.rows(), c0, c1); }

inline Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return Var::make("sum", Tensor::scalar(s), {a}, [](Node& n) {
    Tensor& ga = detail::g_of(n, 0);
    const double g = n.grad[0];
    for (auto& v : ga.values()) v += g;
  });
}

inline Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().numel())); }

// mean((a - b)^2) over all elements.
inline Var mse(const Var& a, const Var& b) {
  const auto& A = a.value();
  const auto& B = b.value();
  detail::require(A.same_shape(B), "mse", "shape mismatch " + shape_str(A.shape()) + " vs " + shape_str(B.shape()));
  const double inv = 1.0 / static_cast<double>(A.numel());
  double s = 0.0;
  for (std::size_t i = 0; i < A.numel(); ++i) {
    const double d = A[i] - B[i];
    s += d * d;
  }
  return Var::make("mse", Tensor::scalar(s * inv), {a, b}, [inv](Node& n) {
    const auto& A = n.inputs[0]->value;
    const auto& B = n.inputs[1]->value;
    const double g = 2.0 * inv * n.grad[0];
    if (detail::wants(n, 0)) {
      Tensor& ga = detail::g_of(n, 0);
      for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += g * (A[i] - B[i]);
    }
    if (detail::wants(n, 1)) {
      Tensor& gb = detail::g_of(n, 1);
      for (std::size_t i = 0; i < gb.numel(); ++i) gb[i] -= g * (A[i] - B[i]);
    }
  });
}

// Mean over rows of the squared row-wise l2 distance.
inline Var mean_sq_norm(const Var& a, const Var& b) {
  return scale(mse(a, b), static_cast<double>(a.cols()));
}

}  // namespace ops

// Operator sugar for the common arithmetic primitives.
inline Var operator+(const Var& a, const Var& b) { return ops::add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return ops::sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return ops::mul(a, b); }
inline Var operator*(double s, const Var& a) { return ops::scale(a, s); }

}  // namespace sshred
