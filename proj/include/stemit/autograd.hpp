// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "stemit/error.hpp"
#include "stemit/tensor.hpp"

namespace stemit::num {

/// A learnable tensor with its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor gradient;

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), gradient(value.shape()) {}

  void zero_grad() { gradient.fill(0.0); }
};

class Tape;

/// Handle to a node recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

/// Records operations in execution order and replays them backwards.
///
/// Nodes are appended by the differentiable ops below; a node's backward
/// closure reads the node's gradient and adds into its inputs' gradients.
/// With recording disabled the tape only evaluates values.
class Tape {
 public:
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return record_; }

  Var constant(Tensor value) { return push(std::move(value), false, nullptr); }

  /// Leaf bound to a Parameter. backward() accumulates into p.gradient.
  Var param(Parameter& p) { return push(p.value, record_, &p); }

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  /// Gradient buffer of a node, allocated on first use.
  Tensor& grad(Var v) {
    Node& n = nodes_[v.id];
    if (n.grad.size() != n.value.size() || n.grad.shape() != n.value.shape()) {
      n.grad = Tensor(n.value.shape());
    }
    return n.grad;
  }

  /// Records an op result. `backward` is only kept when some input needs it.
  Var record(Tensor value, std::initializer_list<Var> inputs, std::function<void(Tape&, Var)> backward) {
    bool needs = false;
    if (record_) {
      for (Var in : inputs) needs = needs || nodes_[in.id].requires_grad;
    }
    Var out = push(std::move(value), needs, nullptr);
    if (needs) nodes_[out.id].backward = std::move(backward);
    return out;
  }

  Var record(Tensor value, const std::vector<Var>& inputs, std::function<void(Tape&, Var)> backward) {
    bool needs = false;
    if (record_) {
      for (Var in : inputs) needs = needs || nodes_[in.id].requires_grad;
    }
    Var out = push(std::move(value), needs, nullptr);
    if (needs) nodes_[out.id].backward = std::move(backward);
    return out;
  }

  /// Reverse sweep from a scalar loss. Parameter gradients are accumulated
  /// (+=); node-local gradients are reset for every call.
  void backward(Var loss) {
    if (nodes_[loss.id].value.size() != 1) {
      throw ContractError("backward: loss must be a scalar, got shape " +
                          shape_str(nodes_[loss.id].value.shape()));
    }
    if (!record_) throw ContractError("backward: tape was not recording");
    for (Node& n : nodes_) n.grad = Tensor();
    grad(loss)[0] = 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.size() == 0) continue;
      if (n.backward) n.backward(*this, Var{this, i});
      if (n.param) {
        auto g = n.param->gradient.data();
        const auto src = n.grad.data();
        for (std::size_t k = 0; k < g.size(); ++k) g[k] += src[k];
      }
    }
  }

  std::size_t size() const noexcept { return nodes_.size(); }

  /// Distinct parameters bound to this tape, in binding order.
  std::vector<Parameter*> bound_params() const {
    std::vector<Parameter*> out;
    for (const Node& n : nodes_)
      if (n.param && std::find(out.begin(), out.end(), n.param) == out.end()) out.push_back(n.param);
    return out;
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    std::function<void(Tape&, Var)> backward;
  };

  Var push(Tensor value, bool requires_grad, Parameter* p) {
    nodes_.push_back(Node{std::move(value), Tensor(), requires_grad, p, {}});
    return Var{this, nodes_.size() - 1};
  }

  bool record_;
  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape->value(*this); }

namespace detail {

inline void add_into(Tensor& dst, const Tensor& src) {
  auto d = dst.data();
  const auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

inline bool wants(Tape& t, Var v) { return t.requires_grad(v); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Differentiable operations.

inline Var matmul(Var a, Var b) {
  Tape& t = *a.tape;
  Tensor out = matmul(a.value(), b.value());
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, Var self) {
    const Tensor& g = tp.grad(self);
    if (detail::wants(tp, a)) matmul_accumulate(g, transpose(b.value()), tp.grad(a));
    if (detail::wants(tp, b)) matmul_accumulate(transpose(a.value()), g, tp.grad(b));
  });
}

inline Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  detail::add_into(out, b.value());
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& tp, Var self) {
    const Tensor& g = tp.grad(self);
    if (detail::wants(tp, a)) detail::add_into(tp.grad(a), g);
    if (detail::wants(tp, b)) detail::add_into(tp.grad(b), g);
  });
}

inline Var sub(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& tp, Var self) {
    const Tensor& g = tp.grad(self);
    if (detail::wants(tp, a)) detail::add_into(tp.grad(a), g);
    if (detail::wants(tp, b)) {
      Tensor& gb = tp.grad(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

/// Elementwise product.
inline Var mul(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& tp, Var self) {
    const Tensor& g = tp.grad(self);
    if (detail::wants(tp, a)) {
      Tensor& ga = tp.grad(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b.value()[i];
    }
    if (detail::wants(tp, b)) {
      Tensor& gb = tp.grad(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a.value()[i];
    }
  });
}

/// x + bias, bias broadcast along the last axis.
inline Var add_bias(Var x, Var bias) {
  const Tensor& xv = x.value();
  const std::size_t c = xv.shape().back();
  if (bias.value().size() != c) {
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) + " does not match " +
                         shape_str(xv.shape()));
  }
  Tensor out = xv;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bias.value()[i % c];
  return x.tape->record(std::move(out), {x, bias}, [x, bias, c](Tape& tp, Var self) {
    const Tensor& g = tp.grad(self);
    if (detail::wants(tp, x)) detail::add_into(tp.grad(x), g);
    if (detail::wants(tp, bias)) {
      Tensor& gb = tp.grad(bias);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i % c] += g[i];
    }
  });
}

/// s·x for a one-element s.
inline Var scale(Var x, Var s) {
  if (s.value().size() != 1) throw DimensionError("scale: factor must be a scalar");
  const double sv = s.value()[0];
  Tensor out = map(x.value(), [sv](double v) { return sv * v; });
  return x.tape->record(std::move(out), {x, s}, [x, s](Tape& tp, Var self) {
    const Tensor& g = tp.grad(self);
    if (detail::wants(tp, x)) {
      Tensor& gx = tp.grad(x);
      const double sv = s.value()[0];
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += sv * g[i];
    }
    if (detail::wants(tp, s)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * x.value()[i];
      tp.grad(s)[0] += acc;
    }
  });
}

/// a·x + b elementwise with constants a, b.
inline Var affine(Var x, double a, double b) {
  Tensor out = map(x.value(), [a, b](double v) { return a * v + b; });
  return x.tape->record(std::move(out), {x}, [x, a](Tape& tp, Var self) {
    const Tensor& g = tp.grad(self);
    Tensor& gx = tp.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += a * g[i];
  });
}

/// Hard clip to [0, 1]; zero gradient outside the clip range.
inline Var clip01(Var x) {
  Tensor out = map(x.value(), [](double v) { return std::clamp(v, 0.0, 1.0); });
  return x.tape->record(std::move(out), {x}, [x](Tape& tp, Var self) {
    const Tensor& g = tp.grad(self);
    Tensor& gx = tp.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = x.value()[i];
      if (v > 0.0 && v < 1.0) gx[i] += g[i];
    }
  });
}

inline Var sigmoid(Var x) {
  Tensor out = sigmoid(x.value());
  return x.tape->record(std::move(out), {x}, [x](Tape& tp, Var self) {
    const Tensor& g = tp.grad(self);
    const Tensor& y = self.value();
    Tensor& gx = tp.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

inline Var hardswish(Var x) {
  Tensor out = hardswish(x.value());
  return x.tape->record(std::move(out), {x}, [x](Tape& tp, Var self) {
    const Tensor& g = tp.grad(self);
    Tensor& gx = tp.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * hardswish_derivative(x.value()[i]);
  });
}

inline Var relu(Var x) {
  Tensor out = relu(x.value());
  return x.tape->record(std::move(out), {x}, [x](Tape& tp, Var self) {
    const Tensor& g = tp.grad(self);
    Tensor& gx = tp.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (x.value()[i] > 0.0) gx[i] += g[i];
  });
}

inline Var glu_gate(Var p, Var q) {
  Tensor out = glu_gate(p.value(), q.value());
  return p.tape->record(std::move(out), {p, q}, [p, q](Tape& tp, Var self) {
    const Tensor& g = tp.grad(self);
    const Tensor& pv = p.value();
    const Tensor& qv = q.value();
    const bool want_p = detail::wants(tp, p);
    const bool want_q = detail::wants(tp, q);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double s = sigmoid(qv[i]);
      if (want_p) tp.grad(p)[i] += g[i] * s;
      if (want_q) tp.grad(q)[i] += g[i] * pv[i] * s * (1.0 - s);
    }
  });
}

inline Var conv_time(Var x, Var k, Var bias) {
  Tensor out = conv_time(x.value(), k.value(), bias.value());
  return x.tape->record(std::move(out), {x, k, bias}, [x, k, bias](Tape& tp, Var self) {
    const Tensor& g = tp.grad(self);
    const Tensor& xv = x.value();
    const Tensor& kv = k.value();
    const std::size_t w = xv.dim(0), cin = xv.dim(2);
    const std::size_t kt = kv.dim(0), cout = kv.dim(2);
    const std::size_t tout = g.dim(1);
    const bool want_x = detail::wants(tp, x);
    const bool want_k = detail::wants(tp, k);
    const bool want_b = detail::wants(tp, bias);
    Tensor* gx = want_x ? &tp.grad(x) : nullptr;
    Tensor* gk = want_k ? &tp.grad(k) : nullptr;
    Tensor* gb = want_b ? &tp.grad(bias) : nullptr;
    for (std::size_t v = 0; v < w; ++v) {
      for (std::size_t s = 0; s < tout; ++s) {
        const double* go = &g(v, s, 0);
        if (gb)
          for (std::size_t c = 0; c < cout; ++c) (*gb)[c] += go[c];
        for (std::size_t dt = 0; dt < kt; ++dt) {
          for (std::size_t ci = 0; ci < cin; ++ci) {
            const double xval = xv(v, s + dt, ci);
            const double* kr = &kv(dt, ci, 0);
            double acc = 0.0;
            if (gk) {
              double* gkr = &(*gk)(dt, ci, 0);
              for (std::size_t c = 0; c < cout; ++c) gkr[c] += xval * go[c];
            }
            if (gx) {
              for (std::size_t c = 0; c < cout; ++c) acc += kr[c] * go[c];
              (*gx)(v, s + dt, ci) += acc;
            }
          }
        }
      }
    }
  });
}

inline Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return x.tape->record(std::move(out), {x}, [x](Tape& tp, Var self) {
    detail::add_into(tp.grad(x), tp.grad(self).reshaped(x.shape()));
  });
}

/// Column-wise concatenation of 2-D tensors with equal row counts.
inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t rows = parts[0].value().dim(0);
  std::size_t cols = 0;
  for (Var p : parts) {
    require_rank(p.value(), 2, "concat_cols");
    if (p.value().dim(0) != rows) throw DimensionError("concat_cols: row count mismatch");
    cols += p.value().dim(1);
  }
  Tensor out({rows, cols});
  std::size_t off = 0;
  for (Var p : parts) {
    const Tensor& pv = p.value();
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < pv.dim(1); ++j) out(i, off + j) = pv(i, j);
    off += pv.dim(1);
  }
  return parts[0].tape->record(std::move(out), parts, [parts](Tape& tp, Var self) {
    const Tensor& g = tp.grad(self);
    std::size_t off = 0;
    for (Var p : parts) {
      const std::size_t c = p.value().dim(1);
      if (detail::wants(tp, p)) {
        Tensor& gp = tp.grad(p);
        for (std::size_t i = 0; i < g.dim(0); ++i)
          for (std::size_t j = 0; j < c; ++j) gp(i, j) += g(i, off + j);
      }
      off += c;
    }
  });
}

inline Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return x.tape->record(Tensor::scalar(s), {x}, [x](Tape& tp, Var self) {
    const double g = tp.grad(self)[0];
    for (double& v : tp.grad(x).data()) v += g;
  });
}

inline Var mean(Var x) {
  const double n = static_cast<double>(x.value().size());
  return affine(sum(x), 1.0 / n, 0.0);
}

/// Mean of squared residuals over all entries.
inline Var mse(Var pred, Var target) {
  require_same_shape(pred.value(), target.value(), "mse");
  const Tensor& p = pred.value();
  const Tensor& y = target.value();
  const double n = static_cast<double>(p.size());
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - y[i]) * (p[i] - y[i]);
  return pred.tape->record(Tensor::scalar(s / n), {pred, target}, [pred, target, n](Tape& tp, Var self) {
    const double g = tp.grad(self)[0] * 2.0 / n;
    const Tensor& p = pred.value();
    const Tensor& y = target.value();
    if (detail::wants(tp, pred)) {
      Tensor& gp = tp.grad(pred);
      for (std::size_t i = 0; i < p.size(); ++i) gp[i] += g * (p[i] - y[i]);
    }
    if (detail::wants(tp, target)) {
      Tensor& gy = tp.grad(target);
      for (std::size_t i = 0; i < p.size(); ++i) gy[i] -= g * (p[i] - y[i]);
    }
  });
}

inline void zero_grads(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

}  // namespace stemit::num
