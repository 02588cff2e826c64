// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "stemit/autograd.hpp"
#include "stemit/error.hpp"
#include "stemit/geo.hpp"
#include "stemit/rng.hpp"
#include "stemit/sample.hpp"

namespace stemit::model {

using num::Parameter;
using num::Tape;
using num::Tensor;
using num::Var;

enum class Fusion {
  adaptive,          // unconstrained α (and β)
  adaptive_clamped,  // α, β hard-clipped to [0, 1] at use time
  concat,            // branch outputs concatenated
};

inline std::string to_string(Fusion f) {
  switch (f) {
    case Fusion::adaptive: return "adaptive";
    case Fusion::adaptive_clamped: return "adaptive_clamped";
    case Fusion::concat: return "concat";
  }
  return "adaptive";
}

inline Fusion parse_fusion(const std::string& s) {
  if (s == "adaptive") return Fusion::adaptive;
  if (s == "adaptive_clamped" || s == "clamp") return Fusion::adaptive_clamped;
  if (s == "concat") return Fusion::concat;
  throw ConfigError("unknown fusion '" + s + "' (expected adaptive, adaptive_clamped or concat)");
}

/// Default physical features: the best-performing set (no surface temperature).
inline std::vector<std::string> default_features() { return {"smb", "refreeze", "melt", "snowpack"}; }

struct BranchConfig {
  bool sage = true;
  bool gcn = false;
  bool temp = true;
  Fusion fusion = Fusion::adaptive;
  std::size_t hidden = 64;  // d′
  std::size_t head1 = 64;
  std::size_t head2 = 32;
  bool use_phys = true;
  std::vector<std::string> features = default_features();
  /// Weight the GraphSAGE neighbor mean by edge weights.
  bool weighted_mean = false;
  double alpha_init = 0.5;
  double beta_init = 0.5;
  std::size_t m = 5;
  std::size_t n = 15;

  std::size_t branch_count() const { return std::size_t{sage} + gcn + temp; }

  /// Physical features actually fed to the model.
  std::vector<std::string> phys() const { return use_phys ? features : std::vector<std::string>{}; }
  std::size_t dynamic_features() const { return 1 + phys().size(); }
  std::size_t spatial_width() const { return dynamic_features() * m + 2; }
  std::size_t head_input() const { return fusion == Fusion::concat ? branch_count() * hidden : hidden; }

  bool uses_alpha() const { return branch_count() >= 2 && fusion != Fusion::concat; }
  bool uses_beta() const { return branch_count() == 3 && fusion != Fusion::concat; }

  /// "gcn+sage+temp", optionally suffixed ":clamp" or ":concat".
  std::string variant() const {
    std::string v;
    auto add = [&v](const char* b) { v += (v.empty() ? "" : "+") + std::string(b); };
    if (gcn) add("gcn");
    if (sage) add("sage");
    if (temp) add("temp");
    if (fusion == Fusion::adaptive_clamped) v += ":clamp";
    if (fusion == Fusion::concat) v += ":concat";
    return v;
  }

  /// Sets the branch flags and fusion mode from a variant string.
  void set_variant(const std::string& spec) {
    std::string branches = spec, mode;
    if (auto colon = spec.find(':'); colon != std::string::npos) {
      branches = spec.substr(0, colon);
      mode = spec.substr(colon + 1);
    }
    sage = gcn = temp = false;
    std::stringstream ss(branches);
    std::string tok;
    while (std::getline(ss, tok, '+')) {
      bool* flag = tok == "sage" ? &sage : tok == "gcn" ? &gcn : tok == "temp" ? &temp : nullptr;
      if (!flag) throw ConfigError("variant '" + spec + "': unknown branch '" + tok + "'");
      if (*flag) throw ConfigError("variant '" + spec + "': branch '" + tok + "' repeated");
      *flag = true;
    }
    if (branch_count() == 0) throw ConfigError("variant '" + spec + "' names no branch");
    if (mode.empty())
      fusion = Fusion::adaptive;
    else if (mode == "clamp")
      fusion = Fusion::adaptive_clamped;
    else if (mode == "concat")
      fusion = Fusion::concat;
    else
      throw ConfigError("variant '" + spec + "': unknown fusion suffix '" + mode + "'");
  }

  void validate() const {
    if (branch_count() == 0) throw ConfigError("model: at least one branch must be active");
    if (hidden < 1 || head1 < 1 || head2 < 1) throw ConfigError("model: layer widths must be >= 1");
    if (m < 1 || n < 1) throw ConfigError("model: m and n must be >= 1");
    for (const auto& f : features)
      if (!graph::is_phys_field(f)) throw ConfigError("model: unknown feature '" + f + "'");
  }
};

/// All learnable quantities, in a fixed declaration order. Parameters for
/// every branch exist regardless of variant so checkpoints share a layout;
/// active() lists the ones the variant trains.
class ModelParams {
 public:
  ModelParams() = default;
  ModelParams(const ModelParams& o) : params_(o.params_) {}
  ModelParams& operator=(const ModelParams& o) {
    params_ = o.params_;
    return *this;
  }

  Parameter& add(std::string name, Tensor value) {
    if (find(name)) throw ContractError("parameter '" + name + "' registered twice");
    params_.emplace_back(std::move(name), std::move(value));
    return params_.back();
  }

  Parameter* find(const std::string& name) {
    for (auto& p : params_)
      if (p.name == name) return &p;
    return nullptr;
  }
  const Parameter* find(const std::string& name) const {
    for (const auto& p : params_)
      if (p.name == name) return &p;
    return nullptr;
  }

  Parameter& at(const std::string& name) {
    if (Parameter* p = find(name)) return *p;
    throw ConfigError("model has no parameter '" + name + "'");
  }
  const Parameter& at(const std::string& name) const {
    if (const Parameter* p = find(name)) return *p;
    throw ConfigError("model has no parameter '" + name + "'");
  }

  std::vector<Parameter>& all() { return params_; }
  const std::vector<Parameter>& all() const { return params_; }

  std::vector<Parameter*> active(const BranchConfig& cfg) {
    std::vector<Parameter*> out;
    for (auto& p : params_)
      if (is_active(p.name, cfg)) out.push_back(&p);
    return out;
  }

  static bool is_active(const std::string& name, const BranchConfig& cfg) {
    auto starts = [&name](const char* prefix) { return name.rfind(prefix, 0) == 0; };
    if (starts("sage.")) return cfg.sage;
    if (starts("gcn.")) return cfg.gcn;
    if (starts("temp.")) return cfg.temp;
    if (name == "fusion.alpha") return cfg.uses_alpha();
    if (name == "fusion.beta") return cfg.uses_beta();
    return true;
  }

  void zero_grads() {
    for (auto& p : params_) p.zero_grad();
  }

  double alpha() const { return at("fusion.alpha").value[0]; }
  double beta() const { return at("fusion.beta").value[0]; }

 private:
  std::vector<Parameter> params_;
};

inline Tensor glorot(num::Shape shape, std::size_t fan_in, std::size_t fan_out, SeededRng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return Tensor::uniform(std::move(shape), rng, -bound, bound);
}

/// Glorot-uniform weights and kernels, zero biases, α = alpha_init and
/// β = beta_init. Convolution kernels use fan_in = m·F, fan_out = d′.
inline ModelParams init_params(const BranchConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  SeededRng rng(seed);
  const std::size_t d = cfg.spatial_width(), h = cfg.hidden, f = cfg.dynamic_features(), m = cfg.m;
  ModelParams p;
  p.add("sage.W1", glorot({d, h}, d, h, rng));
  p.add("sage.W2", glorot({d, h}, d, h, rng));
  p.add("sage.bias", Tensor({h}));
  p.add("gcn.W", glorot({d, h}, d, h, rng));
  p.add("gcn.bias", Tensor({h}));
  for (const char* k : {"P", "Q", "R"}) {
    p.add(std::string("temp.K") + k, glorot({m, f, h}, m * f, h, rng));
    p.add(std::string("temp.b") + k, Tensor({h}));
  }
  const std::size_t hin = cfg.head_input();
  p.add("head.A1", glorot({hin, cfg.head1}, hin, cfg.head1, rng));
  p.add("head.b1", Tensor({cfg.head1}));
  p.add("head.A2", glorot({cfg.head1, cfg.head2}, cfg.head1, cfg.head2, rng));
  p.add("head.b2", Tensor({cfg.head2}));
  p.add("head.A3", glorot({cfg.head2, cfg.n}, cfg.head2, cfg.n, rng));
  p.add("head.b3", Tensor({cfg.n}));
  p.add("fusion.alpha", Tensor::scalar(cfg.alpha_init));
  p.add("fusion.beta", Tensor::scalar(cfg.beta_init));
  return p;
}

/// Throws ConfigError when a parameter's shape disagrees with `cfg`.
inline void check_shapes(const ModelParams& params, const BranchConfig& cfg) {
  const ModelParams ref = init_params(cfg, 0);
  for (const auto& p : ref.all()) {
    const Parameter* q = params.find(p.name);
    if (!q) throw ConfigError("parameters lack '" + p.name + "'");
    if (q->value.shape() != p.value.shape())
      throw ConfigError("parameter '" + p.name + "' has shape " + num::shape_str(q->value.shape()) +
                        ", config expects " + num::shape_str(p.value.shape()));
  }
}

// ---------------------------------------------------------------------------
// Graph operators. Both are linear in the node features, so for a constant
// input they are applied once per sample rather than per step.

/// Row v: mean of x(u) over the neighbors of v (edge-weighted if asked).
/// Nodes without neighbors get a zero row.
inline Tensor neighbor_mean(const Tensor& x, const graph::EdgeSet& edges, bool weighted = false) {
  num::require_rank(x, 2, "neighbor_mean");
  const std::size_t w = x.dim(0), d = x.dim(1);
  if (edges.nodes != w)
    throw DimensionError("neighbor_mean: edge set has " + std::to_string(edges.nodes) + " nodes, features have " +
                         std::to_string(w));
  Tensor acc({w, d});
  std::vector<double> mass(w, 0.0);
  for (const auto& e : edges.edges) {
    const double c = weighted ? e.weight : 1.0;
    for (std::size_t k = 0; k < d; ++k) {
      acc(e.u, k) += c * x(e.v, k);
      acc(e.v, k) += c * x(e.u, k);
    }
    mass[e.u] += c;
    mass[e.v] += c;
  }
  for (std::size_t v = 0; v < w; ++v) {
    if (mass[v] == 0.0) continue;
    for (std::size_t k = 0; k < d; ++k) acc(v, k) /= mass[v];
  }
  return acc;
}

/// D̂^(−1/2) Â D̂^(−1/2) with Â = weighted adjacency + I.
inline Tensor gcn_operator(const graph::EdgeSet& edges) {
  const std::size_t w = edges.nodes;
  Tensor a = Tensor::identity(w);
  for (const auto& e : edges.edges) {
    a(e.u, e.v) += e.weight;
    a(e.v, e.u) += e.weight;
  }
  std::vector<double> inv_sqrt(w);
  for (std::size_t i = 0; i < w; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < w; ++j) deg += a(i, j);
    inv_sqrt[i] = 1.0 / std::sqrt(deg);
  }
  for (std::size_t i = 0; i < w; ++i)
    for (std::size_t j = 0; j < w; ++j) a(i, j) *= inv_sqrt[i] * inv_sqrt[j];
  return a;
}

inline Tensor gcn_propagate(const Tensor& x, const graph::EdgeSet& edges) {
  if (edges.nodes != x.dim(0)) throw DimensionError("gcn_propagate: edge set does not match features");
  return num::matmul(gcn_operator(edges), x);
}

// ---------------------------------------------------------------------------
// Branches. Each takes tape variables so the same code serves training and
// gradient checks.

inline void require_width(const Tensor& x, const Tensor& w, const char* op) {
  if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(0))
    throw DimensionError(std::string(op) + ": input " + num::shape_str(x.shape()) + " does not match weights " +
                         num::shape_str(w.shape()));
}

/// x(v)·W1 + mean_{u∈N(v)} x(u)·W2 + bias, given the precomputed neighbor mean.
inline Var sage_layer(Var x, Var agg, Var w1, Var w2, Var bias) {
  require_width(x.value(), w1.value(), "sage_forward");
  return num::add_bias(num::add(num::matmul(x, w1), num::matmul(agg, w2)), bias);
}

inline Var sage_forward(Var x, const graph::EdgeSet& edges, Var w1, Var w2, Var bias, bool weighted = false) {
  require_width(x.value(), w1.value(), "sage_forward");
  Tape& t = *x.tape;
  // When x itself is differentiated, aggregate through the explicit mean
  // operator so the neighbor path carries gradient too.
  Var agg = t.requires_grad(x)
                ? num::matmul(t.constant(neighbor_mean(Tensor::identity(x.value().dim(0)), edges, weighted)), x)
                : t.constant(neighbor_mean(x.value(), edges, weighted));
  return sage_layer(x, agg, w1, w2, bias);
}

/// Spectral branch given the propagated features D̂^(−1/2) Â D̂^(−1/2) x.
inline Var gcn_layer(Var propagated, Var wg, Var bias) {
  require_width(propagated.value(), wg.value(), "gcn_forward");
  return num::add_bias(num::matmul(propagated, wg), bias);
}

inline Var gcn_forward(Var x, const graph::EdgeSet& edges, Var wg, Var bias) {
  require_width(x.value(), wg.value(), "gcn_forward");
  Tape& t = *x.tape;
  Var prop = t.requires_grad(x) ? num::matmul(t.constant(gcn_operator(edges)), x)
                                : t.constant(gcn_propagate(x.value(), edges));
  return gcn_layer(prop, wg, bias);
}

struct TemporalKernels {
  Var kp, bp, kq, bq, kr, br;
};

/// relu(P ⊙ σ(Q) + R) with P, Q, R full-window time convolutions of xt.
inline Var temporal_forward(Var xt, const TemporalKernels& k) {
  const Tensor& x = xt.value();
  num::require_rank(x, 3, "temporal_forward");
  for (Var kv : {k.kp, k.kq, k.kr}) {
    if (kv.value().rank() != 3 || kv.value().dim(0) != x.dim(1))
      throw DimensionError("temporal_forward: kernel " + num::shape_str(kv.shape()) +
                           " must span the full window of " + num::shape_str(x.shape()));
  }
  const std::size_t w = x.dim(0), h = k.kp.value().dim(2);
  auto conv = [&](Var kern, Var b) { return num::reshape(num::conv_time(xt, kern, b), {w, h}); };
  Var p = conv(k.kp, k.bp);
  Var q = conv(k.kq, k.bq);
  Var r = conv(k.kr, k.br);
  return num::relu(num::add(num::glu_gate(p, q), r));
}

/// α·h_spatial + (1 − α)·h_temporal.
inline Var fuse(Var h_spatial, Var h_temporal, Var alpha) {
  num::require_same_shape(h_spatial.value(), h_temporal.value(), "fuse");
  return num::add(num::scale(h_spatial, alpha), num::scale(h_temporal, num::affine(alpha, -1.0, 1.0)));
}

/// α·h_spatial + β·h_spectral + (1 − α − β)·h_temporal, α and β optionally
/// clipped to [0, 1] first.
inline Var fuse3(Var h_spatial, Var h_spectral, Var h_temporal, Var alpha, Var beta, bool clamp) {
  num::require_same_shape(h_spatial.value(), h_spectral.value(), "fuse3");
  num::require_same_shape(h_spatial.value(), h_temporal.value(), "fuse3");
  Var a = clamp ? num::clip01(alpha) : alpha;
  Var b = clamp ? num::clip01(beta) : beta;
  Var rest = num::affine(num::add(a, b), -1.0, 1.0);
  return num::add(num::add(num::scale(h_spatial, a), num::scale(h_spectral, b)), num::scale(h_temporal, rest));
}

struct HeadWeights {
  Var a1, b1, a2, b2, a3, b3;
};

/// hardswish(h·A1 + b1) → hardswish(·A2 + b2) → linear(·A3 + b3).
inline Var head_forward(Var h, const HeadWeights& w) {
  require_width(h.value(), w.a1.value(), "head_forward");
  Var z1 = num::hardswish(num::add_bias(num::matmul(h, w.a1), w.b1));
  Var z2 = num::hardswish(num::add_bias(num::matmul(z1, w.a2), w.b2));
  return num::add_bias(num::matmul(z2, w.a3), w.b3);
}

// ---------------------------------------------------------------------------
// Full model.

/// Features with the constant graph operators already applied.
struct ModelInput {
  Tensor spatial;      // W × (F·m + 2)
  Tensor neighbor;     // neighbor mean of `spatial`
  Tensor propagated;   // GCN-normalized propagation of `spatial`
  Tensor temporal;     // W × m × F
};

inline ModelInput prepare_input(const Tensor& spatial, const Tensor& temporal, const graph::EdgeSet& edges,
                                const BranchConfig& cfg) {
  ModelInput in;
  in.spatial = spatial;
  in.temporal = temporal;
  if (cfg.sage) in.neighbor = neighbor_mean(spatial, edges, cfg.weighted_mean);
  if (cfg.gcn) in.propagated = gcn_propagate(spatial, edges);
  return in;
}

inline ModelInput prepare_input(const graph::GraphSample& s, const BranchConfig& cfg) {
  return prepare_input(s.spatial_x, s.temporal_x, s.edges, cfg);
}

struct ForwardVars {
  Var prediction;
  std::optional<Var> h_spatial, h_spectral, h_temporal;
  Var fused;
};

struct ModelOutput {
  Tensor prediction;
  std::optional<Tensor> h_spatial, h_spectral, h_temporal;
  Tensor fused;
};

inline ForwardVars forward(Tape& tape, const ModelInput& in, ModelParams& params, const BranchConfig& cfg) {
  if (in.spatial.rank() != 2 || in.spatial.dim(1) != cfg.spatial_width())
    throw ConfigError("forward: spatial input " + num::shape_str(in.spatial.shape()) + " but config expects width " +
                      std::to_string(cfg.spatial_width()));
  if (in.temporal.rank() != 3 || in.temporal.dim(1) != cfg.m || in.temporal.dim(2) != cfg.dynamic_features())
    throw ConfigError("forward: temporal input " + num::shape_str(in.temporal.shape()) + " does not match config");
  auto P = [&](const char* name) { return tape.param(params.at(name)); };
  ForwardVars out;
  std::vector<Var> branches;
  if (cfg.sage) {
    Var x = tape.constant(in.spatial);
    Var agg = tape.constant(in.neighbor);
    out.h_spatial = sage_layer(x, agg, P("sage.W1"), P("sage.W2"), P("sage.bias"));
    branches.push_back(*out.h_spatial);
  }
  if (cfg.gcn) {
    out.h_spectral = gcn_layer(tape.constant(in.propagated), P("gcn.W"), P("gcn.bias"));
    branches.push_back(*out.h_spectral);
  }
  if (cfg.temp) {
    TemporalKernels k{P("temp.KP"), P("temp.bP"), P("temp.KQ"), P("temp.bQ"), P("temp.KR"), P("temp.bR")};
    out.h_temporal = temporal_forward(tape.constant(in.temporal), k);
    branches.push_back(*out.h_temporal);
  }

  const bool clamp = cfg.fusion == Fusion::adaptive_clamped;
  if (branches.size() == 1) {
    out.fused = branches[0];
  } else if (cfg.fusion == Fusion::concat) {
    out.fused = num::concat_cols(branches);
  } else if (branches.size() == 3) {
    out.fused = fuse3(*out.h_spatial, *out.h_spectral, *out.h_temporal, P("fusion.alpha"), P("fusion.beta"), clamp);
  } else {
    // α weights the graph branch: GraphSAGE when present, else GCN.
    Var first = out.h_spatial ? *out.h_spatial : *out.h_spectral;
    Var second = out.h_temporal ? *out.h_temporal : *out.h_spectral;
    Var alpha = P("fusion.alpha");
    out.fused = fuse(first, second, clamp ? num::clip01(alpha) : alpha);
  }
  HeadWeights hw{P("head.A1"), P("head.b1"), P("head.A2"), P("head.b2"), P("head.A3"), P("head.b3")};
  out.prediction = head_forward(out.fused, hw);
  return out;
}

/// Inference without gradient recording.
inline ModelOutput predict(const ModelInput& in, ModelParams& params, const BranchConfig& cfg) {
  Tape tape(false);
  ForwardVars f = forward(tape, in, params, cfg);
  ModelOutput out;
  out.prediction = f.prediction.value();
  if (f.h_spatial) out.h_spatial = f.h_spatial->value();
  if (f.h_spectral) out.h_spectral = f.h_spectral->value();
  if (f.h_temporal) out.h_temporal = f.h_temporal->value();
  out.fused = f.fused.value();
  return out;
}

inline ModelOutput forward(const graph::GraphSample& s, ModelParams& params, const BranchConfig& cfg) {
  return predict(prepare_input(s, cfg), params, cfg);
}

/// Effective fusion weights after any clipping.
inline double effective(double v, const BranchConfig& cfg) {
  return cfg.fusion == Fusion::adaptive_clamped ? std::clamp(v, 0.0, 1.0) : v;
}

}  // namespace stemit::model
