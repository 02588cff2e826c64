// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "stemit/autograd.hpp"
#include "stemit/geo.hpp"
#include "stemit/gradcheck.hpp"
#include "stemit/model.hpp"
#include "stemit/rng.hpp"

namespace stemit::model {

using num::GradCheckReport;

namespace detail {

/// Values of magnitude in [0.1, 1.5] with random sign, away from the kinks
/// of relu and hardswish.
inline Tensor away_from_zero(num::Shape shape, SeededRng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.1, 1.5);
  return t;
}

inline Parameter make_param(const std::string& name, num::Shape shape, SeededRng& rng) {
  return Parameter(name, away_from_zero(std::move(shape), rng));
}

/// sum(y ⊙ R) for a fixed random R, so every output coordinate matters.
inline Var probe(Var y, const Tensor& r) { return num::sum(num::mul(y, y.tape->constant(r))); }

inline graph::EdgeSet random_edges(std::size_t w, SeededRng& rng) {
  std::vector<double> lat(w), lon(w);
  for (std::size_t i = 0; i < w; ++i) {
    lat[i] = rng.uniform(60.0, 80.0);
    lon[i] = rng.uniform(-50.0, -30.0);
  }
  return graph::build_edges(lat, lon);
}

}  // namespace detail

struct GradSuiteOptions {
  std::uint64_t seed = 0;
  double h = 1e-5;
  double tol = 1e-4;
};

/// Central-difference checks of every differentiable op and of the full
/// model in its branch/fusion variants. One report per named check.
inline std::vector<GradCheckReport> gradient_suite(const GradSuiteOptions& opt = {}) {
  std::vector<GradCheckReport> out;
  std::uint64_t stream = 0;
  auto run = [&](const std::string& name, num::Shape out_shape, std::vector<Parameter>& ps,
                 const std::function<Var(Tape&, std::vector<Var>&)>& op) {
    SeededRng rng(derive_seed(opt.seed, ++stream));
    const Tensor r = Tensor::uniform(std::move(out_shape), rng, -1.0, 1.0);
    std::vector<Parameter*> ptrs;
    for (auto& p : ps) ptrs.push_back(&p);
    auto build = [&](Tape& t) {
      std::vector<Var> vs;
      for (auto& p : ps) vs.push_back(t.param(p));
      Var y = op(t, vs);
      return y.value().size() == 1 && r.size() == 1 ? num::mul(y, t.constant(r)) : detail::probe(y, r);
    };
    out.push_back(num::finite_diff_check_all(name, build, ptrs, opt.h, opt.tol));
  };

  SeededRng rng(derive_seed(opt.seed, 0x9d));
  auto P = [&rng](const char* n, num::Shape s) { return detail::make_param(n, std::move(s), rng); };

  {
    std::vector<Parameter> ps{P("a", {3, 4}), P("b", {4, 2})};
    run("matmul", {3, 2}, ps, [](Tape&, std::vector<Var>& v) { return num::matmul(v[0], v[1]); });
  }
  {
    std::vector<Parameter> ps{P("a", {3, 2}), P("b", {3, 2})};
    run("add", {3, 2}, ps, [](Tape&, std::vector<Var>& v) { return num::add(v[0], v[1]); });
    run("sub", {3, 2}, ps, [](Tape&, std::vector<Var>& v) { return num::sub(v[0], v[1]); });
    run("mul", {3, 2}, ps, [](Tape&, std::vector<Var>& v) { return num::mul(v[0], v[1]); });
    run("glu_gate", {3, 2}, ps, [](Tape&, std::vector<Var>& v) { return num::glu_gate(v[0], v[1]); });
    run("mse", {1}, ps, [](Tape&, std::vector<Var>& v) { return num::mse(v[0], v[1]); });
  }
  {
    std::vector<Parameter> ps{P("x", {4, 3}), P("b", {3})};
    run("add_bias", {4, 3}, ps, [](Tape&, std::vector<Var>& v) { return num::add_bias(v[0], v[1]); });
  }
  {
    std::vector<Parameter> ps{P("x", {2, 3}), P("s", {1})};
    run("scale", {2, 3}, ps, [](Tape&, std::vector<Var>& v) { return num::scale(v[0], v[1]); });
  }
  {
    std::vector<Parameter> ps{P("x", {2, 3})};
    run("affine", {2, 3}, ps, [](Tape&, std::vector<Var>& v) { return num::affine(v[0], -1.5, 0.25); });
    run("sigmoid", {2, 3}, ps, [](Tape&, std::vector<Var>& v) { return num::sigmoid(v[0]); });
    run("hardswish", {2, 3}, ps, [](Tape&, std::vector<Var>& v) { return num::hardswish(v[0]); });
    run("relu", {2, 3}, ps, [](Tape&, std::vector<Var>& v) { return num::relu(v[0]); });
    run("reshape", {3, 2}, ps, [](Tape&, std::vector<Var>& v) { return num::reshape(v[0], {3, 2}); });
    run("sum", {1}, ps, [](Tape&, std::vector<Var>& v) { return num::sum(v[0]); });
    run("mean", {1}, ps, [](Tape&, std::vector<Var>& v) { return num::mean(v[0]); });
  }
  {
    // Interior of [0, 1] plus one value on each clipped side.
    std::vector<Parameter> ps{Parameter("x", Tensor::matrix({{0.3, 0.7, -0.4}, {1.6, 0.55, 0.2}}))};
    run("clip01", {2, 3}, ps, [](Tape&, std::vector<Var>& v) { return num::clip01(v[0]); });
  }
  {
    std::vector<Parameter> ps{P("a", {3, 2}), P("b", {3, 1}), P("c", {3, 4})};
    run("concat_cols", {3, 7}, ps, [](Tape&, std::vector<Var>& v) { return num::concat_cols(v); });
  }
  {
    std::vector<Parameter> ps{P("x", {2, 4, 3}), P("k", {2, 3, 2}), P("bias", {2})};
    run("conv_time", {2, 3, 2}, ps,
        [](Tape&, std::vector<Var>& v) { return num::conv_time(v[0], v[1], v[2]); });
  }

  const std::size_t w = 4, m = 3, f = 2, d = f * m + 2, h = 3;
  const graph::EdgeSet edges = detail::random_edges(w, rng);
  {
    std::vector<Parameter> ps{P("x", {w, d}), P("W1", {d, h}), P("W2", {d, h}), P("bias", {h})};
    run("sage_forward", {w, h}, ps, [&edges](Tape&, std::vector<Var>& v) {
      return sage_forward(v[0], edges, v[1], v[2], v[3]);
    });
    run("sage_forward:weighted", {w, h}, ps, [&edges](Tape&, std::vector<Var>& v) {
      return sage_forward(v[0], edges, v[1], v[2], v[3], true);
    });
  }
  {
    std::vector<Parameter> ps{P("x", {w, d}), P("W", {d, h}), P("bias", {h})};
    run("gcn_forward", {w, h}, ps,
        [&edges](Tape&, std::vector<Var>& v) { return gcn_forward(v[0], edges, v[1], v[2]); });
  }
  {
    std::vector<Parameter> ps{P("x", {w, m, f}), P("KP", {m, f, h}), P("bP", {h}), P("KQ", {m, f, h}),
                              P("bQ", {h}),      P("KR", {m, f, h}), P("bR", {h})};
    run("temporal_forward", {w, h}, ps, [](Tape&, std::vector<Var>& v) {
      return temporal_forward(v[0], TemporalKernels{v[1], v[2], v[3], v[4], v[5], v[6]});
    });
  }
  {
    std::vector<Parameter> ps{P("hs", {w, h}), P("ht", {w, h}), P("alpha", {1})};
    run("fuse", {w, h}, ps, [](Tape&, std::vector<Var>& v) { return fuse(v[0], v[1], v[2]); });
  }
  {
    std::vector<Parameter> ps{P("hs", {w, h}), P("hg", {w, h}), P("ht", {w, h}),
                              Parameter("alpha", Tensor::scalar(0.35)), Parameter("beta", Tensor::scalar(0.4))};
    run("fuse3", {w, h}, ps,
        [](Tape&, std::vector<Var>& v) { return fuse3(v[0], v[1], v[2], v[3], v[4], false); });
    run("fuse3:clamp", {w, h}, ps,
        [](Tape&, std::vector<Var>& v) { return fuse3(v[0], v[1], v[2], v[3], v[4], true); });
  }
  {
    std::vector<Parameter> ps{P("h", {w, h}), P("A1", {h, 4}), P("b1", {4}), P("A2", {4, 3}),
                              P("b2", {3}),   P("A3", {3, 2}), P("b3", {2})};
    run("head_forward", {w, 2}, ps, [](Tape&, std::vector<Var>& v) {
      return head_forward(v[0], HeadWeights{v[1], v[2], v[3], v[4], v[5], v[6]});
    });
  }

  // Full model: W=4, m=3, F=2 (thickness + one physical field), d′=3, n=2.
  for (const char* variant : {"sage+temp", "gcn+sage+temp", "gcn+sage+temp:clamp", "sage+temp:concat"}) {
    BranchConfig cfg;
    cfg.set_variant(variant);
    cfg.m = m;
    cfg.n = 2;
    cfg.hidden = h;
    cfg.head1 = 4;
    cfg.head2 = 3;
    cfg.features = {"smb"};
    cfg.alpha_init = 0.45;
    cfg.beta_init = 0.3;
    SeededRng mr(derive_seed(opt.seed, ++stream));
    ModelParams params = init_params(cfg, mr.next_u64());
    for (auto& p : params.all())
      if (p.name.find(".b") != std::string::npos) p.value = Tensor::uniform(p.value.shape(), mr, -0.2, 0.2);
    const Tensor xs = Tensor::uniform({w, d}, mr, -1.0, 1.0);
    const Tensor xt = Tensor::uniform({w, m, f}, mr, -1.0, 1.0);
    const Tensor y = Tensor::uniform({w, cfg.n}, mr, -1.0, 1.0);
    const ModelInput in = prepare_input(xs, xt, edges, cfg);
    auto build = [&](Tape& t) {
      return num::mse(forward(t, in, params, cfg).prediction, t.constant(y));
    };
    out.push_back(num::finite_diff_check_all(std::string("model:") + variant, build, params.active(cfg), opt.h,
                                             opt.tol));
  }
  return out;
}

}  // namespace stemit::model
