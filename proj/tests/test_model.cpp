// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "stemit/model.hpp"
#include "stemit/sample.hpp"
#include "stemit/synth.hpp"

using namespace stemit;
using namespace stemit::model;
using graph::EdgeSet;
using num::Tape;
using num::Tensor;

namespace {

EdgeSet random_edges(std::size_t w, SeededRng& rng) {
  std::vector<double> lat, lon;
  for (std::size_t i = 0; i < w; ++i) {
    lat.push_back(70.0 + rng.uniform(-0.5, 0.5));
    lon.push_back(-40.0 + rng.uniform(-0.5, 0.5));
  }
  return graph::build_edges(lat, lon);
}

BranchConfig small_cfg(const std::string& variant = "sage+temp") {
  BranchConfig c;
  c.set_variant(variant);
  c.m = 3;
  c.n = 2;
  c.hidden = 4;
  c.head1 = 5;
  c.head2 = 3;
  c.features = {"smb"};
  return c;
}

ModelInput random_input(const BranchConfig& c, std::size_t w, SeededRng& rng, EdgeSet* edges_out = nullptr) {
  const EdgeSet e = random_edges(w, rng);
  if (edges_out) *edges_out = e;
  return prepare_input(Tensor::normal({w, c.spatial_width()}, rng), Tensor::normal({w, c.m, c.dynamic_features()}, rng),
                       e, c);
}

Tensor permute_rows(const Tensor& x, const std::vector<std::size_t>& perm) {
  Tensor y(x.shape());
  const std::size_t row = x.size() / x.dim(0);
  for (std::size_t i = 0; i < x.dim(0); ++i)
    for (std::size_t k = 0; k < row; ++k) y[i * row + k] = x[perm[i] * row + k];
  return y;
}

EdgeSet permute_edges(const EdgeSet& e, const std::vector<std::size_t>& perm) {
  // New node i is old node perm[i].
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
  EdgeSet out{e.nodes, {}};
  for (const auto& ed : e.edges) out.edges.push_back({inv[ed.u], inv[ed.v], ed.weight});
  return out;
}

}  // namespace

TEST(Variant, RoundTripAndFlags) {
  BranchConfig c;
  for (const char* v : {"sage+temp", "gcn+sage+temp", "gcn+sage+temp:clamp", "gcn+temp", "gcn+sage", "gcn", "sage",
                        "temp", "sage+temp:concat"}) {
    c.set_variant(v);
    EXPECT_EQ(c.variant(), v);
  }
  c.set_variant("temp+sage");
  EXPECT_EQ(c.variant(), "sage+temp");
  c.set_variant("gcn+sage+temp");
  EXPECT_TRUE(c.uses_alpha());
  EXPECT_TRUE(c.uses_beta());
  c.set_variant("sage");
  EXPECT_FALSE(c.uses_alpha());
  c.set_variant("sage+temp:concat");
  EXPECT_FALSE(c.uses_alpha());
  EXPECT_EQ(c.head_input(), 2 * c.hidden);
  EXPECT_THROW(c.set_variant("sage+lstm"), ConfigError);
  EXPECT_THROW(c.set_variant("sage+sage"), ConfigError);
  EXPECT_THROW(c.set_variant(""), ConfigError);
  EXPECT_THROW(c.set_variant("sage:avg"), ConfigError);
}

TEST(Config, WidthsFollowFeatureCount) {
  BranchConfig c;
  EXPECT_EQ(c.dynamic_features(), 5u);
  EXPECT_EQ(c.spatial_width(), 27u);
  c.use_phys = false;
  EXPECT_EQ(c.spatial_width(), 7u);
  c.use_phys = true;
  c.features = {"smb", "refreeze", "melt", "temp", "snowpack"};
  EXPECT_EQ(c.spatial_width(), 32u);
  c.features = {"wind"};
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Sage, MatchesPerNodeLoop) {
  SeededRng rng(3);
  for (bool weighted : {false, true}) {
    const std::size_t w = 7, d = 5, h = 4;
    const EdgeSet e = random_edges(w, rng);
    const Tensor x = Tensor::normal({w, d}, rng), w1 = Tensor::normal({d, h}, rng), w2 = Tensor::normal({d, h}, rng);
    const Tensor b = Tensor::normal({h}, rng);
    Tape t(false);
    const Tensor y = sage_forward(t.constant(x), e, t.constant(w1), t.constant(w2), t.constant(b), weighted).value();
    for (std::size_t v = 0; v < w; ++v) {
      std::vector<double> agg(d, 0.0);
      double mass = 0.0;
      for (const auto& ed : e.edges) {
        const std::size_t u = ed.u == v ? ed.v : ed.v == v ? ed.u : w;
        if (u == w) continue;
        const double c = weighted ? ed.weight : 1.0;
        for (std::size_t k = 0; k < d; ++k) agg[k] += c * x(u, k);
        mass += c;
      }
      for (std::size_t j = 0; j < h; ++j) {
        double acc = b[j];
        for (std::size_t k = 0; k < d; ++k) acc += x(v, k) * w1(k, j) + agg[k] / mass * w2(k, j);
        EXPECT_NEAR(y(v, j), acc, 1e-9 * std::max(1.0, std::abs(acc)));
      }
    }
  }
}

TEST(Sage, IsolatedNodeGetsZeroAggregate) {
  const EdgeSet e{3, {{0, 1, 1.0}}};
  const Tensor x = Tensor::matrix({{1, 2}, {3, 4}, {5, 6}});
  const Tensor agg = neighbor_mean(x, e);
  EXPECT_EQ(agg(0, 0), 3.0);
  EXPECT_EQ(agg(1, 1), 2.0);
  EXPECT_EQ(agg(2, 0), 0.0);
  EXPECT_EQ(agg(2, 1), 0.0);
}

TEST(Gcn, OperatorMatchesDenseNormalization) {
  SeededRng rng(6);
  const std::size_t w = 6;
  const EdgeSet e = random_edges(w, rng);
  std::vector<std::vector<double>> a(w, std::vector<double>(w, 0.0));
  for (std::size_t i = 0; i < w; ++i) a[i][i] = 1.0;
  for (const auto& ed : e.edges) a[ed.u][ed.v] = a[ed.v][ed.u] = ed.weight;
  std::vector<double> deg(w, 0.0);
  for (std::size_t i = 0; i < w; ++i)
    for (std::size_t j = 0; j < w; ++j) deg[i] += a[i][j];
  const Tensor op = gcn_operator(e);
  for (std::size_t i = 0; i < w; ++i)
    for (std::size_t j = 0; j < w; ++j) {
      const double expect = a[i][j] / std::sqrt(deg[i] * deg[j]);
      EXPECT_NEAR(op(i, j), expect, 1e-12 * std::max(1.0, expect));
      EXPECT_EQ(op(i, j), op(j, i));
    }
}

TEST(Gcn, ForwardPathsAgree) {
  SeededRng rng(7);
  const std::size_t w = 5, d = 3, h = 2;
  const EdgeSet e = random_edges(w, rng);
  num::Parameter x("x", Tensor::normal({w, d}, rng));
  const Tensor wg = Tensor::normal({d, h}, rng), b = Tensor::normal({h}, rng);
  Tape c(false), g;
  const Tensor y1 = gcn_forward(c.constant(x.value), e, c.constant(wg), c.constant(b)).value();
  const Tensor y2 = gcn_forward(g.param(x), e, g.constant(wg), g.constant(b)).value();
  for (std::size_t i = 0; i < y1.size(); ++i) EXPECT_NEAR(y1[i], y2[i], 1e-12);
}

TEST(Temporal, MatchesDirectFormula) {
  SeededRng rng(8);
  const std::size_t w = 4, m = 3, f = 2, h = 3;
  const Tensor x = Tensor::normal({w, m, f}, rng);
  std::vector<Tensor> ks, bs;
  for (int i = 0; i < 3; ++i) {
    ks.push_back(Tensor::normal({m, f, h}, rng));
    bs.push_back(Tensor::normal({h}, rng));
  }
  Tape t(false);
  TemporalKernels k{t.constant(ks[0]), t.constant(bs[0]), t.constant(ks[1]),
                    t.constant(bs[1]), t.constant(ks[2]), t.constant(bs[2])};
  const Tensor y = temporal_forward(t.constant(x), k).value();
  ASSERT_EQ(y.shape(), (num::Shape{w, h}));
  for (std::size_t v = 0; v < w; ++v)
    for (std::size_t c = 0; c < h; ++c) {
      double pqr[3];
      for (int i = 0; i < 3; ++i) {
        pqr[i] = bs[i][c];
        for (std::size_t s = 0; s < m; ++s)
          for (std::size_t j = 0; j < f; ++j) pqr[i] += x(v, s, j) * ks[i](s, j, c);
      }
      const double expect = std::max(0.0, pqr[0] / (1.0 + std::exp(-pqr[1])) + pqr[2]);
      EXPECT_NEAR(y(v, c), expect, 1e-12);
    }
  Tape t2(false);
  TemporalKernels short_k{t2.constant(Tensor({2, f, h})), t2.constant(bs[0]), t2.constant(ks[1]),
                          t2.constant(bs[1]), t2.constant(ks[2]), t2.constant(bs[2])};
  EXPECT_THROW(temporal_forward(t2.constant(x), short_k), DimensionError);
}

TEST(Fusion, ConvexCombinations) {
  Tape t(false);
  const Tensor a({2, 2}, 1.0), b({2, 2}, 3.0), c({2, 2}, 10.0);
  EXPECT_EQ(fuse(t.constant(a), t.constant(b), t.constant(Tensor::scalar(0.25))).value()[0], 2.5);
  EXPECT_EQ(fuse3(t.constant(a), t.constant(b), t.constant(c), t.constant(Tensor::scalar(0.5)),
                  t.constant(Tensor::scalar(0.25)), false)
                .value()[0],
            0.5 + 0.75 + 2.5);
  // Clipping: α = 1.5 → 1, β = −1 → 0, so the output is the spatial branch.
  EXPECT_EQ(fuse3(t.constant(a), t.constant(b), t.constant(c), t.constant(Tensor::scalar(1.5)),
                  t.constant(Tensor::scalar(-1.0)), true)
                .value()[0],
            1.0);
  EXPECT_THROW(fuse(t.constant(a), t.constant(Tensor({3, 2})), t.constant(Tensor::scalar(0.5))), DimensionError);
}

TEST(Params, LayoutIsFixedAndActiveDependsOnVariant) {
  BranchConfig c = small_cfg("sage");
  ModelParams p = init_params(c, 1);
  EXPECT_EQ(p.all().size(), 19u);
  std::vector<std::string> names;
  for (auto* q : p.active(c)) names.push_back(q->name);
  EXPECT_EQ(names, (std::vector<std::string>{"sage.W1", "sage.W2", "sage.bias", "head.A1", "head.b1", "head.A2",
                                             "head.b2", "head.A3", "head.b3"}));
  c.set_variant("gcn+sage+temp");
  EXPECT_EQ(p.active(c).size(), 19u);
  EXPECT_EQ(p.alpha(), 0.5);
  EXPECT_EQ(p.at("sage.bias").value, Tensor({4}));
  EXPECT_THROW(p.at("nope"), ConfigError);
}

TEST(Params, InitIsDeterministicAndSeedDependent) {
  const BranchConfig c = small_cfg();
  const ModelParams a = init_params(c, 5), b = init_params(c, 5), d = init_params(c, 6);
  EXPECT_EQ(a.at("sage.W1").value, b.at("sage.W1").value);
  EXPECT_NE(a.at("sage.W1").value, d.at("sage.W1").value);
  const double bound = std::sqrt(6.0 / static_cast<double>(c.spatial_width() + c.hidden));
  for (double v : a.at("sage.W1").value.data()) EXPECT_LE(std::abs(v), bound);
}

TEST(Params, CheckShapesNamesTheMismatch) {
  BranchConfig c = small_cfg();
  ModelParams p = init_params(c, 1);
  EXPECT_NO_THROW(check_shapes(p, c));
  c.hidden = 6;
  try {
    check_shapes(p, c);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("sage.W1"), std::string::npos);
  }
}

TEST(Forward, OutputShapeForEveryVariant) {
  SeededRng rng(10);
  for (const char* v : {"gcn+sage+temp", "gcn+sage+temp:clamp", "gcn+temp", "gcn+sage", "gcn", "sage", "temp",
                        "sage+temp", "sage+temp:concat"}) {
    const BranchConfig c = small_cfg(v);
    ModelParams p = init_params(c, 2);
    const ModelOutput out = predict(random_input(c, 6, rng), p, c);
    EXPECT_EQ(out.prediction.shape(), (num::Shape{6, 2})) << v;
    for (double y : out.prediction.data()) EXPECT_TRUE(std::isfinite(y));
  }
}

TEST(Forward, InactiveBranchesDoNotAffectOutput) {
  SeededRng rng(11);
  const BranchConfig c = small_cfg("sage+temp");
  ModelParams p = init_params(c, 3);
  const ModelInput in = random_input(c, 5, rng);
  const Tensor y0 = predict(in, p, c).prediction;
  for (double& v : p.at("gcn.W").value.data()) v = 100.0;
  p.at("fusion.beta").value[0] = -3.0;
  EXPECT_EQ(predict(in, p, c).prediction, y0);
}

TEST(Forward, SingleBranchIgnoresAlpha) {
  SeededRng rng(12);
  const BranchConfig c = small_cfg("temp");
  ModelParams p = init_params(c, 3);
  const ModelInput in = random_input(c, 5, rng);
  const Tensor y0 = predict(in, p, c).prediction;
  p.at("fusion.alpha").value[0] = 9.0;
  EXPECT_EQ(predict(in, p, c).prediction, y0);
}

TEST(Forward, TemporalBranchIgnoresGraph) {
  SeededRng rng(13);
  const BranchConfig c = small_cfg("temp");
  ModelParams p = init_params(c, 4);
  const Tensor s = Tensor::normal({5, c.spatial_width()}, rng), t = Tensor::normal({5, c.m, 2}, rng);
  const Tensor y1 = predict(prepare_input(s, t, random_edges(5, rng), c), p, c).prediction;
  const Tensor y2 = predict(prepare_input(s, t, random_edges(5, rng), c), p, c).prediction;
  EXPECT_EQ(y1, y2);
}

TEST(Forward, PermutationEquivariant) {
  SeededRng rng(14);
  for (const char* v : {"gcn+sage+temp", "sage+temp"}) {
    const BranchConfig c = small_cfg(v);
    ModelParams p = init_params(c, 5);
    const std::size_t w = 7;
    const EdgeSet e = random_edges(w, rng);
    const Tensor s = Tensor::normal({w, c.spatial_width()}, rng), t = Tensor::normal({w, c.m, 2}, rng);
    const auto perm = rng.permutation(w);
    const Tensor y = predict(prepare_input(s, t, e, c), p, c).prediction;
    const Tensor yp =
        predict(prepare_input(permute_rows(s, perm), permute_rows(t, perm), permute_edges(e, perm), c), p, c)
            .prediction;
    const Tensor expect = permute_rows(y, perm);
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(yp[i], expect[i], 1e-12) << v;
  }
}

TEST(Forward, RecordingAndInferenceAgree) {
  SeededRng rng(15);
  const BranchConfig c = small_cfg("gcn+sage+temp:clamp");
  ModelParams p = init_params(c, 6);
  const ModelInput in = random_input(c, 6, rng);
  Tape t;
  const Tensor y = forward(t, in, p, c).prediction.value();
  EXPECT_EQ(y, predict(in, p, c).prediction);
}

TEST(Forward, InputMismatchIsConfigError) {
  SeededRng rng(16);
  const BranchConfig c = small_cfg();
  ModelParams p = init_params(c, 6);
  ModelInput in = random_input(c, 5, rng);
  in.spatial = Tensor({5, c.spatial_width() + 1});
  EXPECT_THROW(predict(in, p, c), ConfigError);
}

TEST(Forward, RealSampleEndToEnd) {
  graph::SynthConfig sc;
  sc.count = 1;
  sc.width = 16;
  const auto recs = graph::synth_generate(sc, 3);
  BranchConfig c;
  c.hidden = 8;
  c.head1 = 8;
  c.head2 = 4;
  const auto s = graph::make_sample(recs[0], c.m, c.n, c.phys());
  ModelParams p = init_params(c, 1);
  const ModelOutput out = forward(s, p, c);
  EXPECT_EQ(out.prediction.shape(), s.target.shape());
}
