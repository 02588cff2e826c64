// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "stemit/autograd.hpp"
#include "stemit/log.hpp"
#include "stemit/metrics.hpp"
#include "stemit/model.hpp"
#include "stemit/rng.hpp"
#include "stemit/sample.hpp"

namespace stemit::train {

using model::BranchConfig;
using model::ModelParams;
using num::Parameter;

struct TrainConfig {
  std::size_t epochs = 450;
  double lr0 = 0.005;
  double lr_min = 1e-7;
  double weight_decay = 1e-5;
  /// Apply weight decay directly to θ instead of folding it into the gradient.
  bool decoupled = false;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;
  std::size_t trials = 5;

  void validate() const {
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (!(lr_min <= lr0)) throw ConfigError("train: lr_min must not exceed lr0");
    if (lr_min < 0) throw ConfigError("train: learning rates must be non-negative");
    if (weight_decay < 0) throw ConfigError("train: weight_decay must be non-negative");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (trials < 1) throw ConfigError("train: trials must be >= 1");
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && eps > 0))
      throw ConfigError("train: invalid Adam coefficients");
  }
};

/// η(t) = lr_min + ½(lr0 − lr_min)(1 + cos(π t / epochs)).
inline double cosine_lr(std::size_t t, const TrainConfig& cfg) {
  if (t > cfg.epochs) throw ContractError("cosine_lr: epoch beyond schedule");
  const double phase = std::numbers::pi * static_cast<double>(t) / static_cast<double>(cfg.epochs);
  return cfg.lr_min + 0.5 * (cfg.lr0 - cfg.lr_min) * (1.0 + std::cos(phase));
}

struct AdamState {
  std::vector<num::Tensor> m;
  std::vector<num::Tensor> v;
  std::size_t t = 0;
};

/// One bias-corrected Adam update of every parameter in `params`.
inline void adam_step(const std::vector<Parameter*>& params, AdamState& state, double lr, const TrainConfig& cfg) {
  if (state.m.empty() && state.t == 0) {
    for (const Parameter* p : params) {
      state.m.emplace_back(p->value.shape());
      state.v.emplace_back(p->value.shape());
    }
  }
  if (state.m.size() != params.size())
    throw ContractError("adam_step: parameter set changed since the first step");
  bool any_grad = false;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->gradient.shape() != state.m[i].shape() || params[i]->value.shape() != state.m[i].shape())
      throw ContractError("adam_step: gradient of '" + params[i]->name + "' does not match its moments");
    for (double g : params[i]->gradient.data()) any_grad = any_grad || g != 0.0;
  }
  if (!any_grad) log::info("adam_step: all gradients are zero");
  ++state.t;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto theta = params[i]->value.data();
    const auto grad = params[i]->gradient.data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    for (std::size_t k = 0; k < theta.size(); ++k) {
      double g = grad[k];
      if (cfg.decoupled)
        theta[k] -= lr * cfg.weight_decay * theta[k];
      else
        g += cfg.weight_decay * theta[k];
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      theta[k] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

/// Per-column standardization fitted on training inputs.
struct FeatureScaler {
  std::vector<double> spatial_mean, spatial_std;
  std::vector<double> temporal_mean, temporal_std;

  bool empty() const { return spatial_mean.empty(); }

  static FeatureScaler fit(const std::vector<const graph::GraphSample*>& samples) {
    if (samples.empty()) throw ContractError("FeatureScaler: no samples");
    FeatureScaler s;
    const std::size_t d = samples[0]->spatial_x.dim(1), f = samples[0]->temporal_x.dim(2);
    auto finish = [](std::vector<double>& mean, std::vector<double>& sd, const std::vector<double>& sq, double n) {
      for (std::size_t c = 0; c < mean.size(); ++c) {
        mean[c] /= n;
        const double var = std::max(0.0, sq[c] / n - mean[c] * mean[c]);
        sd[c] = var > 1e-24 ? std::sqrt(var) : 1.0;
      }
    };
    s.spatial_mean.assign(d, 0.0);
    s.spatial_std.assign(d, 0.0);
    std::vector<double> sq(d, 0.0);
    double rows = 0.0;
    for (const auto* smp : samples) {
      const auto& x = smp->spatial_x;
      for (std::size_t v = 0; v < x.dim(0); ++v)
        for (std::size_t c = 0; c < d; ++c) {
          s.spatial_mean[c] += x(v, c);
          sq[c] += x(v, c) * x(v, c);
        }
      rows += static_cast<double>(x.dim(0));
    }
    finish(s.spatial_mean, s.spatial_std, sq, rows);

    s.temporal_mean.assign(f, 0.0);
    s.temporal_std.assign(f, 0.0);
    std::vector<double> tsq(f, 0.0);
    double cells = 0.0;
    for (const auto* smp : samples) {
      const auto& x = smp->temporal_x;
      for (std::size_t v = 0; v < x.dim(0); ++v)
        for (std::size_t t = 0; t < x.dim(1); ++t)
          for (std::size_t c = 0; c < f; ++c) {
            s.temporal_mean[c] += x(v, t, c);
            tsq[c] += x(v, t, c) * x(v, t, c);
          }
      cells += static_cast<double>(x.dim(0) * x.dim(1));
    }
    finish(s.temporal_mean, s.temporal_std, tsq, cells);
    return s;
  }

  num::Tensor scale_spatial(const num::Tensor& x) const {
    if (empty()) return x;
    if (x.dim(1) != spatial_mean.size()) throw DimensionError("FeatureScaler: spatial width mismatch");
    num::Tensor out = x;
    for (std::size_t v = 0; v < x.dim(0); ++v)
      for (std::size_t c = 0; c < x.dim(1); ++c) out(v, c) = (x(v, c) - spatial_mean[c]) / spatial_std[c];
    return out;
  }

  num::Tensor scale_temporal(const num::Tensor& x) const {
    if (empty()) return x;
    if (x.dim(2) != temporal_mean.size()) throw DimensionError("FeatureScaler: temporal width mismatch");
    num::Tensor out = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const std::size_t c = i % x.dim(2);
      out[i] = (x[i] - temporal_mean[c]) / temporal_std[c];
    }
    return out;
  }
};

/// Parameters plus everything needed to run them on raw samples.
struct TrainedModel {
  BranchConfig cfg;
  ModelParams params;
  FeatureScaler scaler;

  model::ModelInput prepare(const graph::GraphSample& s) const {
    return model::prepare_input(scaler.scale_spatial(s.spatial_x), scaler.scale_temporal(s.temporal_x), s.edges, cfg);
  }

  num::Tensor predict(const model::ModelInput& in) {
    return model::predict(in, params, cfg).prediction;
  }

  num::Tensor predict(const graph::GraphSample& s) { return predict(prepare(s)); }
};

struct HistoryRow {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
};

struct TrainResult {
  TrainedModel best;
  std::vector<HistoryRow> history;
  std::size_t best_epoch = 0;
  double best_val_rmse = 0.0;
  double final_alpha = 0.0;
  double final_beta = 0.0;
  bool alpha_positive = true;
  double seconds = 0.0;
};

namespace detail {

struct Prepared {
  model::ModelInput input;
  num::Tensor target;
};

inline double mean_loss(std::vector<Prepared>& set, TrainedModel& m) {
  double s = 0.0;
  for (auto& p : set) s += mse_loss(m.predict(p.input), p.target);
  return s / static_cast<double>(set.size());
}

}  // namespace detail

/// Trains one model on `train_idx`, selecting the epoch with the lowest
/// validation RMSE. Sample order is reshuffled every epoch from a stream
/// derived from cfg.seed; parameters are initialized from another stream.
inline TrainResult train(const std::vector<graph::GraphSample>& samples, const std::vector<std::size_t>& train_idx,
                         const std::vector<std::size_t>& val_idx, const TrainConfig& cfg,
                         const BranchConfig& model_cfg) {
  cfg.validate();
  model_cfg.validate();
  if (train_idx.empty()) throw ConfigError("train: empty training split");
  if (val_idx.empty()) throw ConfigError("train: empty validation split");
  const auto t_start = std::chrono::steady_clock::now();

  std::vector<const graph::GraphSample*> train_ptrs;
  for (std::size_t i : train_idx) train_ptrs.push_back(&samples.at(i));

  TrainedModel current{model_cfg, model::init_params(model_cfg, derive_seed(cfg.seed, 1)),
                       FeatureScaler::fit(train_ptrs)};
  auto prepare = [&](const std::vector<std::size_t>& idx) {
    std::vector<detail::Prepared> out;
    for (std::size_t i : idx) out.push_back({current.prepare(samples.at(i)), samples[i].target});
    return out;
  };
  std::vector<detail::Prepared> train_set = prepare(train_idx);
  std::vector<detail::Prepared> val_set = prepare(val_idx);

  std::vector<Parameter*> active = current.params.active(model_cfg);
  AdamState adam;
  SeededRng order_rng(derive_seed(cfg.seed, 2));
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult result;
  result.best = current;
  result.best_val_rmse = std::numeric_limits<double>::infinity();
  const double inv_batch = 1.0 / static_cast<double>(cfg.batch_size);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cosine_lr(epoch, cfg);
    order_rng.shuffle(std::span<std::size_t>(order));
    double train_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      current.params.zero_grads();
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      for (std::size_t b = start; b < stop; ++b) {
        detail::Prepared& p = train_set[order[b]];
        num::Tape tape;
        model::ForwardVars f = model::forward(tape, p.input, current.params, model_cfg);
        num::Var loss = num::mse(f.prediction, tape.constant(p.target));
        train_loss += loss.value()[0];
        tape.backward(num::affine(loss, stop - start == cfg.batch_size ? inv_batch : 1.0 / double(stop - start), 0.0));
      }
      adam_step(active, adam, lr, cfg);
    }
    train_loss /= static_cast<double>(order.size());
    const double val_loss = detail::mean_loss(val_set, current);
    result.history.push_back({epoch + 1, lr, train_loss, val_loss, current.params.alpha(), current.params.beta()});
    // RMSE is monotone in the pooled MSE; every sample has the same W·n.
    const double val_rmse = std::sqrt(val_loss);
    if (val_rmse < result.best_val_rmse) {
      result.best_val_rmse = val_rmse;
      result.best_epoch = epoch + 1;
      result.best.params = current.params;
    }
  }
  result.final_alpha = current.params.alpha();
  result.final_beta = current.params.beta();
  if (model_cfg.uses_alpha()) {
    result.alpha_positive = result.final_alpha > 0.0;
    log::info("final alpha = " + std::to_string(result.final_alpha) +
              (result.alpha_positive ? " (positive)" : " (not positive)"));
  }
  if (model_cfg.uses_beta()) log::info("final beta = " + std::to_string(result.final_beta));
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

inline std::vector<num::Tensor> predict_all(TrainedModel& m, const std::vector<graph::GraphSample>& samples,
                                            const std::vector<std::size_t>& idx) {
  std::vector<num::Tensor> out;
  for (std::size_t i : idx) out.push_back(m.predict(samples.at(i)));
  return out;
}

inline std::vector<num::Tensor> targets_of(const std::vector<graph::GraphSample>& samples,
                                           const std::vector<std::size_t>& idx) {
  std::vector<num::Tensor> out;
  for (std::size_t i : idx) out.push_back(samples.at(i).target);
  return out;
}

/// Pooled RMSE and MAE of the model over the given samples.
inline ErrorMetrics evaluate(TrainedModel& m, const std::vector<graph::GraphSample>& samples,
                             const std::vector<std::size_t>& idx) {
  if (idx.empty()) throw ContractError("evaluate: empty sample set");
  return rmse_mae(predict_all(m, samples, idx), targets_of(samples, idx));
}

inline std::vector<double> relative_mae_per_layer(TrainedModel& m, const std::vector<graph::GraphSample>& samples,
                                                  const std::vector<std::size_t>& idx) {
  if (idx.empty()) throw ContractError("relative_mae_per_layer: empty sample set");
  return relative_mae_per_layer(predict_all(m, samples, idx), targets_of(samples, idx));
}

/// Predicts every node of layer j as the training mean of layer j.
struct LayerMeanBaseline {
  std::vector<double> means;

  static LayerMeanBaseline fit(const std::vector<graph::GraphSample>& samples, const std::vector<std::size_t>& idx) {
    if (idx.empty()) throw ContractError("LayerMeanBaseline: empty training set");
    const std::size_t n = samples.at(idx[0]).target.dim(1);
    LayerMeanBaseline b{std::vector<double>(n, 0.0)};
    double rows = 0.0;
    for (std::size_t i : idx) {
      const auto& y = samples.at(i).target;
      for (std::size_t v = 0; v < y.dim(0); ++v)
        for (std::size_t j = 0; j < n; ++j) b.means[j] += y(v, j);
      rows += static_cast<double>(y.dim(0));
    }
    for (double& m : b.means) m /= rows;
    return b;
  }

  num::Tensor predict(const graph::GraphSample& s) const {
    num::Tensor p(s.target.shape());
    for (std::size_t v = 0; v < p.dim(0); ++v)
      for (std::size_t j = 0; j < p.dim(1); ++j) p(v, j) = means[j];
    return p;
  }

  ErrorMetrics evaluate(const std::vector<graph::GraphSample>& samples, const std::vector<std::size_t>& idx) const {
    std::vector<num::Tensor> preds;
    for (std::size_t i : idx) preds.push_back(predict(samples.at(i)));
    return rmse_mae(preds, targets_of(samples, idx));
  }
};

}  // namespace stemit::train
