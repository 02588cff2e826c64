// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "stemit/error.hpp"
#include "stemit/log.hpp"
#include "stemit/tensor.hpp"

namespace stemit::train {

using num::Tensor;

struct ErrorMetrics {
  double rmse = 0.0;
  double mae = 0.0;
};

/// Mean of squared residuals over all W·n entries.
inline double mse_loss(const Tensor& pred, const Tensor& target) {
  num::require_same_shape(pred, target, "mse_loss");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - target[i]) * (pred[i] - target[i]);
  return s / static_cast<double>(pred.size());
}

/// RMSE and MAE pooled over every entry of every sample.
inline ErrorMetrics rmse_mae(const std::vector<Tensor>& preds, const std::vector<Tensor>& targets) {
  if (preds.empty()) throw ContractError("evaluate: empty sample set");
  if (preds.size() != targets.size()) throw DimensionError("evaluate: prediction/target count mismatch");
  double sq = 0.0, ab = 0.0;
  std::size_t count = 0;
  for (std::size_t s = 0; s < preds.size(); ++s) {
    num::require_same_shape(preds[s], targets[s], "evaluate");
    for (std::size_t i = 0; i < preds[s].size(); ++i) {
      const double r = preds[s][i] - targets[s][i];
      sq += r * r;
      ab += std::abs(r);
    }
    count += preds[s].size();
  }
  return {std::sqrt(sq / static_cast<double>(count)), ab / static_cast<double>(count)};
}

inline constexpr double kRelativeGuard = 1e-6;

/// δ_j = mean over samples and nodes of |ŷ − y| / max(y, 1e−6), one value
/// per predicted layer (column).
inline std::vector<double> relative_mae_per_layer(const std::vector<Tensor>& preds, const std::vector<Tensor>& targets) {
  if (preds.empty()) throw ContractError("relative_mae_per_layer: empty sample set");
  if (preds.size() != targets.size()) throw DimensionError("relative_mae_per_layer: count mismatch");
  const std::size_t n = targets[0].dim(1);
  std::vector<double> acc(n, 0.0);
  std::size_t rows = 0, guarded = 0;
  for (std::size_t s = 0; s < preds.size(); ++s) {
    num::require_same_shape(preds[s], targets[s], "relative_mae_per_layer");
    if (targets[s].dim(1) != n) throw DimensionError("relative_mae_per_layer: layer count differs between samples");
    for (std::size_t v = 0; v < targets[s].dim(0); ++v) {
      for (std::size_t j = 0; j < n; ++j) {
        const double y = targets[s](v, j);
        if (y < kRelativeGuard) ++guarded;
        acc[j] += std::abs(preds[s](v, j) - y) / std::max(y, kRelativeGuard);
      }
    }
    rows += targets[s].dim(0);
  }
  if (guarded) log::warn("relative_mae_per_layer: " + std::to_string(guarded) + " targets below 1e-6 used the guard");
  for (double& a : acc) a /= static_cast<double>(rows);
  return acc;
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

/// Mean and population standard deviation (divisor K).
inline MeanStd aggregate_trials(const std::vector<double>& values) {
  if (values.empty()) throw ContractError("aggregate_trials: need K >= 1");
  const double k = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= k;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / k)};
}

/// Per-layer aggregation of δ_j across trials.
inline std::vector<MeanStd> aggregate_layers(const std::vector<std::vector<double>>& per_trial) {
  if (per_trial.empty()) throw ContractError("aggregate_layers: need K >= 1");
  const std::size_t n = per_trial[0].size();
  std::vector<MeanStd> out;
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> col;
    for (const auto& t : per_trial) col.push_back(t.at(j));
    out.push_back(aggregate_trials(col));
  }
  return out;
}

}  // namespace stemit::train
