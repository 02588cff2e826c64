// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "stemit/config.hpp"
#include "stemit/error.hpp"
#include "stemit/trainer.hpp"

namespace stemit::io {

using ojson = nlohmann::ordered_json;

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  train::TrainedModel model;
  train::TrainConfig train;
  int trial = 0;
  std::size_t best_epoch = 0;
  double best_val_rmse = 0.0;
};

inline ojson to_json(const Checkpoint& c) {
  ojson j;
  j["version"] = kCheckpointVersion;
  j["trial"] = c.trial;
  j["best_epoch"] = c.best_epoch;
  j["best_val_rmse"] = c.best_val_rmse;
  j["model"] = cfg::to_json(c.model.cfg);
  j["train"] = cfg::to_json(c.train);
  const auto& s = c.model.scaler;
  j["scaler"] = {{"spatial_mean", s.spatial_mean},
                 {"spatial_std", s.spatial_std},
                 {"temporal_mean", s.temporal_mean},
                 {"temporal_std", s.temporal_std}};
  j["params"] = ojson::array();
  for (const auto& p : c.model.params.all()) {
    ojson e;
    e["name"] = p.name;
    e["shape"] = p.value.shape();
    e["values"] = p.value.values();
    j["params"].push_back(std::move(e));
  }
  return j;
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  Checkpoint c;
  try {
    if (j.at("version").get<int>() != kCheckpointVersion)
      throw DataError("checkpoint: unsupported version " + j.at("version").dump());
    c.trial = j.at("trial").get<int>();
    c.best_epoch = j.at("best_epoch").get<std::size_t>();
    c.best_val_rmse = j.at("best_val_rmse").get<double>();
    c.model.cfg = cfg::branch_from_json(j.at("model"), true);
    c.train = cfg::train_from_json(j.at("train"));
    const auto& s = j.at("scaler");
    c.model.scaler.spatial_mean = s.at("spatial_mean").get<std::vector<double>>();
    c.model.scaler.spatial_std = s.at("spatial_std").get<std::vector<double>>();
    c.model.scaler.temporal_mean = s.at("temporal_mean").get<std::vector<double>>();
    c.model.scaler.temporal_std = s.at("temporal_std").get<std::vector<double>>();
    for (const auto& e : j.at("params")) {
      num::Tensor t(e.at("shape").get<num::Shape>(), e.at("values").get<std::vector<double>>());
      c.model.params.add(e.at("name").get<std::string>(), std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  c.model.cfg.validate();
  model::check_shapes(c.model.params, c.model.cfg);
  return c;
}

inline void write_checkpoint(const Checkpoint& c, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");
  out << to_json(c).dump(1) << '\n';
}

inline Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("checkpoint '" + path + "': " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace stemit::io
