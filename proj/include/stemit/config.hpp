// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include <json.hpp>

#include "stemit/error.hpp"
#include "stemit/geo.hpp"
#include "stemit/model.hpp"
#include "stemit/splits.hpp"
#include "stemit/synth.hpp"
#include "stemit/trainer.hpp"

namespace stemit::cfg {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

struct DataConfig {
  graph::SynthConfig synth;
  std::size_t m = 5;
  std::size_t n = 15;
  std::uint64_t seed = 1;
  std::uint64_t split_seed = 7;
  graph::SplitFractions fractions;
  graph::EdgeOptions edges;
};

struct SyncConfig {
  std::string grid;  // empty: no synchronization step
  unsigned boundary_month = 9;
  std::vector<std::string> fields;  // empty: every field in the grid
};

struct ExperimentConfig {
  DataConfig data;
  SyncConfig sync;
  model::BranchConfig model;
  train::TrainConfig train;
  /// false zeroes the `seconds` column so reports are byte-reproducible.
  bool record_time = true;
  std::string output_dir = "runs";

  void validate() const {
    data.synth.validate();
    if (data.m < 1 || data.n < 1) throw ConfigError("data: m and n must be >= 1");
    if (data.synth.width < 2) throw ConfigError("data: width must be >= 2");
    if (data.synth.layers < data.m + data.n)
      throw ConfigError("data: layers (" + std::to_string(data.synth.layers) + ") must be >= m + n (" +
                        std::to_string(data.m + data.n) + ")");
    if (sync.boundary_month < 1 || sync.boundary_month > 12) throw ConfigError("sync: boundary_month must be 1..12");
    for (const auto& f : sync.fields)
      if (!graph::is_phys_field(f)) throw ConfigError("sync: unknown field '" + f + "'");
    model.validate();
    if (model.m != data.m || model.n != data.n) throw ConfigError("model m/n must match data m/n");
    train.validate();
  }
};

namespace detail {

inline void check_keys(const json& j, const std::string& section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError("config: '" + section + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("config: unknown key '" + (section.empty() ? key : section + "." + key) + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& section) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: '" + section + "." + key + "' has the wrong type");
  }
}

}  // namespace detail

inline ojson to_json(const model::BranchConfig& c) {
  ojson j;
  j["variant"] = c.variant();
  j["hidden"] = c.hidden;
  j["head1"] = c.head1;
  j["head2"] = c.head2;
  j["use_phys"] = c.use_phys;
  j["features"] = c.features;
  j["weighted_mean"] = c.weighted_mean;
  j["alpha_init"] = c.alpha_init;
  j["beta_init"] = c.beta_init;
  j["m"] = c.m;
  j["n"] = c.n;
  return j;
}

/// `m` and `n` are accepted here only inside checkpoints; experiment configs
/// take them from the data section.
inline model::BranchConfig branch_from_json(const json& j, bool allow_mn) {
  const std::string s = "model";
  if (allow_mn)
    detail::check_keys(j, s, {"variant", "hidden", "head1", "head2", "use_phys", "features", "weighted_mean",
                              "alpha_init", "beta_init", "m", "n"});
  else
    detail::check_keys(j, s, {"variant", "hidden", "head1", "head2", "use_phys", "features", "weighted_mean",
                              "alpha_init", "beta_init"});
  model::BranchConfig c;
  std::string variant = c.variant();
  detail::read(j, "variant", variant, s);
  c.set_variant(variant);
  detail::read(j, "hidden", c.hidden, s);
  detail::read(j, "head1", c.head1, s);
  detail::read(j, "head2", c.head2, s);
  detail::read(j, "use_phys", c.use_phys, s);
  detail::read(j, "features", c.features, s);
  detail::read(j, "weighted_mean", c.weighted_mean, s);
  detail::read(j, "alpha_init", c.alpha_init, s);
  detail::read(j, "beta_init", c.beta_init, s);
  if (allow_mn) {
    detail::read(j, "m", c.m, s);
    detail::read(j, "n", c.n, s);
  }
  return c;
}

inline ojson to_json(const train::TrainConfig& c) {
  ojson j;
  j["epochs"] = c.epochs;
  j["lr0"] = c.lr0;
  j["lr_min"] = c.lr_min;
  j["weight_decay"] = c.weight_decay;
  j["decoupled"] = c.decoupled;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["eps"] = c.eps;
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  j["trials"] = c.trials;
  return j;
}

inline train::TrainConfig train_from_json(const json& j) {
  const std::string s = "train";
  detail::check_keys(j, s, {"epochs", "lr0", "lr_min", "weight_decay", "decoupled", "beta1", "beta2", "eps",
                            "batch_size", "seed", "trials", "record_time"});
  train::TrainConfig c;
  detail::read(j, "epochs", c.epochs, s);
  detail::read(j, "lr0", c.lr0, s);
  detail::read(j, "lr_min", c.lr_min, s);
  detail::read(j, "weight_decay", c.weight_decay, s);
  detail::read(j, "decoupled", c.decoupled, s);
  detail::read(j, "beta1", c.beta1, s);
  detail::read(j, "beta2", c.beta2, s);
  detail::read(j, "eps", c.eps, s);
  detail::read(j, "batch_size", c.batch_size, s);
  detail::read(j, "seed", c.seed, s);
  detail::read(j, "trials", c.trials, s);
  return c;
}

inline DataConfig data_from_json(const json& j) {
  const std::string s = "data";
  detail::check_keys(j, s, {"count", "width", "layers", "m", "n", "coupling", "noise", "length_scale", "amplitude",
                            "shallow_coupling", "first_year", "incomplete_fraction", "id_prefix", "seed",
                            "split_seed", "fractions", "edge_weight_formula", "earth_radius_km"});
  DataConfig d;
  auto& g = d.synth;
  detail::read(j, "count", g.count, s);
  detail::read(j, "width", g.width, s);
  detail::read(j, "layers", g.layers, s);
  detail::read(j, "coupling", g.coupling, s);
  detail::read(j, "noise", g.noise, s);
  detail::read(j, "length_scale", g.length_scale, s);
  detail::read(j, "amplitude", g.amplitude, s);
  detail::read(j, "shallow_coupling", g.shallow_coupling, s);
  detail::read(j, "first_year", g.first_year, s);
  detail::read(j, "incomplete_fraction", g.incomplete_fraction, s);
  detail::read(j, "id_prefix", g.id_prefix, s);
  detail::read(j, "m", d.m, s);
  detail::read(j, "n", d.n, s);
  detail::read(j, "seed", d.seed, s);
  detail::read(j, "split_seed", d.split_seed, s);
  if (j.contains("fractions")) {
    std::vector<double> f;
    detail::read(j, "fractions", f, s);
    if (f.size() != 3) throw ConfigError("config: 'data.fractions' must hold [train, val, test]");
    d.fractions = {f[0], f[1], f[2]};
  }
  std::string formula = "standard";
  detail::read(j, "edge_weight_formula", formula, s);
  if (formula == "standard")
    d.edges.formula = graph::EdgeFormula::standard;
  else if (formula == "as_printed")
    d.edges.formula = graph::EdgeFormula::as_printed;
  else
    throw ConfigError("config: 'data.edge_weight_formula' must be \"standard\" or \"as_printed\"");
  detail::read(j, "earth_radius_km", d.edges.earth_radius_km, s);
  if (!(d.edges.earth_radius_km >= 0.0)) throw ConfigError("config: 'data.earth_radius_km' must be >= 0");
  return d;
}

inline ojson to_json(const DataConfig& d) {
  ojson j;
  const auto& g = d.synth;
  j["count"] = g.count;
  j["width"] = g.width;
  j["layers"] = g.layers;
  j["m"] = d.m;
  j["n"] = d.n;
  j["coupling"] = g.coupling;
  j["noise"] = g.noise;
  j["length_scale"] = g.length_scale;
  j["amplitude"] = g.amplitude;
  j["shallow_coupling"] = g.shallow_coupling;
  j["first_year"] = g.first_year;
  j["incomplete_fraction"] = g.incomplete_fraction;
  j["id_prefix"] = g.id_prefix;
  j["seed"] = d.seed;
  j["split_seed"] = d.split_seed;
  j["fractions"] = {d.fractions.train, d.fractions.val, d.fractions.test};
  j["edge_weight_formula"] = d.edges.formula == graph::EdgeFormula::standard ? "standard" : "as_printed";
  j["earth_radius_km"] = d.edges.earth_radius_km;
  return j;
}

inline ExperimentConfig from_json(const json& j, const std::string& base_dir = ".") {
  detail::check_keys(j, "", {"data", "sync", "model", "train", "output_dir"});
  ExperimentConfig c;
  if (j.contains("data")) c.data = data_from_json(j.at("data"));
  if (j.contains("sync")) {
    const auto& s = j.at("sync");
    detail::check_keys(s, "sync", {"grid", "boundary_month", "fields"});
    detail::read(s, "grid", c.sync.grid, "sync");
    detail::read(s, "boundary_month", c.sync.boundary_month, "sync");
    detail::read(s, "fields", c.sync.fields, "sync");
  }
  if (j.contains("model")) c.model = branch_from_json(j.at("model"), false);
  if (j.contains("train")) {
    c.train = train_from_json(j.at("train"));
    detail::read(j.at("train"), "record_time", c.record_time, "train");
  }
  if (j.contains("output_dir")) detail::read(j, "output_dir", c.output_dir, "");
  c.model.m = c.data.m;
  c.model.n = c.data.n;
  if (!c.sync.grid.empty()) {
    std::filesystem::path p(c.sync.grid);
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    if (!std::filesystem::exists(p)) throw IoError("config: sync.grid '" + p.string() + "' does not exist");
    c.sync.grid = p.string();
  }
  c.validate();
  return c;
}

inline ExperimentConfig load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return from_json(j, std::filesystem::path(path).parent_path().string());
}

inline ojson to_json(const ExperimentConfig& c) {
  ojson j;
  j["data"] = to_json(c.data);
  ojson s;
  s["grid"] = c.sync.grid;
  s["boundary_month"] = c.sync.boundary_month;
  s["fields"] = c.sync.fields;
  j["sync"] = s;
  ojson m = to_json(c.model);
  m.erase("m");
  m.erase("n");
  j["model"] = m;
  j["train"] = to_json(c.train);
  j["train"]["record_time"] = c.record_time;
  j["output_dir"] = c.output_dir;
  return j;
}

}  // namespace stemit::cfg
