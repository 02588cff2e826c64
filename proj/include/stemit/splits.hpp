// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stemit/error.hpp"
#include "stemit/rng.hpp"

namespace stemit::graph {

struct SplitFractions {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

struct Trial {
  int k = 0;  // 1-based
  std::vector<std::size_t> train, val, test;
};

struct SplitSpec {
  std::uint64_t seed = 0;
  SplitFractions fractions;
  std::vector<Trial> trials;
};

/// K independent train/val/test partitions of 0..N−1. Trial k draws its
/// permutation from derive_seed(seed, k). Sizes are ⌊f_train·N⌋, ⌊f_val·N⌋
/// and the remainder.
inline SplitSpec make_splits(std::size_t n, std::size_t trials, SplitFractions fr, std::uint64_t seed) {
  if (n < 5) throw ContractError("make_splits: need N >= 5, got " + std::to_string(n));
  if (fr.train < 0 || fr.val < 0 || fr.test < 0 || std::abs(fr.train + fr.val + fr.test - 1.0) > 1e-12)
    throw ConfigError("make_splits: fractions must be non-negative and sum to 1");
  // A small epsilon keeps 0.6·1660 from flooring to 995 under rounding.
  const auto n_train = static_cast<std::size_t>(std::floor(fr.train * static_cast<double>(n) + 1e-9));
  const auto n_val = static_cast<std::size_t>(std::floor(fr.val * static_cast<double>(n) + 1e-9));
  SplitSpec spec{seed, fr, {}};
  for (std::size_t k = 1; k <= trials; ++k) {
    SeededRng rng(derive_seed(seed, k));
    const auto perm = rng.permutation(n);
    Trial t;
    t.k = static_cast<int>(k);
    t.train.assign(perm.begin(), perm.begin() + n_train);
    t.val.assign(perm.begin() + n_train, perm.begin() + n_train + n_val);
    t.test.assign(perm.begin() + n_train + n_val, perm.end());
    spec.trials.push_back(std::move(t));
  }
  return spec;
}

inline nlohmann::ordered_json to_json(const SplitSpec& s) {
  nlohmann::ordered_json j;
  j["seed"] = s.seed;
  j["trials"] = nlohmann::ordered_json::array();
  for (const auto& t : s.trials) {
    nlohmann::ordered_json tj;
    tj["k"] = t.k;
    tj["train"] = t.train;
    tj["val"] = t.val;
    tj["test"] = t.test;
    j["trials"].push_back(std::move(tj));
  }
  return j;
}

inline void write_manifest(const SplitSpec& s, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write split manifest '" + path + "'");
  out << to_json(s).dump() << '\n';
}

inline SplitSpec read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read split manifest '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("split manifest '" + path + "': " + e.what());
  }
  SplitSpec s;
  try {
    s.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& tj : j.at("trials")) {
      Trial t;
      t.k = tj.at("k").get<int>();
      t.train = tj.at("train").get<std::vector<std::size_t>>();
      t.val = tj.at("val").get<std::vector<std::size_t>>();
      t.test = tj.at("test").get<std::vector<std::size_t>>();
      s.trials.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("split manifest '" + path + "': " + e.what());
  }
  return s;
}

}  // namespace stemit::graph
