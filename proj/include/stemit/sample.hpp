// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "stemit/geo.hpp"
#include "stemit/record.hpp"
#include "stemit/tensor.hpp"

namespace stemit::graph {

using num::Tensor;

struct SampleMeta {
  std::string record_id;
  std::size_t m = 0;
  std::size_t n = 0;
  std::size_t features = 0;  // F, thickness included
};

/// Model-ready inputs and target for one record.
struct GraphSample {
  Tensor spatial_x;   // W × (F·m + 2)
  Tensor temporal_x;  // W × m × F
  EdgeSet edges;
  Tensor target;  // W × n
  SampleMeta meta;
};

namespace detail {

inline const LayerGrid& require_field(const LayerSequenceRecord& rec, const std::string& name) {
  auto it = rec.phys.find(name);
  if (it == rec.phys.end())
    throw DataError("record '" + rec.id + "': missing phys field '" + name + "'");
  return it->second;
}

/// Per-year dynamic feature grids: thickness first, then `phys` in order.
inline std::vector<const LayerGrid*> dynamic_grids(const LayerSequenceRecord& rec, std::size_t layers,
                                                   const std::vector<std::string>& phys) {
  if (complete_layers(rec) < layers) {
    throw DataError("record '" + rec.id + "': needs " + std::to_string(layers) +
                    " complete layers, has " + std::to_string(complete_layers(rec)));
  }
  std::vector<const LayerGrid*> grids{&rec.thickness};
  for (const auto& name : phys) {
    const LayerGrid& g = require_field(rec, name);
    if (g.size() < layers)
      throw DataError("record '" + rec.id + "': phys." + name + " has too few layers");
    grids.push_back(&g);
  }
  return grids;
}

}  // namespace detail

/// [lat, lon, block(year 1), …, block(year m)] with block = [thickness, phys…].
inline Tensor compress_spatial(const LayerSequenceRecord& rec, std::size_t m,
                               const std::vector<std::string>& phys) {
  const auto grids = detail::dynamic_grids(rec, m, phys);
  const std::size_t f = grids.size(), w = rec.width();
  Tensor x({w, f * m + 2});
  for (std::size_t v = 0; v < w; ++v) {
    x(v, 0) = rec.lat[v];
    x(v, 1) = rec.lon[v];
    for (std::size_t year = 0; year < m; ++year)
      for (std::size_t c = 0; c < f; ++c) x(v, 2 + year * f + c) = (*grids[c])[year][v];
  }
  return x;
}

/// W × m × F block without coordinates.
inline Tensor extract_temporal(const LayerSequenceRecord& rec, std::size_t m,
                               const std::vector<std::string>& phys) {
  const auto grids = detail::dynamic_grids(rec, m, phys);
  const std::size_t f = grids.size(), w = rec.width();
  Tensor x({w, m, f});
  for (std::size_t v = 0; v < w; ++v)
    for (std::size_t year = 0; year < m; ++year)
      for (std::size_t c = 0; c < f; ++c) x(v, year, c) = (*grids[c])[year][v];
  return x;
}

/// Thickness of layers m+1 … m+n as W × n.
inline Tensor make_target(const LayerSequenceRecord& rec, std::size_t m, std::size_t n) {
  if (complete_layers(rec) < m + n) {
    throw DataError("record '" + rec.id + "': target needs " + std::to_string(m + n) +
                    " complete layers, has " + std::to_string(complete_layers(rec)));
  }
  const std::size_t w = rec.width();
  Tensor y({w, n});
  for (std::size_t v = 0; v < w; ++v)
    for (std::size_t j = 0; j < n; ++j) y(v, j) = rec.thickness[m + j][v];
  return y;
}

/// Extracts one m×F feature block (W × F) from a spatial matrix.
inline Tensor spatial_block(const Tensor& spatial_x, std::size_t year, std::size_t f) {
  const std::size_t w = spatial_x.dim(0);
  Tensor b({w, f});
  for (std::size_t v = 0; v < w; ++v)
    for (std::size_t c = 0; c < f; ++c) b(v, c) = spatial_x(v, 2 + year * f + c);
  return b;
}

inline GraphSample make_sample(const LayerSequenceRecord& rec, std::size_t m, std::size_t n,
                               const std::vector<std::string>& phys, const EdgeOptions& edge_opt = {}) {
  GraphSample s;
  s.spatial_x = compress_spatial(rec, m, phys);
  s.temporal_x = extract_temporal(rec, m, phys);
  s.target = make_target(rec, m, n);
  s.edges = build_edges(rec.lat, rec.lon, edge_opt);
  s.meta = {rec.id, m, n, phys.size() + 1};
  return s;
}

}  // namespace stemit::graph
