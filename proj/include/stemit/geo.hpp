// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "stemit/error.hpp"
#include "stemit/log.hpp"

namespace stemit::graph {

struct LatLon {
  double lat = 0.0;  // degrees
  double lon = 0.0;  // degrees
};

enum class EdgeFormula {
  standard,    // 2·asin(√hav)
  as_printed,  // 2·asin(hav), argument clamped to [0, 1]
};

struct EdgeOptions {
  EdgeFormula formula = EdgeFormula::standard;
  /// Zero means distances on the unit sphere (radians).
  double earth_radius_km = 0.0;
};

/// Cap applied when two nodes coincide.
inline constexpr double kMaxEdgeWeight = 1e12;

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

inline double hav(double theta) {
  const double s = std::sin(theta / 2.0);
  return s * s;
}

/// Central angle between two points, radians.
inline double central_angle(LatLon u, LatLon v, EdgeFormula formula = EdgeFormula::standard) {
  const double pu = deg2rad(u.lat), pv = deg2rad(v.lat);
  const double h = hav(pv - pu) + std::cos(pu) * std::cos(pv) * hav(deg2rad(v.lon - u.lon));
  if (formula == EdgeFormula::as_printed) return 2.0 * std::asin(std::clamp(h, 0.0, 1.0));
  return 2.0 * std::asin(std::min(1.0, std::sqrt(h)));
}

/// Inverse great-circle distance between two nodes.
inline double haversine_weight(LatLon u, LatLon v, const EdgeOptions& opt = {}) {
  double d = central_angle(u, v, opt.formula);
  if (d < 1e-12) {
    log::warn("haversine_weight: coincident coordinates (" + std::to_string(u.lat) + ", " +
              std::to_string(u.lon) + "); weight capped at 1e12");
    return kMaxEdgeWeight;
  }
  if (opt.earth_radius_km > 0.0) d *= opt.earth_radius_km;
  return std::min(1.0 / d, kMaxEdgeWeight);
}

struct Edge {
  std::size_t u = 0;
  std::size_t v = 0;
  double weight = 0.0;
};

/// Undirected, fully connected edge list with u < v.
struct EdgeSet {
  std::size_t nodes = 0;
  std::vector<Edge> edges;

  std::size_t size() const { return edges.size(); }
};

inline EdgeSet build_edges(const std::vector<double>& lat, const std::vector<double>& lon,
                           const EdgeOptions& opt = {}) {
  if (lat.size() != lon.size()) throw ContractError("build_edges: lat/lon length mismatch");
  const std::size_t w = lat.size();
  if (w < 2) throw ContractError("build_edges: need at least 2 nodes, got " + std::to_string(w));
  EdgeSet es;
  es.nodes = w;
  es.edges.reserve(w * (w - 1) / 2);
  for (std::size_t u = 0; u < w; ++u)
    for (std::size_t v = u + 1; v < w; ++v)
      es.edges.push_back({u, v, haversine_weight({lat[u], lon[u]}, {lat[v], lon[v]}, opt)});
  return es;
}

}  // namespace stemit::graph
