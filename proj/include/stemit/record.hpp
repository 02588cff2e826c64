// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "stemit/error.hpp"

namespace stemit::graph {

/// Physical fields a record may carry, in canonical order.
inline constexpr std::array<std::string_view, 5> kPhysFields = {"smb", "refreeze", "melt", "temp",
                                                             "snowpack"};

inline bool is_phys_field(std::string_view name) {
  return std::find(kPhysFields.begin(), kPhysFields.end(), name) != kPhysFields.end();
}

/// Marker for a thickness value that was not traced at a node.
inline constexpr double kAbsent = std::numeric_limits<double>::quiet_NaN();

inline bool is_absent(double v) { return std::isnan(v); }

using LayerGrid = std::vector<std::vector<double>>;  // [layer][node]

/// One flight-track sample. Layer 0 is the shallowest (most recent) year.
struct LayerSequenceRecord {
  std::string id;
  std::vector<double> lat;  // degrees
  std::vector<double> lon;  // degrees
  std::vector<int> years;
  LayerGrid thickness;
  std::map<std::string, LayerGrid> phys;

  std::size_t width() const { return lat.size(); }
  std::size_t layers() const { return years.size(); }

  bool operator==(const LayerSequenceRecord& o) const {
    auto same_grid = [](const LayerGrid& a, const LayerGrid& b) {
      if (a.size() != b.size()) return false;
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].size() != b[i].size()) return false;
        for (std::size_t j = 0; j < a[i].size(); ++j) {
          const double x = a[i][j], y = b[i][j];
          if (!(x == y || (is_absent(x) && is_absent(y)))) return false;
        }
      }
      return true;
    };
    if (id != o.id || lat != o.lat || lon != o.lon || years != o.years) return false;
    if (!same_grid(thickness, o.thickness) || phys.size() != o.phys.size()) return false;
    for (const auto& [k, v] : phys) {
      auto it = o.phys.find(k);
      if (it == o.phys.end() || !same_grid(v, it->second)) return false;
    }
    return true;
  }
};

namespace detail {

inline void check_grid(const LayerSequenceRecord& r, const LayerGrid& g, const std::string& path,
                       bool allow_absent) {
  const std::size_t w = r.width();
  if (g.size() != r.layers()) {
    throw DataError("record '" + r.id + "': " + path + " has " + std::to_string(g.size()) +
                    " layers, expected " + std::to_string(r.layers()));
  }
  for (std::size_t l = 0; l < g.size(); ++l) {
    const std::string at = path + "[" + std::to_string(l) + "]";
    if (g[l].size() != w) {
      throw DataError("record '" + r.id + "': " + at + " has length " +
                      std::to_string(g[l].size()) + ", expected W=" + std::to_string(w));
    }
    for (double v : g[l]) {
      if (is_absent(v) && allow_absent) continue;
      if (!std::isfinite(v)) throw DataError("record '" + r.id + "': " + at + " holds a non-finite value");
    }
  }
}

}  // namespace detail

/// Throws DataError naming the offending field path. W is taken from the
/// thickness rows so that a wrong-length coordinate array is the one reported.
inline void validate(const LayerSequenceRecord& r) {
  const std::string who = "record '" + r.id + "': ";
  if (r.thickness.empty()) throw DataError(who + "thickness is empty");
  const std::size_t w = r.thickness.front().size();
  if (r.lat.size() != w) {
    throw DataError(who + "lat has length " + std::to_string(r.lat.size()) + ", expected W=" +
                    std::to_string(w));
  }
  if (r.lon.size() != w) {
    throw DataError(who + "lon has length " + std::to_string(r.lon.size()) + ", expected W=" +
                    std::to_string(w));
  }
  for (std::size_t i = 0; i < w; ++i) {
    if (!(r.lat[i] >= -90.0 && r.lat[i] <= 90.0))
      throw DataError(who + "lat[" + std::to_string(i) + "] outside [-90, 90]");
    if (!(r.lon[i] >= -180.0 && r.lon[i] <= 180.0))
      throw DataError(who + "lon[" + std::to_string(i) + "] outside [-180, 180]");
  }
  for (std::size_t l = 1; l < r.years.size(); ++l) {
    if (r.years[l] >= r.years[l - 1])
      throw DataError(who + "years must be strictly decreasing at years[" + std::to_string(l) + "]");
  }
  detail::check_grid(r, r.thickness, "thickness", true);
  for (const auto& [name, grid] : r.phys) {
    if (!is_phys_field(name)) throw DataError(who + "unknown phys field 'phys." + name + "'");
    detail::check_grid(r, grid, "phys." + name, false);
  }
}

/// Number of leading layers whose thickness is present at every node.
inline std::size_t complete_layers(const LayerSequenceRecord& r) {
  std::size_t n = 0;
  for (const auto& layer : r.thickness) {
    if (std::any_of(layer.begin(), layer.end(), [](double v) { return is_absent(v); })) break;
    ++n;
  }
  return n;
}

/// Keeps records whose first `min_layers` layers are complete.
inline std::vector<LayerSequenceRecord> filter_complete(const std::vector<LayerSequenceRecord>& records,
                                                        std::size_t min_layers) {
  std::vector<LayerSequenceRecord> out;
  for (const auto& r : records)
    if (complete_layers(r) >= min_layers) out.push_back(r);
  return out;
}

}  // namespace stemit::graph
