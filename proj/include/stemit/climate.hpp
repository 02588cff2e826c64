// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "stemit/annual.hpp"
#include "stemit/delaunay.hpp"
#include "stemit/error.hpp"
#include "stemit/record.hpp"

namespace stemit::clim {

/// Where a query falls: three vertices and barycentric weights. Outside the
/// hull `triangle` is -1 and all weight sits on the nearest grid point.
struct Location {
  std::int64_t triangle = -1;
  std::array<std::size_t, 3> vertex{};
  std::array<double, 3> weight{};
};

inline Location locate(const Triangulation& tri, Point2 q) {
  for (std::size_t t = 0; t < tri.triangles.size(); ++t) {
    const auto& v = tri.triangles[t];
    const Point2 a = tri.points[v[0]], b = tri.points[v[1]], c = tri.points[v[2]];
    const double area = orient2d(a, b, c);
    const double w0 = orient2d(b, c, q) / area;
    const double w1 = orient2d(c, a, q) / area;
    const double w2 = 1.0 - w0 - w1;
    constexpr double eps = 1e-12;
    if (w0 >= -eps && w1 >= -eps && w2 >= -eps) {
      Location loc{static_cast<std::int64_t>(t), v, {w0, w1, w2}};
      // Snap exact hits so a grid point reproduces its value bit for bit.
      for (int i = 0; i < 3; ++i) {
        if (tri.points[v[i]].x == q.x && tri.points[v[i]].y == q.y) {
          loc.weight = {0.0, 0.0, 0.0};
          loc.weight[i] = 1.0;
        }
      }
      return loc;
    }
  }
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < tri.points.size(); ++i) {
    const double d = std::hypot(tri.points[i].x - q.x, tri.points[i].y - q.y);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return Location{-1, {best, best, best}, {1.0, 0.0, 0.0}};
}

/// Evaluated as offsets from the heaviest vertex, so constant fields and
/// exact vertex hits come out bit-exact.
inline double interpolate(const Location& loc, std::span<const double> values) {
  int k = 0;
  for (int i = 1; i < 3; ++i)
    if (loc.weight[i] > loc.weight[k]) k = i;
  const double base = values[loc.vertex[k]];
  double v = base;
  for (int i = 0; i < 3; ++i)
    if (i != k && loc.weight[i] != 0.0) v += loc.weight[i] * (values[loc.vertex[i]] - base);
  return v;
}

/// Piecewise-linear value at q; nearest grid point outside the hull.
inline double interpolate(const Triangulation& tri, std::span<const double> values, Point2 q) {
  if (values.size() != tri.points.size())
    throw DimensionError("interpolate: " + std::to_string(values.size()) + " values for " +
                         std::to_string(tri.points.size()) + " points");
  return interpolate(locate(tri, q), values);
}

/// Annual climate values on a grid of (lon, lat) points.
/// values[field][year index][point].
struct AnnualField {
  std::vector<Point2> points;  // x = lon, y = lat
  std::vector<int> years;
  std::map<std::string, std::vector<std::vector<double>>> values;

  void validate() const {
    if (points.size() < 3) throw DataError("climate grid needs at least 3 points");
    for (const auto& [name, per_year] : values) {
      if (!graph::is_phys_field(name)) throw DataError("climate grid: unknown field '" + name + "'");
      if (per_year.size() != years.size())
        throw DataError("climate grid: fields." + name + " has " + std::to_string(per_year.size()) +
                        " years, expected " + std::to_string(years.size()));
      for (std::size_t y = 0; y < per_year.size(); ++y) {
        if (per_year[y].size() != points.size())
          throw DataError("climate grid: fields." + name + "[" + std::to_string(y) + "] has " +
                          std::to_string(per_year[y].size()) + " values, expected " +
                          std::to_string(points.size()));
        for (double v : per_year[y])
          if (!std::isfinite(v)) throw DataError("climate grid: fields." + name + " holds a non-finite value");
      }
    }
  }

  std::size_t year_index(int year) const {
    for (std::size_t i = 0; i < years.size(); ++i)
      if (years[i] == year) return i;
    throw DataError("climate grid has no values for year " + std::to_string(year));
  }
};

/// Daily climate values on a grid, one contiguous run of days from `start`.
/// values[field][day][point].
struct DailyGrid {
  std::vector<Point2> points;  // x = lon, y = lat
  Date start;
  std::map<std::string, std::vector<std::vector<double>>> values;
};

inline Date parse_date(const std::string& s) {
  int y = 0;
  unsigned m = 0, d = 0;
  char tail = 0;
  if (std::sscanf(s.c_str(), "%d-%u-%u%c", &y, &m, &d, &tail) != 3)
    throw DataError("invalid date '" + s + "' (expected YYYY-MM-DD)");
  return make_date(y, m, d);
}

/// Sums every grid point's daily series over each annual window that the
/// run of days covers completely.
inline AnnualField aggregate_grid(const DailyGrid& g, unsigned boundary_month = 9) {
  using namespace std::chrono;
  std::size_t days_n = g.values.empty() ? 0 : g.values.begin()->second.size();
  for (const auto& [name, per_day] : g.values) {
    if (per_day.size() != days_n) throw DataError("daily grid: fields disagree on the number of days");
    for (const auto& row : per_day)
      if (row.size() != g.points.size())
        throw DataError("daily grid: daily." + name + " rows must hold one value per point");
  }
  const sys_days first{g.start};
  const sys_days end = first + days{static_cast<long>(days_n)};
  AnnualField f;
  f.points = g.points;
  const int y0 = static_cast<int>(g.start.year());
  for (int y = y0; y <= y0 + static_cast<int>(days_n / 365) + 1; ++y) {
    const Window w = annual_window(y, boundary_month);
    if (w.begin >= first && w.end <= end) f.years.push_back(y);
  }
  if (f.years.empty()) throw DataError("daily grid covers no complete annual window");
  // Most recent first, matching record year order.
  std::reverse(f.years.begin(), f.years.end());
  for (const auto& [name, per_day] : g.values) {
    auto& out = f.values[name];
    out.assign(f.years.size(), std::vector<double>(g.points.size(), 0.0));
    for (std::size_t yi = 0; yi < f.years.size(); ++yi) {
      const Window w = annual_window(f.years[yi], boundary_month);
      const auto lo = static_cast<std::size_t>((w.begin - first).count());
      const auto hi = static_cast<std::size_t>((w.end - first).count());
      for (std::size_t d = lo; d < hi; ++d)
        for (std::size_t p = 0; p < g.points.size(); ++p) out[yi][p] += per_day[d][p];
    }
  }
  f.validate();
  return f;
}

/// Reads an annual grid, or a daily grid (keys points/start/daily) that is
/// summed over annual windows starting at `boundary_month`.
inline AnnualField read_grid(const std::string& path, unsigned boundary_month = 9) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read climate grid '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("climate grid '" + path + "': " + e.what());
  }
  AnnualField f;
  try {
    if (j.contains("daily")) {
      for (const auto& [key, _] : j.items())
        if (key != "points" && key != "start" && key != "daily") throw DataError("unknown field '" + key + "'");
      DailyGrid g;
      for (const auto& p : j.at("points")) {
        if (!p.is_array() || p.size() != 2) throw DataError("points entries must be [lon, lat]");
        g.points.push_back({p[0].get<double>(), p[1].get<double>()});
      }
      g.start = parse_date(j.at("start").get<std::string>());
      for (const auto& [name, v] : j.at("daily").items()) {
        if (!graph::is_phys_field(name)) throw DataError("unknown field '" + name + "'");
        g.values[name] = v.get<std::vector<std::vector<double>>>();
      }
      return aggregate_grid(g, boundary_month);
    }
    for (const auto& [key, _] : j.items())
      if (key != "points" && key != "years" && key != "fields") throw DataError("unknown field '" + key + "'");
    for (const auto& p : j.at("points")) {
      if (!p.is_array() || p.size() != 2) throw DataError("points entries must be [lon, lat]");
      f.points.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    f.years = j.at("years").get<std::vector<int>>();
    for (const auto& [name, v] : j.at("fields").items())
      f.values[name] = v.get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("climate grid '" + path + "': " + e.what());
  }
  f.validate();
  return f;
}

inline void write_grid(const AnnualField& f, const std::string& path) {
  nlohmann::ordered_json j;
  j["points"] = nlohmann::ordered_json::array();
  for (const auto& p : f.points) j["points"].push_back({p.x, p.y});
  j["years"] = f.years;
  j["fields"] = nlohmann::ordered_json::object();
  for (const auto& [name, v] : f.values) j["fields"][name] = v;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write climate grid '" + path + "'");
  out << j.dump() << '\n';
}

/// Fills rec.phys[name] for every requested field by interpolating the grid
/// at each node's (lon, lat). The grid is triangulated once; each node is
/// located once and its weights reused for every year and field.
inline std::vector<graph::LayerSequenceRecord> attach_features(std::vector<graph::LayerSequenceRecord> records,
                                                               const AnnualField& field,
                                                               const std::vector<std::string>& names) {
  field.validate();
  for (const auto& name : names)
    if (!field.values.count(name)) throw DataError("climate grid has no field '" + name + "'");
  const Triangulation tri = bowyer_watson(field.points);
  for (auto& rec : records) {
    std::vector<std::size_t> year_idx;
    for (int y : rec.years) {
      try {
        year_idx.push_back(field.year_index(y));
      } catch (const DataError&) {
        throw DataError("record '" + rec.id + "': climate grid has no values for year " + std::to_string(y));
      }
    }
    std::vector<Location> locs;
    locs.reserve(rec.width());
    for (std::size_t v = 0; v < rec.width(); ++v) locs.push_back(locate(tri, {rec.lon[v], rec.lat[v]}));
    for (const auto& name : names) {
      const auto& per_year = field.values.at(name);
      graph::LayerGrid g(rec.layers(), std::vector<double>(rec.width()));
      for (std::size_t l = 0; l < rec.layers(); ++l)
        for (std::size_t v = 0; v < rec.width(); ++v) g[l][v] = interpolate(locs[v], per_year[year_idx[l]]);
      rec.phys[name] = std::move(g);
    }
  }
  return records;
}

}  // namespace stemit::clim
