// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "stemit/error.hpp"

namespace stemit::clim {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline double orient2d(Point2 a, Point2 b, Point2 c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

/// Signed incircle determinant for CCW (a, b, c): positive when d lies inside
/// the circumcircle. `bound` receives the magnitude of the summed terms so
/// callers can apply a relative tolerance.
inline double incircle(Point2 a, Point2 b, Point2 c, Point2 d, double* bound = nullptr) {
  const double adx = a.x - d.x, ady = a.y - d.y;
  const double bdx = b.x - d.x, bdy = b.y - d.y;
  const double cdx = c.x - d.x, cdy = c.y - d.y;
  const double alift = adx * adx + ady * ady;
  const double blift = bdx * bdx + bdy * bdy;
  const double clift = cdx * cdx + cdy * cdy;
  const double t1 = alift * (bdx * cdy - cdx * bdy);
  const double t2 = blift * (cdx * ady - adx * cdy);
  const double t3 = clift * (adx * bdy - bdx * ady);
  if (bound) {
    *bound = alift * (std::abs(bdx * cdy) + std::abs(cdx * bdy)) + blift * (std::abs(cdx * ady) + std::abs(adx * cdy)) +
             clift * (std::abs(adx * bdy) + std::abs(bdx * ady));
  }
  return t1 + t2 + t3;
}

/// Relative slack under which four points count as cocircular.
inline constexpr double kCocircularTol = 1e-12;

inline bool strictly_in_circumcircle(Point2 a, Point2 b, Point2 c, Point2 d) {
  double bound = 0.0;
  const double det = incircle(a, b, c, d, &bound);
  return det > kCocircularTol * bound;
}

/// Planar triangulation with CCW triangles. neighbors[t][i] is the triangle
/// across the edge opposite vertex i, or -1 on the hull.
struct Triangulation {
  std::vector<Point2> points;
  std::vector<std::array<std::size_t, 3>> triangles;
  std::vector<std::array<std::int64_t, 3>> neighbors;

  double area(std::size_t t) const {
    const auto& tri = triangles[t];
    return 0.5 * orient2d(points[tri[0]], points[tri[1]], points[tri[2]]);
  }
};

/// Convex hull vertex indices in CCW order, collinear boundary points dropped.
inline std::vector<std::size_t> convex_hull(std::span<const Point2> pts) {
  std::vector<std::size_t> idx(pts.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return pts[a].x < pts[b].x || (pts[a].x == pts[b].x && pts[a].y < pts[b].y);
  });
  if (idx.size() < 3) return idx;
  std::vector<std::size_t> hull(2 * idx.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    while (k >= 2 && orient2d(pts[hull[k - 2]], pts[hull[k - 1]], pts[idx[i]]) <= 0) --k;
    hull[k++] = idx[i];
  }
  for (std::size_t i = idx.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && orient2d(pts[hull[k - 2]], pts[hull[k - 1]], pts[idx[i]]) <= 0) --k;
    hull[k++] = idx[i];
  }
  hull.resize(k - 1);
  return hull;
}

inline double polygon_area(std::span<const Point2> pts, const std::vector<std::size_t>& ring) {
  double a = 0.0;
  for (std::size_t i = 0; i < ring.size(); ++i) {
    const Point2 p = pts[ring[i]], q = pts[ring[(i + 1) % ring.size()]];
    a += p.x * q.y - q.x * p.y;
  }
  return 0.5 * a;
}

namespace detail {

using Tri = std::array<std::size_t, 3>;
using EdgeKey = std::pair<std::size_t, std::size_t>;

inline EdgeKey undirected(std::size_t a, std::size_t b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

inline bool point_in_triangle_closed(Point2 a, Point2 b, Point2 c, Point2 p, double eps) {
  return orient2d(a, b, p) >= -eps && orient2d(b, c, p) >= -eps && orient2d(c, a, p) >= -eps;
}

/// Adds triangles outside the current boundary until it is convex. Boundary
/// directed edges keep the interior on their left, so a right turn a→b→c
/// marks a pocket that triangle (a, c, b) closes.
inline void fill_pockets(const std::vector<Point2>& pts, std::vector<Tri>& tris) {
  for (;;) {
    std::map<EdgeKey, int> directed;
    for (const Tri& t : tris)
      for (int i = 0; i < 3; ++i) directed[{t[i], t[(i + 1) % 3]}] = 1;
    std::vector<EdgeKey> boundary;
    for (const auto& [e, _] : directed)
      if (!directed.count({e.second, e.first})) boundary.push_back(e);
    bool added = false;
    for (const auto& e1 : boundary) {
      for (const auto& e2 : boundary) {
        if (e2.first != e1.second || e2.second == e1.first) continue;
        const std::size_t a = e1.first, b = e1.second, c = e2.second;
        const double turn = orient2d(pts[a], pts[b], pts[c]);
        double scale = 0.0;
        for (auto [p, q] : {std::pair{a, b}, std::pair{b, c}}) {
          scale = std::max(scale, std::hypot(pts[p].x - pts[q].x, pts[p].y - pts[q].y));
        }
        if (turn >= -1e-12 * scale * scale) continue;
        bool empty = true;
        for (std::size_t p = 0; p < pts.size() && empty; ++p) {
          if (p == a || p == b || p == c) continue;
          if (point_in_triangle_closed(pts[a], pts[c], pts[b], pts[p], 0.0)) empty = false;
        }
        if (!empty) continue;
        tris.push_back({a, c, b});
        added = true;
        break;
      }
      if (added) break;
    }
    if (!added) return;
  }
}

/// Lawson flips until every interior edge is locally Delaunay.
inline void legalize(const std::vector<Point2>& pts, std::vector<Tri>& tris) {
  for (std::size_t sweep = 0; sweep < 10000; ++sweep) {
    std::map<EdgeKey, std::vector<std::pair<std::size_t, int>>> owners;
    for (std::size_t t = 0; t < tris.size(); ++t)
      for (int i = 0; i < 3; ++i) owners[undirected(tris[t][(i + 1) % 3], tris[t][(i + 2) % 3])].push_back({t, i});
    bool flipped = false;
    for (const auto& [e, own] : owners) {
      if (own.size() != 2) continue;
      const auto [t0, i0] = own[0];
      const auto [t1, i1] = own[1];
      const Tri A = tris[t0], B = tris[t1];
      const std::size_t a_opp = A[i0], b_opp = B[i1];
      if (!strictly_in_circumcircle(pts[A[0]], pts[A[1]], pts[A[2]], pts[b_opp])) continue;
      // A = (a_opp, p, q) in CCW order; the new diagonal joins a_opp, b_opp.
      const std::size_t p = A[(i0 + 1) % 3], q = A[(i0 + 2) % 3];
      if (orient2d(pts[a_opp], pts[p], pts[b_opp]) <= 0 || orient2d(pts[a_opp], pts[b_opp], pts[q]) <= 0)
        continue;  // quadrilateral not convex
      tris[t0] = {a_opp, p, b_opp};
      tris[t1] = {a_opp, b_opp, q};
      flipped = true;
      break;
    }
    if (!flipped) return;
  }
}

inline std::vector<std::array<std::int64_t, 3>> build_neighbors(const std::vector<Tri>& tris) {
  std::vector<std::array<std::int64_t, 3>> nb(tris.size(), {-1, -1, -1});
  std::map<EdgeKey, std::pair<std::size_t, int>> first;
  for (std::size_t t = 0; t < tris.size(); ++t) {
    for (int i = 0; i < 3; ++i) {
      const EdgeKey e = undirected(tris[t][(i + 1) % 3], tris[t][(i + 2) % 3]);
      auto it = first.find(e);
      if (it == first.end()) {
        first.emplace(e, std::pair{t, i});
      } else {
        nb[t][i] = static_cast<std::int64_t>(it->second.first);
        nb[it->second.first][it->second.second] = static_cast<std::int64_t>(t);
      }
    }
  }
  return nb;
}

}  // namespace detail

/// Delaunay triangulation by Bowyer-Watson incremental insertion.
///
/// Points are inserted in index order into a super-triangle. A triangle is
/// only invalidated when the new point lies strictly inside its circumcircle;
/// a point on the circle leaves the earlier, lower-index triangulation in
/// place, which fixes the diagonal of cocircular quadruples. After the super
/// vertices are removed any hull pockets are closed and edges are flipped
/// until locally Delaunay.
inline Triangulation bowyer_watson(std::vector<Point2> points) {
  const std::size_t n = points.size();
  if (n < 3) throw GeometryError("bowyer_watson: need at least 3 points, got " + std::to_string(n));
  double minx = points[0].x, maxx = minx, miny = points[0].y, maxy = miny;
  for (const Point2& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw GeometryError("bowyer_watson: non-finite point");
    minx = std::min(minx, p.x);
    maxx = std::max(maxx, p.x);
    miny = std::min(miny, p.y);
    maxy = std::max(maxy, p.y);
  }
  const double extent = std::max(maxx - minx, maxy - miny);
  if (extent == 0.0 || convex_hull(points).size() < 3)
    throw GeometryError("bowyer_watson: input points are collinear");
  {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return points[a].x < points[b].x || (points[a].x == points[b].x && points[a].y < points[b].y);
    });
    for (std::size_t i = 1; i < n; ++i) {
      const Point2 a = points[order[i - 1]], b = points[order[i]];
      if (a.x == b.x && a.y == b.y)
        throw GeometryError("bowyer_watson: duplicate point at index " + std::to_string(std::max(order[i - 1], order[i])));
    }
  }

  const double cx = 0.5 * (minx + maxx), cy = 0.5 * (miny + maxy);
  const double big = 20.0 * extent;
  std::vector<Point2> pts = points;
  pts.push_back({cx - big, cy - big});
  pts.push_back({cx + big, cy - big});
  pts.push_back({cx, cy + big});
  const std::size_t s0 = n, s1 = n + 1, s2 = n + 2;

  std::vector<detail::Tri> tris{{s0, s1, s2}};
  for (std::size_t p = 0; p < n; ++p) {
    std::vector<detail::Tri> keep;
    std::map<detail::EdgeKey, int> edge_count;
    std::vector<std::pair<std::size_t, std::size_t>> bad_edges;
    for (const detail::Tri& t : tris) {
      if (strictly_in_circumcircle(pts[t[0]], pts[t[1]], pts[t[2]], pts[p])) {
        for (int i = 0; i < 3; ++i) {
          const std::size_t a = t[i], b = t[(i + 1) % 3];
          ++edge_count[detail::undirected(a, b)];
          bad_edges.push_back({a, b});
        }
      } else {
        keep.push_back(t);
      }
    }
    if (bad_edges.empty()) throw GeometryError("bowyer_watson: point " + std::to_string(p) + " not inserted");
    for (const auto& [a, b] : bad_edges) {
      if (edge_count[detail::undirected(a, b)] != 1) continue;
      if (orient2d(pts[a], pts[b], pts[p]) > 0)
        keep.push_back({a, b, p});
      else
        keep.push_back({b, a, p});
    }
    tris = std::move(keep);
  }

  std::vector<detail::Tri> real;
  for (const detail::Tri& t : tris)
    if (t[0] < n && t[1] < n && t[2] < n) real.push_back(t);
  detail::fill_pockets(points, real);
  detail::legalize(points, real);
  // Drop zero-area slivers left by collinear boundary points.
  std::vector<detail::Tri> clean;
  for (const detail::Tri& t : real)
    if (orient2d(points[t[0]], points[t[1]], points[t[2]]) > 0) clean.push_back(t);

  Triangulation out;
  out.points = std::move(points);
  out.triangles = std::move(clean);
  out.neighbors = detail::build_neighbors(out.triangles);
  return out;
}

}  // namespace stemit::clim
