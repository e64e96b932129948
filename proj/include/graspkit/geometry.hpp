// Planar convex polygon primitives used by the tabletop simulator:
// support queries, line clipping, containment, separation distance, and a
// few canned shapes. Vertices are counter-clockwise, closed implicitly.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "graspkit/common.hpp"

namespace graspkit {

using Vec2 = Eigen::Vector2d;

struct ConvexPolygon {
  std::vector<Vec2> v;

  int size() const { return int(v.size()); }
  const Vec2& at(int i) const { return v[size_t(i)]; }
  Vec2 edge(int i) const { return v[size_t((i + 1) % size())] - v[size_t(i)]; }

  /// Outward unit normal of edge i (CCW winding).
  Vec2 normal(int i) const {
    Vec2 e = edge(i);
    Vec2 n(e.y(), -e.x());
    return n.normalized();
  }

  double area() const {
    double a = 0.0;
    for (int i = 0; i < size(); ++i) {
      const Vec2& p = at(i);
      const Vec2& q = at((i + 1) % size());
      a += p.x() * q.y() - q.x() * p.y();
    }
    return 0.5 * a;
  }

  Vec2 centroid() const {
    double a = 0.0;
    Vec2 c(0, 0);
    for (int i = 0; i < size(); ++i) {
      const Vec2& p = at(i);
      const Vec2& q = at((i + 1) % size());
      double cross = p.x() * q.y() - q.x() * p.y();
      a += cross;
      c += (p + q) * cross;
    }
    return c / (3.0 * a);
  }

  bool is_ccw_convex(double eps = 1e-12) const {
    if (size() < 3) return false;
    for (int i = 0; i < size(); ++i) {
      Vec2 e0 = edge(i);
      Vec2 e1 = edge((i + 1) % size());
      if (e0.x() * e1.y() - e0.y() * e1.x() < -eps) return false;
    }
    return area() > eps;
  }

  bool contains(const Vec2& p, double eps = 1e-12) const {
    for (int i = 0; i < size(); ++i) {
      Vec2 e = edge(i);
      Vec2 d = p - at(i);
      if (e.x() * d.y() - e.y() * d.x() < -eps) return false;
    }
    return true;
  }

  /// Projection interval [min, max] of the polygon onto unit direction u.
  std::pair<double, double> project(const Vec2& u) const {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const Vec2& p : v) {
      double d = p.dot(u);
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
    return {lo, hi};
  }

  /// Width of the polygon along unit direction u.
  double extent(const Vec2& u) const {
    auto [lo, hi] = project(u);
    return hi - lo;
  }

  ConvexPolygon transformed(const Vec2& t, double theta) const {
    double c = std::cos(theta), s = std::sin(theta);
    ConvexPolygon out;
    out.v.reserve(v.size());
    for (const Vec2& p : v)
      out.v.push_back({c * p.x() - s * p.y() + t.x(), s * p.x() + c * p.y() + t.y()});
    return out;
  }

  /// Recenter so the centroid sits at the origin.
  ConvexPolygon centered() const {
    Vec2 c = centroid();
    ConvexPolygon out;
    out.v.reserve(v.size());
    for (const Vec2& p : v) out.v.push_back(p - c);
    return out;
  }
};

/// Parameter interval [t0, t1] of the intersection between the line
/// p(t) = origin + t * dir and the polygon interior, or nullopt if the line
/// misses. dir need not be unit length.
inline std::optional<std::pair<double, double>> clip_line(const ConvexPolygon& poly,
                                                          const Vec2& origin, const Vec2& dir) {
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (int i = 0; i < poly.size(); ++i) {
    Vec2 n = poly.normal(i);
    double denom = n.dot(dir);
    double dist = n.dot(poly.at(i) - origin);  // signed distance to the edge plane
    if (std::abs(denom) < 1e-15) {
      if (dist < 0.0) return std::nullopt;  // parallel and outside
      continue;
    }
    double t = dist / denom;
    if (denom > 0.0)
      t1 = std::min(t1, t);
    else
      t0 = std::max(t0, t);
    if (t0 > t1) return std::nullopt;
  }
  return std::make_pair(t0, t1);
}

inline double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  Vec2 ab = b - a;
  double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + t * ab)).norm();
}

/// Euclidean separation between two convex polygons: positive when
/// disjoint, zero at contact, negative (penetration depth lower bound)
/// when overlapping.
inline double polygon_separation(const ConvexPolygon& a, const ConvexPolygon& b) {
  // Overlap test and penetration bound via separating axes.
  double max_gap = -std::numeric_limits<double>::infinity();
  auto consider = [&](const ConvexPolygon& poly) {
    for (int i = 0; i < poly.size(); ++i) {
      Vec2 n = poly.normal(i);
      auto [a0, a1] = a.project(n);
      auto [b0, b1] = b.project(n);
      double gap = std::max(b0 - a1, a0 - b1);
      max_gap = std::max(max_gap, gap);
    }
  };
  consider(a);
  consider(b);
  if (max_gap <= 0.0) return max_gap;  // overlapping or touching
  // Disjoint: exact distance from boundary segment pairs.
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < a.size(); ++i) {
    const Vec2& p0 = a.at(i);
    const Vec2& p1 = a.at((i + 1) % a.size());
    for (int j = 0; j < b.size(); ++j) {
      const Vec2& q0 = b.at(j);
      const Vec2& q1 = b.at((j + 1) % b.size());
      best = std::min(best, point_segment_distance(p0, q0, q1));
      best = std::min(best, point_segment_distance(p1, q0, q1));
      best = std::min(best, point_segment_distance(q0, p0, p1));
      best = std::min(best, point_segment_distance(q1, p0, p1));
    }
  }
  return best;
}

/// Outward normal cone at the support set in direction u: the pair of edge
/// normals bounding the cone. For a face contact both are the face normal.
struct SupportContact {
  double hi;        // support value max_p p.u
  Vec2 n0, n1;      // normal cone bounds at the support set
  bool face;        // true when the support set is an edge (face contact)
};

inline SupportContact support_contact(const ConvexPolygon& poly, const Vec2& u) {
  int best = 0;
  double hi = poly.at(0).dot(u);
  for (int i = 1; i < poly.size(); ++i) {
    double d = poly.at(i).dot(u);
    if (d > hi) {
      hi = d;
      best = i;
    }
  }
  const double eps = 1e-9;
  int prev = (best + poly.size() - 1) % poly.size();
  bool next_face = std::abs(poly.at((best + 1) % poly.size()).dot(u) - hi) < eps;
  bool prev_face = std::abs(poly.at(prev).dot(u) - hi) < eps;
  SupportContact sc;
  sc.hi = hi;
  if (next_face) {
    sc.n0 = sc.n1 = poly.normal(best);
    sc.face = true;
  } else if (prev_face) {
    sc.n0 = sc.n1 = poly.normal(prev);
    sc.face = true;
  } else {
    sc.n0 = poly.normal(prev);  // vertex contact: cone between adjacent normals
    sc.n1 = poly.normal(best);
    sc.face = false;
  }
  return sc;
}

/// Smallest angle between direction u and any normal inside the contact
/// cone. Zero when u lies within the cone.
inline double cone_angle_to(const SupportContact& sc, const Vec2& u) {
  double a0 = std::atan2(sc.n0.y(), sc.n0.x());
  double a1 = std::atan2(sc.n1.y(), sc.n1.x());
  double au = std::atan2(u.y(), u.x());
  auto wrap = [](double a) {
    while (a <= -kPi) a += 2 * kPi;
    while (a > kPi) a -= 2 * kPi;
    return a;
  };
  double span = wrap(a1 - a0);
  if (span < 0) span += 2 * kPi;
  double rel = wrap(au - a0);
  if (rel < 0) rel += 2 * kPi;
  if (rel <= span) return 0.0;
  double d0 = std::min(std::abs(wrap(au - a0)), std::abs(wrap(au - a1)));
  return d0;
}

// ---------------------------------------------------------------------------
// Shape constructors.

inline ConvexPolygon make_rectangle(double w, double h) {
  require(w > 0 && h > 0, "make_rectangle: non-positive size");
  ConvexPolygon p;
  p.v = {{-w / 2, -h / 2}, {w / 2, -h / 2}, {w / 2, h / 2}, {-w / 2, h / 2}};
  return p;
}

inline ConvexPolygon make_regular_polygon(int n, double circumradius) {
  require(n >= 3 && circumradius > 0, "make_regular_polygon: bad parameters");
  ConvexPolygon p;
  p.v.reserve(size_t(n));
  for (int i = 0; i < n; ++i) {
    double a = 2.0 * kPi * i / n;
    p.v.push_back({circumradius * std::cos(a), circumradius * std::sin(a)});
  }
  return p;
}

/// Andrew monotone chain; returns CCW hull of the given points.
inline ConvexPolygon convex_hull(std::vector<Vec2> pts) {
  require(pts.size() >= 3, "convex_hull: need at least 3 points");
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  auto cross = [](const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<Vec2> hull(2 * pts.size());
  size_t k = 0;
  for (const Vec2& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  size_t lower = k + 1;
  for (auto it = pts.rbegin(); it != pts.rend(); ++it) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], *it) <= 0) --k;
    hull[k++] = *it;
  }
  hull.resize(k - 1);
  ConvexPolygon out;
  out.v = std::move(hull);
  require(out.size() >= 3, "convex_hull: degenerate input");
  return out;
}

}  // namespace graspkit
