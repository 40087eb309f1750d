#include "geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "errors.hpp"

namespace gicn {

double distance(const Point3& a, const Point3& b) { return norm(a - b); }

double norm(const Point3& p) { return std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z); }

bool Aabb::valid() const {
  return min_corner.x <= max_corner.x && min_corner.y <= max_corner.y &&
         min_corner.z <= max_corner.z;
}

bool Aabb::contains(const Point3& p) const {
  return p.x >= min_corner.x && p.x <= max_corner.x && p.y >= min_corner.y &&
         p.y <= max_corner.y && p.z >= min_corner.z && p.z <= max_corner.z;
}

bool Aabb::overlaps(const Aabb& o) const {
  return min_corner.x < o.max_corner.x && o.min_corner.x < max_corner.x &&
         min_corner.y < o.max_corner.y && o.min_corner.y < max_corner.y &&
         min_corner.z < o.max_corner.z && o.min_corner.z < max_corner.z;
}

Aabb Aabb::inflated(double margin) const {
  Point3 m{margin, margin, margin};
  return {min_corner - m, max_corner + m};
}

double aabb_volume(const Aabb& b) {
  Point3 e = b.extents();
  return std::max(0.0, e.x) * std::max(0.0, e.y) * std::max(0.0, e.z);
}

static double intersection_volume(const Aabb& a, const Aabb& b) {
  double ix = std::min(a.max_corner.x, b.max_corner.x) - std::max(a.min_corner.x, b.min_corner.x);
  double iy = std::min(a.max_corner.y, b.max_corner.y) - std::max(a.min_corner.y, b.min_corner.y);
  double iz = std::min(a.max_corner.z, b.max_corner.z) - std::max(a.min_corner.z, b.min_corner.z);
  if (ix <= 0 || iy <= 0 || iz <= 0) return 0.0;
  return ix * iy * iz;
}

double aabb_iou(const Aabb& a, const Aabb& b) {
  double inter = intersection_volume(a, b);
  double uni = aabb_volume(a) + aabb_volume(b) - inter;
  if (uni <= 0.0) throw NumericError("aabb_iou: both boxes degenerate, union volume is zero");
  return inter / uni;
}

double aabb_giou(const Aabb& a, const Aabb& b) {
  double inter = intersection_volume(a, b);
  double uni = aabb_volume(a) + aabb_volume(b) - inter;
  if (uni <= 0.0) throw NumericError("aabb_giou: both boxes degenerate, union volume is zero");
  double enc = aabb_volume(enclosing(a, b));
  return inter / uni - (enc - uni) / enc;
}

Aabb canonicalized(const Point3& a, const Point3& b) {
  return {{std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)},
          {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)}};
}

Aabb enclosing(const Aabb& a, const Aabb& b) {
  return {{std::min(a.min_corner.x, b.min_corner.x), std::min(a.min_corner.y, b.min_corner.y),
           std::min(a.min_corner.z, b.min_corner.z)},
          {std::max(a.max_corner.x, b.max_corner.x), std::max(a.max_corner.y, b.max_corner.y),
           std::max(a.max_corner.z, b.max_corner.z)}};
}

Aabb tight_bounds(const std::vector<Point3>& points) {
  if (points.empty()) throw NumericError("tight_bounds: empty point set");
  Aabb out{points[0], points[0]};
  for (const Point3& p : points) {
    out.min_corner.x = std::min(out.min_corner.x, p.x);
    out.min_corner.y = std::min(out.min_corner.y, p.y);
    out.min_corner.z = std::min(out.min_corner.z, p.z);
    out.max_corner.x = std::max(out.max_corner.x, p.x);
    out.max_corner.y = std::max(out.max_corner.y, p.y);
    out.max_corner.z = std::max(out.max_corner.z, p.z);
  }
  return out;
}

Aabb tight_bounds(const std::vector<Point3>& points, const std::vector<int>& indices) {
  if (indices.empty()) throw NumericError("tight_bounds: empty index set");
  Aabb out{points[size_t(indices[0])], points[size_t(indices[0])]};
  for (int i : indices) {
    const Point3& p = points[size_t(i)];
    out.min_corner.x = std::min(out.min_corner.x, p.x);
    out.min_corner.y = std::min(out.min_corner.y, p.y);
    out.min_corner.z = std::min(out.min_corner.z, p.z);
    out.max_corner.x = std::max(out.max_corner.x, p.x);
    out.max_corner.y = std::max(out.max_corner.y, p.y);
    out.max_corner.z = std::max(out.max_corner.z, p.z);
  }
  return out;
}

Point3 centroid(const std::vector<Point3>& points) {
  if (points.empty()) throw NumericError("centroid: empty point set");
  Point3 sum;
  for (const Point3& p : points) sum = sum + p;
  return sum * (1.0 / double(points.size()));
}

Point3 centroid(const std::vector<Point3>& points, const std::vector<int>& indices) {
  if (indices.empty()) throw NumericError("centroid: empty index set");
  Point3 sum;
  for (int i : indices) sum = sum + points[size_t(i)];
  return sum * (1.0 / double(indices.size()));
}

}  // namespace gicn
