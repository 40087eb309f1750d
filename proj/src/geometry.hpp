#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace gicn {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Point3 operator+(const Point3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Point3 operator-(const Point3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Point3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
  bool operator==(const Point3& o) const { return x == o.x && y == o.y && z == o.z; }
};

double distance(const Point3& a, const Point3& b);
double norm(const Point3& p);

// Axis-aligned box given by its two extreme corners, min <= max componentwise.
struct Aabb {
  Point3 min_corner;
  Point3 max_corner;

  bool valid() const;
  Point3 extents() const { return max_corner - min_corner; }
  Point3 center() const { return (min_corner + max_corner) * 0.5; }
  bool contains(const Point3& p) const;
  bool overlaps(const Aabb& o) const;
  Aabb inflated(double margin) const;
  bool operator==(const Aabb& o) const {
    return min_corner == o.min_corner && max_corner == o.max_corner;
  }
};

using Rgb = std::array<double, 3>;

struct PointCloud {
  std::vector<Point3> positions;
  std::vector<Rgb> colors;  // empty, or one entry per point
};

double aabb_volume(const Aabb& b);

// Intersection / union volume. Throws NumericError when both boxes are
// degenerate (union volume zero).
double aabb_iou(const Aabb& a, const Aabb& b);

// IoU - (|C| - U)/|C| with C the smallest enclosing box; range (-1, 1].
double aabb_giou(const Aabb& a, const Aabb& b);

// Componentwise min/max of two corners; repairs inverted predictions.
Aabb canonicalized(const Point3& a, const Point3& b);

// Smallest box containing both.
Aabb enclosing(const Aabb& a, const Aabb& b);

// Tight bounds of a non-empty point set. Throws on empty input.
Aabb tight_bounds(const std::vector<Point3>& points);
Aabb tight_bounds(const std::vector<Point3>& points, const std::vector<int>& indices);

// Arithmetic mean of a non-empty point set. Throws on empty input.
Point3 centroid(const std::vector<Point3>& points);
Point3 centroid(const std::vector<Point3>& points, const std::vector<int>& indices);

}  // namespace gicn
