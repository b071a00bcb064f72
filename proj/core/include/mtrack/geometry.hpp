#pragma once

#include <cmath>

namespace mtrack {

/// Cartesian point or vector in meters (or m/s for velocities).
struct Point3 {
  double x1{};
  double x2{};
  double x3{};

  friend bool operator==(const Point3&, const Point3&) = default;
};

inline Point3 operator+(const Point3& a, const Point3& b) { return {a.x1 + b.x1, a.x2 + b.x2, a.x3 + b.x3}; }
inline Point3 operator-(const Point3& a, const Point3& b) { return {a.x1 - b.x1, a.x2 - b.x2, a.x3 - b.x3}; }
inline Point3 operator*(double s, const Point3& v) { return {s * v.x1, s * v.x2, s * v.x3}; }
inline Point3 operator*(const Point3& v, double s) { return s * v; }
inline Point3 operator/(const Point3& v, double s) { return {v.x1 / s, v.x2 / s, v.x3 / s}; }

inline double dot(const Point3& a, const Point3& b) { return a.x1 * b.x1 + a.x2 * b.x2 + a.x3 * b.x3; }
inline double norm(const Point3& v) { return std::sqrt(dot(v, v)); }
inline double distance(const Point3& a, const Point3& b) { return norm(a - b); }

inline bool is_finite(const Point3& p) {
  return std::isfinite(p.x1) && std::isfinite(p.x2) && std::isfinite(p.x3);
}

}  // namespace mtrack
