#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace nbm {

/// Point or direction in R^3.
struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr double operator[](std::size_t i) const { return i == 0 ? x : (i == 1 ? y : z); }
  constexpr double& operator[](std::size_t i) { return i == 0 ? x : (i == 1 ? y : z); }

  constexpr Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr Vec3& operator-=(const Vec3& o) {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }
  constexpr Vec3& operator*=(double s) {
    x *= s;
    y *= s;
    z *= s;
    return *this;
  }

  friend constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
  friend constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
  friend constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
  friend constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
  friend constexpr Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

/// Unit vector along axis 0, 1 or 2.
constexpr Vec3 unit_axis(int axis) {
  Vec3 e;
  e[static_cast<std::size_t>(axis)] = 1.0;
  return e;
}

/// The cubic computational domain [lo, hi]^3.
struct Cube {
  double lo = -1.0;
  double hi = 1.0;

  constexpr double extent() const { return hi - lo; }

  /// Inclusive containment with a relative slack for points computed as p +/- h.
  bool contains(const Vec3& p, double slack = 1e-12) const {
    const double tol = slack * extent();
    for (std::size_t i = 0; i < 3; ++i) {
      if (p[i] < lo - tol || p[i] > hi + tol) return false;
    }
    return true;
  }
};

}  // namespace nbm
