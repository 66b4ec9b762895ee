#pragma once

#include <cmath>
#include <numbers>

namespace hmpdrl {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2() = default;
  constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

  constexpr Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator-() const { return {-x, -y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
  constexpr Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr Vec2& operator-=(const Vec2& o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  constexpr bool operator==(const Vec2&) const = default;

  constexpr double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double norm() const { return std::hypot(x, y); }
  constexpr double norm_sq() const { return x * x + y * y; }
};

constexpr Vec2 operator*(double s, const Vec2& v) { return v * s; }

/// 2-D cross product (z component).
constexpr double det(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

/// Expresses a world-frame vector in a frame rotated by `phi`.
inline Vec2 rotate_into(const Vec2& v, double cos_phi, double sin_phi) {
  return {v.x * cos_phi + v.y * sin_phi, v.y * cos_phi - v.x * sin_phi};
}

}  // namespace hmpdrl
