#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "hmpdrl/geometry.hpp"

namespace hmpdrl::orca {

/// Half-plane of admissible velocities: v is admissible iff
/// det(direction, point - v) <= 0, i.e. v lies left of the directed line.
struct Line {
  Vec2 point{};
  Vec2 direction{};
};

/// Signed violation of a half-plane constraint (> 0 means violated).
inline double violation(const Line& l, const Vec2& v) { return det(l.direction, l.point - v); }

struct Neighbor {
  Vec2 position{};
  Vec2 velocity{};
  double radius = 0.0;
  /// 0.5 for reciprocating agents, 1.0 for static or non-reacting ones.
  double responsibility = 0.5;
};

/// ORCA half-plane induced by one neighbor.
inline Line make_line(const Vec2& pos, const Vec2& vel, double radius, const Neighbor& other, double time_horizon,
                      double dt) {
  const Vec2 rel_pos = other.position - pos;
  const Vec2 rel_vel = vel - other.velocity;
  const double dist_sq = rel_pos.norm_sq();
  const double combined_radius = radius + other.radius;
  const double combined_radius_sq = combined_radius * combined_radius;
  const double inv_tau = 1.0 / time_horizon;

  Line line;
  Vec2 u;
  if (dist_sq > combined_radius_sq) {
    // vector from cutoff center to relative velocity
    const Vec2 w = rel_vel - inv_tau * rel_pos;
    const double w_len_sq = w.norm_sq();
    const double dot1 = w.dot(rel_pos);
    if (dot1 < 0.0 && dot1 * dot1 > combined_radius_sq * w_len_sq) {
      // project on cut-off circle
      const double w_len = std::sqrt(w_len_sq);
      const Vec2 unit_w = w / w_len;
      line.direction = {unit_w.y, -unit_w.x};
      u = (combined_radius * inv_tau - w_len) * unit_w;
    } else {
      // project on legs
      const double leg = std::sqrt(dist_sq - combined_radius_sq);
      if (det(rel_pos, w) > 0.0) {
        line.direction = Vec2(rel_pos.x * leg - rel_pos.y * combined_radius,
                              rel_pos.x * combined_radius + rel_pos.y * leg) / dist_sq;
      } else {
        line.direction = -Vec2(rel_pos.x * leg + rel_pos.y * combined_radius,
                               -rel_pos.x * combined_radius + rel_pos.y * leg) / dist_sq;
      }
      const double dot2 = rel_vel.dot(line.direction);
      u = dot2 * line.direction - rel_vel;
    }
  } else {
    // already overlapping: resolve within one time step
    const double inv_dt = 1.0 / dt;
    const Vec2 w = rel_vel - inv_dt * rel_pos;
    const double w_len = w.norm();
    const Vec2 unit_w = w_len > 0.0 ? w / w_len : Vec2(1.0, 0.0);
    line.direction = {unit_w.y, -unit_w.x};
    u = (combined_radius * inv_dt - w_len) * unit_w;
  }
  line.point = vel + other.responsibility * u;
  return line;
}

namespace detail {

constexpr double kEps = 1e-12;

/// Optimizes on line `line_no` subject to lines [0, line_no) and the speed disk.
inline bool lp1(std::span<const Line> lines, std::size_t line_no, double radius, const Vec2& opt_velocity,
                bool direction_opt, Vec2& result) {
  const Line& ln = lines[line_no];
  const double dot = ln.point.dot(ln.direction);
  const double discriminant = dot * dot + radius * radius - ln.point.norm_sq();
  if (discriminant < 0.0) return false;  // max speed disk fully invalidates line

  const double sqrt_disc = std::sqrt(discriminant);
  double t_left = -dot - sqrt_disc;
  double t_right = -dot + sqrt_disc;

  for (std::size_t i = 0; i < line_no; ++i) {
    const double denominator = det(ln.direction, lines[i].direction);
    const double numerator = det(lines[i].direction, ln.point - lines[i].point);
    if (std::abs(denominator) <= kEps) {
      // parallel lines
      if (numerator < 0.0) return false;
      continue;
    }
    const double t = numerator / denominator;
    if (denominator >= 0.0) {
      t_right = std::min(t_right, t);  // line i bounds line_no on the right
    } else {
      t_left = std::max(t_left, t);
    }
    if (t_left > t_right) return false;
  }

  if (direction_opt) {
    if (opt_velocity.dot(ln.direction) > 0.0) {
      result = ln.point + t_right * ln.direction;
    } else {
      result = ln.point + t_left * ln.direction;
    }
  } else {
    const double t = ln.direction.dot(opt_velocity - ln.point);
    if (t < t_left) {
      result = ln.point + t_left * ln.direction;
    } else if (t > t_right) {
      result = ln.point + t_right * ln.direction;
    } else {
      result = ln.point + t * ln.direction;
    }
  }
  return true;
}

/// Returns lines.size() on success, otherwise the index of the failing line.
inline std::size_t lp2(std::span<const Line> lines, double radius, const Vec2& opt_velocity, bool direction_opt,
                       Vec2& result) {
  if (direction_opt) {
    // opt_velocity is a unit direction here
    result = opt_velocity * radius;
  } else if (opt_velocity.norm_sq() > radius * radius) {
    result = opt_velocity / opt_velocity.norm() * radius;
  } else {
    result = opt_velocity;
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (violation(lines[i], result) > 0.0) {
      const Vec2 temp = result;
      if (!lp1(lines, i, radius, opt_velocity, direction_opt, result)) {
        result = temp;
        return i;
      }
    }
  }
  return lines.size();
}

/// Minimizes the maximum violation over all lines (3-D LP projected to 2-D).
inline void lp3(std::span<const Line> lines, std::size_t begin_line, double radius, Vec2& result) {
  double distance = 0.0;
  std::vector<Line> proj;
  for (std::size_t i = begin_line; i < lines.size(); ++i) {
    if (violation(lines[i], result) <= distance) continue;
    proj.clear();
    for (std::size_t j = 0; j < i; ++j) {
      Line l;
      const double determinant = det(lines[i].direction, lines[j].direction);
      if (std::abs(determinant) <= kEps) {
        if (lines[i].direction.dot(lines[j].direction) > 0.0) continue;  // same direction
        l.point = 0.5 * (lines[i].point + lines[j].point);
      } else {
        l.point = lines[i].point +
                  (det(lines[j].direction, lines[i].point - lines[j].point) / determinant) * lines[i].direction;
      }
      l.direction = lines[j].direction - lines[i].direction;
      const double n = l.direction.norm();
      if (n <= kEps) continue;
      l.direction = l.direction / n;
      proj.push_back(l);
    }
    const Vec2 temp = result;
    const Vec2 dir{-lines[i].direction.y, lines[i].direction.x};
    if (lp2(proj, radius, dir, true, result) < proj.size()) {
      // only possible through numerical error; keep the previous result
      result = temp;
    }
    distance = violation(lines[i], result);
  }
}

}  // namespace detail

struct Solution {
  Vec2 velocity{};
  bool feasible = true;
  std::vector<Line> lines;
};

/// Velocity closest to `preferred` inside the speed disk satisfying every
/// ORCA half-plane; falls back to the minimum-maximum-violation velocity
/// when the half-planes have no common point.
inline Solution solve(const Vec2& pos, const Vec2& vel, double radius, double max_speed, const Vec2& preferred,
                      std::span<const Neighbor> neighbors, double time_horizon, double dt) {
  Solution sol;
  sol.lines.reserve(neighbors.size());
  for (const auto& n : neighbors) sol.lines.push_back(make_line(pos, vel, radius, n, time_horizon, dt));
  const std::size_t fail = detail::lp2(sol.lines, max_speed, preferred, false, sol.velocity);
  if (fail < sol.lines.size()) {
    sol.feasible = false;
    detail::lp3(sol.lines, fail, max_speed, sol.velocity);
  }
  return sol;
}

}  // namespace hmpdrl::orca
