#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "hmpdrl/dynamics.hpp"
#include "hmpdrl/grid.hpp"
#include "hmpdrl/orca.hpp"

namespace hmpdrl {

/// Precomputed static-obstacle geometry for one map: 8-connected clusters of
/// occupied cells with their boundary cells (cells touching free space or the
/// map edge) and world bounding boxes.
class ObstacleField {
 public:
  struct Cluster {
    std::vector<Cell> boundary;
    Vec2 lo{}, hi{};  // world bounding box
  };

  ObstacleField() = default;

  explicit ObstacleField(const OccupancyGrid& grid) : grid_(grid) {
    const double res = grid.resolution();
    half_cell_ = 0.5 * res;
    std::vector<int> label(grid.size(), -1);
    std::vector<std::size_t> stack;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (!grid.raw()[i] || label[i] >= 0) continue;
      const int id = static_cast<int>(clusters_.size());
      Cluster cl;
      int min_x = grid.width(), min_y = grid.height(), max_x = -1, max_y = -1;
      label[i] = id;
      stack.push_back(i);
      while (!stack.empty()) {
        const Cell c = grid.cell_of(stack.back());
        stack.pop_back();
        min_x = std::min(min_x, c.x), max_x = std::max(max_x, c.x);
        min_y = std::min(min_y, c.y), max_y = std::max(max_y, c.y);
        bool boundary = false;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (!dx && !dy) continue;
            const int nx = c.x + dx, ny = c.y + dy;
            if (!grid.in_bounds(nx, ny)) {
              if (dx == 0 || dy == 0) boundary = true;
              continue;
            }
            const std::size_t j = grid.index(nx, ny);
            if (!grid.raw()[j]) {
              if (dx == 0 || dy == 0) boundary = true;
              continue;
            }
            if (label[j] < 0) {
              label[j] = id;
              stack.push_back(j);
            }
          }
        }
        if (boundary) cl.boundary.push_back(c);
      }
      std::sort(cl.boundary.begin(), cl.boundary.end(),
                [](Cell a, Cell b) { return a.y != b.y ? a.y < b.y : a.x < b.x; });
      cl.lo = {grid.origin().x + min_x * res, grid.origin().y + min_y * res};
      cl.hi = {grid.origin().x + (max_x + 1) * res, grid.origin().y + (max_y + 1) * res};
      clusters_.push_back(std::move(cl));
    }
  }

  const OccupancyGrid& grid() const { return grid_; }
  const std::vector<Cluster>& clusters() const { return clusters_; }
  double cell_disc_radius() const { return half_cell_ * std::numbers::sqrt2; }

  /// Distance from p to the nearest point of any occupied cell (0 inside),
  /// or `cap` when nothing lies within `cap`.
  double distance_to_obstacles(Vec2 p, double cap) const {
    if (grid_.size() == 0) return cap;
    const Cell pc = grid_.world_to_cell(p);
    if (grid_.in_bounds(pc) && grid_.occupied(pc)) return 0.0;
    double best = cap;
    for (const auto& cl : clusters_) {
      if (box_distance(p, cl.lo, cl.hi) >= best) continue;
      for (const Cell c : cl.boundary) best = std::min(best, square_distance(p, c));
    }
    return best;
  }

  /// Nearest boundary-cell center of each cluster within `range`, nearest
  /// clusters first, at most `max_count` (<= 0 means unlimited).
  std::vector<EntityState> obstacle_entities(Vec2 p, double range, int max_count) const {
    struct Hit {
      double d;
      Vec2 c;
    };
    std::vector<Hit> hits;
    for (const auto& cl : clusters_) {
      if (box_distance(p, cl.lo, cl.hi) > range) continue;
      double best = std::numeric_limits<double>::infinity();
      Vec2 best_c{};
      for (const Cell c : cl.boundary) {
        const Vec2 center = grid_.cell_center(c);
        const double d = (center - p).norm_sq();
        if (d < best) {
          best = d;
          best_c = center;
        }
      }
      best = std::sqrt(best);
      if (best <= range) hits.push_back({best, best_c});
    }
    std::stable_sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.d < b.d; });
    if (max_count > 0 && hits.size() > static_cast<std::size_t>(max_count)) hits.resize(static_cast<std::size_t>(max_count));
    std::vector<EntityState> out;
    out.reserve(hits.size());
    for (const auto& h : hits) {
      EntityState e;
      e.position = h.c;
      e.goal = h.c;
      e.radius = cell_disc_radius();
      e.v_pref = 0.0;
      e.type = EntityType::Obstacle;
      e.id = -1;
      out.push_back(e);
    }
    return out;
  }

  /// Static ORCA neighbors: one disc per boundary cell within `range`.
  void append_discs(Vec2 p, double range, std::vector<orca::Neighbor>& out) const {
    const double r = cell_disc_radius();
    for (const auto& cl : clusters_) {
      if (box_distance(p, cl.lo, cl.hi) > range) continue;
      for (const Cell c : cl.boundary) {
        const Vec2 center = grid_.cell_center(c);
        if ((center - p).norm_sq() <= range * range) out.push_back({center, {}, r, 1.0});
      }
    }
  }

 private:
  static double box_distance(Vec2 p, Vec2 lo, Vec2 hi) {
    const double dx = std::max({lo.x - p.x, 0.0, p.x - hi.x});
    const double dy = std::max({lo.y - p.y, 0.0, p.y - hi.y});
    return std::hypot(dx, dy);
  }

  double square_distance(Vec2 p, Cell c) const {
    const Vec2 center = grid_.cell_center(c);
    const double dx = std::max(std::abs(p.x - center.x) - half_cell_, 0.0);
    const double dy = std::max(std::abs(p.y - center.y) - half_cell_, 0.0);
    return std::hypot(dx, dy);
  }

  OccupancyGrid grid_;
  std::vector<Cluster> clusters_;
  double half_cell_ = 0.0;
};

}  // namespace hmpdrl
