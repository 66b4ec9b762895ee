#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <queue>
#include <vector>

#include "hmpdrl/config.hpp"
#include "hmpdrl/error.hpp"
#include "hmpdrl/geometry.hpp"
#include "hmpdrl/grid.hpp"

namespace hmpdrl {

struct AStarOptions {
  double diagonal_cost = std::numbers::sqrt2;
  /// When false a diagonal move needs both orthogonally adjacent cells free.
  bool allow_corner_cutting = false;
};

struct GlobalPath {
  std::vector<Cell> cells;
  std::vector<Vec2> points;  // world cell centers, same order as cells
  int orthogonal_steps = 0;
  int diagonal_steps = 0;
  double cost = 0.0;      // orthogonal_steps + diagonal_steps * diagonal_cost
  double length_m = 0.0;  // metric polyline length
};

/// Optional search instrumentation used by tests.
struct AStarStats {
  std::vector<Cell> expanded;
};

namespace detail {

inline constexpr int kDx[8] = {1, -1, 0, 0, 1, 1, -1, -1};
inline constexpr int kDy[8] = {0, 0, 1, -1, 1, -1, 1, -1};

inline bool move_allowed(const OccupancyGrid& g, Cell from, int k, const AStarOptions& opt) {
  const int nx = from.x + kDx[k], ny = from.y + kDy[k];
  if (!g.in_bounds(nx, ny) || g.occupied(nx, ny)) return false;
  if (k >= 4 && !opt.allow_corner_cutting) {
    if (g.occupied(from.x + kDx[k], from.y) || g.occupied(from.x, from.y + kDy[k])) return false;
  }
  return true;
}

}  // namespace detail

/// Builds the metric representation of a cell sequence.
inline GlobalPath make_path(const OccupancyGrid& g, std::vector<Cell> cells, double diagonal_cost = std::numbers::sqrt2) {
  GlobalPath p;
  p.cells = std::move(cells);
  p.points.reserve(p.cells.size());
  for (const auto& c : p.cells) p.points.push_back(g.cell_center(c));
  for (std::size_t i = 1; i < p.cells.size(); ++i) {
    const bool diag = p.cells[i].x != p.cells[i - 1].x && p.cells[i].y != p.cells[i - 1].y;
    (diag ? p.diagonal_steps : p.orthogonal_steps)++;
    p.length_m += distance(p.points[i], p.points[i - 1]);
  }
  p.cost = p.orthogonal_steps + p.diagonal_steps * diagonal_cost;
  return p;
}

/// 8-connected A* with Euclidean heuristic. Open-set ties resolve on lowest
/// f, then lowest h, then insertion order. Returns nullopt when the goal is
/// unreachable; throws InvalidEndpoint for occupied or out-of-bounds ends.
inline std::optional<GlobalPath> astar(const OccupancyGrid& g, Cell start, Cell goal,
                                       const AStarOptions& opt = {}, AStarStats* stats = nullptr) {
  for (const Cell c : {start, goal}) {
    if (!g.in_bounds(c)) throw InvalidEndpoint("A* endpoint (" + std::to_string(c.x) + "," + std::to_string(c.y) + ") is out of bounds");
    if (g.occupied(c)) throw InvalidEndpoint("A* endpoint (" + std::to_string(c.x) + "," + std::to_string(c.y) + ") is occupied");
  }
  // Euclidean distance in cell units is admissible when diagonal_cost >= sqrt2.
  const double h_scale = std::min(1.0, opt.diagonal_cost / std::numbers::sqrt2);
  auto heuristic = [&](Cell c) { return h_scale * std::hypot(double(c.x - goal.x), double(c.y - goal.y)); };

  struct Entry {
    double f, h;
    std::uint64_t order;
    std::size_t idx;
    bool operator>(const Entry& o) const {
      if (f != o.f) return f > o.f;
      if (h != o.h) return h > o.h;
      return order > o.order;
    }
  };

  constexpr double inf = std::numeric_limits<double>::infinity();
  constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
  std::vector<double> gscore(g.size(), inf);
  std::vector<std::size_t> came_from(g.size(), none);
  std::vector<std::uint8_t> closed(g.size(), 0);
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  std::uint64_t counter = 0;

  const std::size_t s = g.index(start), t = g.index(goal);
  gscore[s] = 0.0;
  open.push({heuristic(start), heuristic(start), counter++, s});

  while (!open.empty()) {
    const Entry top = open.top();
    open.pop();
    if (closed[top.idx]) continue;
    const Cell n = g.cell_of(top.idx);
    if (stats) stats->expanded.push_back(n);
    if (top.idx == t) {
      std::vector<Cell> cells;
      for (std::size_t cur = t; cur != none; cur = came_from[cur]) cells.push_back(g.cell_of(cur));
      std::reverse(cells.begin(), cells.end());
      return make_path(g, std::move(cells), opt.diagonal_cost);
    }
    closed[top.idx] = 1;
    for (int k = 0; k < 8; ++k) {
      if (!detail::move_allowed(g, n, k, opt)) continue;
      const Cell m{n.x + detail::kDx[k], n.y + detail::kDy[k]};
      const std::size_t mi = g.index(m);
      if (closed[mi]) continue;
      const double tentative = gscore[top.idx] + (k < 4 ? 1.0 : opt.diagonal_cost);
      if (tentative >= gscore[mi]) continue;
      gscore[mi] = tentative;
      came_from[mi] = top.idx;
      const double h = heuristic(m);
      open.push({tentative + h, h, counter++, mi});
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Checkpoints

struct Checkpoint {
  Vec2 center{};
  double radius = 0.0;
  int index = 0;
  bool visited = false;
};

/// Places checkpoint k at arc length (k+1)*spacing along the polyline, while
/// that arc length does not exceed the path length.
inline std::vector<Checkpoint> place_checkpoints(const std::vector<Vec2>& polyline, double spacing, double radius) {
  if (!(spacing > 0.0) || !(radius > 0.0)) throw ConfigError("checkpoint spacing and radius must be > 0");
  std::vector<Checkpoint> out;
  if (polyline.size() < 2) return out;
  double total = 0.0;
  for (std::size_t i = 1; i < polyline.size(); ++i) total += distance(polyline[i], polyline[i - 1]);
  constexpr double slack = 1e-9;

  std::size_t seg = 1;
  double seg_start = 0.0;  // arc length at polyline[seg-1]
  for (int k = 0;; ++k) {
    const double target = (k + 1) * spacing;
    if (target > total + slack) break;
    double seg_len = distance(polyline[seg], polyline[seg - 1]);
    while (seg + 1 < polyline.size() && seg_start + seg_len < target) {
      seg_start += seg_len;
      ++seg;
      seg_len = distance(polyline[seg], polyline[seg - 1]);
    }
    const double u = seg_len > 0.0 ? std::clamp((target - seg_start) / seg_len, 0.0, 1.0) : 1.0;
    const Vec2 c = polyline[seg - 1] + (polyline[seg] - polyline[seg - 1]) * u;
    out.push_back({c, radius, k, false});
  }
  return out;
}

inline std::vector<Checkpoint> place_checkpoints(const GlobalPath& path, double spacing, double radius) {
  return place_checkpoints(path.points, spacing, radius);
}

enum class CheckpointStrategy { Sequential, NearestFirst };

/// Selects K checkpoints starting after the last visited index `m`. Fewer
/// than K remaining are padded by repeating the last checkpoint; with no
/// checkpoint left the final checkpoint is repeated K times, and with an
/// empty list `fallback` (typically a goal marker) fills all K slots.
inline std::vector<Checkpoint> select_checkpoints(const std::vector<Checkpoint>& checkpoints, int m, int K,
                                                  Vec2 robot_pos, CheckpointStrategy strategy,
                                                  const Checkpoint& fallback) {
  std::vector<Checkpoint> out;
  out.reserve(static_cast<std::size_t>(K));
  const int L = static_cast<int>(checkpoints.size());
  if (L == 0) {
    out.assign(static_cast<std::size_t>(K), fallback);
    return out;
  }
  int s = m + 1;
  if (strategy == CheckpointStrategy::NearestFirst && s < L) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = m + 1; i < L; ++i) {
      const double d = distance(checkpoints[static_cast<std::size_t>(i)].center, robot_pos);
      if (d < best) {
        best = d;
        s = i;
      }
    }
  }
  if (s >= L) {
    out.assign(static_cast<std::size_t>(K), checkpoints.back());
    return out;
  }
  for (int i = 0; i < K; ++i) out.push_back(checkpoints[static_cast<std::size_t>(std::min(s + i, L - 1))]);
  return out;
}

inline void write_path(std::ostream& out, const GlobalPath& path) {
  for (const auto& p : path.points) out << format_double(p.x) << ' ' << format_double(p.y) << '\n';
}

inline void write_checkpoints(std::ostream& out, const std::vector<Checkpoint>& cps) {
  for (const auto& c : cps)
    out << format_double(c.center.x) << ' ' << format_double(c.center.y) << ' ' << format_double(c.radius) << '\n';
}

}  // namespace hmpdrl
