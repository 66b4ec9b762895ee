#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "hmpdrl/error.hpp"
#include "hmpdrl/grid.hpp"
#include "hmpdrl/planner.hpp"
#include "hmpdrl/rng.hpp"

namespace hmpdrl {

/// Maps every class id to occupied/free through the raster's class table.
inline OccupancyGrid collapse_semantics(const SemanticRaster& raster) {
  OccupancyGrid g(raster.width, raster.height, raster.resolution, raster.origin);
  for (int y = 0; y < raster.height; ++y) {
    for (int x = 0; x < raster.width; ++x) {
      const int id = raster.at(x, y);
      auto it = raster.class_table.find(id);
      if (it == raster.class_table.end())
        throw ConfigError("class id " + std::to_string(id) + " has no entry in the class table");
      g.set(x, y, it->second);
    }
  }
  return g;
}

/// Square (Chebyshev) dilation of the occupied set by `radius_cells`.
/// Separable: a sliding-window count along rows, then along columns.
inline OccupancyGrid inflate(const OccupancyGrid& grid, int radius_cells) {
  if (radius_cells < 0) throw ConfigError("inflation radius must be >= 0");
  if (radius_cells == 0) return grid;
  const int w = grid.width(), h = grid.height(), r = radius_cells;
  std::vector<std::uint8_t> horiz(grid.size(), 0);
  for (int y = 0; y < h; ++y) {
    int count = 0;
    // window [x - r, x + r]
    for (int x = 0; x < std::min(r, w); ++x) count += grid.occupied(x, y);
    for (int x = 0; x < w; ++x) {
      if (x + r < w) count += grid.occupied(x + r, y);
      if (x - r - 1 >= 0) count -= grid.occupied(x - r - 1, y);
      horiz[grid.index(x, y)] = count > 0;
    }
  }
  OccupancyGrid out(w, h, grid.resolution(), grid.origin());
  for (int x = 0; x < w; ++x) {
    int count = 0;
    for (int y = 0; y < std::min(r, h); ++y) count += horiz[grid.index(x, y)];
    for (int y = 0; y < h; ++y) {
      if (y + r < h) count += horiz[grid.index(x, y + r)];
      if (y - r - 1 >= 0) count -= horiz[grid.index(x, y - r - 1)];
      out.set(x, y, count > 0);
    }
  }
  return out;
}

/// Sizes of the 4-connected free components, largest first.
inline std::vector<std::size_t> free_component_sizes(const OccupancyGrid& g) {
  std::vector<std::uint8_t> seen(g.size(), 0);
  std::vector<std::size_t> sizes;
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (seen[i] || g.raw()[i]) continue;
    std::size_t n = 0;
    stack.push_back(i);
    seen[i] = 1;
    while (!stack.empty()) {
      const Cell c = g.cell_of(stack.back());
      stack.pop_back();
      ++n;
      constexpr int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
      for (int k = 0; k < 4; ++k) {
        const int nx = c.x + dx[k], ny = c.y + dy[k];
        if (!g.in_bounds(nx, ny)) continue;
        const std::size_t j = g.index(nx, ny);
        if (seen[j] || g.raw()[j]) continue;
        seen[j] = 1;
        stack.push_back(j);
      }
    }
    sizes.push_back(n);
  }
  std::sort(sizes.rbegin(), sizes.rend());
  return sizes;
}

struct UrbanMapOptions {
  double resolution = 0.1;
  int corridor_cells = 2;  // minimum free gap kept between buildings
  int max_attempts = 20;   // whole-map regenerations before giving up
  double tolerance = 0.05;
};

/// Procedural city-block map: axis-aligned rectangular buildings of varied
/// size separated by free corridors.
inline OccupancyGrid generate_urban_map(int width, int height, double obstacle_fraction_target, std::uint64_t seed,
                                        const UrbanMapOptions& opt = {}) {
  if (!(obstacle_fraction_target >= 0.0 && obstacle_fraction_target < 1.0))
    throw ConfigError("obstacle fraction target must lie in [0, 1)");
  const int min_dim = std::min(width, height);
  const int min_side = std::max(2, min_dim / 40);
  const int max_side = std::max(min_side + 1, min_dim / 6);
  const std::size_t total = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  const auto goal_cells = static_cast<std::size_t>(std::llround(obstacle_fraction_target * double(total)));

  for (int attempt = 0; attempt < opt.max_attempts; ++attempt) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(attempt)));
    OccupancyGrid g(width, height, opt.resolution);
    std::size_t occ = 0;
    const int placements = 400 * std::max(1, static_cast<int>(total / 400));
    for (int p = 0; p < placements && occ < goal_cells; ++p) {
      int bw = uniform_int(rng, min_side, max_side);
      int bh = uniform_int(rng, min_side, max_side);
      const int x0 = uniform_int(rng, 0, std::max(0, width - bw));
      const int y0 = uniform_int(rng, 0, std::max(0, height - bh));
      bw = std::min(bw, width - x0);
      bh = std::min(bh, height - y0);
      // shrink the last buildings so the target is not overshot
      while (occ + static_cast<std::size_t>(bw) * bh > goal_cells && (bw > min_side || bh > min_side)) {
        if (bw >= bh && bw > min_side) --bw; else if (bh > min_side) --bh; else --bw;
      }
      if (occ + static_cast<std::size_t>(bw) * bh > goal_cells + static_cast<std::size_t>(min_side) * min_side) continue;
      bool clear = true;
      const int gap = opt.corridor_cells;
      for (int y = std::max(0, y0 - gap); clear && y < std::min(height, y0 + bh + gap); ++y)
        for (int x = std::max(0, x0 - gap); x < std::min(width, x0 + bw + gap); ++x)
          if (g.occupied(x, y)) { clear = false; break; }
      if (!clear) continue;
      for (int y = y0; y < y0 + bh; ++y)
        for (int x = x0; x < x0 + bw; ++x) g.set(x, y, true);
      occ += static_cast<std::size_t>(bw) * bh;
    }
    const double frac = g.occupied_fraction();
    if (std::abs(frac - obstacle_fraction_target) > opt.tolerance) continue;
    const auto comps = free_component_sizes(g);
    const std::size_t free_cells = total - g.occupied_count();
    if (free_cells > 0 && (comps.empty() || 2 * comps.front() < free_cells)) continue;
    return g;
  }
  throw GenerationError("could not reach obstacle fraction " + format_double(obstacle_fraction_target) +
                        " within " + std::to_string(opt.max_attempts) + " attempts");
}

struct EpisodeSpec {
  OccupancyGrid grid;  // raw (not inflated) occupancy
  Vec2 start{};
  Vec2 goal{};
  std::uint64_t seed = 0;
  int inflation_cells = 0;  // half the footprint; planning uses inflate(grid, inflation_cells)
};

struct SamplingOptions {
  int max_attempts = 200;
  AStarOptions astar{};
};

/// Rejection-samples a start/goal pair whose footprints are free, whose
/// separation is at least `min_goal_fraction` of the larger world dimension,
/// and which are connected on the inflated grid.
inline EpisodeSpec sample_episode(const OccupancyGrid& grid, int footprint_cells, double min_goal_fraction,
                                  std::uint64_t seed, const SamplingOptions& opt = {}) {
  const int half = footprint_cells / 2;
  const OccupancyGrid inflated = inflate(grid, half);
  std::vector<Cell> free_cells;
  for (int y = half; y < grid.height() - half; ++y)
    for (int x = half; x < grid.width() - half; ++x)
      if (!inflated.occupied(x, y)) free_cells.push_back({x, y});
  if (free_cells.empty()) throw SamplingExhausted("no cell can hold the robot footprint");

  const double min_dist = min_goal_fraction * std::max(grid.world_width(), grid.world_height());
  Rng rng(seed);
  std::vector<Cell> candidates;
  for (int attempt = 0; attempt < opt.max_attempts; ++attempt) {
    const Cell s = free_cells[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(free_cells.size()) - 1))];
    const Vec2 sp = grid.cell_center(s);
    candidates.clear();
    for (const Cell c : free_cells)
      if (distance(grid.cell_center(c), sp) >= min_dist) candidates.push_back(c);
    if (candidates.empty()) continue;
    const Cell t = candidates[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(candidates.size()) - 1))];
    if (!astar(inflated, s, t, opt.astar)) continue;
    return EpisodeSpec{grid, sp, grid.cell_center(t), seed, half};
  }
  throw SamplingExhausted("no valid start-goal pair within " + std::to_string(opt.max_attempts) + " attempts");
}

struct DatasetOptions {
  double min_obstacle_fraction = 0.05;
  int min_pairs_per_map = 1;
  int max_pairs_per_map = 3;
  SamplingOptions sampling{};
};

/// Dataset filter: maps below the minimum static occupancy are unused.
inline bool accept_map(const OccupancyGrid& g, double min_obstacle_fraction = 0.05) {
  return g.occupied_fraction() >= min_obstacle_fraction;
}

/// Samples 1..3 episodes on an accepted map; returns an empty list for maps
/// that are filtered out or have no realizable pair.
inline std::vector<EpisodeSpec> sample_map_episodes(const OccupancyGrid& g, int footprint_cells,
                                                    double min_goal_fraction, std::uint64_t seed,
                                                    const DatasetOptions& opt = {}) {
  std::vector<EpisodeSpec> out;
  if (!accept_map(g, opt.min_obstacle_fraction)) return out;
  Rng rng(seed);
  const int pairs = uniform_int(rng, opt.min_pairs_per_map, opt.max_pairs_per_map);
  for (int i = 0; i < pairs; ++i) {
    try {
      out.push_back(sample_episode(g, footprint_cells, min_goal_fraction, derive_seed(seed, static_cast<std::uint64_t>(i)),
                                   opt.sampling));
    } catch (const SamplingExhausted&) {
      break;
    }
  }
  return out;
}

}  // namespace hmpdrl
