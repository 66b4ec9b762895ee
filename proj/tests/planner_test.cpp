#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "hmpdrl/planner.hpp"
#include "test_util.hpp"

namespace hmpdrl {
namespace {

using test::arclen_of;
using test::random_endpoints;

TEST(AStar, CostEqualsDijkstra) {
  Rng rng(77);
  int solvable = 0;
  for (int i = 0; i < 200; ++i) {
    const OccupancyGrid g = test::random_grid(50, 50, 0.2, 500 + i);
    const auto [s, t] = random_endpoints(g, rng);
    const auto ref = test::dijkstra(g, s, t);
    const auto path = astar(g, s, t);
    ASSERT_EQ(path.has_value(), ref.o >= 0) << "instance " << i;
    if (!path) continue;
    ++solvable;
    EXPECT_EQ(path->orthogonal_steps, ref.o);
    EXPECT_EQ(path->diagonal_steps, ref.d);
    EXPECT_EQ(path->cost, ref.cost());
  }
  EXPECT_GT(solvable, 100);
}

TEST(AStar, PathIsAdjacentAndFree) {
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const OccupancyGrid g = test::random_grid(40, 40, 0.25, 900 + i);
    const auto [s, t] = random_endpoints(g, rng);
    AStarStats stats;
    const auto path = astar(g, s, t, {}, &stats);
    for (const Cell c : stats.expanded) ASSERT_FALSE(g.occupied(c));
    if (!path) continue;
    EXPECT_EQ(path->cells.front(), s);
    EXPECT_EQ(path->cells.back(), t);
    for (std::size_t k = 1; k < path->cells.size(); ++k) {
      const Cell a = path->cells[k - 1], b = path->cells[k];
      ASSERT_LE(std::max(std::abs(a.x - b.x), std::abs(a.y - b.y)), 1);
      ASSERT_FALSE(a == b);
      if (a.x != b.x && a.y != b.y) {
        ASSERT_FALSE(g.occupied(b.x, a.y));
        ASSERT_FALSE(g.occupied(a.x, b.y));
      }
    }
  }
}

TEST(AStar, HeuristicIsAdmissibleOnExpandedNodes) {
  Rng rng(5);
  for (int i = 0; i < 30; ++i) {
    const OccupancyGrid g = test::random_grid(30, 30, 0.2, 50 + i);
    const auto [s, t] = random_endpoints(g, rng);
    AStarStats stats;
    if (!astar(g, s, t, {}, &stats)) continue;
    for (const Cell c : stats.expanded) {
      const double h = std::hypot(double(c.x - t.x), double(c.y - t.y));
      const auto rest = test::dijkstra(g, c, t);
      ASSERT_GE(rest.o, 0);
      ASSERT_LE(h, rest.cost() + 1e-12);
    }
  }
}

TEST(AStar, EndpointsAndUnreachable) {
  OccupancyGrid g(5, 5, 1.0);
  for (int y = 0; y < 5; ++y) g.set(2, y, true);
  EXPECT_FALSE(astar(g, {0, 0}, {4, 4}).has_value());
  EXPECT_THROW(astar(g, {2, 2}, {4, 4}), InvalidEndpoint);
  EXPECT_THROW(astar(g, {0, 0}, {5, 0}), InvalidEndpoint);
  const auto self = astar(g, {0, 0}, {0, 0});
  ASSERT_TRUE(self.has_value());
  EXPECT_EQ(self->cells.size(), 1u);
  EXPECT_EQ(self->cost, 0.0);
}

TEST(AStar, StraightColumnCostsItsLength) {
  const OccupancyGrid g(10, 10, 1.0);
  const auto p = astar(g, {0, 0}, {0, 9});
  ASSERT_TRUE(p.has_value());
  EXPECT_EQ(p->cost, 9.0);
  EXPECT_EQ(p->cells.size(), 10u);
  EXPECT_EQ(p->diagonal_steps, 0);
}

TEST(AStar, CornerCuttingRule) {
  OccupancyGrid g(2, 2, 1.0);
  g.set(1, 0, true);
  g.set(0, 1, true);
  EXPECT_FALSE(astar(g, {0, 0}, {1, 1}).has_value());
  AStarOptions cut;
  cut.allow_corner_cutting = true;
  const auto p = astar(g, {0, 0}, {1, 1}, cut);
  ASSERT_TRUE(p.has_value());
  EXPECT_EQ(p->diagonal_steps, 1);
}

TEST(AStar, MetricLengthUsesResolution) {
  OccupancyGrid g(10, 10, 0.5);
  const auto p = astar(g, {0, 0}, {3, 3});
  ASSERT_TRUE(p.has_value());
  EXPECT_EQ(p->diagonal_steps, 3);
  EXPECT_NEAR(p->length_m, 3 * 0.5 * std::sqrt(2.0), 1e-12);
  EXPECT_EQ(p->points.size(), p->cells.size());
}

TEST(Checkpoints, SpacingWithinOneCell) {
  Rng rng(12);
  for (int i = 0; i < 100; ++i) {
    const OccupancyGrid g = test::random_grid(60, 60, 0.15, 300 + i, 0.1);
    const auto [s, t] = random_endpoints(g, rng);
    const auto path = astar(g, s, t);
    if (!path || path->length_m < 1.0) continue;
    const double D = uniform(rng, 0.2, 2.0);
    const auto cps = place_checkpoints(*path, D, 0.3);
    ASSERT_EQ(cps.size(), static_cast<std::size_t>(std::floor(path->length_m / D + 1e-9)));
    double prev = 0.0;
    for (std::size_t k = 0; k < cps.size(); ++k) {
      EXPECT_EQ(cps[k].index, static_cast<int>(k));
      const double a = arclen_of(path->points, cps[k].center);
      ASSERT_GE(a, 0.0);
      EXPECT_LE(std::abs(a - prev - D), g.resolution());
      prev = a;
    }
  }
}

TEST(Checkpoints, StraightPathsAtDefaultSpacing) {
  const auto fifty = place_checkpoints(std::vector<Vec2>{{0, 0}, {50, 0}}, 15.0, 1.0);
  ASSERT_EQ(fifty.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(fifty[k].center.x, 15.0 * double(k + 1), 1e-12);
  EXPECT_TRUE(place_checkpoints(std::vector<Vec2>{{0, 0}, {10, 0}}, 15.0, 1.0).empty());
  const auto exact = place_checkpoints(std::vector<Vec2>{{0, 0}, {0, 45}}, 15.0, 1.0);
  ASSERT_EQ(exact.size(), 3u);
  EXPECT_NEAR(exact[2].center.y, 45.0, 1e-12);
}

TEST(Checkpoints, ShortPathHasNone) {
  EXPECT_TRUE(place_checkpoints(std::vector<Vec2>{{0, 0}, {0.5, 0}}, 1.0, 0.2).empty());
  EXPECT_TRUE(place_checkpoints(std::vector<Vec2>{{0, 0}}, 1.0, 0.2).empty());
  EXPECT_THROW(place_checkpoints(std::vector<Vec2>{{0, 0}, {1, 0}}, 0.0, 0.2), ConfigError);
  const auto exact = place_checkpoints(std::vector<Vec2>{{0, 0}, {2, 0}}, 1.0, 0.2);
  ASSERT_EQ(exact.size(), 2u);
  EXPECT_DOUBLE_EQ(exact[1].center.x, 2.0);
}

std::vector<Checkpoint> line_checkpoints(int n) {
  std::vector<Checkpoint> cps;
  for (int i = 0; i < n; ++i) cps.push_back({{double(i + 1), 0.0}, 0.5, i, false});
  return cps;
}

TEST(Checkpoints, SequentialSelectionAndPadding) {
  const auto cps = line_checkpoints(4);
  const Checkpoint goal{{9, 9}, 0.5, -1, false};
  auto idx = [&](int m, int K) {
    std::vector<int> out;
    for (const auto& c : select_checkpoints(cps, m, K, {100, 100}, CheckpointStrategy::Sequential, goal))
      out.push_back(c.index);
    return out;
  };
  EXPECT_EQ(idx(-1, 2), (std::vector<int>{0, 1}));
  EXPECT_EQ(idx(1, 2), (std::vector<int>{2, 3}));
  EXPECT_EQ(idx(2, 2), (std::vector<int>{3, 3}));
  EXPECT_EQ(idx(3, 2), (std::vector<int>{3, 3}));
  EXPECT_EQ(idx(0, 3), (std::vector<int>{1, 2, 3}));
  const auto none = select_checkpoints({}, -1, 2, {}, CheckpointStrategy::Sequential, goal);
  ASSERT_EQ(none.size(), 2u);
  EXPECT_EQ(none[0].index, -1);
  EXPECT_EQ(none[1].center, goal.center);
}

TEST(Checkpoints, NearestFirstSkipsAhead) {
  const auto cps = line_checkpoints(5);
  const Checkpoint goal{{9, 9}, 0.5, -1, false};
  const auto sel = select_checkpoints(cps, -1, 2, {3.1, 0.0}, CheckpointStrategy::NearestFirst, goal);
  EXPECT_EQ(sel[0].index, 2);
  EXPECT_EQ(sel[1].index, 3);
  const auto seq = select_checkpoints(cps, -1, 2, {3.1, 0.0}, CheckpointStrategy::Sequential, goal);
  EXPECT_EQ(seq[0].index, 0);
}

TEST(PathIo, WritesOnePointPerLine) {
  GlobalPath p;
  p.points = {{0.05, 0.15}, {1, 2}};
  std::ostringstream out;
  write_path(out, p);
  EXPECT_EQ(out.str(), "0.05 0.15\n1 2\n");
  std::ostringstream cp;
  write_checkpoints(cp, {{{1.5, 2}, 0.5, 0, false}});
  EXPECT_EQ(cp.str(), "1.5 2 0.5\n");
}

}  // namespace
}  // namespace hmpdrl
