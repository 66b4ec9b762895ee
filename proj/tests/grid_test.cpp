#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "hmpdrl/mapgen.hpp"
#include "test_util.hpp"

namespace hmpdrl {
namespace {

TEST(GridIo, RoundTripPreservesEverything) {
  OccupancyGrid g = test::random_grid(17, 9, 0.3, 5, 0.25);
  OccupancyGrid shifted(g.width(), g.height(), 0.25, {-3.5, 2.0});
  for (std::size_t i = 0; i < g.size(); ++i) shifted.set(g.cell_of(i), g.raw()[i]);
  std::stringstream ss;
  write_grid(ss, shifted);
  EXPECT_EQ(read_grid(ss), shifted);
}

TEST(GridIo, TopRowIsHighestY) {
  OccupancyGrid g(3, 2, 1.0);
  g.set(0, 1, true);
  std::stringstream ss;
  write_grid(ss, g);
  EXPECT_EQ(ss.str(), "occupancy 3 2 1 0 0\n#..\n...\n");
}

TEST(GridIo, RejectsMalformedInput) {
  auto parse = [](const std::string& s) {
    std::istringstream in(s);
    return read_grid(in);
  };
  EXPECT_THROW(parse(""), FormatError);
  EXPECT_THROW(parse("occupancy 2 2 0.1 0 0\n..\n"), FormatError);
  EXPECT_THROW(parse("occupancy 2 2 0.1 0 0\n..\n.x\n"), FormatError);
  EXPECT_THROW(parse("occupancy 2 2 0.1 0 0\n...\n..\n"), FormatError);
  EXPECT_THROW(parse("occupancy 2 2 -1 0 0\n..\n..\n"), FormatError);
  EXPECT_THROW(parse("grid 2 2 0.1 0 0\n..\n..\n"), FormatError);
  EXPECT_NO_THROW(parse("occupancy 2 2 0.1 0 0\r\n..\r\n#.\r\n"));
}

TEST(Semantics, CollapseUsesClassTable) {
  std::istringstream raster("semantic 3 2 0.5 0 0\n4 1 1\n0 4 2\n");
  std::istringstream table("# id kind\n0 free\n1 free\n2 occupied\n4 occupied\n");
  const auto r = read_raster(raster, read_class_table(table));
  const OccupancyGrid g = collapse_semantics(r);
  EXPECT_TRUE(g.occupied(0, 1));
  EXPECT_FALSE(g.occupied(1, 1));
  EXPECT_FALSE(g.occupied(0, 0));
  EXPECT_TRUE(g.occupied(1, 0));
  EXPECT_TRUE(g.occupied(2, 0));
  EXPECT_DOUBLE_EQ(g.resolution(), 0.5);
}

TEST(Semantics, UnknownClassIsAnError) {
  SemanticRaster r{1, 1, 1.0, {}, {7}, {{0, false}}};
  EXPECT_THROW(collapse_semantics(r), ConfigError);
}

TEST(Semantics, CollapseIsIdempotentThroughTrivialTable) {
  const OccupancyGrid g = test::random_grid(20, 15, 0.4, 11);
  SemanticRaster r{g.width(), g.height(), g.resolution(), g.origin(), {}, {{0, false}, {1, true}}};
  for (auto c : g.raw()) r.cells.push_back(c);
  const OccupancyGrid once = collapse_semantics(r);
  SemanticRaster again = r;
  again.cells.clear();
  for (auto c : once.raw()) again.cells.push_back(c);
  EXPECT_EQ(collapse_semantics(again), once);
  EXPECT_EQ(once, g);
}

TEST(Semantics, UniformAndCheckerboardRasters) {
  const std::map<int, bool> table{{0, false}, {1, true}};
  SemanticRaster road{8, 6, 0.5, {}, std::vector<int>(48, 0), table};
  EXPECT_EQ(collapse_semantics(road).occupied_count(), 0u);
  SemanticRaster building{8, 6, 0.5, {}, std::vector<int>(48, 1), table};
  EXPECT_EQ(collapse_semantics(building).occupied_count(), 48u);
  SemanticRaster checker{8, 6, 0.5, {}, {}, table};
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 8; ++x) checker.cells.push_back((x + y) % 2);
  const OccupancyGrid g = collapse_semantics(checker);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 8; ++x) EXPECT_EQ(g.occupied(x, y), (x + y) % 2 == 1);
}

TEST(Inflate, MatchesBruteForceDilation) {
  for (int i = 0; i < 100; ++i) {
    const OccupancyGrid g = test::random_grid(30, 30, 0.05 + 0.002 * i, 1000 + i);
    const int r = i % 6;
    ASSERT_EQ(inflate(g, r), test::brute_dilate(g, r)) << "grid " << i << " radius " << r;
  }
}

TEST(Inflate, ZeroIsIdentityAndSingleCellGrowsToSquare) {
  const OccupancyGrid g = test::random_grid(25, 25, 0.2, 4);
  EXPECT_EQ(inflate(g, 0), g);
  OccupancyGrid one(11, 11, 1.0);
  one.set(5, 5, true);
  const OccupancyGrid d = inflate(one, 2);
  EXPECT_EQ(d.occupied_count(), 25u);
  for (int y = 0; y < 11; ++y)
    for (int x = 0; x < 11; ++x) EXPECT_EQ(d.occupied(x, y), std::abs(x - 5) <= 2 && std::abs(y - 5) <= 2);
}

TEST(Inflate, NonSquareAndLargeRadius) {
  const OccupancyGrid g = test::random_grid(7, 23, 0.1, 3);
  for (int r : {1, 4, 10, 30}) EXPECT_EQ(inflate(g, r), test::brute_dilate(g, r));
}

TEST(Inflate, IsMonotoneInRadius) {
  const OccupancyGrid g = test::random_grid(40, 40, 0.03, 9);
  OccupancyGrid prev = inflate(g, 0);
  for (int r = 1; r < 6; ++r) {
    const OccupancyGrid cur = inflate(g, r);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (prev.raw()[i]) {
        ASSERT_TRUE(cur.raw()[i]);
      }
    prev = cur;
  }
  EXPECT_THROW(inflate(g, -1), ConfigError);
}

TEST(UrbanMap, HitsTargetFractionAndIsDeterministic) {
  const OccupancyGrid a = generate_urban_map(100, 80, 0.2, 42);
  EXPECT_NEAR(a.occupied_fraction(), 0.2, 0.05);
  EXPECT_EQ(a, generate_urban_map(100, 80, 0.2, 42));
  EXPECT_FALSE(a == generate_urban_map(100, 80, 0.2, 43));
  const auto comps = free_component_sizes(a);
  ASSERT_FALSE(comps.empty());
  EXPECT_GE(2 * comps.front(), a.size() - a.occupied_count());
}

TEST(UrbanMap, ZeroTargetIsFreeAndDefaultSizeLandsInBand) {
  EXPECT_EQ(generate_urban_map(50, 50, 0.0, 1).occupied_count(), 0u);
  const double f = generate_urban_map(200, 200, 0.15, 1).occupied_fraction();
  EXPECT_GE(f, 0.10);
  EXPECT_LE(f, 0.20);
}

TEST(UrbanMap, ImpossibleTargetThrows) {
  EXPECT_THROW(generate_urban_map(10, 10, 1.5, 1), ConfigError);
  UrbanMapOptions opt;
  opt.max_attempts = 2;
  opt.tolerance = 0.0;
  opt.corridor_cells = 6;
  EXPECT_THROW(generate_urban_map(12, 12, 0.9, 1, opt), GenerationError);
}

TEST(EpisodeSampling, SpecsAreSolvableAndFarApart) {
  const OccupancyGrid g = generate_urban_map(120, 120, 0.15, 7);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const EpisodeSpec e = sample_episode(g, 6, 0.75, s);
    EXPECT_GE(distance(e.start, e.goal), 0.75 * g.world_width());
    const OccupancyGrid inflated = inflate(g, e.inflation_cells);
    const Cell a = g.world_to_cell(e.start), b = g.world_to_cell(e.goal);
    ASSERT_FALSE(inflated.occupied(a));
    ASSERT_FALSE(inflated.occupied(b));
    EXPECT_GE(test::dijkstra(inflated, a, b).o, 0);
    EXPECT_EQ(e.seed, s);
  }
}

TEST(EpisodeSampling, EmptyGridEndpointsAreFarApart) {
  const OccupancyGrid empty(100, 100, 1.0);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const EpisodeSpec e = sample_episode(empty, 2, 0.75, s);
    EXPECT_GE(distance(e.start, e.goal), 75.0);
  }
}

TEST(EpisodeSampling, ExhaustionIsReported) {
  OccupancyGrid full(10, 10, 0.1);
  for (std::size_t i = 0; i < full.size(); ++i) full.set(full.cell_of(i), true);
  EXPECT_THROW(sample_episode(full, 2, 0.5, 1), SamplingExhausted);

  // two free pockets that never connect
  OccupancyGrid split(30, 10, 0.1);
  for (int y = 0; y < 10; ++y)
    for (int x = 12; x < 18; ++x) split.set(x, y, true);
  SamplingOptions opt;
  opt.max_attempts = 20;
  EXPECT_THROW(sample_episode(split, 2, 0.9, 1, opt), SamplingExhausted);
}

TEST(EpisodeSampling, SparseMapsAreFilteredOut) {
  OccupancyGrid empty(50, 50, 0.1);
  EXPECT_FALSE(accept_map(empty));
  EXPECT_TRUE(sample_map_episodes(empty, 4, 0.5, 1).empty());
  const OccupancyGrid g = generate_urban_map(80, 80, 0.15, 3);
  const auto eps = sample_map_episodes(g, 4, 0.5, 1);
  EXPECT_GE(eps.size(), 1u);
  EXPECT_LE(eps.size(), 3u);
}

}  // namespace
}  // namespace hmpdrl
