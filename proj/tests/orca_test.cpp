#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "hmpdrl/crowd.hpp"
#include "hmpdrl/orca.hpp"
#include "hmpdrl/rng.hpp"
#include "test_util.hpp"

namespace hmpdrl {
namespace {

using test::max_violation;
using test::random_scene;
using test::Scene;

TEST(Orca, FeasibleSolutionsAreOptimalAgainstGridSearch) {
  Rng rng(2024);
  int feasible = 0;
  for (int i = 0; i < 200; ++i) {
    const Scene s = random_scene(rng);
    const auto sol = orca::solve(s.pos, s.vel, s.radius, s.max_speed, s.preferred, s.neighbors, 5.0, 0.25);
    ASSERT_LE(sol.velocity.norm(), s.max_speed + 1e-9);
    const auto check = test::orca_grid_check(s, sol);
    if (check.feasible) {
      ++feasible;
      ASSERT_LE(check.violation, 1e-9) << "scene " << i;
      ASSERT_LE(check.gap, 1e-9) << "scene " << i << " grid point beats solver";
    } else {
      // min-max violation: no grid velocity may do better than the solver
      EXPECT_LE(check.gap, 1e-6) << "scene " << i;
    }
  }
  EXPECT_GT(feasible, 100);
}

TEST(Orca, NoNeighborsReturnsClampedPreference) {
  auto sol = orca::solve({}, {}, 0.3, 1.0, {0.3, 0.4}, {}, 5.0, 0.25);
  EXPECT_EQ(sol.velocity, Vec2(0.3, 0.4));
  sol = orca::solve({}, {}, 0.3, 1.0, {3.0, 4.0}, {}, 5.0, 0.25);
  EXPECT_NEAR(sol.velocity.x, 0.6, 1e-15);
  EXPECT_NEAR(sol.velocity.y, 0.8, 1e-15);
  EXPECT_TRUE(sol.feasible);
}

// Against a static disc taking full responsibility, every admissible
// velocity keeps the agent clear of the disc over the whole time horizon.
TEST(Orca, HalfPlaneExcludesCollisionsWithStaticDisc) {
  Rng rng(31);
  const double tau = 3.0;
  for (int i = 0; i < 300; ++i) {
    const double r = uniform(rng, 0.1, 0.5);
    orca::Neighbor disc;
    disc.radius = uniform(rng, 0.1, 0.5);
    const double ang = uniform(rng, 0, 2 * std::numbers::pi);
    disc.position = Vec2(std::cos(ang), std::sin(ang)) * uniform(rng, r + disc.radius + 0.05, 4.0);
    disc.responsibility = 1.0;
    const Vec2 vel{uniform(rng, -2, 2), uniform(rng, -2, 2)};
    const auto line = orca::make_line({}, vel, r, disc, tau, 0.25);
    for (int k = 0; k < 50; ++k) {
      const Vec2 v{uniform(rng, -2, 2), uniform(rng, -2, 2)};
      if (orca::violation(line, v) > 0.0) continue;
      // closest approach of the ray t*v, t in [0, tau], to the disc centre
      const double t = std::clamp(v.dot(disc.position) / std::max(v.norm_sq(), 1e-300), 0.0, tau);
      ASSERT_GE(distance(v * t, disc.position), r + disc.radius - 1e-9);
    }
  }
}

TEST(Orca, HeadOnAgentsPassWithoutContact) {
  EntityState a, b;
  a.position = {-4, 0.01};
  a.goal = {4, 0};
  b.position = {4, -0.01};
  b.goal = {-4, 0};
  a.radius = b.radius = 0.3;
  std::vector<EntityState> agents{a, b};
  OrcaConfig cfg;
  double closest = 1e9;
  for (int step = 0; step < 200; ++step) {
    agents = advance_crowd(agents, nullptr, nullptr, 0.25, true, cfg);
    closest = std::min(closest, distance(agents[0].position, agents[1].position));
  }
  EXPECT_GE(closest, 0.6 - 1e-6);
  EXPECT_TRUE(agents[0].arrived);
  EXPECT_TRUE(agents[1].arrived);
  EXPECT_EQ(agents[0].velocity, Vec2());
}

TEST(Orca, HeadOnPairStaysPointSymmetric) {
  EntityState a, b;
  a.position = {-4, 0.01};
  a.goal = {4, 0};
  b.position = {4, -0.01};
  b.goal = {-4, 0};
  a.radius = b.radius = 0.3;
  std::vector<EntityState> agents{a, b};
  for (int step = 0; step < 60; ++step) {
    agents = advance_crowd(agents, nullptr, nullptr, 0.25, true, OrcaConfig{});
    EXPECT_NEAR(agents[0].position.x, -agents[1].position.x, 1e-9) << "step " << step;
    EXPECT_NEAR(agents[0].position.y, -agents[1].position.y, 1e-9) << "step " << step;
  }
}

}  // namespace
}  // namespace hmpdrl
