#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "hmpdrl/config.hpp"
#include "hmpdrl/dynamics.hpp"
#include "hmpdrl/obstacles.hpp"
#include "hmpdrl/orca.hpp"
#include "hmpdrl/rng.hpp"

namespace hmpdrl {

struct KinematicRange {
  double radius_lo, radius_hi;
  double v_pref_lo, v_pref_hi;
};

struct SpawnConfig {
  int interval_steps = 80;
  std::array<int, 3> counts{4, 4, 4};  // Adult, Bicycle, Child
  int lifetime_steps = 80;
  double square_width = 40.0;
  std::array<KinematicRange, 3> ranges{{
      {0.25, 0.35, 0.8, 1.4},  // adult
      {0.35, 0.50, 1.5, 3.0},  // bicycle
      {0.15, 0.25, 0.6, 1.6},  // child
  }};
  int max_retries = 50;
  double clearance = 0.2;  // extra spacing demanded at spawn time
};

struct OrcaConfig {
  double neighbor_dist = 10.0;
  double time_horizon = 5.0;
  double obstacle_range = 3.0;
  double goal_tolerance = 0.05;
};

inline SpawnConfig spawn_config_from(const KeyValueConfig& kv, SpawnConfig c = {}) {
  c.interval_steps = static_cast<int>(kv.get_int("spawn.interval_steps", c.interval_steps));
  c.counts[0] = static_cast<int>(kv.get_int("spawn.adults", c.counts[0]));
  c.counts[1] = static_cast<int>(kv.get_int("spawn.bicycles", c.counts[1]));
  c.counts[2] = static_cast<int>(kv.get_int("spawn.children", c.counts[2]));
  c.lifetime_steps = static_cast<int>(kv.get_int("spawn.lifetime_steps", c.lifetime_steps));
  c.square_width = kv.get_double("spawn.square_width", c.square_width);
  c.max_retries = static_cast<int>(kv.get_int("spawn.max_retries", c.max_retries));
  c.clearance = kv.get_double("spawn.clearance", c.clearance);
  const char* names[3] = {"adult", "bicycle", "child"};
  for (int i = 0; i < 3; ++i) {
    const std::string p = std::string("spawn.") + names[i] + ".";
    auto& r = c.ranges[static_cast<std::size_t>(i)];
    r.radius_lo = kv.get_double(p + "radius_lo", r.radius_lo);
    r.radius_hi = kv.get_double(p + "radius_hi", r.radius_hi);
    r.v_pref_lo = kv.get_double(p + "v_pref_lo", r.v_pref_lo);
    r.v_pref_hi = kv.get_double(p + "v_pref_hi", r.v_pref_hi);
  }
  if (c.interval_steps <= 0) throw ConfigError("spawn.interval_steps must be > 0");
  return c;
}

inline OrcaConfig orca_config_from(const KeyValueConfig& kv, OrcaConfig c = {}) {
  c.neighbor_dist = kv.get_double("orca.neighbor_dist", c.neighbor_dist);
  c.time_horizon = kv.get_double("orca.time_horizon", c.time_horizon);
  c.obstacle_range = kv.get_double("orca.obstacle_range", c.obstacle_range);
  c.goal_tolerance = kv.get_double("orca.goal_tolerance", c.goal_tolerance);
  return c;
}

/// Unit vector to the goal scaled by v_pref, slowed on the final approach so
/// the goal is not overshot; zero once arrived.
inline Vec2 preferred_velocity(const EntityState& a, double dt) {
  if (a.arrived) return {};
  const Vec2 to_goal = a.goal - a.position;
  const double d = to_goal.norm();
  if (d <= 0.0) return {};
  if (d < a.v_pref * dt) return to_goal / dt;
  return to_goal / d * a.v_pref;
}

/// ORCA velocity for `agent` against `others` (entities within the neighbor
/// distance; the agent itself is skipped by address) and nearby static cells.
/// Non-reacting neighbors (obstacles) take full responsibility.
inline orca::Solution orca_solve(const EntityState& agent, std::span<const EntityState> others,
                                 const ObstacleField* field, double dt, const OrcaConfig& cfg) {
  std::vector<orca::Neighbor> nbrs;
  const double range_sq = cfg.neighbor_dist * cfg.neighbor_dist;
  for (const auto& o : others) {
    if (&o == &agent) continue;
    if ((o.position - agent.position).norm_sq() > range_sq) continue;
    nbrs.push_back({o.position, o.velocity, o.radius, o.type == EntityType::Obstacle ? 1.0 : 0.5});
  }
  if (field) field->append_discs(agent.position, cfg.obstacle_range, nbrs);
  return orca::solve(agent.position, agent.velocity, agent.radius, agent.v_pref, preferred_velocity(agent, dt), nbrs,
                     cfg.time_horizon, dt);
}

inline Vec2 orca_velocity(const EntityState& agent, std::span<const EntityState> others, const ObstacleField* field,
                          double dt, const OrcaConfig& cfg) {
  return orca_solve(agent, others, field, dt, cfg).velocity;
}

struct SpawnResult {
  std::vector<EntityState> agents;
  int skipped = 0;
};

/// Places one wave in a square of width W centred W/2 ahead of the robot
/// along the robot-to-goal direction and yawed with it. Each agent starts on
/// one edge and heads to a point on the opposite edge.
inline SpawnResult spawn_wave(const SpawnConfig& cfg, const RobotState& robot, const ObstacleField* field,
                              std::span<const EntityState> existing, std::uint64_t seed, int& next_id) {
  SpawnResult res;
  Rng rng(seed);
  Vec2 u = robot.goal - robot.position;
  const double un = u.norm();
  u = un > 1e-9 ? u / un : Vec2(std::cos(robot.theta), std::sin(robot.theta));
  const Vec2 v{-u.y, u.x};
  const double half = 0.5 * cfg.square_width;
  const Vec2 center = robot.position + u * half;

  auto edge_point = [&](int edge, double s) {
    switch (edge) {
      case 0: return center - u * half + v * s;
      case 1: return center + u * half + v * s;
      case 2: return center - v * half + u * s;
      default: return center + v * half + u * s;
    }
  };
  auto clear_of_obstacles = [&](Vec2 p, double r) {
    return !field || field->distance_to_obstacles(p, r + cfg.clearance + 1.0) > r + cfg.clearance;
  };

  std::vector<EntityState> placed(existing.begin(), existing.end());
  for (int t = 0; t < 3; ++t) {
    const auto type = static_cast<EntityType>(t);
    const auto& range = cfg.ranges[static_cast<std::size_t>(t)];
    for (int k = 0; k < cfg.counts[static_cast<std::size_t>(t)]; ++k) {
      bool ok = false;
      EntityState a;
      for (int attempt = 0; attempt < cfg.max_retries && !ok; ++attempt) {
        a = EntityState{};
        a.type = type;
        a.radius = uniform(rng, range.radius_lo, range.radius_hi);
        a.v_pref = uniform(rng, range.v_pref_lo, range.v_pref_hi);
        const int edge = uniform_int(rng, 0, 3);
        a.position = edge_point(edge, uniform(rng, -half, half));
        a.goal = edge_point(edge ^ 1, uniform(rng, -half, half));
        if (distance(a.position, robot.position) <= a.radius + robot.radius + cfg.clearance) continue;
        bool overlap = false;
        for (const auto& o : placed)
          if (distance(a.position, o.position) <= a.radius + o.radius + cfg.clearance) {
            overlap = true;
            break;
          }
        if (overlap) continue;
        if (!clear_of_obstacles(a.position, a.radius) || !clear_of_obstacles(a.goal, a.radius)) continue;
        ok = true;
      }
      if (!ok) {
        ++res.skipped;
        continue;
      }
      a.velocity = preferred_velocity(a, 1.0);
      a.age = 0;
      a.lifetime = cfg.lifetime_steps;
      a.id = next_id++;
      placed.push_back(a);
      res.agents.push_back(a);
    }
  }
  return res;
}

/// Synchronous crowd update without removal: every new velocity is computed
/// from the previous tick's states, then positions advance and ages increase.
/// With `invisible_robot` the robot never enters any neighbor set; a null
/// robot means no robot in the world.
inline std::vector<EntityState> advance_crowd(const std::vector<EntityState>& agents, const RobotState* robot,
                                              const ObstacleField* field, double dt, bool invisible_robot,
                                              const OrcaConfig& cfg) {
  std::vector<EntityState> view = agents;
  if (robot && !invisible_robot) {
    EntityState r;
    r.position = robot->position;
    r.velocity = robot->velocity;
    r.radius = robot->radius;
    r.type = EntityType::Adult;
    r.id = 0;
    view.push_back(r);
  }
  std::vector<Vec2> velocities(agents.size());
  for (std::size_t i = 0; i < agents.size(); ++i)
    velocities[i] = orca_velocity(view[i], view, field, dt, cfg);

  std::vector<EntityState> next = agents;
  for (std::size_t i = 0; i < next.size(); ++i) {
    EntityState& a = next[i];
    a.velocity = velocities[i];
    a.position += a.velocity * dt;
    if (!a.arrived && distance(a.position, a.goal) <= cfg.goal_tolerance) a.arrived = true;
    if (a.arrived) a.velocity = {};
    ++a.age;
  }
  return next;
}

/// Drops agents whose age exceeds their lifetime.
inline void remove_expired(std::vector<EntityState>& agents) {
  std::erase_if(agents, [](const EntityState& a) { return a.age > a.lifetime; });
}

inline std::vector<EntityState> step_crowd(const std::vector<EntityState>& agents, const RobotState* robot,
                                           const ObstacleField* field, double dt, bool invisible_robot,
                                           const OrcaConfig& cfg) {
  auto next = advance_crowd(agents, robot, field, dt, invisible_robot, cfg);
  remove_expired(next);
  return next;
}

/// CSV row format: step,agent_id,type,x,y,vx,vy,r. The robot uses id 0.
inline void write_trajectory_header(std::ostream& out) { out << "step,agent_id,type,x,y,vx,vy,r\n"; }

inline void write_trajectory_row(std::ostream& out, int step, int id, std::string_view type, Vec2 p, Vec2 v, double r) {
  out << step << ',' << id << ',' << type << ',' << format_double(p.x) << ',' << format_double(p.y) << ','
      << format_double(v.x) << ',' << format_double(v.y) << ',' << format_double(r) << '\n';
}

}  // namespace hmpdrl
