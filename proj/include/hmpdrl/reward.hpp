#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>

#include "hmpdrl/config.hpp"
#include "hmpdrl/dynamics.hpp"
#include "hmpdrl/error.hpp"
#include "hmpdrl/obstacles.hpp"

namespace hmpdrl {

/// Per-type tables are indexed by type_index(): Adult, Bicycle, Child, Obstacle.
struct RewardConfig {
  double r_success = 3.0;
  double r_cp = 0.3;
  std::array<double, 4> r_coll{-1.5, -2.0, -2.5, -1.0};
  std::array<double, 4> d_disc{0.1, 0.2, 0.2, 0.0};
  std::array<double, 4> p_disc{0.5, 1.0, 1.0, 0.0};
  double t_pref = 100.0;
  double t_max = 200.0;
  double dt = 0.25;

  double coll(EntityType t) const { return r_coll[static_cast<std::size_t>(type_index(t))]; }
  double disc_distance(EntityType t) const { return d_disc[static_cast<std::size_t>(type_index(t))]; }
  double disc_penalty(EntityType t) const { return p_disc[static_cast<std::size_t>(type_index(t))]; }

  void validate() const {
    if (!(t_pref < t_max)) throw ConfigError("t_pref must be < t_max");
    if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
    for (int i = 0; i < 4; ++i) {
      if (d_disc[static_cast<std::size_t>(i)] < 0.0) throw ConfigError("d_disc must be >= 0");
      if (!(r_coll[static_cast<std::size_t>(i)] < 0.0)) throw ConfigError("collision penalties must be < 0");
    }
  }
};

inline RewardConfig reward_config_from(const KeyValueConfig& kv, RewardConfig c = {}) {
  c.r_success = kv.get_double("r_success", c.r_success);
  c.r_cp = kv.get_double("r_cp", c.r_cp);
  for (auto t : kAllEntityTypes) {
    const auto i = static_cast<std::size_t>(type_index(t));
    const std::string n(type_name(t));
    c.r_coll[i] = kv.get_double("r_coll." + n, c.r_coll[i]);
    c.d_disc[i] = kv.get_double("d_disc." + n, c.d_disc[i]);
    c.p_disc[i] = kv.get_double("p_disc." + n, c.p_disc[i]);
  }
  c.t_pref = kv.get_double("t_pref", c.t_pref);
  c.t_max = kv.get_double("t_max", c.t_max);
  c.dt = kv.get_double("dt", c.dt);
  c.validate();
  return c;
}

inline std::string reward_config_text(const RewardConfig& c) {
  std::string s;
  auto line = [&](const std::string& k, double v) { s += k + " = " + format_double(v) + "\n"; };
  line("r_success", c.r_success);
  line("r_cp", c.r_cp);
  for (auto t : kAllEntityTypes) line("r_coll." + std::string(type_name(t)), c.coll(t));
  for (auto t : kAllEntityTypes) line("d_disc." + std::string(type_name(t)), c.disc_distance(t));
  for (auto t : kAllEntityTypes) line("p_disc." + std::string(type_name(t)), c.disc_penalty(t));
  line("t_pref", c.t_pref);
  line("t_max", c.t_max);
  line("dt", c.dt);
  return s;
}

struct StepOutcome {
  double d_min = std::numeric_limits<double>::infinity();  // surface distance to the closest entity
  EntityType closest_type = EntityType::Obstacle;
  bool reached_goal = false;
  bool timed_out = false;
  std::optional<int> entered_checkpoint;
  double d_g = 0.0;
  double d_max = 1.0;

  bool collided() const { return d_min <= 0.0; }
};

inline double time_reward(double t, double t_pref, double t_max) {
  if (t < t_pref) return 1.0;
  if (t <= t_max) return (t_max - t) / (t_max - t_pref);
  return 0.0;
}

/// Unclamped: negative once the robot is farther from the goal than at start.
inline double proximity_reward(double d_g, double d_max) { return 1.0 - d_g / d_max; }

/// Mutually exclusive branches, evaluated in order: timeout, collision, success.
inline double terminal_reward(const StepOutcome& o, double t, const RewardConfig& c) {
  if (o.timed_out) return proximity_reward(o.d_g, o.d_max);
  if (o.collided()) return c.coll(o.closest_type) + proximity_reward(o.d_g, o.d_max);
  if (o.reached_goal) return c.r_success + time_reward(t, c.t_pref, c.t_max);
  return 0.0;
}

inline double checkpoint_reward(const StepOutcome& o, const RewardConfig& c) {
  return o.entered_checkpoint ? c.r_cp : 0.0;
}

inline double discomfort_reward(const StepOutcome& o, const RewardConfig& c, double dt) {
  const double d = o.d_min;
  const double d_disc = c.disc_distance(o.closest_type);
  if (d > 0.0 && d < d_disc) return (d - d_disc) * c.disc_penalty(o.closest_type) * dt;
  return 0.0;
}

inline double total_reward(const StepOutcome& o, double t, const RewardConfig& c) {
  return terminal_reward(o, t, c) + checkpoint_reward(o, c) + discomfort_reward(o, c, c.dt);
}

/// Per-type minimum surface distance over an interval.
struct TypeDistances {
  std::array<double, 4> d{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                          std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};

  void add(EntityType t, double v) {
    auto& slot = d[static_cast<std::size_t>(type_index(t))];
    if (v < slot) slot = v;
  }
  /// Closest type and its distance; ties resolve to the lower type index.
  std::pair<EntityType, double> closest() const {
    std::size_t best = 3;
    for (std::size_t i = 0; i < 4; ++i)
      if (d[i] < d[best] || (d[i] == d[best] && i < best)) best = i;
    return {static_cast<EntityType>(best), d[best]};
  }
};

/// One moving entity over a step: start and end positions.
struct EntitySweep {
  Vec2 from{}, to{};
  double radius = 0.0;
  EntityType type = EntityType::Adult;
};

/// Samples robot-entity surface distances at `substeps` evenly spaced times
/// in (t - dt, t]; obstacles use the nearest occupied-cell boundary point.
inline TypeDistances sweep_distances(Vec2 robot_from, Vec2 robot_to, double robot_radius,
                                     std::span<const EntitySweep> entities, const ObstacleField* field,
                                     int substeps, double obstacle_cap = 2.0) {
  TypeDistances td;
  for (int k = 1; k <= substeps; ++k) {
    const double u = double(k) / substeps;
    const Vec2 rp = robot_from + (robot_to - robot_from) * u;
    for (const auto& e : entities) {
      const Vec2 ep = e.from + (e.to - e.from) * u;
      td.add(e.type, distance(rp, ep) - e.radius - robot_radius);
    }
    if (field) td.add(EntityType::Obstacle, field->distance_to_obstacles(rp, obstacle_cap) - robot_radius);
  }
  return td;
}

}  // namespace hmpdrl
