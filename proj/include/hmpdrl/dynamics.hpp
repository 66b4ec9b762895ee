#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "hmpdrl/error.hpp"
#include "hmpdrl/geometry.hpp"

namespace hmpdrl {

/// One-hot slot order is fixed: Adult, Bicycle, Child, Obstacle.
enum class EntityType : int { Adult = 0, Bicycle = 1, Child = 2, Obstacle = 3 };
inline constexpr int kNumEntityTypes = 4;
inline constexpr std::array<EntityType, 4> kAllEntityTypes = {EntityType::Adult, EntityType::Bicycle,
                                                               EntityType::Child, EntityType::Obstacle};

constexpr int type_index(EntityType t) { return static_cast<int>(t); }

constexpr std::string_view type_name(EntityType t) {
  switch (t) {
    case EntityType::Adult: return "adult";
    case EntityType::Bicycle: return "bicycle";
    case EntityType::Child: return "child";
    case EntityType::Obstacle: return "obstacle";
  }
  return "?";
}

constexpr char type_letter(EntityType t) { return "ABCO"[type_index(t)]; }

struct EntityState {
  Vec2 position{};
  Vec2 velocity{};
  double radius = 0.3;
  Vec2 goal{};
  double v_pref = 1.0;
  EntityType type = EntityType::Adult;
  int age = 0;
  int lifetime = std::numeric_limits<int>::max();
  int id = 0;
  bool arrived = false;
};

struct RobotState {
  Vec2 position{};
  Vec2 velocity{};
  double radius = 0.3;
  Vec2 goal{};
  double v_pref = 1.0;
  double theta = 0.0;
};

struct JointState {
  RobotState robot{};
  std::vector<EntityState> entities;
  double time = 0.0;
};

struct Action {
  double speed = 0.0;
  double heading = 0.0;
  constexpr bool operator==(const Action&) const = default;
};

struct ActionSpaceOptions {
  int speeds = 5;
  int headings = 16;
};

/// Stop action first, then speeds (outer) x headings (inner). Speeds follow
/// v_i = v_pref * (e^{i/S} - 1) / (e - 1), i = 1..S.
inline std::vector<Action> build_action_space(double v_pref, const ActionSpaceOptions& opt = {}) {
  if (!(v_pref > 0.0)) throw ConfigError("v_pref must be > 0");
  std::vector<Action> actions;
  actions.reserve(static_cast<std::size_t>(1 + opt.speeds * opt.headings));
  actions.push_back({0.0, 0.0});
  for (int i = 1; i <= opt.speeds; ++i) {
    const double speed = v_pref * (std::exp(double(i) / opt.speeds) - 1.0) / (std::numbers::e - 1.0);
    for (int k = 0; k < opt.headings; ++k)
      actions.push_back({speed, 2.0 * std::numbers::pi * k / opt.headings});
  }
  return actions;
}

/// Unicycle update with absolute world-frame heading. A zero-speed action
/// keeps the current heading.
inline RobotState step_robot(RobotState s, const Action& a, double dt) {
  if (a.speed > 0.0) s.theta = a.heading;
  s.velocity = {a.speed * std::cos(a.heading), a.speed * std::sin(a.heading)};
  if (a.speed == 0.0) s.velocity = {};
  s.position += s.velocity * dt;
  return s;
}

/// One-step lookahead: robot via step_robot, dynamic entities by constant
/// velocity, obstacles fixed. No collision resolution.
inline JointState propagate_world(const JointState& joint, const Action& a, double dt) {
  JointState next = joint;
  next.robot = step_robot(joint.robot, a, dt);
  for (auto& e : next.entities)
    if (e.type != EntityType::Obstacle) e.position += e.velocity * dt;
  next.time = joint.time + dt;
  return next;
}

}  // namespace hmpdrl
