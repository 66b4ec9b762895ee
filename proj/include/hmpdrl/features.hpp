#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <ostream>
#include <span>
#include <vector>

#include "hmpdrl/config.hpp"
#include "hmpdrl/dynamics.hpp"
#include "hmpdrl/error.hpp"
#include "hmpdrl/planner.hpp"

namespace hmpdrl {

inline constexpr int kBaseSelfDim = 6;
inline constexpr int kCheckpointFeatureDim = 4;
inline constexpr int kEntityObservableDim = 7;
inline constexpr int kEntityFeatureDim = kEntityObservableDim + kNumEntityTypes;

constexpr int self_state_dim(int K) { return kBaseSelfDim + kCheckpointFeatureDim * K; }
constexpr int row_dim(int K) { return self_state_dim(K) + kEntityFeatureDim; }

/// Rotation into the robot-centric frame (x-axis towards the goal).
struct RobotFrame {
  double phi = 0.0, cos_phi = 1.0, sin_phi = 0.0;

  static RobotFrame of(const RobotState& r) {
    const double phi = std::atan2(r.goal.y - r.position.y, r.goal.x - r.position.x);
    return {phi, std::cos(phi), std::sin(phi)};
  }
  Vec2 rotate(Vec2 v) const { return rotate_into(v, cos_phi, sin_phi); }
};

/// [p_x, p_y, v_x, v_y, r_i, d_i, r_i + r] in the robot frame, then the one-hot type.
struct EntityFeature {
  std::array<double, kEntityObservableDim> observable{};
  std::array<double, kNumEntityTypes> one_hot{};
};

struct RotatedState {
  std::array<double, kBaseSelfDim> self{};  // d_g, v_pref, theta, r, v_x, v_y
  std::vector<EntityFeature> entities;
};

inline EntityFeature entity_feature(const RobotState& robot, const RobotFrame& frame, const EntityState& e) {
  EntityFeature f;
  const Vec2 rel = frame.rotate(e.position - robot.position);
  const Vec2 vel = frame.rotate(e.velocity);
  f.observable = {rel.x, rel.y, vel.x, vel.y, e.radius, rel.norm(), e.radius + robot.radius};
  f.one_hot[static_cast<std::size_t>(type_index(e.type))] = 1.0;
  return f;
}

inline RotatedState rotate_to_robot_frame(const JointState& joint) {
  const RobotState& r = joint.robot;
  const RobotFrame frame = RobotFrame::of(r);
  RotatedState out;
  const Vec2 v = frame.rotate(r.velocity);
  out.self = {distance(r.position, r.goal), r.v_pref, wrap_angle(r.theta - frame.phi), r.radius, v.x, v.y};
  out.entities.reserve(joint.entities.size());
  for (const auto& e : joint.entities) out.entities.push_back(entity_feature(r, frame, e));
  return out;
}

/// Per checkpoint: [d, rotated dx, rotated dy, radius]; concatenated.
inline std::vector<double> checkpoint_features(const RobotState& robot, std::span<const Checkpoint> selected) {
  const RobotFrame frame = RobotFrame::of(robot);
  std::vector<double> f;
  f.reserve(selected.size() * kCheckpointFeatureDim);
  for (const auto& c : selected) {
    const Vec2 delta = c.center - robot.position;
    const Vec2 rot = frame.rotate(delta);
    f.push_back(std::sqrt(delta.x * delta.x + delta.y * delta.y));
    f.push_back(rot.x);
    f.push_back(rot.y);
    f.push_back(c.radius);
  }
  return f;
}

/// Value-network input: the extended self-state and one row per entity,
/// row = self ++ observable ++ one-hot, stored row-major.
struct StateInput {
  std::vector<double> self;
  std::vector<double> rows;
  int n = 0;

  int self_dim() const { return static_cast<int>(self.size()); }
  int row_width() const { return self_dim() + kEntityFeatureDim; }
  std::span<const double> row(int i) const {
    return {rows.data() + static_cast<std::size_t>(i) * row_width(), static_cast<std::size_t>(row_width())};
  }
};

inline void append_row(StateInput& in, const EntityFeature& f) {
  in.rows.insert(in.rows.end(), in.self.begin(), in.self.end());
  in.rows.insert(in.rows.end(), f.observable.begin(), f.observable.end());
  in.rows.insert(in.rows.end(), f.one_hot.begin(), f.one_hot.end());
  ++in.n;
}

inline StateInput assemble_network_input(const JointState& joint, std::span<const Checkpoint> selected) {
  const RotatedState rot = rotate_to_robot_frame(joint);
  StateInput in;
  in.self.assign(rot.self.begin(), rot.self.end());
  const auto cp = checkpoint_features(joint.robot, selected);
  in.self.insert(in.self.end(), cp.begin(), cp.end());
  in.rows.reserve(rot.entities.size() * static_cast<std::size_t>(in.row_width()));
  for (const auto& e : rot.entities) append_row(in, e);
  return in;
}

/// The attention pooling needs at least one row: an empty scene gets one
/// synthetic obstacle straight ahead at the sensor range.
inline void ensure_nonempty(StateInput& in, const RobotState& robot, double sensor_range, double obstacle_radius) {
  if (in.n > 0) return;
  EntityFeature f;
  f.observable = {sensor_range, 0.0, 0.0, 0.0, obstacle_radius, sensor_range, obstacle_radius + robot.radius};
  f.one_hot[static_cast<std::size_t>(type_index(EntityType::Obstacle))] = 1.0;
  append_row(in, f);
}

/// Debug dump of the row matrix as CSV (one row per entity).
inline void write_rows_csv(std::ostream& out, const StateInput& in) {
  for (int i = 0; i < in.n; ++i) {
    const auto r = in.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) out << (j ? "," : "") << format_double(r[j]);
    out << '\n';
  }
}

}  // namespace hmpdrl
