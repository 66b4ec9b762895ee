#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "hmpdrl/config.hpp"
#include "hmpdrl/crowd.hpp"
#include "hmpdrl/dynamics.hpp"
#include "hmpdrl/features.hpp"
#include "hmpdrl/mapgen.hpp"
#include "hmpdrl/neural.hpp"
#include "hmpdrl/obstacles.hpp"
#include "hmpdrl/planner.hpp"
#include "hmpdrl/reward.hpp"
#include "hmpdrl/rng.hpp"

namespace hmpdrl {

// ---------------------------------------------------------------------------
// Configuration

enum class DemoGuidance { Goal, Path };

struct EnvConfig {
  double robot_radius = 0.3;
  double robot_v_pref = 1.0;
  int K = 2;
  double cp_spacing = 15.0;
  double cp_radius = 5.0;
  CheckpointStrategy cp_strategy = CheckpointStrategy::Sequential;
  double sensor_range = 10.0;
  int max_obstacle_entities = 8;  // <= 0: every cluster in range
  int substeps = 4;
  bool invisible_robot = true;
  bool dynamic_spawning = true;
  double gamma = 0.99;
  ActionSpaceOptions actions{};
  AStarOptions astar{};
  SpawnConfig spawn{};
  OrcaConfig orca{};
  RewardConfig reward{};

  double dt() const { return reward.dt; }
  /// Per-step discount gamma^(dt * v_pref).
  double step_discount() const { return std::pow(gamma, dt() * robot_v_pref); }
};

inline EnvConfig env_config_from(const KeyValueConfig& kv, EnvConfig c = {}) {
  c.robot_radius = kv.get_double("robot.radius", c.robot_radius);
  c.robot_v_pref = kv.get_double("robot.v_pref", c.robot_v_pref);
  c.K = static_cast<int>(kv.get_int("cp.K", c.K));
  c.cp_spacing = kv.get_double("cp.spacing", c.cp_spacing);
  c.cp_radius = kv.get_double("cp.radius", c.cp_radius);
  const std::string strategy = kv.get_string("cp.strategy", c.cp_strategy == CheckpointStrategy::Sequential ? "sequential" : "nearest");
  if (strategy == "sequential") c.cp_strategy = CheckpointStrategy::Sequential;
  else if (strategy == "nearest") c.cp_strategy = CheckpointStrategy::NearestFirst;
  else throw ConfigError("cp.strategy must be sequential or nearest, got '" + strategy + "'");
  c.sensor_range = kv.get_double("sensor_range", c.sensor_range);
  c.max_obstacle_entities = static_cast<int>(kv.get_int("obstacle_entities", c.max_obstacle_entities));
  c.substeps = static_cast<int>(kv.get_int("substeps", c.substeps));
  c.invisible_robot = kv.get_bool("invisible_robot", c.invisible_robot);
  c.dynamic_spawning = kv.get_bool("dynamic_spawning", c.dynamic_spawning);
  c.gamma = kv.get_double("gamma", c.gamma);
  c.actions.speeds = static_cast<int>(kv.get_int("actions.speeds", c.actions.speeds));
  c.actions.headings = static_cast<int>(kv.get_int("actions.headings", c.actions.headings));
  c.astar.diagonal_cost = kv.get_double("astar.diagonal_cost", c.astar.diagonal_cost);
  c.astar.allow_corner_cutting = kv.get_bool("astar.corner_cutting", c.astar.allow_corner_cutting);
  c.spawn = spawn_config_from(kv, c.spawn);
  c.orca = orca_config_from(kv, c.orca);
  c.reward = reward_config_from(kv, c.reward);
  if (!(c.gamma > 0.0 && c.gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
  if (c.K < 1) throw ConfigError("cp.K must be >= 1");
  if (c.substeps < 1) throw ConfigError("substeps must be >= 1");
  if (!(c.robot_radius > 0.0) || !(c.robot_v_pref > 0.0)) throw ConfigError("robot radius and v_pref must be > 0");
  return c;
}

struct TrainConfig {
  double lr_il = 0.01;
  int epochs_il = 200;
  int demos_il = 3000;
  double lr_rl = 0.001;
  int batch = 100;
  double momentum = 0.0;
  double epsilon_start = 0.5;
  double epsilon_end = 0.05;
  int epsilon_decay = 25000;
  int episodes = 60000;
  int workers = 1;
  long long update_interval = 1000;  // <= 0: never sync the target network
  int replay_capacity = 100000;
  int validation_interval = 1024;
  int updates_per_episode = 1;
  bool paper_literal_updates = false;
  DemoGuidance il_guidance = DemoGuidance::Goal;
  double il_safety_space = 0.0;  // extra radius the ORCA demonstrator keeps clear
  std::uint64_t seed = 1;
};

inline TrainConfig train_config_from(const KeyValueConfig& kv, TrainConfig c = {}) {
  c.lr_il = kv.get_double("lr_il", c.lr_il);
  c.epochs_il = static_cast<int>(kv.get_int("epochs_il", c.epochs_il));
  c.demos_il = static_cast<int>(kv.get_int("demos_il", c.demos_il));
  c.lr_rl = kv.get_double("lr_rl", c.lr_rl);
  c.batch = static_cast<int>(kv.get_int("batch", c.batch));
  c.momentum = kv.get_double("momentum", c.momentum);
  c.epsilon_start = kv.get_double("epsilon_start", c.epsilon_start);
  c.epsilon_end = kv.get_double("epsilon_end", c.epsilon_end);
  c.epsilon_decay = static_cast<int>(kv.get_int("epsilon_decay", c.epsilon_decay));
  c.episodes = static_cast<int>(kv.get_int("episodes", c.episodes));
  c.workers = static_cast<int>(kv.get_int("workers", c.workers));
  if (kv.has("update_interval") && (kv.get_string("update_interval", "") == "inf" || kv.get_string("update_interval", "") == "never"))
    c.update_interval = 0;
  else
    c.update_interval = kv.get_int("update_interval", c.update_interval);
  c.replay_capacity = static_cast<int>(kv.get_int("replay_capacity", c.replay_capacity));
  c.validation_interval = static_cast<int>(kv.get_int("validation_interval", c.validation_interval));
  c.updates_per_episode = static_cast<int>(kv.get_int("updates_per_episode", c.updates_per_episode));
  c.paper_literal_updates = kv.get_bool("paper_literal_updates", c.paper_literal_updates);
  const std::string g = kv.get_string("il_guidance", c.il_guidance == DemoGuidance::Goal ? "goal" : "path");
  if (g == "goal") c.il_guidance = DemoGuidance::Goal;
  else if (g == "path") c.il_guidance = DemoGuidance::Path;
  else throw ConfigError("il_guidance must be goal or path, got '" + g + "'");
  c.il_safety_space = kv.get_double("il_safety_space", c.il_safety_space);
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<std::int64_t>(c.seed)));
  if (c.workers < 1) throw ConfigError("workers must be >= 1");
  if (c.batch < 1) throw ConfigError("batch must be >= 1");
  if (c.replay_capacity < 1) throw ConfigError("replay_capacity must be >= 1");
  if (c.epsilon_start < 0.0 || c.epsilon_start > 1.0 || c.epsilon_end < 0.0 || c.epsilon_end > 1.0)
    throw ConfigError("epsilon values must lie in [0, 1]");
  return c;
}

/// Linear decay from start to end over `decay` episodes, flat afterwards.
inline double epsilon_at(long long episode, const TrainConfig& c) {
  if (c.epsilon_decay <= 0 || episode >= c.epsilon_decay) return c.epsilon_end;
  return c.epsilon_start + (c.epsilon_end - c.epsilon_start) * static_cast<double>(episode) / c.epsilon_decay;
}

// ---------------------------------------------------------------------------
// Episode set construction

struct DatasetConfig {
  int width = 200, height = 200;
  double resolution = 0.1;
  double obstacle_fraction = 0.15;
  int footprint_cells = 20;
  double goal_fraction = 0.75;
  DatasetOptions options{};
};

inline DatasetConfig dataset_config_from(const KeyValueConfig& kv, DatasetConfig c = {}) {
  c.width = static_cast<int>(kv.get_int("map.width", c.width));
  c.height = static_cast<int>(kv.get_int("map.height", c.height));
  c.resolution = kv.get_double("map.resolution", c.resolution);
  c.obstacle_fraction = kv.get_double("map.obstacle_fraction", c.obstacle_fraction);
  c.footprint_cells = static_cast<int>(kv.get_int("map.footprint_cells", c.footprint_cells));
  c.goal_fraction = kv.get_double("map.goal_fraction", c.goal_fraction);
  c.options.min_obstacle_fraction = kv.get_double("map.min_obstacle_fraction", c.options.min_obstacle_fraction);
  c.options.max_pairs_per_map = static_cast<int>(kv.get_int("map.max_pairs", c.options.max_pairs_per_map));
  return c;
}

/// Generates maps from consecutive derived seeds until `count` episodes are
/// collected. Maps that fail generation or the dataset filter are skipped.
inline std::vector<EpisodeSpec> build_episode_set(const DatasetConfig& c, int count, std::uint64_t seed) {
  std::vector<EpisodeSpec> out;
  UrbanMapOptions mo;
  mo.resolution = c.resolution;
  const int max_maps = 20 * count + 100;
  for (int m = 0; static_cast<int>(out.size()) < count; ++m) {
    if (m >= max_maps) throw SamplingExhausted("could not collect " + std::to_string(count) + " episodes");
    const std::uint64_t map_seed = derive_seed(seed, static_cast<std::uint64_t>(m));
    OccupancyGrid g;
    try {
      g = generate_urban_map(c.width, c.height, c.obstacle_fraction, map_seed, mo);
    } catch (const GenerationError&) {
      continue;
    }
    for (auto& e : sample_map_episodes(g, c.footprint_cells, c.goal_fraction, derive_seed(map_seed, 7), c.options)) {
      if (static_cast<int>(out.size()) == count) break;
      out.push_back(std::move(e));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Episode execution

enum class EpisodeStatus { Success, Collision, Timeout, Aborted };

inline std::string_view status_name(EpisodeStatus s) {
  switch (s) {
    case EpisodeStatus::Success: return "success";
    case EpisodeStatus::Collision: return "collision";
    case EpisodeStatus::Timeout: return "timeout";
    case EpisodeStatus::Aborted: return "aborted";
  }
  return "?";
}

struct TrajectoryRow {
  int step = 0;
  int id = 0;  // 0 is the robot
  bool robot = false;
  EntityType type = EntityType::Adult;
  Vec2 position{}, velocity{};
  double radius = 0.0;
};

struct StepRecord {
  StateInput state;  // observation the action was chosen from
  int action = 0;
  double reward = 0.0;
  bool terminal = false;
};

struct Experience {
  StateInput state;
  double target = 0.0;
};

struct EpisodeSummary {
  EpisodeStatus status = EpisodeStatus::Aborted;
  EntityType collision_type = EntityType::Obstacle;
  double duration = 0.0;
  double total_reward = 0.0;
  int steps = 0;
  std::vector<int> visited;  // checkpoint indices in visiting order
};

struct EpisodeRun {
  EpisodeSummary summary;
  std::vector<StepRecord> steps;
  std::vector<TrajectoryRow> trajectory;
  GlobalPath path;
  std::vector<Checkpoint> checkpoints;
};

/// Static per-episode world: inflated planning grid, obstacle geometry,
/// global path and checkpoints.
struct EpisodeWorld {
  const EpisodeSpec* spec = nullptr;
  ObstacleField field;
  std::optional<GlobalPath> path;
  std::vector<Checkpoint> checkpoints;
  Checkpoint fallback;

  EpisodeWorld(const EpisodeSpec& s, const EnvConfig& env) : spec(&s), field(s.grid) {
    const OccupancyGrid inflated = inflate(s.grid, s.inflation_cells);
    const Cell a = s.grid.world_to_cell(s.start), b = s.grid.world_to_cell(s.goal);
    if (inflated.in_bounds(a) && inflated.in_bounds(b) && !inflated.occupied(a) && !inflated.occupied(b))
      path = astar(inflated, a, b, env.astar);
    if (path) {
      // The planner works between cell centers; anchor the polyline at the
      // true start and goal.
      path->points.front() = s.start;
      path->points.back() = s.goal;
      checkpoints = place_checkpoints(*path, env.cp_spacing, env.cp_radius);
    }
    fallback = {s.goal, env.cp_radius, -1, false};
  }
};

/// Mutable per-episode progress along the checkpoint list.
struct CheckpointProgress {
  int last = -1;  // m: index of the last visited checkpoint
  std::vector<int> visited;

  /// Highest-index eligible checkpoint (unvisited, index > m) whose circle
  /// strictly contains p.
  std::optional<int> entered(const std::vector<Checkpoint>& cps, Vec2 p) const {
    std::optional<int> hit;
    for (int i = last + 1; i < static_cast<int>(cps.size()); ++i)
      if (distance(p, cps[static_cast<std::size_t>(i)].center) < cps[static_cast<std::size_t>(i)].radius) hit = i;
    return hit;
  }
  void visit(int i) {
    last = i;
    visited.push_back(i);
  }
};

/// Entities the robot observes: dynamic agents within sensor range (in list
/// order), then the nearest point of each nearby obstacle cluster.
inline std::vector<EntityState> observed_entities(const RobotState& robot, const std::vector<EntityState>& agents,
                                                  const ObstacleField& field, const EnvConfig& env) {
  std::vector<EntityState> out;
  for (const auto& a : agents)
    if (distance(a.position, robot.position) <= env.sensor_range) out.push_back(a);
  auto obs = field.obstacle_entities(robot.position, env.sensor_range, env.max_obstacle_entities);
  out.insert(out.end(), obs.begin(), obs.end());
  return out;
}

inline StateInput observe(const JointState& joint, const std::vector<Checkpoint>& selected, const EnvConfig& env,
                          double obstacle_radius) {
  StateInput in = assemble_network_input(joint, selected);
  ensure_nonempty(in, joint.robot, env.sensor_range, obstacle_radius);
  return in;
}

/// Distances over one step for the robot moving from -> to while dynamic
/// entities move by their velocity; obstacles come from the field.
inline TypeDistances step_distances(Vec2 from, Vec2 to, double radius, const std::vector<EntityState>& before,
                                    const std::vector<EntityState>& after, const ObstacleField& field, int substeps) {
  std::vector<EntitySweep> sweeps;
  sweeps.reserve(before.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    if (before[i].type == EntityType::Obstacle) continue;
    sweeps.push_back({before[i].position, after[i].position, before[i].radius, before[i].type});
  }
  return sweep_distances(from, to, radius, sweeps, &field, substeps);
}

/// Fills the non-terminal-dependent parts of a step outcome.
inline StepOutcome make_outcome(const TypeDistances& td, Vec2 robot_pos, double t, const EpisodeSpec& spec,
                                const EnvConfig& env) {
  StepOutcome o;
  std::tie(o.closest_type, o.d_min) = td.closest();
  o.d_g = distance(robot_pos, spec.goal);
  o.d_max = std::max(distance(spec.start, spec.goal), 1e-9);
  o.reached_goal = o.d_g <= env.robot_radius;
  o.timed_out = t >= env.reward.t_max - 1e-9 && !o.reached_goal;
  return o;
}

inline bool is_terminal(const StepOutcome& o) { return o.timed_out || o.collided() || o.reached_goal; }

struct ActionChoice {
  int index = 0;
  bool explored = false;
};

/// Epsilon-greedy one-step lookahead over the full action space:
/// argmax_a R(s, a) + gamma^(dt v_pref) V(s'), ties to the lowest index.
/// Lookahead successors that are terminal contribute no future value.
inline ActionChoice select_action(const JointState& joint, const EpisodeWorld& world,
                                  const CheckpointProgress& progress, const std::vector<Action>& actions,
                                  const nn::ValueEstimator& value, double epsilon, Rng& rng, const EnvConfig& env) {
  const double u = uniform(rng, 0.0, 1.0);
  const int explore_index = uniform_int(rng, 0, static_cast<int>(actions.size()) - 1);
  if (u < epsilon) return {explore_index, true};

  const EpisodeSpec& spec = *world.spec;
  const double dt = env.dt();
  std::vector<double> reward(actions.size());
  std::vector<bool> terminal(actions.size());
  std::vector<StateInput> next(actions.size());
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const JointState nj = propagate_world(joint, actions[i], dt);
    const TypeDistances td =
        step_distances(joint.robot.position, nj.robot.position, joint.robot.radius, joint.entities, nj.entities,
                       world.field, env.substeps);
    StepOutcome o = make_outcome(td, nj.robot.position, nj.time, spec, env);
    CheckpointProgress p = progress;
    if (auto k = p.entered(world.checkpoints, nj.robot.position)) {
      o.entered_checkpoint = *k;
      p.visit(*k);
    }
    reward[i] = total_reward(o, nj.time, env.reward);
    terminal[i] = is_terminal(o);
    const auto sel = select_checkpoints(world.checkpoints, p.last, env.K, nj.robot.position, env.cp_strategy,
                                        world.fallback);
    next[i] = observe(nj, sel, env, world.field.cell_disc_radius());
  }
  std::vector<const StateInput*> ptrs;
  for (const auto& s : next) ptrs.push_back(&s);
  const Eigen::VectorXd v = value.values(ptrs);
  const double disc = env.step_discount();
  int best = 0;
  double best_q = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const double q = reward[i] + (terminal[i] ? 0.0 : disc * v[static_cast<Eigen::Index>(i)]);
    if (q > best_q) {
      best_q = q;
      best = static_cast<int>(i);
    }
  }
  return {best, false};
}

inline int nearest_action(const std::vector<Action>& actions, Vec2 velocity) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const Vec2 v{actions[i].speed * std::cos(actions[i].heading), actions[i].speed * std::sin(actions[i].heading)};
    const double d = (v - velocity).norm_sq();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

/// Point on the global path about `lookahead` metres past the path point
/// nearest to p.
inline Vec2 path_carrot(const GlobalPath& path, Vec2 p, double lookahead) {
  std::size_t nearest = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < path.points.size(); ++i) {
    const double d = (path.points[i] - p).norm_sq();
    if (d < best) {
      best = d;
      nearest = i;
    }
  }
  for (std::size_t i = nearest; i < path.points.size(); ++i)
    if (distance(path.points[i], p) >= lookahead) return path.points[i];
  return path.points.back();
}

/// Which controller drives the robot.
struct Controller {
  const nn::ValueEstimator* value = nullptr;  // null: ORCA demonstrator
  double epsilon = 0.0;
  DemoGuidance guidance = DemoGuidance::Goal;
  double safety_space = 0.0;
};

struct RunOptions {
  bool record_trajectory = false;
  bool record_steps = true;
};

inline void log_world(std::vector<TrajectoryRow>& log, int step, const RobotState& r, const std::vector<EntityState>& agents) {
  log.push_back({step, 0, true, EntityType::Adult, r.position, r.velocity, r.radius});
  for (const auto& a : agents) log.push_back({step, a.id, false, a.type, a.position, a.velocity, a.radius});
}

/// Runs one episode: plan once, place checkpoints, then observe / act /
/// simulate until success, collision or timeout.
inline EpisodeRun run_episode(const EpisodeSpec& spec, const EnvConfig& env, const Controller& ctl,
                              std::uint64_t seed, const RunOptions& opt = {}) {
  EpisodeRun run;
  EpisodeWorld world(spec, env);
  if (!world.path) {
    run.summary.status = EpisodeStatus::Aborted;
    return run;
  }
  run.path = *world.path;
  run.checkpoints = world.checkpoints;

  const double dt = env.dt();
  const auto actions = build_action_space(env.robot_v_pref, env.actions);
  Rng rng(derive_seed(seed, 0xac7104));
  RobotState robot;
  robot.position = spec.start;
  robot.goal = spec.goal;
  robot.radius = env.robot_radius;
  robot.v_pref = env.robot_v_pref;
  robot.theta = std::atan2(spec.goal.y - spec.start.y, spec.goal.x - spec.start.x);

  std::vector<EntityState> agents;
  int next_id = 1;
  int wave = 0;
  auto spawn = [&]() {
    auto res = spawn_wave(env.spawn, robot, &world.field, agents, derive_seed(seed, 0x5ba77, static_cast<std::uint64_t>(wave++)),
                          next_id);
    agents.insert(agents.end(), res.agents.begin(), res.agents.end());
  };
  if (env.dynamic_spawning) spawn();

  CheckpointProgress progress;
  const double obstacle_radius = world.field.cell_disc_radius();
  if (opt.record_trajectory) log_world(run.trajectory, 0, robot, agents);

  auto joint_now = [&](double t) {
    JointState j;
    j.robot = robot;
    j.entities = observed_entities(robot, agents, world.field, env);
    j.time = t;
    return j;
  };

  // Already at the goal: a single terminal success step.
  if (distance(robot.position, spec.goal) <= env.robot_radius) {
    const JointState j = joint_now(0.0);
    StepOutcome o;
    o.reached_goal = true;
    o.d_g = distance(robot.position, spec.goal);
    o.d_max = std::max(distance(spec.start, spec.goal), 1e-9);
    const double r = total_reward(o, 0.0, env.reward);
    const auto sel = select_checkpoints(world.checkpoints, -1, env.K, robot.position, env.cp_strategy, world.fallback);
    if (opt.record_steps) run.steps.push_back({observe(j, sel, env, obstacle_radius), 0, r, true});
    run.summary.status = EpisodeStatus::Success;
    run.summary.total_reward = r;
    return run;
  }

  double t = 0.0;
  for (int step = 1;; ++step) {
    const JointState joint = joint_now(t);
    const auto sel = select_checkpoints(world.checkpoints, progress.last, env.K, robot.position, env.cp_strategy,
                                        world.fallback);
    StateInput state = observe(joint, sel, env, obstacle_radius);

    int a = 0;
    if (ctl.value) {
      a = select_action(joint, world, progress, actions, *ctl.value, ctl.epsilon, rng, env).index;
    } else {
      EntityState self;
      self.position = robot.position;
      self.velocity = robot.velocity;
      self.radius = robot.radius + ctl.safety_space;
      self.v_pref = robot.v_pref;
      self.goal = ctl.guidance == DemoGuidance::Path ? path_carrot(run.path, robot.position, 2.0 * robot.radius + 1.0)
                                                     : spec.goal;
      const Vec2 v = orca_velocity(self, agents, &world.field, dt, env.orca);
      a = nearest_action(actions, v);
    }

    const RobotState before = robot;
    auto moved = advance_crowd(agents, &before, &world.field, dt, env.invisible_robot, env.orca);
    robot = step_robot(robot, actions[static_cast<std::size_t>(a)], dt);
    t = step * dt;

    std::vector<EntitySweep> sweeps;
    for (std::size_t i = 0; i < agents.size(); ++i)
      sweeps.push_back({agents[i].position, moved[i].position, agents[i].radius, agents[i].type});
    const TypeDistances td =
        sweep_distances(before.position, robot.position, robot.radius, sweeps, &world.field, env.substeps);
    StepOutcome o = make_outcome(td, robot.position, t, spec, env);
    if (auto k = progress.entered(world.checkpoints, robot.position)) {
      o.entered_checkpoint = *k;
      progress.visit(*k);
    }
    const double r = total_reward(o, t, env.reward);
    const bool terminal = is_terminal(o);
    run.summary.total_reward += r;
    if (opt.record_steps) run.steps.push_back({std::move(state), a, r, terminal});

    agents = std::move(moved);
    remove_expired(agents);
    if (env.dynamic_spawning && step % env.spawn.interval_steps == 0) spawn();
    if (opt.record_trajectory) log_world(run.trajectory, step, robot, agents);

    if (terminal) {
      run.summary.steps = step;
      run.summary.duration = t;
      if (o.timed_out) {
        run.summary.status = EpisodeStatus::Timeout;
      } else if (o.collided()) {
        run.summary.status = EpisodeStatus::Collision;
        run.summary.collision_type = o.closest_type;
      } else {
        run.summary.status = EpisodeStatus::Success;
      }
      break;
    }
  }
  run.summary.visited = progress.visited;
  return run;
}

/// Bootstrapped targets r_t + gamma^(dt v_pref) V_target(s_{t+1}); the
/// terminal step's target is its reward.
inline std::vector<Experience> td_experiences(const EpisodeRun& run, const nn::ValueEstimator& target, double discount) {
  std::vector<Experience> out;
  const auto& st = run.steps;
  if (st.empty()) return out;
  std::vector<const StateInput*> next;
  for (std::size_t i = 0; i + 1 < st.size(); ++i) next.push_back(&st[i + 1].state);
  Eigen::VectorXd v = next.empty() ? Eigen::VectorXd() : target.values(next);
  for (std::size_t i = 0; i < st.size(); ++i) {
    const bool last = i + 1 == st.size() || st[i].terminal;
    out.push_back({st[i].state, st[i].reward + (last ? 0.0 : discount * v[static_cast<Eigen::Index>(i)])});
  }
  return out;
}

/// Discounted returns sum_{k>=t} discount^(k-t) r_k.
inline std::vector<Experience> monte_carlo_experiences(const EpisodeRun& run, double discount) {
  std::vector<Experience> out(run.steps.size());
  double g = 0.0;
  for (std::size_t i = run.steps.size(); i-- > 0;) {
    g = run.steps[i].reward + discount * g;
    out[i] = {run.steps[i].state, g};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Replay memory

class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("replay capacity must be > 0");
  }

  void push(Experience e) {
    if (items_.size() == capacity_) items_.pop_front();
    items_.push_back(std::move(e));
  }
  void push_all(std::vector<Experience> es) {
    for (auto& e : es) push(std::move(e));
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Experience& operator[](std::size_t i) const { return items_[i]; }

  /// Uniform sample without replacement (the whole buffer if smaller).
  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const {
    std::vector<std::size_t> all(items_.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    n = std::min(n, all.size());
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = i + static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(all.size() - i) - 1));
      std::swap(all[i], all[j]);
    }
    all.resize(n);
    return all;
  }

 private:
  std::size_t capacity_;
  std::deque<Experience> items_;
};

// ---------------------------------------------------------------------------
// Parallel helpers

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Results must be
/// written to per-index slots, which keeps outputs independent of scheduling.
inline void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  workers = std::max(1, std::min(workers, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Supervised fitting and imitation

class Optimizer {
 public:
  Optimizer(double momentum = 0.0) : momentum_(momentum) {}

  /// One minibatch step: plain SGD, or SGD with momentum when configured.
  double step(nn::ValueNet& net, std::span<const StateInput* const> states, std::span<const double> targets, double lr) {
    if (momentum_ == 0.0) return net.sgd_step(states, targets, lr);
    auto g = net.zero_grad();
    nn::ValueNet::Cache c;
    const double loss = net.loss_and_grad(states, targets, nn::Mode::Train, &g, &c);
    auto params = net.parameters();
    auto grads = nn::ValueNet::gradients(g);
    if (velocity_.empty())
      for (const auto& p : params) velocity_.emplace_back(p.size(), 0.0);
    for (std::size_t i = 0; i < params.size(); ++i)
      for (std::size_t j = 0; j < params[i].size(); ++j) {
        velocity_[i][j] = momentum_ * velocity_[i][j] + grads[i][j];
        params[i][j] -= lr * velocity_[i][j];
      }
    net.embed().update_running_stats(c.embed);
    net.pairwise().update_running_stats(c.pairwise);
    net.attention().update_running_stats(c.attention);
    net.value().update_running_stats(c.value);
    return loss;
  }

 private:
  double momentum_;
  std::vector<std::vector<double>> velocity_;
};

/// Minibatch step on sampled replay entries.
inline double replay_step(nn::ValueNet& net, Optimizer& opt, const ReplayMemory& memory, int batch, double lr, Rng& rng) {
  const auto idx = memory.sample_indices(static_cast<std::size_t>(batch), rng);
  if (idx.empty()) return 0.0;
  std::vector<const StateInput*> states;
  std::vector<double> targets;
  for (auto i : idx) {
    states.push_back(&memory[i].state);
    targets.push_back(memory[i].target);
  }
  return opt.step(net, states, targets, lr);
}

/// Epochs of shuffled minibatch SGD over a fixed experience set; returns
/// the mean training loss per epoch.
inline std::vector<double> fit(nn::ValueNet& net, Optimizer& opt, const std::vector<Experience>& data, int epochs,
                               int batch, double lr, Rng& rng) {
  std::vector<double> losses;
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int e = 0; e < epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    int count = 0;
    for (std::size_t s = 0; s < order.size(); s += static_cast<std::size_t>(batch)) {
      const std::size_t end = std::min(order.size(), s + static_cast<std::size_t>(batch));
      if (end - s < 2 && order.size() >= 2) continue;  // batch norm needs two samples
      std::vector<const StateInput*> states;
      std::vector<double> targets;
      for (std::size_t i = s; i < end; ++i) {
        states.push_back(&data[order[i]].state);
        targets.push_back(data[order[i]].target);
      }
      sum += opt.step(net, states, targets, lr);
      ++count;
    }
    losses.push_back(count ? sum / count : 0.0);
  }
  return losses;
}

/// ORCA-driven demonstrations turned into Monte-Carlo targets.
inline std::vector<Experience> collect_demonstrations(const std::vector<EpisodeSpec>& specs, int count,
                                                      const EnvConfig& env, const TrainConfig& tc) {
  std::vector<std::vector<Experience>> per(static_cast<std::size_t>(std::max(count, 0)));
  Controller demo;
  demo.guidance = tc.il_guidance;
  demo.safety_space = tc.il_safety_space;
  parallel_for(count, tc.workers, [&](int i) {
    const auto& spec = specs[static_cast<std::size_t>(i) % specs.size()];
    const auto run = run_episode(spec, env, demo, derive_seed(tc.seed, 0xde70, static_cast<std::uint64_t>(i)));
    per[static_cast<std::size_t>(i)] = monte_carlo_experiences(run, env.step_discount());
  });
  std::vector<Experience> out;
  for (auto& p : per)
    for (auto& e : p) out.push_back(std::move(e));
  return out;
}

struct ImitationResult {
  std::vector<Experience> demonstrations;
  std::vector<double> epoch_loss;
};

inline ImitationResult imitation_phase(nn::ValueNet& net, const std::vector<EpisodeSpec>& specs, const EnvConfig& env,
                                       const TrainConfig& tc) {
  if (specs.empty()) throw ConfigError("imitation needs at least one episode spec");
  ImitationResult res;
  res.demonstrations = collect_demonstrations(specs, tc.demos_il, env, tc);
  Optimizer opt(tc.momentum);
  Rng rng(derive_seed(tc.seed, 0x11));
  res.epoch_loss = fit(net, opt, res.demonstrations, tc.epochs_il, tc.batch, tc.lr_il, rng);
  return res;
}

// ---------------------------------------------------------------------------
// Deep V-learning

struct CurveRow {
  long long episode = 0;
  double sr = 0, cr = 0, cr_a = 0, cr_b = 0, cr_c = 0, cr_o = 0, mean_reward = 0, ws = 0;
};

struct WaveStats {
  long long episode = 0;  // episodes completed after the wave
  int successes = 0, collisions = 0;
  double mean_reward = 0.0;
  double loss = 0.0;
};

struct TrainHooks {
  /// Called at each validation point with the current network; returns the
  /// curve row to record.
  std::function<CurveRow(const nn::ValueNet&, long long episode)> validate;
  std::function<void(const WaveStats&)> on_wave;
  std::function<void(const nn::ValueNet&, long long episode)> on_checkpoint;
};

struct TrainResult {
  std::vector<CurveRow> curves;
  std::vector<WaveStats> waves;
  std::uint64_t target_hash = 0;  // weight hash of the final target network
  int target_syncs = 0;
};

/// Parallel deep V-learning. `net` arrives warm-started (imitation) and the
/// replay memory arrives seeded with demonstrations.
inline TrainResult train(nn::ValueNet& net, ReplayMemory& memory, const std::vector<EpisodeSpec>& specs,
                         const EnvConfig& env, const TrainConfig& tc, const TrainHooks& hooks = {}) {
  if (specs.empty()) throw ConfigError("training needs at least one episode spec");
  TrainResult res;
  nn::ValueNet target = net;
  Optimizer opt(tc.momentum);
  Rng sample_rng(derive_seed(tc.seed, 0x5a3b1e));
  const double discount = env.step_discount();

  for (long long episode = 0; episode < tc.episodes;) {
    const int wave = static_cast<int>(std::min<long long>(tc.workers, tc.episodes - episode));
    std::vector<EpisodeRun> runs(static_cast<std::size_t>(wave));
    std::vector<std::vector<Experience>> exps(static_cast<std::size_t>(wave));
    const nn::ValueNet& snapshot = net;
    const nn::ValueNet& target_snapshot = target;
    parallel_for(wave, tc.workers, [&](int w) {
      const long long k = episode + w;
      Controller ctl{&snapshot, epsilon_at(k, tc), tc.il_guidance, tc.il_safety_space};
      const auto& spec = specs[static_cast<std::size_t>(k) % specs.size()];
      runs[static_cast<std::size_t>(w)] =
          run_episode(spec, env, ctl, derive_seed(tc.seed, static_cast<std::uint64_t>(k)));
      exps[static_cast<std::size_t>(w)] = td_experiences(runs[static_cast<std::size_t>(w)], target_snapshot, discount);
    });

    WaveStats ws;
    for (int w = 0; w < wave; ++w) {
      const auto& s = runs[static_cast<std::size_t>(w)].summary;
      ws.successes += s.status == EpisodeStatus::Success;
      ws.collisions += s.status == EpisodeStatus::Collision;
      ws.mean_reward += s.total_reward / wave;
      memory.push_all(std::move(exps[static_cast<std::size_t>(w)]));
    }

    const int updates = tc.paper_literal_updates ? 1 : wave * tc.updates_per_episode;
    double loss = 0.0;
    for (int u = 0; u < updates; ++u) loss += replay_step(net, opt, memory, tc.batch, tc.lr_rl, sample_rng);
    ws.loss = updates ? loss / updates : 0.0;

    const long long before = episode;
    episode += wave;
    ws.episode = episode;
    res.waves.push_back(ws);
    if (hooks.on_wave) hooks.on_wave(ws);

    if (tc.update_interval > 0 && episode / tc.update_interval > before / tc.update_interval) {
      target = net;
      ++res.target_syncs;
    }
    if (tc.validation_interval > 0 && episode / tc.validation_interval > before / tc.validation_interval) {
      if (hooks.validate) res.curves.push_back(hooks.validate(net, episode));
      if (hooks.on_checkpoint) hooks.on_checkpoint(net, episode);
    }
  }
  res.target_hash = nn::weight_hash(target);
  return res;
}

}  // namespace hmpdrl
