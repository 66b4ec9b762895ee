#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hmpdrl/config.hpp"
#include "hmpdrl/error.hpp"
#include "hmpdrl/grid.hpp"
#include "hmpdrl/training.hpp"

namespace hmpdrl {

/// SR - CR(A) - 2 CR(B) - 4 CR(C) - 0.5 CR(O).
inline double weighted_score(double sr, double cr_a, double cr_b, double cr_c, double cr_o) {
  return sr - cr_a - 4.0 * cr_c - 2.0 * cr_b - 0.5 * cr_o;
}

inline constexpr double kDangerDistance = 0.30;

/// Robot-to-agent surface distance for every (step, agent) pair of the given
/// type in a trajectory log.
inline std::vector<double> surface_distances(const std::vector<TrajectoryRow>& log, EntityType type) {
  std::vector<double> out;
  const TrajectoryRow* robot = nullptr;
  for (const auto& row : log) {
    if (row.robot) {
      robot = &row;
      continue;
    }
    if (!robot || robot->step != row.step || row.type != type) continue;
    out.push_back(distance(robot->position, row.position) - robot->radius - row.radius);
  }
  return out;
}

/// Mean of the surface distances below 0.30 m; empty when there are none.
inline std::optional<double> danger_distance(std::span<const double> distances) {
  double sum = 0.0;
  int n = 0;
  for (double d : distances)
    if (d < kDangerDistance) {
      sum += d;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return sum / n;
}

inline std::optional<double> danger_distance(const std::vector<TrajectoryRow>& log, EntityType type) {
  const auto d = surface_distances(log, type);
  return danger_distance(d);
}

struct EpisodeResult {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  EpisodeSummary summary;
  std::array<std::vector<double>, 3> danger{};  // per dynamic type, distances < 0.30 m
};

struct MetricsReport {
  int episodes = 0;  // denominator
  int aborted = 0;
  double sr = 0, cr = 0, timeout = 0, aborted_rate = 0;
  std::array<double, 4> cr_type{};  // A, B, C, O
  std::optional<double> time;       // mean over successes
  std::array<std::optional<double>, 3> dd{};  // A, B, C
  double ws = 0;
  double mean_reward = 0;

  bool operator==(const MetricsReport&) const = default;
};

/// Aggregates episode results. Aborted episodes are reported separately and
/// left out of the denominator unless `strict`.
inline MetricsReport summarize(const std::vector<EpisodeResult>& results, bool strict = false) {
  MetricsReport m;
  int success = 0, timeout = 0;
  std::array<int, 4> coll{};
  double time_sum = 0.0, reward_sum = 0.0;
  std::array<double, 3> dd_sum{};
  std::array<int, 3> dd_n{};
  for (const auto& r : results) {
    const auto& s = r.summary;
    if (s.status == EpisodeStatus::Aborted) {
      ++m.aborted;
      continue;
    }
    reward_sum += s.total_reward;
    if (s.status == EpisodeStatus::Success) {
      ++success;
      time_sum += s.duration;
    } else if (s.status == EpisodeStatus::Collision) {
      ++coll[static_cast<std::size_t>(type_index(s.collision_type))];
    } else {
      ++timeout;
    }
    for (std::size_t t = 0; t < 3; ++t)
      for (double d : r.danger[t]) {
        dd_sum[t] += d;
        ++dd_n[t];
      }
  }
  const int counted = static_cast<int>(results.size()) - m.aborted;
  m.episodes = strict ? static_cast<int>(results.size()) : counted;
  if (m.episodes == 0) throw Error("no episodes to evaluate");
  const double n = m.episodes;
  m.sr = success / n;
  for (std::size_t t = 0; t < 4; ++t) m.cr_type[t] = coll[t] / n;
  m.cr = (coll[0] + coll[1] + coll[2] + coll[3]) / n;
  m.timeout = timeout / n;
  m.aborted_rate = strict ? m.aborted / n : 0.0;
  if (success) m.time = time_sum / success;
  for (std::size_t t = 0; t < 3; ++t)
    if (dd_n[t]) m.dd[t] = dd_sum[t] / dd_n[t];
  m.ws = weighted_score(m.sr, m.cr_type[0], m.cr_type[1], m.cr_type[2], m.cr_type[3]);
  m.mean_reward = counted ? reward_sum / counted : 0.0;
  return m;
}

struct EvalOptions {
  int workers = 1;
  bool strict = false;
  bool keep_runs = false;  // keep full trajectories in the returned runs
};

struct Evaluation {
  MetricsReport report;
  std::vector<EpisodeResult> results;
  std::vector<EpisodeRun> runs;
};

inline EpisodeResult result_of(const EpisodeRun& run, std::size_t index, std::uint64_t seed) {
  EpisodeResult r{index, seed, run.summary, {}};
  for (std::size_t t = 0; t < 3; ++t)
    for (double d : surface_distances(run.trajectory, static_cast<EntityType>(t)))
      if (d < kDangerDistance) r.danger[t].push_back(d);
  return r;
}

/// Runs every episode greedily (epsilon 0) with its own seed. A null value
/// estimator drives the robot with the ORCA demonstrator.
inline Evaluation evaluate(const nn::ValueEstimator* value, const std::vector<EpisodeSpec>& specs, const EnvConfig& env,
                           const EvalOptions& opt = {}, DemoGuidance guidance = DemoGuidance::Goal,
                           double safety_space = 0.0) {
  if (specs.empty()) throw Error("empty episode set");
  Evaluation ev;
  ev.results.resize(specs.size());
  if (opt.keep_runs) ev.runs.resize(specs.size());
  Controller ctl{value, 0.0, guidance, safety_space};
  parallel_for(static_cast<int>(specs.size()), opt.workers, [&](int i) {
    const auto& spec = specs[static_cast<std::size_t>(i)];
    RunOptions ro;
    ro.record_trajectory = true;
    ro.record_steps = false;
    EpisodeRun run = run_episode(spec, env, ctl, spec.seed, ro);
    ev.results[static_cast<std::size_t>(i)] = result_of(run, static_cast<std::size_t>(i), spec.seed);
    if (opt.keep_runs) ev.runs[static_cast<std::size_t>(i)] = std::move(run);
  });
  ev.report = summarize(ev.results, opt.strict);
  return ev;
}

inline CurveRow curve_row(const MetricsReport& m, long long episode) {
  return {episode, m.sr, m.cr, m.cr_type[0], m.cr_type[1], m.cr_type[2], m.cr_type[3], m.mean_reward, m.ws};
}

// ---------------------------------------------------------------------------
// Output files

inline std::string fmt_opt(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

inline void write_curves_header(std::ostream& out) { out << "episode,sr,cr,cr_a,cr_b,cr_c,cr_o,mean_reward,ws\n"; }

inline void write_curve_row(std::ostream& out, const CurveRow& r) {
  out << r.episode << ',' << format_double(r.sr) << ',' << format_double(r.cr) << ',' << format_double(r.cr_a) << ','
      << format_double(r.cr_b) << ',' << format_double(r.cr_c) << ',' << format_double(r.cr_o) << ','
      << format_double(r.mean_reward) << ',' << format_double(r.ws) << '\n';
}

/// Per-episode CSV: episode,seed,status,collision_type,duration,total_reward,steps,checkpoints_visited
inline void write_episode_csv(std::ostream& out, const std::vector<EpisodeResult>& results) {
  out << "episode,seed,status,collision_type,duration,total_reward,steps,checkpoints_visited\n";
  for (const auto& r : results) {
    const auto& s = r.summary;
    out << r.index << ',' << r.seed << ',' << status_name(s.status) << ','
        << (s.status == EpisodeStatus::Collision ? type_name(s.collision_type) : "") << ','
        << format_double(s.duration) << ',' << format_double(s.total_reward) << ',' << s.steps << ','
        << s.visited.size() << '\n';
  }
}

inline const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{"sr", "cr", "cr_a", "cr_b", "cr_c", "cr_o", "time", "dd_a",
                                              "dd_b", "dd_c", "ws", "timeout", "mean_reward", "episodes", "aborted"};
  return names;
}

inline std::vector<std::string> metric_values(const MetricsReport& m) {
  return {format_double(m.sr), format_double(m.cr), format_double(m.cr_type[0]), format_double(m.cr_type[1]),
          format_double(m.cr_type[2]), format_double(m.cr_type[3]), fmt_opt(m.time), fmt_opt(m.dd[0]),
          fmt_opt(m.dd[1]), fmt_opt(m.dd[2]), format_double(m.ws), format_double(m.timeout),
          format_double(m.mean_reward), std::to_string(m.episodes), std::to_string(m.aborted)};
}

/// Metrics CSV: one header line and one value line, columns as in metric_names().
inline void write_metrics_csv(std::ostream& out, const MetricsReport& m) {
  const auto& names = metric_names();
  const auto values = metric_values(m);
  for (std::size_t i = 0; i < names.size(); ++i) out << (i ? "," : "") << names[i];
  out << '\n';
  for (std::size_t i = 0; i < values.size(); ++i) out << (i ? "," : "") << values[i];
  out << '\n';
}

inline void write_summary(std::ostream& out, const MetricsReport& m) {
  const auto& names = metric_names();
  const auto values = metric_values(m);
  for (std::size_t i = 0; i < names.size(); ++i) out << names[i] << " = " << values[i] << '\n';
}

/// Side-by-side table with one row per metric.
inline void write_comparison(std::ostream& out, const std::vector<std::string>& labels,
                             const std::vector<MetricsReport>& reports) {
  static const std::vector<std::pair<std::string, std::size_t>> rows{
      {"SR", 0}, {"CR", 1}, {"CR(A)", 2}, {"CR(B)", 3}, {"CR(C)", 4}, {"CR(O)", 5},
      {"Time", 6}, {"DD(A)", 7}, {"DD(B)", 8}, {"DD(C)", 9}, {"WS", 10}};
  std::vector<std::vector<std::string>> values;
  for (const auto& r : reports) values.push_back(metric_values(r));
  out << std::left << std::setw(8) << "metric";
  for (const auto& l : labels) out << ' ' << std::setw(14) << l;
  out << '\n';
  for (const auto& [name, col] : rows) {
    out << std::setw(8) << name;
    for (const auto& v : values) out << ' ' << std::setw(14) << v[col];
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Trajectory log

inline void write_trajectory(std::ostream& out, const std::vector<TrajectoryRow>& log) {
  write_trajectory_header(out);
  for (const auto& r : log)
    write_trajectory_row(out, r.step, r.id, r.robot ? "robot" : type_name(r.type), r.position, r.velocity, r.radius);
}

inline std::vector<TrajectoryRow> read_trajectory(std::istream& in) {
  std::vector<TrajectoryRow> log;
  std::string line;
  if (!std::getline(in, line)) return log;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(trim(cell));
    if (f.size() != 8) throw FormatError("trajectory line " + std::to_string(lineno) + ": expected 8 fields");
    TrajectoryRow r;
    r.step = static_cast<int>(parse_int(f[0], "step"));
    r.id = static_cast<int>(parse_int(f[1], "agent_id"));
    r.robot = f[2] == "robot";
    if (!r.robot) {
      bool found = false;
      for (auto t : kAllEntityTypes)
        if (type_name(t) == f[2]) {
          r.type = t;
          found = true;
        }
      if (!found) throw FormatError("trajectory line " + std::to_string(lineno) + ": unknown type '" + f[2] + "'");
    }
    r.position = {parse_double(f[3], "x"), parse_double(f[4], "y")};
    r.velocity = {parse_double(f[5], "vx"), parse_double(f[6], "vy")};
    r.radius = parse_double(f[7], "r");
    log.push_back(r);
  }
  return log;
}

// ---------------------------------------------------------------------------
// Episode sets on disk: an index file `episodes.txt` with lines
// `<grid file> <start x> <start y> <goal x> <goal y> <seed> <inflation cells>`
// next to the referenced grid files.

inline void save_episode_set(const std::string& dir, const std::vector<EpisodeSpec>& specs) {
  std::filesystem::create_directories(dir);
  std::ofstream index(dir + "/episodes.txt");
  if (!index) throw Error("cannot write " + dir + "/episodes.txt");
  std::string current;
  const OccupancyGrid* last = nullptr;
  int maps = 0;
  for (const auto& s : specs) {
    if (!last || !(*last == s.grid)) {
      std::ostringstream name;
      name << "map_" << std::setw(5) << std::setfill('0') << maps++ << ".txt";
      current = name.str();
      save_grid(dir + "/" + current, s.grid);
      last = &s.grid;
    }
    index << current << ' ' << format_double(s.start.x) << ' ' << format_double(s.start.y) << ' '
          << format_double(s.goal.x) << ' ' << format_double(s.goal.y) << ' ' << s.seed << ' ' << s.inflation_cells
          << '\n';
  }
}

inline std::vector<EpisodeSpec> load_episode_set(const std::string& dir) {
  std::ifstream index(dir + "/episodes.txt");
  if (!index) throw Error("cannot open " + dir + "/episodes.txt");
  std::vector<EpisodeSpec> specs;
  std::map<std::string, OccupancyGrid> grids;
  std::string line;
  int lineno = 0;
  while (std::getline(index, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::istringstream ss(line);
    std::string file, sx, sy, gx, gy, seed, infl;
    if (!(ss >> file >> sx >> sy >> gx >> gy >> seed >> infl))
      throw FormatError(dir + "/episodes.txt line " + std::to_string(lineno) + ": expected 7 fields");
    auto it = grids.find(file);
    if (it == grids.end()) it = grids.emplace(file, load_grid(dir + "/" + file)).first;
    EpisodeSpec s;
    s.grid = it->second;
    s.start = {parse_double(sx, "start x"), parse_double(sy, "start y")};
    s.goal = {parse_double(gx, "goal x"), parse_double(gy, "goal y")};
    s.seed = std::stoull(seed);
    s.inflation_cells = static_cast<int>(parse_int(infl, "inflation"));
    specs.push_back(std::move(s));
  }
  return specs;
}

// ---------------------------------------------------------------------------
// SVG renderer

inline std::string type_color(EntityType t) {
  switch (t) {
    case EntityType::Adult: return "#1f77b4";
    case EntityType::Bicycle: return "#ff7f0e";
    case EntityType::Child: return "#d62728";
    case EntityType::Obstacle: return "#7f7f7f";
  }
  return "#000000";
}

/// Distinct agent ids per type in a trajectory log (robot excluded).
inline std::array<int, 3> agent_counts(const std::vector<TrajectoryRow>& log) {
  std::array<std::set<int>, 3> ids;
  for (const auto& r : log)
    if (!r.robot && r.type != EntityType::Obstacle) ids[static_cast<std::size_t>(type_index(r.type))].insert(r.id);
  return {static_cast<int>(ids[0].size()), static_cast<int>(ids[1].size()), static_cast<int>(ids[2].size())};
}

/// Map, global path, dashed checkpoint circles, robot trace and the final
/// positions of every disc, with a legend of agent counts per type.
inline std::string render_svg(const std::vector<TrajectoryRow>& log, const OccupancyGrid& grid,
                              const std::vector<Vec2>& path, const std::vector<Checkpoint>& checkpoints) {
  const double scale = 800.0 / std::max({grid.world_width(), grid.world_height(), 1e-9});
  const double W = grid.world_width() * scale, H = grid.world_height() * scale;
  const double legend_h = 24.0;
  auto X = [&](double x) { return format_double(std::round((x - grid.origin().x) * scale * 100.0) / 100.0); };
  auto Y = [&](double y) { return format_double(std::round((H - (y - grid.origin().y) * scale) * 100.0) / 100.0); };
  auto L = [&](double d) { return format_double(std::round(d * scale * 100.0) / 100.0); };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << format_double(W) << "\" height=\""
    << format_double(H + legend_h) << "\">\n";
  s << "<rect x=\"0\" y=\"0\" width=\"" << format_double(W) << "\" height=\"" << format_double(H)
    << "\" fill=\"white\" stroke=\"black\"/>\n";
  const double res = grid.resolution();
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width();) {
      if (!grid.occupied(x, y)) {
        ++x;
        continue;
      }
      int end = x;
      while (end < grid.width() && grid.occupied(end, y)) ++end;
      const double wx = grid.origin().x + x * res, wy = grid.origin().y + (y + 1) * res;
      s << "<rect x=\"" << X(wx) << "\" y=\"" << Y(wy) << "\" width=\"" << L((end - x) * res) << "\" height=\""
        << L(res) << "\" fill=\"#b0b0b0\"/>\n";
      x = end;
    }
  }
  if (!path.empty()) {
    s << "<polyline fill=\"none\" stroke=\"#2ca02c\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < path.size(); ++i) s << (i ? " " : "") << X(path[i].x) << ',' << Y(path[i].y);
    s << "\"/>\n";
  }
  for (const auto& c : checkpoints)
    s << "<circle cx=\"" << X(c.center.x) << "\" cy=\"" << Y(c.center.y) << "\" r=\"" << L(c.radius)
      << "\" fill=\"none\" stroke=\"#9467bd\" stroke-dasharray=\"6,4\"/>\n";

  std::vector<Vec2> trace;
  int last_step = -1;
  for (const auto& r : log) {
    if (r.robot) trace.push_back(r.position);
    last_step = std::max(last_step, r.step);
  }
  if (trace.size() > 1) {
    s << "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < trace.size(); ++i) s << (i ? " " : "") << X(trace[i].x) << ',' << Y(trace[i].y);
    s << "\"/>\n";
  }
  for (const auto& r : log)
    if (r.step == last_step) {
      const std::string fill = r.robot ? "#000000" : type_color(r.type);
      s << "<circle cx=\"" << X(r.position.x) << "\" cy=\"" << Y(r.position.y) << "\" r=\"" << L(r.radius)
        << "\" fill=\"" << fill << "\" fill-opacity=\"0.7\"/>\n";
    }
  const auto counts = agent_counts(log);
  s << "<text x=\"4\" y=\"" << format_double(H + 17.0) << "\" font-family=\"sans-serif\" font-size=\"13\">";
  for (std::size_t t = 0; t < 3; ++t)
    s << "<tspan fill=\"" << type_color(static_cast<EntityType>(t)) << "\">"
      << type_name(static_cast<EntityType>(t)) << ": " << counts[t] << "</tspan> ";
  s << "</text>\n</svg>\n";
  return s.str();
}

inline void render_episode(const std::vector<TrajectoryRow>& log, const OccupancyGrid& grid,
                           const std::vector<Vec2>& path, const std::vector<Checkpoint>& checkpoints,
                           const std::string& out_path) {
  std::ofstream out(out_path);
  if (!out) throw Error("cannot write " + out_path);
  out << render_svg(log, grid, path, checkpoints);
  if (!out) throw Error("failed writing " + out_path);
}

}  // namespace hmpdrl
