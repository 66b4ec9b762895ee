// Command-line front end: map generation, episode sampling, planning,
// imitation, training, evaluation, the checkpoint-reward ablation and
// rendering.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hmpdrl/eval.hpp"
#include "hmpdrl/experiment.hpp"
#include "hmpdrl/grid.hpp"
#include "hmpdrl/mapgen.hpp"
#include "hmpdrl/planner.hpp"
#include "hmpdrl/training.hpp"

namespace fs = std::filesystem;
using namespace hmpdrl;

namespace {

struct Globals {
  std::string config;
  std::uint64_t seed = 1;
  bool seed_set = false;
  int workers = 1;
  bool workers_set = false;
  std::string out = "out";
};

KeyValueConfig load_config(const Globals& g, const std::vector<std::string>& extras) {
  KeyValueConfig kv;
  if (!g.config.empty()) kv = KeyValueConfig::load(g.config);
  for (const auto& arg : extras) {
    const auto eq = arg.find('=');
    if (arg.rfind("--", 0) != 0 || eq == std::string::npos)
      throw ConfigError("unrecognized argument '" + arg + "' (config overrides use --key=value)");
    kv.set(arg.substr(2, eq - 2), arg.substr(eq + 1));
  }
  if (g.seed_set) kv.set("seed", std::to_string(g.seed));
  if (g.workers_set) kv.set("workers", std::to_string(g.workers));
  if (!kv.has("data.seed") && kv.has("seed")) kv.set("data.seed", kv.get_string("seed", "1"));
  return kv;
}

Vec2 parse_point(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw ConfigError("expected x,y but got '" + s + "'");
  return {parse_double(s.substr(0, comma), "x"), parse_double(s.substr(comma + 1), "y")};
}

std::ofstream open_out(const std::string& path) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  return out;
}

void write_text(const std::string& path, const std::string& text) { open_out(path) << text; }

/// Policy by name: a weight file path, "zero" or "orca".
struct Policy {
  std::optional<nn::ValueNet> net;
  nn::ZeroValue zero;
  bool orca = false;

  const nn::ValueEstimator* estimator() const {
    if (orca) return nullptr;
    if (net) return &*net;
    return &zero;
  }
};

Policy load_policy(const std::string& weights, const std::string& policy, const EnvConfig& env) {
  Policy p;
  if (!weights.empty()) {
    p.net = nn::load_weights(weights, nn::ValueNetDims::for_checkpoints(env.K));
  } else if (policy == "orca") {
    p.orca = true;
  } else if (policy != "zero") {
    throw ConfigError("--policy must be zero or orca when no --weights are given");
  }
  return p;
}

void report(const std::string& dir, const Evaluation& ev) {
  fs::create_directories(dir);
  auto m = open_out(dir + "/metrics.csv");
  write_metrics_csv(m, ev.report);
  auto s = open_out(dir + "/summary.txt");
  write_summary(s, ev.report);
  auto e = open_out(dir + "/episodes.csv");
  write_episode_csv(e, ev.results);
  write_summary(std::cout, ev.report);
}

}  // namespace

int main(int argc, char** argv) {
  nn::configure_allocator();
  std::cout << std::unitbuf;
  CLI::App app{"hmpdrl: hybrid global-local robot navigation with deep V-learning"};
  app.require_subcommand(1);
  app.allow_extras();
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Key-value config file")->check(CLI::ExistingFile);
  app.add_option_function<std::uint64_t>("--seed", [&](std::uint64_t s) { g.seed = s, g.seed_set = true; }, "Global seed");
  app.add_option_function<int>("--workers", [&](int w) { g.workers = w, g.workers_set = true; }, "Parallel workers");
  app.add_option("--out", g.out, "Output directory");

  // genmap
  auto* genmap = app.add_subcommand("genmap", "Generate a procedural urban map or collapse a semantic raster");
  std::string raster, classes;
  genmap->add_option("--raster", raster, "Semantic raster to collapse instead of generating");
  genmap->add_option("--classes", classes, "Class table for --raster");

  // sample-episodes
  auto* sample = app.add_subcommand("sample-episodes", "Build train/validation/test episode sets");

  // plan
  auto* plan = app.add_subcommand("plan", "A* path and checkpoints for one start/goal pair");
  std::string map_file, start_s, goal_s;
  plan->add_option("--map", map_file, "Grid file")->required();
  plan->add_option("--start", start_s, "Start x,y in metres")->required();
  plan->add_option("--goal", goal_s, "Goal x,y in metres")->required();

  // demo-il
  auto* demo = app.add_subcommand("demo-il", "Collect ORCA demonstrations and run imitation learning");
  std::string episodes_dir;
  demo->add_option("--episodes", episodes_dir, "Episode set directory (default: generate)");

  // train
  auto* trn = app.add_subcommand("train", "Imitation warm start followed by deep V-learning");
  bool literal_updates = false;
  trn->add_flag("--paper-literal-updates", literal_updates, "One gradient step per wave instead of one per episode");

  // eval
  auto* evl = app.add_subcommand("eval", "Evaluate a policy on an episode set");
  std::string weights, policy = "zero";
  bool strict = false;
  evl->add_option("--episodes", episodes_dir, "Episode set directory (default: generated test set)");
  evl->add_option("--weights", weights, "Value network weights");
  evl->add_option("--policy", policy, "zero or orca when no weights are given");
  evl->add_flag("--strict", strict, "Count aborted episodes in the denominators");

  // ablate
  auto* abl = app.add_subcommand("ablate", "Train and evaluate with and without the checkpoint reward");

  // render
  auto* rnd = app.add_subcommand("render", "Run one episode and render it as SVG");
  int index = 0;
  rnd->add_option("--episodes", episodes_dir, "Episode set directory (default: generated test set)");
  rnd->add_option("--index", index, "Episode index");
  rnd->add_option("--weights", weights, "Value network weights");
  rnd->add_option("--policy", policy, "zero or orca when no weights are given");

  for (auto* sub : app.get_subcommands({})) sub->allow_extras();

  CLI11_PARSE(app, argc, argv);

  try {
    std::vector<std::string> extras = app.remaining();
    for (auto* sub : app.get_subcommands()) {
      auto r = sub->remaining();
      extras.insert(extras.end(), r.begin(), r.end());
    }
    KeyValueConfig kv = load_config(g, extras);
    if (literal_updates) kv.set("paper_literal_updates", "true");
    const ExperimentConfig xc = ExperimentConfig::from(kv);
    fs::create_directories(g.out);

    auto episode_set = [&](const std::string& which) {
      if (!episodes_dir.empty()) return load_episode_set(episodes_dir);
      const auto sets = build_episode_sets(xc);
      return which == "train" ? sets.train : sets.test;
    };

    if (genmap->parsed()) {
      OccupancyGrid grid;
      if (!raster.empty()) {
        if (classes.empty()) throw ConfigError("--raster needs --classes");
        std::ifstream ct(classes), rs(raster);
        if (!ct || !rs) throw Error("cannot open raster or class table");
        grid = collapse_semantics(read_raster(rs, read_class_table(ct)));
      } else {
        UrbanMapOptions mo;
        mo.resolution = xc.data.resolution;
        grid = generate_urban_map(xc.data.width, xc.data.height, xc.data.obstacle_fraction, xc.train.seed, mo);
      }
      save_grid(g.out + "/map.txt", grid);
      std::cout << "map " << grid.width() << "x" << grid.height() << " occupied fraction " << grid.occupied_fraction()
                << " -> " << g.out << "/map.txt\n";
    } else if (sample->parsed()) {
      const auto sets = build_episode_sets(xc);
      save_episode_set(g.out + "/train", sets.train);
      save_episode_set(g.out + "/validation", sets.validation);
      save_episode_set(g.out + "/test", sets.test);
      std::cout << sets.train.size() << " train, " << sets.validation.size() << " validation, " << sets.test.size()
                << " test episodes -> " << g.out << "\n";
    } else if (plan->parsed()) {
      const OccupancyGrid grid = load_grid(map_file);
      const OccupancyGrid inflated = inflate(grid, xc.data.footprint_cells / 2);
      const Vec2 s = parse_point(start_s), t = parse_point(goal_s);
      AStarStats stats;
      const auto path = astar(inflated, grid.world_to_cell(s), grid.world_to_cell(t), xc.env.astar, &stats);
      if (!path) {
        std::cerr << "no path (" << stats.expanded.size() << " cells expanded)\n";
        return 2;
      }
      const auto cps = place_checkpoints(*path, xc.env.cp_spacing, xc.env.cp_radius);
      auto p = open_out(g.out + "/path.txt");
      write_path(p, *path);
      auto c = open_out(g.out + "/checkpoints.txt");
      write_checkpoints(c, cps);
      std::cout << "path: " << path->cells.size() << " cells, " << path->length_m << " m, cost " << path->cost << ", "
                << cps.size() << " checkpoints, " << stats.expanded.size() << " expanded\n";
    } else if (demo->parsed()) {
      const auto specs = episode_set("train");
      nn::ValueNet net(nn::ValueNetDims::for_checkpoints(xc.env.K), derive_seed(xc.train.seed, 0x1417));
      const auto il = imitation_phase(net, specs, xc.env, xc.train);
      save_weights(net, g.out + "/weights_il.bin");
      auto l = open_out(g.out + "/il_loss.csv");
      l << "epoch,loss\n";
      for (std::size_t e = 0; e < il.epoch_loss.size(); ++e) l << e + 1 << ',' << format_double(il.epoch_loss[e]) << '\n';
      std::cout << il.demonstrations.size() << " demonstration experiences; weights -> " << g.out << "/weights_il.bin\n";
    } else if (trn->parsed()) {
      const auto sets = build_episode_sets(xc);
      ExperimentHooks hooks{&std::cout, g.out};
      const auto res = run_training(xc, sets, hooks);
      std::cout << "trained in " << res.seconds << " s; " << res.training.target_syncs << " target syncs\n";
    } else if (evl->parsed()) {
      const Policy p = load_policy(weights, policy, xc.env);
      EvalOptions eo;
      eo.workers = xc.train.workers;
      eo.strict = strict;
      const auto ev = evaluate(p.estimator(), episode_set("test"), xc.env, eo, xc.train.il_guidance, xc.train.il_safety_space);
      report(g.out, ev);
    } else if (abl->parsed()) {
      const auto sets = build_episode_sets(xc);
      std::vector<MetricsReport> reports, post_il;
      for (double r_cp : {0.3, 0.0}) {
        ExperimentConfig c = xc;
        c.env.reward.r_cp = r_cp;
        const std::string dir = g.out + "/r_cp_" + format_double(r_cp);
        const auto res = run_training(c, sets, {&std::cout, dir});
        EvalOptions eo;
        eo.workers = c.train.workers;
        const auto ev = evaluate(&res.final_net, sets.test, c.env, eo);
        report(dir, ev);
        reports.push_back(ev.report);
        post_il.push_back(evaluate(&res.post_il, sets.test, c.env, eo).report);
      }
      EvalOptions eo;
      eo.workers = xc.train.workers;
      nn::ZeroValue zero;
      const auto baseline = evaluate(&zero, sets.test, xc.env, eo).report;
      std::ostringstream table;
      write_comparison(table, {"R_cp=0.3", "R_cp=0.0", "IL(0.3)", "IL(0.0)", "V=0"},
                       {reports[0], reports[1], post_il[0], post_il[1], baseline});
      write_text(g.out + "/ablation.txt", table.str());
      std::cout << table.str();
    } else if (rnd->parsed()) {
      const Policy p = load_policy(weights, policy, xc.env);
      const auto specs = episode_set("test");
      if (index < 0 || index >= static_cast<int>(specs.size())) throw ConfigError("--index out of range");
      const auto& spec = specs[static_cast<std::size_t>(index)];
      RunOptions ro;
      ro.record_trajectory = true;
      ro.record_steps = false;
      const auto run = run_episode(spec, xc.env, Controller{p.estimator(), 0.0, xc.train.il_guidance, xc.train.il_safety_space}, spec.seed, ro);
      render_episode(run.trajectory, spec.grid, run.path.points, run.checkpoints, g.out + "/episode.svg");
      auto t = open_out(g.out + "/trajectory.csv");
      write_trajectory(t, run.trajectory);
      auto pf = open_out(g.out + "/path.txt");
      write_path(pf, run.path);
      auto cf = open_out(g.out + "/checkpoints.txt");
      write_checkpoints(cf, run.checkpoints);
      std::cout << status_name(run.summary.status) << " after " << run.summary.duration << " s -> " << g.out
                << "/episode.svg\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
