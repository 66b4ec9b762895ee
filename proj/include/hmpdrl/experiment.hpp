#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "hmpdrl/eval.hpp"
#include "hmpdrl/neural.hpp"
#include "hmpdrl/training.hpp"

namespace hmpdrl {

/// Everything one training run needs, read from a single key-value config.
struct ExperimentConfig {
  EnvConfig env{};
  TrainConfig train{};
  DatasetConfig data{};
  int train_set = 500;
  int validation_set = 50;
  int test_set = 100;
  std::uint64_t data_seed = 1;

  static ExperimentConfig from(const KeyValueConfig& kv) {
    ExperimentConfig c;
    c.env = env_config_from(kv);
    c.train = train_config_from(kv);
    c.data = dataset_config_from(kv);
    c.train_set = static_cast<int>(kv.get_int("data.train", c.train_set));
    c.validation_set = static_cast<int>(kv.get_int("data.validation", c.validation_set));
    c.test_set = static_cast<int>(kv.get_int("data.test", c.test_set));
    c.data_seed = static_cast<std::uint64_t>(kv.get_int("data.seed", static_cast<std::int64_t>(c.data_seed)));
    return c;
  }
};

struct EpisodeSets {
  std::vector<EpisodeSpec> train, validation, test;
};

inline EpisodeSets build_episode_sets(const ExperimentConfig& c) {
  return {build_episode_set(c.data, c.train_set, derive_seed(c.data_seed, 1)),
          build_episode_set(c.data, c.validation_set, derive_seed(c.data_seed, 2)),
          build_episode_set(c.data, c.test_set, derive_seed(c.data_seed, 3))};
}

struct ExperimentResult {
  nn::ValueNet post_il;
  nn::ValueNet final_net;
  std::vector<double> il_loss;
  std::vector<CurveRow> curves;
  TrainResult training;
  double seconds = 0.0;
};

struct ExperimentHooks {
  std::ostream* log = nullptr;
  std::string out_dir;  // empty: no files
};

/// Imitation warm start followed by deep V-learning with periodic validation.
/// With an output directory, writes the curves CSV and versioned weights.
inline ExperimentResult run_training(const ExperimentConfig& c, const EpisodeSets& sets, const ExperimentHooks& hooks = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
  ExperimentResult res;
  nn::ValueNet net(nn::ValueNetDims::for_checkpoints(c.env.K), derive_seed(c.train.seed, 0x1417));
  const auto il = imitation_phase(net, sets.train, c.env, c.train);
  res.il_loss = il.epoch_loss;
  res.post_il = net;
  if (hooks.log)
    *hooks.log << "imitation: " << il.demonstrations.size() << " experiences, final loss "
               << (il.epoch_loss.empty() ? 0.0 : il.epoch_loss.back()) << " (" << elapsed() << " s)\n";

  std::ofstream curves;
  if (!hooks.out_dir.empty()) {
    std::filesystem::create_directories(hooks.out_dir);
    save_weights(net, hooks.out_dir + "/weights_il.bin");
    curves.open(hooks.out_dir + "/curves.csv");
    write_curves_header(curves);
  }

  ReplayMemory memory(static_cast<std::size_t>(c.train.replay_capacity));
  memory.push_all(il.demonstrations);
  TrainHooks th;
  EvalOptions eo;
  eo.workers = c.train.workers;
  th.validate = [&](const nn::ValueNet& v, long long episode) {
    const auto ev = evaluate(&v, sets.validation, c.env, eo);
    const CurveRow row = curve_row(ev.report, episode);
    if (curves.is_open()) {
      write_curve_row(curves, row);
      curves.flush();
    }
    if (hooks.log)
      *hooks.log << "episode " << episode << ": validation sr " << row.sr << " cr " << row.cr << " ws " << row.ws
                 << " (" << elapsed() << " s)\n";
    return row;
  };
  th.on_checkpoint = [&](const nn::ValueNet& v, long long episode) {
    if (!hooks.out_dir.empty()) save_weights(v, hooks.out_dir + "/weights_ep" + std::to_string(episode) + ".bin");
  };
  res.training = train(net, memory, sets.train, c.env, c.train, th);
  res.curves = res.training.curves;
  res.final_net = net;
  if (!hooks.out_dir.empty()) save_weights(net, hooks.out_dir + "/weights_final.bin");
  res.seconds = elapsed();
  return res;
}

/// Test-set reports for the trained, post-imitation and zero-value policies.
struct PolicyComparison {
  MetricsReport final_policy, post_il, zero_value;
};

inline PolicyComparison compare_policies(const ExperimentConfig& c, const EpisodeSets& sets, const ExperimentResult& r) {
  EvalOptions eo;
  eo.workers = c.train.workers;
  nn::ZeroValue zero;
  return {evaluate(&r.final_net, sets.test, c.env, eo).report, evaluate(&r.post_il, sets.test, c.env, eo).report,
          evaluate(&zero, sets.test, c.env, eo).report};
}

}  // namespace hmpdrl
