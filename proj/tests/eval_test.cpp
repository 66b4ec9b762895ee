#include <gtest/gtest.h>

#include <sstream>

#include "hmpdrl/eval.hpp"
#include "test_util.hpp"

namespace hmpdrl {
namespace {

EpisodeResult result(EpisodeStatus s, EntityType t = EntityType::Obstacle, double duration = 10.0) {
  EpisodeResult r;
  r.summary.status = s;
  r.summary.collision_type = t;
  r.summary.duration = duration;
  r.summary.total_reward = 1.0;
  return r;
}

TEST(WeightedScore, PublishedRows) {
  struct Row {
    double sr, a, b, c, o, ws;
  };
  // rows as (SR, CR(A), CR(B), CR(C), CR(O)) -> WS, rounded to three places
  const std::vector<Row> rows{
      {0.524, 0.05, 0.155, 0.022, 0.062, 0.045}, {0.649, 0.019, 0.047, 0.015, 0.047, 0.4525},
      {0.836, 0.019, 0.044, 0.004, 0.056, 0.685}, {0.719, 0.009, 0.018, 0.004, 0.023, 0.6465},
      {0.712, 0.003, 0.015, 0.0, 0.016, 0.671},   {0.936, 0.001, 0.007, 0.0, 0.009, 0.9165},
      {0.615, 0.018, 0.054, 0.008, 0.05, 0.432},
  };
  for (const auto& r : rows) EXPECT_NEAR(weighted_score(r.sr, r.a, r.b, r.c, r.o), r.ws, 5e-4);
  EXPECT_EQ(weighted_score(1, 0, 0, 0, 0), 1.0);
  EXPECT_EQ(weighted_score(0, 0, 0, 1, 0), -4.0);
  EXPECT_EQ(weighted_score(0, 0, 1, 0, 0), -2.0);
  EXPECT_EQ(weighted_score(0, 0, 0, 0, 1), -0.5);
  EXPECT_EQ(weighted_score(0, 0, 0, 0, 0), 0.0);
}

TEST(Summarize, RatesPartitionTheEpisodes) {
  std::vector<EpisodeResult> rs{result(EpisodeStatus::Success, EntityType::Obstacle, 12.0),
                                result(EpisodeStatus::Success, EntityType::Obstacle, 18.0),
                                result(EpisodeStatus::Collision, EntityType::Child),
                                result(EpisodeStatus::Collision, EntityType::Obstacle),
                                result(EpisodeStatus::Timeout),
                                result(EpisodeStatus::Aborted)};
  rs[0].danger[0] = {0.1, 0.2};
  rs[2].danger[0] = {0.0};
  const MetricsReport m = summarize(rs);
  EXPECT_EQ(m.episodes, 5);
  EXPECT_EQ(m.aborted, 1);
  EXPECT_DOUBLE_EQ(m.sr, 0.4);
  EXPECT_DOUBLE_EQ(m.cr, 0.4);
  EXPECT_DOUBLE_EQ(m.cr_type[2], 0.2);
  EXPECT_DOUBLE_EQ(m.cr_type[3], 0.2);
  EXPECT_DOUBLE_EQ(m.timeout, 0.2);
  EXPECT_DOUBLE_EQ(m.sr + m.cr + m.timeout, 1.0);
  EXPECT_DOUBLE_EQ(*m.time, 15.0);
  EXPECT_NEAR(*m.dd[0], 0.1, 1e-15);
  EXPECT_FALSE(m.dd[1].has_value());
  EXPECT_DOUBLE_EQ(m.ws, 0.4 - 4 * 0.2 - 0.5 * 0.2);

  const MetricsReport strict = summarize(rs, true);
  EXPECT_EQ(strict.episodes, 6);
  EXPECT_NEAR(strict.sr + strict.cr + strict.timeout + strict.aborted_rate, 1.0, 1e-15);
  EXPECT_THROW(summarize({result(EpisodeStatus::Aborted)}), Error);
  EXPECT_THROW(summarize({}), Error);
}

TEST(Summarize, ImmediateAdultCollision) {
  const MetricsReport m = summarize({result(EpisodeStatus::Collision, EntityType::Adult, 0.25)});
  EXPECT_EQ(m.sr, 0.0);
  EXPECT_EQ(m.cr_type[0], 1.0);
  EXPECT_EQ(m.ws, -1.0);
  EXPECT_FALSE(m.time.has_value());
}

TEST(DangerDistance, MeanBelowThreshold) {
  const std::vector<double> d{0.5, 0.29, 0.1, 0.30, -0.05};
  EXPECT_NEAR(*danger_distance(d), (0.29 + 0.1 - 0.05) / 3, 1e-15);
  const std::vector<double> constant(40, 0.2);
  EXPECT_NEAR(*danger_distance(constant), 0.2, 1e-15);
  const std::vector<double> mixed{0.1, 0.2, 0.5};
  EXPECT_NEAR(*danger_distance(mixed), 0.15, 1e-15);
  const std::vector<double> far{0.3, 1.0};
  EXPECT_FALSE(danger_distance(far).has_value());

  std::vector<TrajectoryRow> log{{0, 0, true, EntityType::Adult, {0, 0}, {}, 0.3},
                                 {0, 1, false, EntityType::Adult, {0.8, 0}, {}, 0.3},
                                 {0, 2, false, EntityType::Child, {0, 3}, {}, 0.2},
                                 {1, 0, true, EntityType::Adult, {0.5, 0}, {}, 0.3},
                                 {1, 1, false, EntityType::Adult, {1.3, 0}, {}, 0.3}};
  const auto adult = surface_distances(log, EntityType::Adult);
  ASSERT_EQ(adult.size(), 2u);
  EXPECT_NEAR(adult[0], 0.2, 1e-12);
  EXPECT_NEAR(*danger_distance(log, EntityType::Adult), 0.2, 1e-12);
  EXPECT_FALSE(danger_distance(log, EntityType::Child).has_value());
}

TEST(Outputs, MetricsCsvAndSummaryAgree) {
  const MetricsReport m = summarize({result(EpisodeStatus::Success), result(EpisodeStatus::Timeout)});
  std::ostringstream csv, kv;
  write_metrics_csv(csv, m);
  write_summary(kv, m);
  std::istringstream lines(csv.str());
  std::string header, values;
  std::getline(lines, header);
  std::getline(lines, values);
  EXPECT_EQ(header, "sr,cr,cr_a,cr_b,cr_c,cr_o,time,dd_a,dd_b,dd_c,ws,timeout,mean_reward,episodes,aborted");
  EXPECT_EQ(values.substr(0, 4), "0.5,");
  std::istringstream in(kv.str());
  const KeyValueConfig back = KeyValueConfig::parse(in);
  EXPECT_EQ(back.get_double("sr", -1), 0.5);
  EXPECT_EQ(back.get_string("dd_a", ""), "NA");
  EXPECT_EQ(back.get_int("episodes", 0), 2);

  std::ostringstream curves;
  write_curves_header(curves);
  write_curve_row(curves, curve_row(m, 512));
  EXPECT_EQ(curves.str().substr(0, curves.str().find('\n')), "episode,sr,cr,cr_a,cr_b,cr_c,cr_o,mean_reward,ws");
  EXPECT_NE(curves.str().find("\n512,0.5,"), std::string::npos);
}

TEST(Outputs, TrajectoryRoundTrip) {
  const std::vector<TrajectoryRow> log{{0, 0, true, EntityType::Adult, {1.0 / 3, -2}, {0.1, 0.2}, 0.3},
                                       {0, 4, false, EntityType::Bicycle, {5, 6.25}, {-1, 0}, 0.45},
                                       {1, 9, false, EntityType::Child, {1e-9, 7}, {0, 0}, 0.2}};
  std::stringstream ss;
  write_trajectory(ss, log);
  const auto back = read_trajectory(ss);
  ASSERT_EQ(back.size(), log.size());
  for (std::size_t i = 0; i < log.size(); ++i) {
    EXPECT_EQ(back[i].step, log[i].step);
    EXPECT_EQ(back[i].id, log[i].id);
    EXPECT_EQ(back[i].robot, log[i].robot);
    if (!log[i].robot) {
      EXPECT_EQ(back[i].type, log[i].type);
    }
    EXPECT_EQ(back[i].position, log[i].position);
    EXPECT_EQ(back[i].velocity, log[i].velocity);
    EXPECT_EQ(back[i].radius, log[i].radius);
  }
  std::istringstream bad("step,agent_id,type,x,y,vx,vy,r\n0,1,dragon,0,0,0,0,1\n");
  EXPECT_THROW(read_trajectory(bad), FormatError);
}

TEST(Outputs, EpisodeSetRoundTrip) {
  DatasetConfig d;
  d.width = 60;
  d.height = 60;
  d.resolution = 0.2;
  d.footprint_cells = 5;
  const auto specs = build_episode_set(d, 5, 3);
  ASSERT_EQ(specs.size(), 5u);
  const std::string dir = test::temp_dir("episodes");
  save_episode_set(dir, specs);
  const auto back = load_episode_set(dir);
  ASSERT_EQ(back.size(), specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    EXPECT_EQ(back[i].grid, specs[i].grid);
    EXPECT_EQ(back[i].start, specs[i].start);
    EXPECT_EQ(back[i].goal, specs[i].goal);
    EXPECT_EQ(back[i].seed, specs[i].seed);
    EXPECT_EQ(back[i].inflation_cells, specs[i].inflation_cells);
  }
  EXPECT_THROW(load_episode_set(dir + "/nope"), Error);
}

TEST(Evaluate, DeterministicAcrossWorkers) {
  DatasetConfig d;
  d.width = 60;
  d.height = 60;
  d.resolution = 0.2;
  d.footprint_cells = 5;
  const auto specs = build_episode_set(d, 6, 11);
  EnvConfig env;
  env.cp_spacing = 3.0;
  env.cp_radius = 1.0;
  env.sensor_range = 6.0;
  env.reward.t_pref = 15;
  env.reward.t_max = 30;
  EvalOptions one, four;
  four.workers = 4;
  const nn::ZeroValue zero;
  const auto a = evaluate(&zero, specs, env, one);
  const auto b = evaluate(&zero, specs, env, four);
  EXPECT_TRUE(a.report == b.report);
  EXPECT_EQ(a.report.episodes + a.report.aborted, 6);
  EXPECT_NEAR(a.report.sr + a.report.cr + a.report.timeout, 1.0, 1e-12);
  const auto orca = evaluate(nullptr, specs, env, one);
  EXPECT_EQ(orca.results.size(), 6u);
}

TEST(Render, SvgHasMapPathCheckpointsAndLegend) {
  OccupancyGrid g(10, 10, 0.5);
  g.set(2, 3, true);
  g.set(3, 3, true);
  const std::vector<TrajectoryRow> log{{0, 0, true, EntityType::Adult, {1, 1}, {}, 0.3},
                                       {0, 3, false, EntityType::Child, {3, 3}, {}, 0.2},
                                       {1, 0, true, EntityType::Adult, {1.5, 1}, {}, 0.3},
                                       {1, 3, false, EntityType::Child, {3, 2.5}, {}, 0.2},
                                       {1, 5, false, EntityType::Bicycle, {4, 4}, {}, 0.4}};
  const std::vector<Checkpoint> cps{{{2, 2}, 1.0, 0, false}};
  const std::string svg = render_svg(log, g, {{1, 1}, {4, 4}}, cps);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("stroke-dasharray"), std::string::npos);
  EXPECT_NE(svg.find("child: 1"), std::string::npos);
  EXPECT_NE(svg.find("bicycle: 1"), std::string::npos);
  EXPECT_NE(svg.find("adult: 0"), std::string::npos);
  EXPECT_NE(svg.find("#b0b0b0"), std::string::npos);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_EQ(agent_counts(log), (std::array<int, 3>{0, 1, 1}));
  EXPECT_EQ(svg, render_svg(log, g, {{1, 1}, {4, 4}}, cps));
}

TEST(Render, EmptyTrajectoryDrawsMapPathAndCheckpointsOnly) {
  OccupancyGrid g(10, 10, 0.5);
  g.set(2, 3, true);
  const std::vector<Checkpoint> cps{{{2, 2}, 1.0, 0, false}};
  const std::string svg = render_svg({}, g, {{1, 1}, {4, 4}}, cps);
  EXPECT_NE(svg.find("#b0b0b0"), std::string::npos);
  EXPECT_NE(svg.find("stroke-dasharray"), std::string::npos);
  EXPECT_NE(svg.find("child: 0"), std::string::npos);
  EXPECT_EQ(svg.find(type_color(EntityType::Child)), svg.rfind(type_color(EntityType::Child)));
}

}  // namespace
}  // namespace hmpdrl
