#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "koopnav/dataset.hpp"
#include "koopnav/geometry.hpp"
#include "koopnav/map.hpp"
#include "koopnav/nav.hpp"
#include "koopnav/planner.hpp"
#include "koopnav/rng.hpp"
#include "support/linear_model.hpp"

using namespace koopnav;
using koopnav::testing::exact_linear_model;

namespace {

ObstacleMap open_field() {
  ObstacleMap map;
  map.name = "field";
  map.bounds = Rect{-1.0, -1.0, 4.0, 1.0};
  map.start_region = Rect{-0.2, -0.2, 0.2, 0.2};
  map.goal_region = Rect{0.8, -0.2, 1.2, 0.2};
  map.success_window = 6.0;
  return map;
}

Scenario straight_scenario(double distance) {
  return Scenario{Pose2{0.0, 0.0, 0.0}, Pose2{distance, 0.0, 0.0}};
}

bool in_rect(const Rect& r, const Pose2& p) {
  return p.px >= r.xmin && p.px <= r.xmax && p.py >= r.ymin && p.py <= r.ymax;
}

}  // namespace

TEST_CASE("builtin maps honor their passage dimensions") {
  const auto maps = builtin_maps();
  REQUIRE(maps.size() == 4);
  const auto find = [&](const std::string& name) -> const ObstacleMap& {
    for (const auto& m : maps) {
      if (m.name == name) return m;
    }
    REQUIRE_MESSAGE(false, "missing map " << name);
    return maps.front();
  };

  // Corridor gap measured on the centerline: the point clearance to the
  // innermost faces is half the gap.
  CHECK(find("corridor1").min_clearance(Vec2(1.8, 0.0)) ==
        doctest::Approx(0.35).epsilon(1e-12));
  CHECK(find("corridor2").min_clearance(Vec2(1.8, 0.0)) ==
        doctest::Approx(0.275).epsilon(1e-12));
  // Maze passages: midline of the bottom leg sits half a width from the
  // outer wall and from the first baffle.
  CHECK(find("maze75").min_clearance(Vec2(1.0, 0.375)) ==
        doctest::Approx(0.375).epsilon(1e-12));
  CHECK(find("maze70").min_clearance(Vec2(1.0, 0.35)) ==
        doctest::Approx(0.35).epsilon(1e-12));

  for (const auto& m : maps) {
    CHECK(m.success_window > 0.0);
    CHECK(m.goal_tolerance == 0.3);
    CHECK(builtin_map(m.name).name == m.name);
  }
  CHECK_THROWS_AS(builtin_map("atrium"), ConfigError);
}

TEST_CASE("map json round trip preserves geometry") {
  for (const auto& m : builtin_maps()) {
    const ObstacleMap back = map_from_json(map_to_json(m));
    CHECK(back.name == m.name);
    REQUIRE(back.obstacles.size() == m.obstacles.size());
    for (std::size_t i = 0; i < m.obstacles.size(); ++i) {
      REQUIRE(back.obstacles[i].vertices().size() ==
              m.obstacles[i].vertices().size());
      for (std::size_t v = 0; v < m.obstacles[i].vertices().size(); ++v) {
        CHECK(back.obstacles[i].vertices()[v] ==
              m.obstacles[i].vertices()[v]);
      }
    }
    CHECK(back.success_window == m.success_window);
    CHECK(back.goal_tolerance == m.goal_tolerance);
    CHECK(back.start_poses.size() == m.start_poses.size());
    // Serialization is stable byte-for-byte.
    CHECK(map_to_json(back) == map_to_json(m));
  }
}

TEST_CASE("scenario sampling is deterministic and in-region") {
  const ObstacleMap corridor = builtin_map("corridor1");
  const ObstacleMap maze = builtin_map("maze75");

  Rng a(42), b(42);
  const Scenario s1 = sample_scenario(corridor, a);
  const Scenario s2 = sample_scenario(corridor, b);
  CHECK(s1.start.px == s2.start.px);
  CHECK(s1.goal.py == s2.goal.py);

  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    const Scenario sc = sample_scenario(corridor, rng);
    CHECK(in_rect(corridor.start_region, sc.start));
    CHECK(in_rect(corridor.goal_region, sc.goal));
    CHECK(sc.start.theta == 0.0);
  }
  for (int i = 0; i < 200; ++i) {
    const Scenario sc = sample_scenario(maze, rng);
    const auto& poses = maze.start_poses;
    const auto idx = [&](const Pose2& p) {
      for (std::size_t k = 0; k < poses.size(); ++k) {
        if (poses[k].px == p.px && poses[k].py == p.py &&
            poses[k].theta == p.theta) {
          return static_cast<int>(k);
        }
      }
      return -1;
    };
    const int si = idx(sc.start), gi = idx(sc.goal);
    CHECK(si >= 0);
    CHECK(gi >= 0);
    CHECK(si != gi);
  }
}

TEST_CASE("every sampled scenario on every builtin map is plannable") {
  for (const auto& map : builtin_maps()) {
    const OccupancyGrid grid = rasterize(map, 0.025, 0.25);
    Rng rng(99);
    for (int i = 0; i < 10; ++i) {
      const Scenario sc = sample_scenario(map, rng);
      const GridCell s = grid.world_to_cell(Vec2(sc.start.px, sc.start.py));
      const GridCell g = grid.world_to_cell(Vec2(sc.goal.px, sc.goal.py));
      CHECK_FALSE(grid.occupied(s));
      CHECK_FALSE(grid.occupied(g));
      CHECK_NOTHROW(astar(grid, s, g));
    }
  }
}

TEST_CASE("open field episode reaches a goal one meter ahead") {
  const PlantParams pp = linearizable_mode(PlantParams{});
  const EpisodeResult ep = run_episode(open_field(), straight_scenario(1.0),
                                       exact_linear_model(pp), pp,
                                       MpcConfig{});
  CHECK(ep.metrics.success);
  CHECK(ep.metrics.collision_events == 0);
  CHECK(ep.metrics.penetration_steps == 0);
  CHECK(ep.metrics.time_to_goal > 0.5);
  CHECK(ep.metrics.time_to_goal < 6.0);
  CHECK(ep.metrics.path_length >= 0.7 - 1e-9);  // goal tolerance 0.3
  CHECK(std::isinf(ep.metrics.min_clearance));  // nothing to hit
  CHECK_FALSE(ep.solver_failed);
  CHECK(ep.solves >= 1);
  CHECK(ep.trace.size() >= 2);
  CHECK(ep.trace.front().t == 0.0);
  // Success implies the final state is inside the tolerance.
  const State& last = ep.trace.back().state;
  CHECK(std::hypot(last.px - 1.0, last.py) <= 0.3);
}

TEST_CASE("open field succeeds with a model fitted on the real plant") {
  const PlantParams pp;  // slip and drift active
  CollectionConfig cc;
  cc.episodes = 12;
  cc.duration_s = 5.0;
  cc.seed = 321;
  const std::vector<Trajectory> trajs = collect(pp, cc);
  const KoopmanModel model = dmd_fit(trajs, cc.window_h, LiftSpec::identity());
  const EpisodeResult ep =
      run_episode(open_field(), straight_scenario(1.0),
                  to_linear(ModelVariant{model}), pp, MpcConfig{});
  CHECK(ep.metrics.success);
  CHECK(ep.metrics.collision_events == 0);
}

TEST_CASE("goal at the start is an immediate success") {
  const PlantParams pp = linearizable_mode(PlantParams{});
  const EpisodeResult ep = run_episode(open_field(), straight_scenario(0.0),
                                       exact_linear_model(pp), pp,
                                       MpcConfig{});
  CHECK(ep.metrics.success);
  CHECK(ep.metrics.time_to_goal == 0.0);
  CHECK(ep.solves == 0);
  CHECK(ep.trace.size() == 1);
}

TEST_CASE("an unsolvable first subproblem fails the episode, not the run") {
  const PlantParams pp = linearizable_mode(PlantParams{});
  MpcConfig mpc;
  mpc.trust_radius = 1e-4;  // the pose cannot keep up with the reference
  const EpisodeResult ep = run_episode(open_field(), straight_scenario(1.0),
                                       exact_linear_model(pp), pp, mpc);
  CHECK(ep.solver_failed);
  CHECK_FALSE(ep.metrics.success);
  CHECK(ep.metrics.time_to_goal == open_field().success_window);
  CHECK(ep.solves == 0);
}

TEST_CASE("corridor episode drives through with the exact model") {
  const PlantParams pp = linearizable_mode(PlantParams{});
  const ObstacleMap map = builtin_map("corridor1");
  Rng rng(5);
  const Scenario sc = sample_scenario(map, rng);
  const EpisodeResult ep =
      run_episode(map, sc, exact_linear_model(pp), pp, MpcConfig{});
  CHECK(ep.metrics.success);
  CHECK(ep.metrics.time_to_goal <= map.success_window);
  CHECK(ep.metrics.collision_events == 0);
  CHECK(ep.metrics.min_clearance > 0.0);
  CHECK(ep.metrics.collision_events <= ep.metrics.penetration_steps);
  CHECK(ep.metrics.path_length >= 1.5);
}

TEST_CASE("maze episode navigates the baffles with the exact model") {
  const PlantParams pp = linearizable_mode(PlantParams{});
  const ObstacleMap map = builtin_map("maze75");
  // Bottom-left start to top-right goal: the longest route, two turns.
  const Scenario sc{map.start_poses[0], map.goal_poses[4]};
  const EpisodeResult ep =
      run_episode(map, sc, exact_linear_model(pp), pp, MpcConfig{});
  CHECK(ep.metrics.success);
  CHECK(ep.metrics.time_to_goal <= map.success_window);
  CHECK(ep.metrics.collision_events == 0);
  CHECK(ep.metrics.min_clearance > 0.0);
  CHECK(ep.metrics.path_length > 3.0);  // actually went around the baffles
}

TEST_CASE("episode traces are reproducible byte for byte") {
  const PlantParams pp = linearizable_mode(PlantParams{});
  const ObstacleMap map = builtin_map("corridor1");
  Rng rng(11);
  const Scenario sc = sample_scenario(map, rng);
  const EpisodeResult a =
      run_episode(map, sc, exact_linear_model(pp), pp, MpcConfig{});
  const EpisodeResult b =
      run_episode(map, sc, exact_linear_model(pp), pp, MpcConfig{});
  CHECK(episode_trace_csv(a) == episode_trace_csv(b));
}

TEST_CASE("suites aggregate episodes deterministically") {
  const PlantParams pp = linearizable_mode(PlantParams{});
  const ObstacleMap map = builtin_map("corridor1");
  const LinearDynamics model = exact_linear_model(pp);

  SuiteConfig cfg;
  cfg.runs = 4;
  cfg.seed = 2025;
  cfg.mode = ExecMode::Parallel;
  const SuiteResult par = run_suite(map, model, pp, MpcConfig{}, cfg);
  cfg.mode = ExecMode::Serial;
  const SuiteResult ser = run_suite(map, model, pp, MpcConfig{}, cfg);

  REQUIRE(par.episodes.size() == 4);
  CHECK(par.success_rate == 100.0);
  CHECK(par.mean_collision_events == 0.0);
  CHECK(par.min_clearance > 0.0);
  CHECK(suite_summary_json(map.name, par) ==
        suite_summary_json(map.name, ser));
  for (int i = 0; i < 4; ++i) {
    CHECK(par.scenarios[i].start.px == ser.scenarios[i].start.px);
    CHECK(episode_trace_csv(par.episodes[i]) ==
          episode_trace_csv(ser.episodes[i]));
  }

  SUBCASE("single run aggregates to itself") {
    cfg.runs = 1;
    const SuiteResult one = run_suite(map, model, pp, MpcConfig{}, cfg);
    CHECK(one.mean_time_to_goal == one.episodes[0].metrics.time_to_goal);
    CHECK(one.mean_collision_events ==
          static_cast<double>(one.episodes[0].metrics.collision_events));
    CHECK(one.success_rate ==
          (one.episodes[0].metrics.success ? 100.0 : 0.0));
  }
}

TEST_CASE("trace and summary formats") {
  EpisodeResult ep;
  ep.trace.push_back(TraceRow{0.0, State{}, Command{}, 0.5,
                              MpcStatus::Optimal});
  TraceRow r;
  r.t = 0.02;
  r.state = State{0.25, -0.5, 0.0, 1.0, 0.0, 0.0};
  r.command = Command{0.5, 0.0, -0.125};
  r.clearance = std::numeric_limits<double>::infinity();
  r.status = MpcStatus::SoftenedFeasible;
  ep.trace.push_back(r);
  const std::string csv = episode_trace_csv(ep);
  CHECK(csv ==
        "t,px,py,theta,vx,vy,omega,cmd_vx,cmd_vy,cmd_omega,min_clearance,"
        "status\n"
        "0,0,0,0,0,0,0,0,0,0,0.5,optimal\n"
        "0.02,0.25,-0.5,0,1,0,0,0.5,0,-0.125,inf,softened\n");

  SuiteResult suite;
  suite.scenarios.push_back(Scenario{Pose2{0, 0, 0}, Pose2{1, 0, 0}});
  EpisodeResult e;
  e.metrics.success = true;
  e.metrics.time_to_goal = 2.5;
  e.metrics.min_clearance = 0.125;
  suite.episodes.push_back(e);
  suite.success_rate = 100.0;
  suite.mean_time_to_goal = 2.5;
  suite.min_clearance = 0.125;
  const std::string js = suite_summary_json("corridor1", suite);
  CHECK(js.find("\"map\": \"corridor1\"") != std::string::npos);
  CHECK(js.find("\"success_rate_percent\": 100.0") != std::string::npos);
  CHECK(js.find("\"time_to_goal_s\": 2.5") != std::string::npos);
  CHECK(js.back() == '\n');
}
