#include "koopnav/nav.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "json.hpp"
#include "koopnav/geometry.hpp"
#include "koopnav/io.hpp"
#include "koopnav/lift.hpp"

namespace koopnav {

namespace {

using nlohmann::json;

double body_clearance(const std::vector<ConvexPolytope>& obstacles,
                      const std::vector<BodyCircle>& circles,
                      const Pose2& pose) {
  double best = std::numeric_limits<double>::infinity();
  const std::vector<Vec2> centers = circle_centers(pose, circles);
  for (std::size_t i = 0; i < centers.size(); ++i) {
    for (const ConvexPolytope& obs : obstacles) {
      best = std::min(best,
                      obs.distance(centers[i]).distance - circles[i].radius);
    }
  }
  return best;
}

std::string clearance_field(double c) {
  return std::isfinite(c) ? format_double(c) : std::string("inf");
}

}  // namespace

Scenario sample_scenario(const ObstacleMap& map, Rng& rng) {
  Scenario sc;
  if (!map.start_poses.empty()) {
    const std::uint64_t n = map.start_poses.size();
    const std::uint64_t g = map.goal_poses.size();
    const std::uint64_t i = rng.uniform_index(n);
    sc.start = map.start_poses[i];
    if (g == n && g >= 2) {
      // Same pose set: skip the start index so start != goal.
      std::uint64_t j = rng.uniform_index(g - 1);
      if (j >= i) ++j;
      sc.goal = map.goal_poses[j];
    } else {
      sc.goal = map.goal_poses[rng.uniform_index(g)];
    }
  } else {
    sc.start = Pose2{rng.uniform(map.start_region.xmin, map.start_region.xmax),
                     rng.uniform(map.start_region.ymin, map.start_region.ymax),
                     0.0};
    sc.goal = Pose2{rng.uniform(map.goal_region.xmin, map.goal_region.xmax),
                    rng.uniform(map.goal_region.ymin, map.goal_region.ymax),
                    0.0};
  }
  return sc;
}

EpisodeResult run_episode(const ObstacleMap& map, const Scenario& scenario,
                          const LinearDynamics& model,
                          const PlantParams& plant, const MpcConfig& mpc,
                          const EpisodeOptions& options) {
  mpc.validate();
  plant.validate();
  if (std::abs(plant.dt - mpc.dt_mpc) > 1e-9) {
    throw ConfigError("nav: plant and controller rates must match");
  }
  const std::vector<BodyCircle> circles = default_body_circles();

  // Plan once on the inflated grid; steer the tail at the exact goal point
  // (cell centers sit up to half a diagonal off). Tight passages that close
  // at the requested inflation are retried at progressively less inflation,
  // but never below the circle radius.
  double min_inflation = 0.0;
  for (const BodyCircle& b : circles) {
    min_inflation = std::max(min_inflation, b.radius);
  }
  const Vec2 start_pt(scenario.start.px, scenario.start.py);
  const Vec2 goal_pt(scenario.goal.px, scenario.goal.py);
  double inflation = std::max(options.inflation, min_inflation);
  const auto relax = [&] {
    if (inflation <= min_inflation + 1e-12) return false;
    inflation = std::max(min_inflation, inflation - options.resolution);
    return true;
  };
  OccupancyGrid grid;
  std::vector<GridCell> cells;
  for (;;) {
    grid = rasterize(map, options.resolution, inflation, ExecMode::Serial);
    try {
      cells = astar(grid, grid.world_to_cell(start_pt),
                    grid.world_to_cell(goal_pt));
      break;
    } catch (const NoPathError&) {
      if (!relax()) throw;
    } catch (const OccupiedEndpointError&) {
      if (!relax()) throw;
    }
  }
  std::vector<Vec2> path = path_to_world(grid, cells);
  if ((path.back() - goal_pt).norm() > 1e-9) path.push_back(goal_pt);

  EpisodeResult ep;
  NavMetrics& m = ep.metrics;
  State x{scenario.start.px, scenario.start.py, scenario.start.theta,
          0.0,               0.0,               0.0};
  const double dt = plant.dt;
  const int max_steps =
      static_cast<int>(std::ceil(map.success_window / dt - 1e-9));
  const int lift_delay =
      model.lift.kind == LiftKind::TimeDelay ? model.lift.delay : 1;

  const auto goal_dist = [&](const State& s) {
    return std::hypot(s.px - scenario.goal.px, s.py - scenario.goal.py);
  };

  double clr = body_clearance(map.obstacles, circles, x.pose());
  bool penetrating = clr < 0.0;
  m.min_clearance = clr;
  m.time_to_goal = map.success_window;
  if (goal_dist(x) <= map.goal_tolerance) {
    m.success = true;
    m.time_to_goal = 0.0;
    ep.trace.push_back(TraceRow{0.0, x, Command{}, clr, MpcStatus::Optimal});
    return ep;
  }

  std::vector<State> world_history{x};
  std::optional<MpcSolution> warm;
  Pose2 warm_frame;
  MpcSolution current;
  MpcStatus last_status = MpcStatus::Optimal;

  for (int step = 0; step < max_steps; ++step) {
    if (step % mpc.solve_stride == 0) {
      // Pose everything in the robot frame, the frame the model was
      // trained in.
      const Pose2 frame = x.pose();
      MpcProblem pb;
      pb.dyn = model;
      const ReferenceTrajectory rt = local_reference(
          path, frame, mpc.horizon, options.nominal_speed, mpc.dt_mpc);
      const std::vector<State> ref_world = to_reference_states(
          rt, mpc.dt_mpc, options.max_yaw_rate, x.theta);
      pb.reference.reserve(ref_world.size());
      for (const State& s : ref_world) {
        pb.reference.push_back(to_frame(s, frame));
      }
      pb.obstacles.reserve(map.obstacles.size());
      for (const ConvexPolytope& obs : map.obstacles) {
        pb.obstacles.push_back(obs.to_frame(frame));
      }
      pb.circles = circles;
      const std::size_t have = std::min(
          static_cast<std::size_t>(lift_delay), world_history.size());
      std::vector<State> local_hist;
      local_hist.reserve(have);
      for (std::size_t i = world_history.size() - have;
           i < world_history.size(); ++i) {
        local_hist.push_back(to_frame(world_history[i], frame));
      }
      pb.phi0 = lift_vec(model.lift, local_hist);
      if (warm) {
        MpcSolution w = *warm;
        for (State& s : w.predicted) {
          s = to_frame(from_frame(s, warm_frame), frame);
        }
        pb.warm = std::move(w);
      }
      try {
        current = solve_mpc(pb, mpc);
      } catch (const MpcFailure&) {
        ep.solver_failed = true;
        break;
      }
      ++ep.solves;
      if (current.status == MpcStatus::SoftenedFeasible) {
        ++ep.softened_solves;
      }
      last_status = current.status;
      warm = current;
      warm_frame = frame;
      if (step == 0) {
        ep.trace.push_back(TraceRow{0.0, x, Command{}, clr, last_status});
      }
    }
    const Command u =
        current.commands[static_cast<std::size_t>(step % mpc.solve_stride)];
    const State prev = x;
    x = plant_step(x, u, plant);
    world_history.push_back(x);
    m.path_length += std::hypot(x.px - prev.px, x.py - prev.py);
    clr = body_clearance(map.obstacles, circles, x.pose());
    m.min_clearance = std::min(m.min_clearance, clr);
    const bool pen = clr < 0.0;
    if (pen) {
      ++m.penetration_steps;
      if (!penetrating) ++m.collision_events;
    }
    penetrating = pen;
    ep.trace.push_back(
        TraceRow{(step + 1) * dt, x, u, clr, last_status});
    if (goal_dist(x) <= map.goal_tolerance) {
      m.success = true;
      m.time_to_goal = (step + 1) * dt;
      break;
    }
  }
  return ep;
}

SuiteResult run_suite(const ObstacleMap& map, const LinearDynamics& model,
                      const PlantParams& plant, const MpcConfig& mpc,
                      const SuiteConfig& suite) {
  if (suite.runs < 1) {
    throw ConfigError("nav: a suite needs at least one run");
  }
  SuiteResult out;
  out.scenarios.resize(static_cast<std::size_t>(suite.runs));
  out.episodes.resize(static_cast<std::size_t>(suite.runs));
  for (int i = 0; i < suite.runs; ++i) {
    Rng rng(suite.seed, static_cast<std::uint64_t>(i));
    out.scenarios[i] = sample_scenario(map, rng);
  }

  std::exception_ptr err = nullptr;
  const auto run_one = [&](int i) {
    try {
      out.episodes[i] = run_episode(map, out.scenarios[i], model, plant, mpc,
                                    suite.episode);
    } catch (...) {
#pragma omp critical(koopnav_suite_err)
      if (err == nullptr) err = std::current_exception();
    }
  };
  if (suite.mode == ExecMode::Parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < suite.runs; ++i) run_one(i);
  } else {
    for (int i = 0; i < suite.runs; ++i) run_one(i);
  }
  if (err != nullptr) std::rethrow_exception(err);

  int successes = 0;
  double time_sum = 0.0, coll_sum = 0.0, pen_sum = 0.0;
  double min_clear = std::numeric_limits<double>::infinity();
  for (const EpisodeResult& e : out.episodes) {
    if (e.metrics.success) {
      ++successes;
      time_sum += e.metrics.time_to_goal;
    }
    coll_sum += e.metrics.collision_events;
    pen_sum += e.metrics.penetration_steps;
    min_clear = std::min(min_clear, e.metrics.min_clearance);
  }
  out.success_rate = 100.0 * successes / suite.runs;
  out.mean_time_to_goal =
      successes > 0 ? time_sum / successes : map.success_window;
  out.mean_collision_events = coll_sum / suite.runs;
  out.mean_penetration_steps = pen_sum / suite.runs;
  out.min_clearance = min_clear;
  return out;
}

std::string episode_trace_csv(const EpisodeResult& episode) {
  std::string out =
      "t,px,py,theta,vx,vy,omega,cmd_vx,cmd_vy,cmd_omega,min_clearance,"
      "status\n";
  for (const TraceRow& r : episode.trace) {
    out += format_double(r.t);
    const Vec6 s = r.state.vec();
    for (int i = 0; i < 6; ++i) {
      out += ',';
      out += format_double(s[i]);
    }
    const Vec3 u = r.command.vec();
    for (int i = 0; i < 3; ++i) {
      out += ',';
      out += format_double(u[i]);
    }
    out += ',';
    out += clearance_field(r.clearance);
    out += ',';
    out += to_string(r.status);
    out += '\n';
  }
  return out;
}

std::string suite_summary_json(const std::string& map_name,
                               const SuiteResult& suite) {
  json episodes = json::array();
  for (std::size_t i = 0; i < suite.episodes.size(); ++i) {
    const NavMetrics& m = suite.episodes[i].metrics;
    const Scenario& sc = suite.scenarios[i];
    episodes.push_back(json{
        {"success", m.success},
        {"time_to_goal_s", m.time_to_goal},
        {"collision_events", m.collision_events},
        {"penetration_steps", m.penetration_steps},
        {"min_clearance_m", m.min_clearance},
        {"path_length_m", m.path_length},
        {"solves", suite.episodes[i].solves},
        {"softened_solves", suite.episodes[i].softened_solves},
        {"solver_failed", suite.episodes[i].solver_failed},
        {"start", json{sc.start.px, sc.start.py, sc.start.theta}},
        {"goal", json{sc.goal.px, sc.goal.py, sc.goal.theta}},
    });
  }
  const json j{
      {"format", "koopnav-suite"},
      {"version", 1},
      {"map", map_name},
      {"runs", suite.episodes.size()},
      {"success_rate_percent", suite.success_rate},
      {"mean_time_to_goal_s", suite.mean_time_to_goal},
      {"mean_collision_events", suite.mean_collision_events},
      {"mean_penetration_steps", suite.mean_penetration_steps},
      {"min_clearance_m", suite.min_clearance},
      {"episodes", episodes},
  };
  return j.dump(2) + "\n";
}

}  // namespace koopnav
