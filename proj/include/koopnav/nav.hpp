#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "koopnav/map.hpp"
#include "koopnav/mpc.hpp"
#include "koopnav/planner.hpp"
#include "koopnav/rng.hpp"
#include "koopnav/sysid.hpp"

namespace koopnav {

/// One randomized start/goal draw.
struct Scenario {
  Pose2 start;
  Pose2 goal;
};

/// Uniform draw over the map's rectangular start/goal regions (heading 0),
/// or over its discrete pose sets with distinct start and goal indices.
/// Deterministic in the rng state.
Scenario sample_scenario(const ObstacleMap& map, Rng& rng);

/// Closed-loop settings that sit outside the controller's own config.
///
/// The default inflation exceeds the body circles' radius on purpose: the
/// body is longer than it is wide, and a reference that hugs an inside
/// corner wedges it mid-rotation. Planning falls back toward the circle
/// radius in steps of one resolution when a passage is too tight to plan
/// at the requested inflation.
struct EpisodeOptions {
  double resolution = 0.025;   // occupancy cell size, m
  double inflation = 0.30;     // obstacle inflation radius, m
  double nominal_speed = 0.5;  // reference speed along the path, m/s
  double max_yaw_rate = 1.0;   // reference yaw-rate clamp, rad/s
};

/// One executed plant step (the first row holds the initial state before
/// any step, with a zero command).
struct TraceRow {
  double t = 0.0;
  State state;              // world frame
  Command command;          // body frame, as applied to the plant
  double clearance = 0.0;   // min over body circles, signed; +inf without
                            // obstacles
  MpcStatus status = MpcStatus::Optimal;  // status of the governing solve
};

struct NavMetrics {
  bool success = false;
  double time_to_goal = 0.0;  // success_window on timeout or failure
  int collision_events = 0;   // non-penetrating -> penetrating transitions
  int penetration_steps = 0;  // steps with any body circle penetrating
  double min_clearance = 0.0; // over the whole trace, m
  double path_length = 0.0;   // integrated displacement, m
};

struct EpisodeResult {
  NavMetrics metrics;
  std::vector<TraceRow> trace;
  bool solver_failed = false;  // an unsolvable subproblem ended the episode
  int solves = 0;
  int softened_solves = 0;
};

/// Plans once on the inflated occupancy grid, then runs the plant at its own
/// rate, re-solving the receding-horizon problem every mpc.solve_stride
/// steps in the robot's local frame (references, obstacles and the lifted
/// state history are all re-expressed there, matching how training windows
/// are localized). Terminates on reaching goal_tolerance, on the success
/// window elapsing, or on MpcFailure (recorded, not rethrown). Plant and
/// controller rates must agree; planner failures on malformed maps
/// propagate.
EpisodeResult run_episode(const ObstacleMap& map, const Scenario& scenario,
                          const LinearDynamics& model,
                          const PlantParams& plant, const MpcConfig& mpc,
                          const EpisodeOptions& options = {});

struct SuiteConfig {
  int runs = 20;
  std::uint64_t seed = 0;
  ExecMode mode = ExecMode::Parallel;
  EpisodeOptions episode;
};

/// Index-ordered episodes plus their aggregates. Episode i draws its
/// scenario from stream (seed, i), so results are independent of scheduling.
struct SuiteResult {
  std::vector<Scenario> scenarios;
  std::vector<EpisodeResult> episodes;
  double success_rate = 0.0;        // percent of runs
  double mean_time_to_goal = 0.0;   // successes only; window when none
  double mean_collision_events = 0.0;
  double mean_penetration_steps = 0.0;
  double min_clearance = 0.0;       // min over episodes
};

SuiteResult run_suite(const ObstacleMap& map, const LinearDynamics& model,
                      const PlantParams& plant, const MpcConfig& mpc,
                      const SuiteConfig& suite);

/// CSV: t, state, command, clearance, solver status; one row per plant step
/// plus the initial row. Non-finite clearance (no obstacles) prints "inf".
std::string episode_trace_csv(const EpisodeResult& episode);

/// Single JSON object with the aggregates and per-episode metric rows.
std::string suite_summary_json(const std::string& map_name,
                               const SuiteResult& suite);

}  // namespace koopnav
