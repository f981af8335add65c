#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "koopnav/geometry.hpp"
#include "koopnav/plant.hpp"
#include "koopnav/qp.hpp"
#include "koopnav/sysid.hpp"

namespace koopnav {

/// diag(10, 10, 2, 0.5, 0.5, 0.5): position and heading dominate, velocity
/// references steer gently.
Eigen::Matrix<double, 6, 6> default_tracking_weight();

struct MpcConfig {
  int horizon = 50;       // H steps of dt_mpc (1 s lookahead by default)
  double dt_mpc = 0.02;   // must match the model's fitting rate
  Eigen::Matrix<double, 6, 6> P = default_tracking_weight();  // PSD
  Eigen::Matrix3d R_smooth = Eigen::Matrix3d::Identity();     // PD
  CommandBox command_box;
  /// Clearance decay of the tightened safety recurrence
  /// h_{k+1} >= gamma * h_k, in [0, 1); plain per-step clearance when empty.
  std::optional<double> gamma;
  int sqp_iters = 3;
  /// Per-step bound on |pose - incumbent pose| (infinity norm over px, py,
  /// theta). Only the pose enters the clearance rows nonlinearly, so the
  /// velocity entries are left free.
  double trust_radius = 0.3;
  double safety_margin = 0.02;  // required clearance beyond the circles, m
  int solve_stride = 5;         // plant steps between solves (commands held)

  void validate() const;  // throws ConfigError
};

enum class MpcStatus {
  Optimal,           // final round solved with hard clearance rows
  SoftenedFeasible,  // final round needed the L1-softened clearances
};

const char* to_string(MpcStatus status);

struct MpcSolution {
  /// u_0..u_{H-1}, clamped to the command box (exact membership).
  std::vector<Command> commands;
  /// x_1..x_H re-rolled through the model from the clamped commands, so the
  /// pair satisfies phi_{k+1} = A phi_k + B u_k to machine precision.
  std::vector<State> predicted;
  double objective = 0.0;  // tracking + smoothness value at the solution
  MpcStatus status = MpcStatus::Optimal;
  double kkt_residual = 0.0;
  double max_violation = 0.0;  // worst hard-row violation, 0 when feasible
};

/// One receding-horizon instance. Everything is expressed in a single frame
/// chosen by the caller (the navigation loop localizes to the robot's pose so
/// the model sees data like its training windows; tests often use the world
/// frame directly).
struct MpcProblem {
  LinearDynamics dyn;   // lifted linear model (see to_linear)
  Eigen::VectorXd phi0; // lift of the current state; first six entries = state
  std::vector<State> reference;           // tracked states x̂_1..x̂_H
  std::vector<ConvexPolytope> obstacles;  // same frame as the states
  std::vector<BodyCircle> circles;        // collision model of the body
  std::optional<MpcSolution> warm;        // previous solve, if any
};

/// One linearized clearance constraint h(x_k) ≈ w·x_k + offset >= 0, where h
/// is the signed distance of a body circle's center to an obstacle minus the
/// circle radius and the safety margin. The gradient w maps through the
/// circle-center kinematics (position directly, heading through the lever
/// arm); its velocity entries are zero.
struct ClearanceRow {
  int step = 0;  // 1-based index of the state x_k the row constrains
  Vec6 w = Vec6::Zero();
  double offset = 0.0;
};

/// Safety recurrence row h_{k+1} - gamma*h_k >= 0 in affine form
///   w_next·x_{step+1} + w_cur·x_step >= rhs,
/// with w_cur already scaled by -gamma and constants folded into rhs. The
/// step-0 row chains from the measured initial clearance, so its w_cur is
/// zero and rhs carries gamma*h0.
struct TightenedRow {
  int step = 0;  // 0-based: row couples x_step and x_{step+1}
  Vec6 w_next = Vec6::Zero();
  Vec6 w_cur = Vec6::Zero();
  double rhs = 0.0;
};

/// Replaces the per-step clearance rows of one (obstacle, circle) pair,
/// ordered k = 1..H, with the decay recurrence chained from the measured
/// initial clearance h0. gamma = 0 reproduces the plain rows h_k >= 0.
/// Throws ConfigError when gamma is outside [0, 1), std::invalid_argument
/// when rows are empty or not consecutively numbered from step 1.
std::vector<TightenedRow> cbf_tighten(std::span<const ClearanceRow> rows,
                                      double h0, double gamma);

/// The assembled convex QP in literal sparse form: variables phi_1..phi_H
/// (p entries each) followed by u_0..u_{H-1} (m each); staircase equalities
/// phi_{k+1} = A phi_k + B u_k; inequality rows ordered clearance (or
/// tightened) first, then command box, then trust region. The objective
/// carries a 1e-8 ridge on the command block so it is strictly convex on the
/// equality null space, and omits the constant sum of weighted reference
/// norms.
struct MpcQp {
  QpProblem qp;
  int p = 0;
  int m = 3;
  int horizon = 0;
  int clearance_rows = 0;  // leading rows of qp.C subject to L1 softening
};

/// Builds the QP linearized about an incumbent trajectory of exactly H
/// states (standing in for x_1..x_H). Throws std::invalid_argument on any
/// dimension mismatch and ConfigError on invalid configuration.
MpcQp build_qp(const MpcProblem& problem, const MpcConfig& config,
               std::span<const State> linearization);

/// Sequential linearization: sqp_iters rounds of build + solve with the
/// clearances linearized about the incumbent trajectory — the warm solution
/// shifted solve_stride steps with its tail held, else the reference —
/// updating the
/// incumbent with each round's prediction. A round whose QP is infeasible is
/// retried once with the clearance rows softened by an L1 penalty (weight
/// 1e3); the reported status describes the final round, whose solution is
/// the one returned. Solves use
/// a reduced path that eliminates the staircase equalities in closed form;
/// its solutions match solve_qp on the literal instance. Throws MpcFailure
/// when even a softened round fails.
MpcSolution solve_mpc(const MpcProblem& problem, const MpcConfig& config);

/// Per-solve diagnostics for CSV traces.
struct MpcDiag {
  int solve_index = 0;
  MpcStatus status = MpcStatus::Optimal;
  double objective = 0.0;
  double kkt_residual = 0.0;
  double min_clearance = 0.0;
  double wall_seconds = 0.0;
};

std::string mpc_trace_header();
std::string mpc_trace_row(const MpcDiag& d);

}  // namespace koopnav
