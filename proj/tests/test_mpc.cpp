#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "doctest.h"
#include "koopnav/geometry.hpp"
#include "koopnav/mpc.hpp"
#include "koopnav/plant.hpp"
#include "koopnav/qp.hpp"
#include "koopnav/rng.hpp"
#include "koopnav/sysid.hpp"
#include "support/linear_model.hpp"

using namespace koopnav;
using koopnav::testing::exact_linear_model;

namespace {

std::vector<State> hold_reference(const State& x, int H) {
  return std::vector<State>(static_cast<std::size_t>(H), x);
}

/// Reference that coasts forward at a constant body speed from x0.
std::vector<State> cruise_reference(const State& x0, double speed, int H,
                                    double dt) {
  std::vector<State> out;
  out.reserve(H);
  for (int k = 1; k <= H; ++k) {
    State s = x0;
    s.px = x0.px + speed * k * dt;
    s.vx = speed;
    out.push_back(s);
  }
  return out;
}

/// Reference marching from the current position toward a goal at the given
/// speed and holding it on arrival -- the shape a path follower produces.
std::vector<State> goal_reference(const State& x, const State& goal,
                                  double speed, int H, double dt) {
  std::vector<State> out;
  out.reserve(H);
  const Vec2 delta(goal.px - x.px, goal.py - x.py);
  const double dist = delta.norm();
  const Vec2 dir = dist > 1e-12 ? Vec2(delta / dist) : Vec2(0.0, 0.0);
  for (int k = 1; k <= H; ++k) {
    const double s = std::min(speed * k * dt, dist);
    State r = goal;
    r.px = x.px + dir.x() * s;
    r.py = x.py + dir.y() * s;
    const bool moving = s < dist;
    r.vx = moving ? dir.x() * speed : 0.0;
    r.vy = moving ? dir.y() * speed : 0.0;
    out.push_back(r);
  }
  return out;
}

double true_min_clearance(const std::vector<State>& states,
                          const std::vector<ConvexPolytope>& obstacles,
                          const std::vector<BodyCircle>& circles) {
  double best = std::numeric_limits<double>::infinity();
  for (const State& s : states) {
    for (const BodyCircle& c : circles) {
      const Vec2 center(s.px + c.offset_x * std::cos(s.theta),
                        s.py + c.offset_x * std::sin(s.theta));
      for (const ConvexPolytope& obs : obstacles) {
        best = std::min(best, obs.distance(center).distance - c.radius);
      }
    }
  }
  return best;
}

}  // namespace

TEST_CASE("exactly linear surrogate matches its matrix form") {
  const PlantParams pp = linearizable_mode(PlantParams{});
  const LinearDynamics dyn = exact_linear_model(pp);
  State x{0.3, -0.2, 0.0, 0.1, -0.05, 0.0};
  Eigen::VectorXd phi = x.vec();
  for (int k = 0; k < 60; ++k) {
    const Command u{0.4 * std::sin(0.1 * k), 0.2 * std::cos(0.2 * k), 0.0};
    x = plant_step(x, u, pp);
    phi = dyn.A * phi + dyn.B * u.vec();
    REQUIRE((phi - x.vec()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("assembled problem has the documented shape") {
  MpcConfig cfg;
  cfg.horizon = 4;
  MpcProblem pb;
  pb.dyn = exact_linear_model(linearizable_mode(PlantParams{}));
  pb.phi0 = State{}.vec();
  pb.reference = hold_reference(State{}, cfg.horizon);

  SUBCASE("no obstacles") {
    const MpcQp built = build_qp(pb, cfg, pb.reference);
    CHECK(built.p == 6);
    CHECK(built.m == 3);
    CHECK(built.clearance_rows == 0);
    CHECK(built.qp.H.rows() == 4 * 9);
    CHECK(built.qp.E.rows() == 4 * 6);
    CHECK(built.qp.E.cols() == 4 * 9);
    // 6 command-box rows and 6 pose trust rows per step.
    CHECK(built.qp.C.rows() == 4 * 6 + 4 * 6);
    // Initial condition enters only the first equality block.
    CHECK(built.qp.e.head(6).isApprox(pb.dyn.A * pb.phi0));
    CHECK(built.qp.e.tail(18).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("clearance rows count obstacle-circle pairs") {
    pb.obstacles.push_back(ConvexPolytope::rect(0.6, -0.5, 1.6, 0.5));
    pb.circles = default_body_circles();
    const MpcQp plain = build_qp(pb, cfg, pb.reference);
    CHECK(plain.clearance_rows == 1 * 3 * 4);
    CHECK(plain.qp.C.rows() == 12 + 4 * 6 + 4 * 6);
    cfg.gamma = 0.5;
    const MpcQp tight = build_qp(pb, cfg, pb.reference);
    CHECK(tight.clearance_rows == plain.clearance_rows);
    CHECK(tight.qp.C.rows() == plain.qp.C.rows());
  }

  SUBCASE("unreachable obstacles contribute no rows") {
    // 2 m away: even at the command-box corner speed the body cannot close
    // the gap within a 4-step horizon, with or without tightening.
    pb.obstacles.push_back(ConvexPolytope::rect(2.0, -0.5, 3.0, 0.5));
    pb.circles = default_body_circles();
    CHECK(build_qp(pb, cfg, pb.reference).clearance_rows == 0);
    cfg.gamma = 0.5;
    CHECK(build_qp(pb, cfg, pb.reference).clearance_rows == 0);
  }

  SUBCASE("early steps that cannot reach an obstacle are skipped") {
    // Reachable only late in the horizon: plain rows start at the first
    // step that can close the gap; tightening keeps the whole chain so it
    // stays anchored at the measured initial clearance.
    cfg.horizon = 50;
    pb.reference = hold_reference(State{}, cfg.horizon);
    pb.obstacles.push_back(ConvexPolytope::rect(1.5, -0.5, 2.5, 0.5));
    pb.circles = default_body_circles();
    const MpcQp plain = build_qp(pb, cfg, pb.reference);
    CHECK(plain.clearance_rows > 0);
    CHECK(plain.clearance_rows < 3 * 50);
    CHECK(plain.clearance_rows % 3 == 0);
    cfg.gamma = 0.5;
    const MpcQp tight = build_qp(pb, cfg, pb.reference);
    CHECK(tight.clearance_rows == 3 * 50);
  }
}

TEST_CASE("clearance row linearizes the circle-obstacle distance") {
  MpcConfig cfg;
  cfg.horizon = 1;
  MpcProblem pb;
  pb.dyn = exact_linear_model(linearizable_mode(PlantParams{}));
  pb.obstacles.push_back(ConvexPolytope::rect(1.0, -0.5, 2.0, 0.5));
  pb.circles.push_back(BodyCircle{0.2, 0.25});
  const State xbar{0.3, 0.0, std::numbers::pi / 2, 0.0, 0.0, 0.0};
  pb.phi0 = xbar.vec();
  pb.reference = hold_reference(xbar, 1);
  const std::vector<State> lin = {xbar};
  const MpcQp built = build_qp(pb, cfg, lin);
  REQUIRE(built.clearance_rows == 1);

  // Circle center sits at (0.3, 0.2); the nearest obstacle point is
  // (1.0, 0.2), so the gradient is (-1, 0) and the lever arm maps it to a
  // positive heading sensitivity of 0.2.
  const Eigen::VectorXd row = built.qp.C.row(0);
  CHECK(row.head<2>().norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(row(0) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(row(1) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(row(2) == doctest::Approx(0.2).epsilon(1e-9));
  CHECK(row.segment(3, 3).cwiseAbs().maxCoeff() == 0.0);
  CHECK(row.tail(3).cwiseAbs().maxCoeff() == 0.0);  // command block untouched

  // Row slack at the linearization point equals the true clearance.
  const double h_true = 0.7 - 0.25 - cfg.safety_margin;
  CHECK(row.head<6>().dot(xbar.vec()) - built.qp.d(0) ==
        doctest::Approx(h_true).epsilon(1e-12));
}

TEST_CASE("zero decay reproduces the plain clearance rows exactly") {
  MpcConfig cfg;
  cfg.horizon = 6;
  MpcProblem pb;
  pb.dyn = exact_linear_model(linearizable_mode(PlantParams{}));
  const State x0{0.0, 0.0, 0.3, 0.2, 0.0, 0.0};
  pb.phi0 = x0.vec();
  pb.reference = cruise_reference(x0, 0.4, cfg.horizon, cfg.dt_mpc);
  pb.obstacles.push_back(ConvexPolytope::rect(0.8, -0.4, 1.6, 0.4));
  pb.circles = default_body_circles();

  const MpcQp plain = build_qp(pb, cfg, pb.reference);
  cfg.gamma = 0.0;
  const MpcQp degenerate = build_qp(pb, cfg, pb.reference);
  REQUIRE(plain.qp.C.rows() == degenerate.qp.C.rows());
  CHECK((plain.qp.C - degenerate.qp.C).cwiseAbs().maxCoeff() == 0.0);
  CHECK((plain.qp.d - degenerate.qp.d).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("tightened rows encode the decay recurrence") {
  Rng rng(77);
  const int H = 6;
  const double gamma = 0.37;
  std::vector<ClearanceRow> rows(H);
  std::vector<Vec6> x(H + 1);  // x[0] unused; states x_1..x_H
  for (int k = 0; k < H; ++k) {
    rows[k].step = k + 1;
    for (int j = 0; j < 6; ++j) {
      rows[k].w[j] = rng.uniform(-1.0, 1.0);
      x[k + 1][j] = rng.uniform(-2.0, 2.0);
    }
    rows[k].offset = rng.uniform(-1.0, 1.0);
  }
  const double h0 = rng.uniform(0.0, 1.0);
  const auto h = [&](int k) {  // affine clearance value at x_k
    return k == 0 ? h0 : rows[k - 1].w.dot(x[k]) + rows[k - 1].offset;
  };

  const std::vector<TightenedRow> tight = cbf_tighten(rows, h0, gamma);
  REQUIRE(tight.size() == rows.size());
  for (int k = 0; k < H; ++k) {
    CHECK(tight[k].step == k);
    double lhs = tight[k].w_next.dot(x[k + 1]) - tight[k].rhs;
    if (k >= 1) lhs += tight[k].w_cur.dot(x[k]);
    // Row residual is exactly h_{k+1} - gamma * h_k.
    CHECK(lhs == doctest::Approx(h(k + 1) - gamma * h(k)).epsilon(1e-12));
  }
}

TEST_CASE("tightening validates decay and row numbering") {
  std::vector<ClearanceRow> rows(3);
  for (int k = 0; k < 3; ++k) rows[k].step = k + 1;
  CHECK_THROWS_AS(cbf_tighten(rows, 0.1, -0.2), ConfigError);
  CHECK_THROWS_AS(cbf_tighten(rows, 0.1, 1.0), ConfigError);
  CHECK_THROWS_AS(cbf_tighten({}, 0.1, 0.5), std::invalid_argument);
  rows[2].step = 4;
  CHECK_THROWS_AS(cbf_tighten(rows, 0.1, 0.5), std::invalid_argument);
}

TEST_CASE("stationary problem returns zero commands") {
  MpcConfig cfg;
  MpcProblem pb;
  pb.dyn = exact_linear_model(linearizable_mode(PlantParams{}));
  pb.phi0 = State{}.vec();
  pb.reference = hold_reference(State{}, cfg.horizon);
  const MpcSolution sol = solve_mpc(pb, cfg);
  CHECK(sol.status == MpcStatus::Optimal);
  CHECK(sol.objective == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(sol.kkt_residual < 1e-8);
  CHECK(sol.max_violation == 0.0);
  for (const Command& u : sol.commands) {
    CHECK(u.vec().cwiseAbs().maxCoeff() < 1e-9);
  }
  for (const State& s : sol.predicted) {
    CHECK(s.vec().cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("reduced path matches the dense assembly solved generically") {
  MpcConfig cfg;
  cfg.horizon = 3;
  cfg.sqp_iters = 1;  // single round: both paths linearize about the reference
  MpcProblem pb;
  pb.dyn = exact_linear_model(linearizable_mode(PlantParams{}));
  const State x0{0.0, 0.0, 0.0, 0.3, 0.0, 0.0};
  pb.phi0 = x0.vec();
  pb.reference = cruise_reference(x0, 0.3, cfg.horizon, cfg.dt_mpc);
  pb.obstacles.push_back(ConvexPolytope::rect(0.6, 0.35, 1.2, 1.0));
  pb.circles = default_body_circles();

  const auto compare = [&]() {
    const MpcQp built = build_qp(pb, cfg, pb.reference);
    const QpSolution dense = solve_qp(built.qp);
    REQUIRE(dense.status == QpStatus::Optimal);
    const MpcSolution fast = solve_mpc(pb, cfg);
    REQUIRE(fast.status == MpcStatus::Optimal);
    const int p = built.p;
    for (int k = 0; k < cfg.horizon; ++k) {
      const Eigen::Vector3d u_dense =
          dense.z.segment(cfg.horizon * p + 3 * k, 3);
      CHECK((u_dense - fast.commands[k].vec()).cwiseAbs().maxCoeff() < 1e-6);
      const Vec6 x_dense = dense.z.segment(k * p, 6);
      CHECK((x_dense - fast.predicted[k].vec()).cwiseAbs().maxCoeff() <
            1e-6);
    }
  };

  SUBCASE("plain clearance rows") { compare(); }
  SUBCASE("tightened clearance rows") {
    cfg.gamma = 0.6;
    compare();
  }
}

TEST_CASE("returned pair satisfies the model and the command box exactly") {
  MpcConfig cfg;
  cfg.horizon = 20;
  cfg.trust_radius = 5.0;  // the deliberately unreachable pose reference
                           // must not make the trust rows infeasible
  MpcProblem pb;
  pb.dyn = exact_linear_model(linearizable_mode(PlantParams{}));
  const State x0{-0.1, 0.05, 0.0, 0.0, 0.0, 0.0};
  pb.phi0 = x0.vec();
  // Aggressive reference: saturates the forward command.
  pb.reference = cruise_reference(x0, 2.5, cfg.horizon, cfg.dt_mpc);
  const MpcSolution sol = solve_mpc(pb, cfg);

  Eigen::VectorXd phi = pb.phi0;
  bool saturated = false;
  for (int k = 0; k < cfg.horizon; ++k) {
    CHECK(cfg.command_box.contains(sol.commands[k], 0.0));
    saturated = saturated ||
                sol.commands[k].vx == cfg.command_box.hi[0];
    phi = pb.dyn.A * phi + pb.dyn.B * sol.commands[k].vec();
    CHECK((phi.head<6>() - sol.predicted[k].vec()).cwiseAbs().maxCoeff() <
          1e-12);
  }
  CHECK(saturated);  // the box actually bound somewhere
}

TEST_CASE("closed loop tracks a held goal on the linear plant") {
  const PlantParams pp = linearizable_mode(PlantParams{});
  MpcConfig cfg;  // defaults: H = 50, dt 0.02, stride 5
  MpcProblem pb;
  pb.dyn = exact_linear_model(pp);

  State goal{1.0, 0.4, 0.0, 0.0, 0.0, 0.0};
  State x{0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  std::optional<MpcSolution> warm;
  std::vector<double> dist_at_solve;
  for (int step = 0; step < 150; ++step) {
    if (step % cfg.solve_stride == 0) {
      pb.phi0 = x.vec();
      pb.reference = goal_reference(x, goal, 0.5, cfg.horizon, cfg.dt_mpc);
      pb.warm = warm;
      const MpcSolution sol = solve_mpc(pb, cfg);
      CHECK(sol.status == MpcStatus::Optimal);
      CHECK(sol.kkt_residual < 1e-6);
      warm = sol;
      dist_at_solve.push_back(
          std::hypot(x.px - goal.px, x.py - goal.py));
    }
    const int k = step % cfg.solve_stride;
    x = plant_step(x, warm->commands[k], pp);
    CHECK(std::abs(x.theta) < 1e-9);  // stays in the linear regime
  }
  const double final_dist = std::hypot(x.px - goal.px, x.py - goal.py);
  CHECK(final_dist < 0.05);
  CHECK(final_dist < dist_at_solve.front());
  // Approach is monotone once the velocity transient settles.
  for (std::size_t i = 5; i + 1 < dist_at_solve.size(); ++i) {
    CHECK(dist_at_solve[i + 1] <= dist_at_solve[i] + 1e-9);
  }
}

TEST_CASE("solver yields before an obstacle blocking the reference") {
  MpcConfig cfg;
  cfg.trust_radius = 0.6;
  MpcProblem pb;
  pb.dyn = exact_linear_model(linearizable_mode(PlantParams{}));
  const State x0{-0.4, 0.0, 0.0, 0.5, 0.0, 0.0};
  pb.phi0 = x0.vec();
  pb.reference = cruise_reference(x0, 0.5, cfg.horizon, cfg.dt_mpc);
  pb.obstacles.push_back(ConvexPolytope::rect(0.35, -0.12, 0.75, 0.12));
  pb.circles = default_body_circles();

  const MpcSolution sol = solve_mpc(pb, cfg);
  CHECK(sol.status == MpcStatus::Optimal);
  CHECK(sol.max_violation <= 1e-9);
  // True (not linearized) clearance of every predicted state stays safe.
  CHECK(true_min_clearance(sol.predicted, pb.obstacles, pb.circles) >= 0.0);
  // Tracking the reference would drive through the block; the plan gives
  // up progress instead of safety.
  CHECK(sol.predicted.back().px < pb.reference.back().px - 0.1);
  CHECK(sol.objective > 0.1);
}

TEST_CASE("warm start is idempotent when no inequality binds") {
  MpcConfig cfg;
  cfg.horizon = 25;
  cfg.trust_radius = 10.0;  // keep the trust rows inactive
  MpcProblem pb;
  pb.dyn = exact_linear_model(linearizable_mode(PlantParams{}));
  const State x0{0.0, 0.0, 0.0, 0.3, 0.0, 0.0};
  pb.phi0 = x0.vec();
  pb.reference = cruise_reference(x0, 0.3, cfg.horizon, cfg.dt_mpc);

  const MpcSolution cold = solve_mpc(pb, cfg);
  CHECK(cold.status == MpcStatus::Optimal);
  for (const Command& u : cold.commands) {
    CHECK(std::abs(u.vx - 0.3) < 1e-6);  // exact cruise is optimal
    CHECK(std::abs(u.vy) < 1e-9);
    CHECK(std::abs(u.omega) < 1e-9);
  }
  pb.warm = cold;
  const MpcSolution rewarmed = solve_mpc(pb, cfg);
  for (int k = 0; k < cfg.horizon; ++k) {
    CHECK((rewarmed.commands[k].vec() - cold.commands[k].vec())
              .cwiseAbs()
              .maxCoeff() < 1e-8);
  }
}

TEST_CASE("repeat solves are bitwise identical") {
  MpcConfig cfg;
  MpcProblem pb;
  pb.dyn = exact_linear_model(linearizable_mode(PlantParams{}));
  const State x0{-0.4, 0.0, 0.0, 0.5, 0.0, 0.0};
  pb.phi0 = x0.vec();
  pb.reference = cruise_reference(x0, 0.5, cfg.horizon, cfg.dt_mpc);
  pb.obstacles.push_back(ConvexPolytope::rect(0.35, -0.12, 0.75, 0.12));
  pb.circles = default_body_circles();

  const MpcSolution a = solve_mpc(pb, cfg);
  const MpcSolution b = solve_mpc(pb, cfg);
  REQUIRE(a.commands.size() == b.commands.size());
  CHECK(a.objective == b.objective);
  CHECK(a.kkt_residual == b.kkt_residual);
  for (std::size_t k = 0; k < a.commands.size(); ++k) {
    CHECK(a.commands[k].vec() == b.commands[k].vec());
    CHECK(a.predicted[k].vec() == b.predicted[k].vec());
  }
}

TEST_CASE("configuration and problem validation") {
  MpcConfig cfg;
  MpcProblem pb;
  pb.dyn = exact_linear_model(linearizable_mode(PlantParams{}));
  pb.phi0 = State{}.vec();
  pb.reference = hold_reference(State{}, cfg.horizon);

  SUBCASE("bad scalars") {
    MpcConfig bad = cfg;
    bad.horizon = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.gamma = 1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.trust_radius = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.sqp_iters = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.solve_stride = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.safety_margin = -0.01;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }
  SUBCASE("bad weights and box") {
    MpcConfig bad = cfg;
    bad.P(0, 1) = 0.5;  // asymmetric
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.R_smooth.setZero();  // not positive definite
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.command_box.lo[1] = bad.command_box.hi[1];
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }
  SUBCASE("model rate must match") {
    MpcConfig bad = cfg;
    bad.dt_mpc = 0.05;
    CHECK_THROWS_AS(solve_mpc(pb, bad), ConfigError);
  }
  SUBCASE("dimension mismatches") {
    MpcProblem bad = pb;
    bad.reference.pop_back();
    CHECK_THROWS_AS(solve_mpc(bad, cfg), std::invalid_argument);
    bad = pb;
    bad.phi0 = Eigen::VectorXd::Zero(7);
    CHECK_THROWS_AS(solve_mpc(bad, cfg), std::invalid_argument);
    CHECK_THROWS_AS(build_qp(pb, cfg, std::vector<State>(3)),
                    std::invalid_argument);
    bad = pb;
    bad.warm = MpcSolution{};  // empty horizon
    CHECK_THROWS_AS(solve_mpc(bad, cfg), std::invalid_argument);
  }
  SUBCASE("non-finite state") {
    MpcProblem bad = pb;
    bad.phi0(2) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(solve_mpc(bad, cfg), NumericError);
  }
}

TEST_CASE("unreachable trust region fails loudly") {
  MpcConfig cfg;
  cfg.horizon = 10;
  cfg.trust_radius = 0.05;
  MpcProblem pb;
  pb.dyn = exact_linear_model(linearizable_mode(PlantParams{}));
  pb.phi0 = State{}.vec();
  // The reference sits 5 m away; no command sequence gets anywhere close
  // within the trust bound, and with no clearance rows to soften the
  // subproblem stays infeasible.
  pb.reference = hold_reference(State{5.0, 0.0, 0.0, 0.0, 0.0, 0.0},
                                cfg.horizon);
  CHECK_THROWS_AS(solve_mpc(pb, cfg), MpcFailure);
}

TEST_CASE("swallowed start softens the clearance rows") {
  MpcConfig cfg;
  cfg.horizon = 10;
  MpcProblem pb;
  pb.dyn = exact_linear_model(linearizable_mode(PlantParams{}));
  pb.phi0 = State{}.vec();
  pb.reference = hold_reference(State{}, cfg.horizon);
  pb.obstacles.push_back(ConvexPolytope::rect(-2.0, -2.0, 2.0, 2.0));
  pb.circles = default_body_circles();

  const MpcSolution sol = solve_mpc(pb, cfg);
  CHECK(sol.status == MpcStatus::SoftenedFeasible);
  CHECK(sol.max_violation > 1.0);  // deep inside: slacks absorb the depth
  for (const Command& u : sol.commands) {
    CHECK(cfg.command_box.contains(u, 0.0));
    CHECK(u.vec().allFinite());
  }
}

TEST_CASE("status labels and default weight") {
  CHECK(std::string(to_string(MpcStatus::Optimal)) == "optimal");
  CHECK(std::string(to_string(MpcStatus::SoftenedFeasible)) == "softened");
  const auto P = default_tracking_weight();
  CHECK(P.isDiagonal());
  CHECK(P(0, 0) == 10.0);
  CHECK(P(2, 2) == 2.0);
  CHECK(P(5, 5) == 0.5);
}

TEST_CASE("diagnostic rows format cleanly") {
  MpcDiag d;
  d.solve_index = 3;
  d.status = MpcStatus::Optimal;
  d.objective = 1.5;
  d.kkt_residual = 0.0;
  d.min_clearance = -0.25;
  d.wall_seconds = 0.001953125;
  CHECK(mpc_trace_header() ==
        "solve,status,objective,kkt_residual,min_clearance,wall_seconds\n");
  CHECK(mpc_trace_row(d) == "3,optimal,1.5,0,-0.25,0.001953125\n");
}
