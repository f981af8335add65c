#pragma once

#include <span>
#include <vector>

#include "koopnav/rng.hpp"
#include "koopnav/types.hpp"

namespace koopnav {

/// Per-axis command bounds (body-frame forward, lateral, yaw rate).
struct CommandBox {
  Vec3 lo{-1.0, -0.5, -1.0};
  Vec3 hi{1.0, 0.5, 1.0};

  Command clamp(const Command& c) const {
    return Command{std::clamp(c.vx, lo[0], hi[0]),
                   std::clamp(c.vy, lo[1], hi[1]),
                   std::clamp(c.omega, lo[2], hi[2])};
  }

  bool contains(const Command& c, double tol = 0.0) const {
    return c.vx >= lo[0] - tol && c.vx <= hi[0] + tol &&
           c.vy >= lo[1] - tol && c.vy <= hi[1] + tol &&
           c.omega >= lo[2] - tol && c.omega <= hi[2] + tol;
  }
};

/// Surrogate velocity-tracking plant. Commanded body velocities are tracked
/// through a first-order lag after two gait-like distortions: forward
/// tracking degrades with yaw rate (slip factor clamped to [0.3, 1]) and
/// turning induces a lateral drift proportional to the yaw rate.
struct PlantParams {
  double dt = 0.02;
  double tau_v = 0.15;
  double tau_omega = 0.10;
  double kappa = 0.3;         // forward slip strength per rad/s
  double kappa_drift = 0.15;  // lateral drift (m/s) per rad/s of yaw rate
  Vec3 noise_std{0.0, 0.0, 0.0};  // optional Gaussian on (vx, vy, omega)
  CommandBox box;

  void validate() const;
  bool has_noise() const {
    return noise_std[0] > 0.0 || noise_std[1] > 0.0 || noise_std[2] > 0.0;
  }
};

/// Zero out the nonlinear terms; the resulting plant is exactly linear in
/// (state, world-rotated command).
PlantParams linearizable_mode(PlantParams p);

/// One forward-Euler step at params.dt. Commands are clamped to the box.
/// Velocity noise, when enabled, perturbs the stored velocities after the
/// pose update so it propagates through subsequent steps.
State plant_step(const State& x, const Command& u, const PlantParams& params,
                 Rng* noise = nullptr);

/// Rollout from x0; returns commands.size() + 1 states including x0.
std::vector<State> plant_rollout(const State& x0,
                                 std::span<const Command> commands,
                                 const PlantParams& params,
                                 Rng* noise = nullptr);

}  // namespace koopnav
