#include "koopnav/plant.hpp"

#include <cmath>

#include "koopnav/geometry.hpp"

namespace koopnav {

void PlantParams::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw ConfigError("plant: dt must be positive");
  }
  if (!(tau_v > 0.0) || !(tau_omega > 0.0)) {
    throw ConfigError("plant: time constants must be positive");
  }
  if (kappa < 0.0 || kappa_drift < 0.0) {
    throw ConfigError("plant: slip and drift coefficients must be >= 0");
  }
  for (int i = 0; i < 3; ++i) {
    if (noise_std[i] < 0.0 || !std::isfinite(noise_std[i])) {
      throw ConfigError("plant: noise_std must be finite and >= 0");
    }
    if (!(box.lo[i] < box.hi[i])) {
      throw ConfigError("plant: command box must have lo < hi");
    }
  }
}

PlantParams linearizable_mode(PlantParams p) {
  p.kappa = 0.0;
  p.kappa_drift = 0.0;
  p.noise_std.setZero();
  return p;
}

State plant_step(const State& x, const Command& u, const PlantParams& params,
                 Rng* noise) {
  if (!x.finite()) throw NumericError("plant_step: non-finite state");
  if (!std::isfinite(u.vx) || !std::isfinite(u.vy) || !std::isfinite(u.omega)) {
    throw NumericError("plant_step: non-finite command");
  }
  const Command c = params.box.clamp(u);

  const double slip =
      std::clamp(1.0 - params.kappa * std::abs(x.omega), 0.3, 1.0);
  const Vec2 v_cmd_body(c.vx * slip, c.vy + params.kappa_drift * x.omega);
  const Vec2 v_cmd_world = rotate(x.theta, v_cmd_body);

  const double av = params.dt / params.tau_v;
  const double aw = params.dt / params.tau_omega;

  State n;
  n.vx = x.vx + av * (v_cmd_world.x() - x.vx);
  n.vy = x.vy + av * (v_cmd_world.y() - x.vy);
  n.omega = x.omega + aw * (c.omega - x.omega);
  n.theta = wrap_angle(x.theta + params.dt * n.omega);
  n.px = x.px + params.dt * n.vx;
  n.py = x.py + params.dt * n.vy;

  if (noise != nullptr && params.has_noise()) {
    n.vx += noise->normal(0.0, params.noise_std[0]);
    n.vy += noise->normal(0.0, params.noise_std[1]);
    n.omega += noise->normal(0.0, params.noise_std[2]);
  }
  return n;
}

std::vector<State> plant_rollout(const State& x0,
                                 std::span<const Command> commands,
                                 const PlantParams& params, Rng* noise) {
  std::vector<State> states;
  states.reserve(commands.size() + 1);
  states.push_back(x0);
  for (const Command& u : commands) {
    states.push_back(plant_step(states.back(), u, params, noise));
  }
  return states;
}

}  // namespace koopnav
