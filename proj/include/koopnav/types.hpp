#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace koopnav {

/// Switch between the plain serial implementation and the OpenMP kernel.
/// The two always produce identical results; the serial path is kept as the
/// reference for tests and benchmarks.
enum class ExecMode { Serial, Parallel };

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;

/// Planar rigid-body pose. Heading is kept in (-pi, pi].
struct Pose2 {
  double px = 0.0;
  double py = 0.0;
  double theta = 0.0;
};

/// Robot state: world position, heading, world-frame planar velocity and
/// yaw rate, in that order when flattened.
struct State {
  double px = 0.0;
  double py = 0.0;
  double theta = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  double omega = 0.0;

  Vec6 vec() const {
    Vec6 v;
    v << px, py, theta, vx, vy, omega;
    return v;
  }

  static State from_vec(const Vec6& v) {
    return State{v[0], v[1], v[2], v[3], v[4], v[5]};
  }

  Pose2 pose() const { return Pose2{px, py, theta}; }

  bool finite() const {
    return std::isfinite(px) && std::isfinite(py) && std::isfinite(theta) &&
           std::isfinite(vx) && std::isfinite(vy) && std::isfinite(omega);
  }
};

/// Velocity command. Interpreted in the robot body frame when fed to the
/// plant; stored in the window frame inside localized training data.
struct Command {
  double vx = 0.0;
  double vy = 0.0;
  double omega = 0.0;

  Vec3 vec() const { return Vec3(vx, vy, omega); }
  static Command from_vec(const Vec3& v) { return Command{v[0], v[1], v[2]}; }
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised when the receding-horizon solver cannot produce a usable command
/// even after constraint softening. Callers treat it as a failed episode.
struct MpcFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NoPathError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OccupiedEndpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace koopnav
