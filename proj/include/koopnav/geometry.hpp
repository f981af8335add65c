#pragma once

#include <vector>

#include "koopnav/types.hpp"

namespace koopnav {

/// Wraps an angle into (-pi, pi]. Throws std::domain_error on non-finite
/// input.
double wrap_angle(double a);

inline Vec2 rotate(double theta, const Vec2& v) {
  const double c = std::cos(theta), s = std::sin(theta);
  return Vec2(c * v.x() - s * v.y(), c * v.y() + s * v.x());
}

/// Expresses a world-frame state relative to `frame`: position translated
/// and rotated by the inverse frame transform, heading wrapped, planar
/// velocity rotated, yaw rate unchanged.
State to_frame(const State& target, const Pose2& frame);

/// Inverse of to_frame: from_frame(to_frame(x, f), f) == x up to wrapping.
State from_frame(const State& local, const Pose2& frame);

/// Result of a signed-distance query against one polytope.
struct DistanceResult {
  double distance = 0.0;  // > 0 outside, < 0 inside (penetration depth)
  Vec2 gradient{0.0, 0.0};  // outward unit gradient at the query point
  bool inside = false;
  int edge = -1;     // nearest edge index (edge i spans vertex i -> i+1)
  int vertex = -1;   // nearest vertex index when the closest feature is a
                     // corner, otherwise -1
};

/// Strictly convex polygon with counter-clockwise vertex order. Construction
/// validates vertex count, winding, strict convexity and vertex separation.
class ConvexPolytope {
 public:
  explicit ConvexPolytope(std::vector<Vec2> vertices);

  const std::vector<Vec2>& vertices() const { return verts_; }

  bool contains(const Vec2& p) const;

  DistanceResult distance(const Vec2& p) const;

  double signed_distance(const Vec2& p, Vec2* grad = nullptr) const {
    DistanceResult r = distance(p);
    if (grad != nullptr) *grad = r.gradient;
    return r.distance;
  }

  /// Vertices re-expressed in the coordinate system of `frame`.
  ConvexPolytope to_frame(const Pose2& frame) const;

  /// Axis-aligned rectangle helper (vertices in CCW order).
  static ConvexPolytope rect(double x0, double y0, double x1, double y1);

 private:
  std::vector<Vec2> verts_;
};

/// One collision circle rigidly attached to the robot body, offset along the
/// body x axis.
struct BodyCircle {
  double offset_x = 0.0;
  double radius = 0.25;
};

/// Default body approximation: three 0.25 m circles spaced along the spine.
std::vector<BodyCircle> default_body_circles();

/// World-frame centers of the body circles at a given pose.
std::vector<Vec2> circle_centers(const Pose2& pose,
                                 const std::vector<BodyCircle>& circles);

}  // namespace koopnav
