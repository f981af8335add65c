#include "koopnav/geometry.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace koopnav {

double wrap_angle(double a) {
  if (!std::isfinite(a)) {
    throw std::domain_error("wrap_angle: non-finite angle");
  }
  // remainder() lands in [-pi, pi]; fold the open end onto +pi.
  double r = std::remainder(a, 2.0 * M_PI);
  if (r <= -M_PI) r += 2.0 * M_PI;
  return r;
}

State to_frame(const State& target, const Pose2& frame) {
  const Vec2 dp(target.px - frame.px, target.py - frame.py);
  const Vec2 p = rotate(-frame.theta, dp);
  const Vec2 v = rotate(-frame.theta, Vec2(target.vx, target.vy));
  return State{p.x(), p.y(), wrap_angle(target.theta - frame.theta),
               v.x(), v.y(), target.omega};
}

State from_frame(const State& local, const Pose2& frame) {
  const Vec2 p = rotate(frame.theta, Vec2(local.px, local.py));
  const Vec2 v = rotate(frame.theta, Vec2(local.vx, local.vy));
  return State{frame.px + p.x(), frame.py + p.y(),
               wrap_angle(local.theta + frame.theta), v.x(), v.y(),
               local.omega};
}

namespace {

double cross2(const Vec2& a, const Vec2& b) {
  return a.x() * b.y() - a.y() * b.x();
}

}  // namespace

ConvexPolytope::ConvexPolytope(std::vector<Vec2> vertices)
    : verts_(std::move(vertices)) {
  const std::size_t n = verts_.size();
  if (n < 3) {
    throw ConfigError("polytope needs at least 3 vertices");
  }
  for (const Vec2& v : verts_) {
    if (!v.allFinite()) throw ConfigError("polytope vertex is not finite");
  }
  constexpr double kMinSeparation = 1e-9;
  double turn = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = verts_[i];
    const Vec2& b = verts_[(i + 1) % n];
    const Vec2& c = verts_[(i + 2) % n];
    const Vec2 e0 = b - a;
    const Vec2 e1 = c - b;
    if (e0.norm() < kMinSeparation) {
      throw ConfigError("polytope has repeated vertices");
    }
    if (cross2(e0, e1) <= 0.0) {
      throw ConfigError(
          "polytope must be strictly convex with counter-clockwise winding");
    }
    turn += std::atan2(cross2(e0, e1), e0.dot(e1));
  }
  // All left turns and one full revolution together rule out self-winding.
  if (std::abs(turn - 2.0 * M_PI) > 1e-6) {
    throw ConfigError("polytope winds more than once");
  }
}

bool ConvexPolytope::contains(const Vec2& p) const {
  const std::size_t n = verts_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = verts_[i];
    const Vec2& b = verts_[(i + 1) % n];
    if (cross2(b - a, p - a) < 0.0) return false;
  }
  return true;
}

DistanceResult ConvexPolytope::distance(const Vec2& p) const {
  const std::size_t n = verts_.size();
  double best_sq = std::numeric_limits<double>::infinity();
  Vec2 best_point = verts_[0];
  int best_edge = -1;
  int best_vertex = -1;

  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = verts_[i];
    const Vec2& b = verts_[(i + 1) % n];
    const Vec2 e = b - a;
    double t = e.dot(p - a) / e.squaredNorm();
    int vertex = -1;
    if (t <= 0.0) {
      t = 0.0;
      vertex = static_cast<int>(i);
    } else if (t >= 1.0) {
      t = 1.0;
      vertex = static_cast<int>((i + 1) % n);
    }
    const Vec2 q = a + t * e;
    const double d_sq = (p - q).squaredNorm();
    // Strict comparison keeps the smaller edge index on exact corner ties.
    if (d_sq < best_sq) {
      best_sq = d_sq;
      best_point = q;
      best_edge = static_cast<int>(i);
      best_vertex = vertex;
    }
  }

  DistanceResult r;
  r.edge = best_edge;
  r.vertex = best_vertex;
  const double d = std::sqrt(best_sq);
  const bool inside = contains(p);

  const Vec2& a = verts_[best_edge];
  const Vec2& b = verts_[(best_edge + 1) % n];
  const Vec2 e = b - a;
  const Vec2 outward = Vec2(e.y(), -e.x()).normalized();

  if (d <= 0.0) {
    // Exactly on the boundary: fall back to the edge normal.
    r.distance = 0.0;
    r.gradient = outward;
    r.inside = false;
    return r;
  }
  if (inside) {
    r.distance = -d;
    r.gradient = (best_point - p) / d;
    r.inside = true;
  } else {
    r.distance = d;
    r.gradient = (p - best_point) / d;
    r.inside = false;
  }
  return r;
}

ConvexPolytope ConvexPolytope::to_frame(const Pose2& frame) const {
  std::vector<Vec2> out;
  out.reserve(verts_.size());
  for (const Vec2& v : verts_) {
    out.push_back(rotate(-frame.theta, v - Vec2(frame.px, frame.py)));
  }
  return ConvexPolytope(std::move(out));
}

ConvexPolytope ConvexPolytope::rect(double x0, double y0, double x1,
                                    double y1) {
  if (!(x1 > x0) || !(y1 > y0)) {
    throw ConfigError("rect: requires x1 > x0 and y1 > y0");
  }
  return ConvexPolytope(
      {Vec2(x0, y0), Vec2(x1, y0), Vec2(x1, y1), Vec2(x0, y1)});
}

std::vector<BodyCircle> default_body_circles() {
  return {{-0.2, 0.25}, {0.0, 0.25}, {0.2, 0.25}};
}

std::vector<Vec2> circle_centers(const Pose2& pose,
                                 const std::vector<BodyCircle>& circles) {
  std::vector<Vec2> out;
  out.reserve(circles.size());
  const double c = std::cos(pose.theta), s = std::sin(pose.theta);
  for (const BodyCircle& b : circles) {
    out.emplace_back(pose.px + c * b.offset_x, pose.py + s * b.offset_x);
  }
  return out;
}

}  // namespace koopnav
