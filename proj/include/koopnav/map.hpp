#pragma once

#include <string>
#include <vector>

#include "koopnav/geometry.hpp"
#include "koopnav/types.hpp"

namespace koopnav {

/// Axis-aligned rectangle in world coordinates (closed on all sides).
struct Rect {
  double xmin = 0.0;
  double ymin = 0.0;
  double xmax = 0.0;
  double ymax = 0.0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  Vec2 center() const {
    return Vec2(0.5 * (xmin + xmax), 0.5 * (ymin + ymax));
  }
  bool contains(const Vec2& p) const {
    return p.x() >= xmin && p.x() <= xmax && p.y() >= ymin && p.y() <= ymax;
  }
};

/// Static navigation environment: workspace bounds, convex obstacles and
/// scenario-sampling data. Corridor maps sample start/goal uniformly from the
/// rectangular regions; maze maps carry discrete pose sets, which take
/// precedence over the regions when non-empty.
struct ObstacleMap {
  std::string name;
  Rect bounds;
  std::vector<ConvexPolytope> obstacles;
  Rect start_region;
  Rect goal_region;
  std::vector<Pose2> start_poses;
  std::vector<Pose2> goal_poses;
  double success_window = 0.0;  // seconds before an episode times out
  double goal_tolerance = 0.3;  // meters

  /// Smallest signed distance from p to any obstacle; +infinity when the map
  /// has none. Negative values are penetration depths.
  double min_clearance(const Vec2& p) const;
};

/// The four built-in environments: corridor1 (0.70 m gap), corridor2
/// (0.55 m gap), maze75 (0.75 m passages), maze70 (0.70 m passages).
/// Corridors allow 6 s per episode, mazes 30 s.
std::vector<ObstacleMap> builtin_maps();

/// Looks up a built-in map by name. Throws ConfigError on unknown names.
ObstacleMap builtin_map(const std::string& name);

/// Versioned JSON image of a map (format "koopnav-map", version 1): name,
/// bounds, obstacle vertex lists, regions, pose sets, window and tolerance.
std::string map_to_json(const ObstacleMap& map);

/// Parses map_to_json output. Throws IoError on malformed text or an
/// unsupported version; polytope validation errors propagate.
ObstacleMap map_from_json(const std::string& text);

}  // namespace koopnav
