#include "koopnav/map.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "json.hpp"

namespace koopnav {

namespace {

using nlohmann::json;

json rect_to_json(const Rect& r) {
  return json{r.xmin, r.ymin, r.xmax, r.ymax};
}

Rect rect_from_json(const json& j) {
  return Rect{j.at(0).get<double>(), j.at(1).get<double>(),
              j.at(2).get<double>(), j.at(3).get<double>()};
}

json poses_to_json(const std::vector<Pose2>& poses) {
  json out = json::array();
  for (const Pose2& p : poses) out.push_back({p.px, p.py, p.theta});
  return out;
}

std::vector<Pose2> poses_from_json(const json& j) {
  std::vector<Pose2> out;
  for (const auto& p : j) {
    out.push_back(Pose2{p.at(0).get<double>(), p.at(1).get<double>(),
                        p.at(2).get<double>()});
  }
  return out;
}

ObstacleMap corridor_map(const std::string& name, double gap) {
  // A room split by two wall slabs leaving a centered doorway; the robot
  // crosses from the left region to the right one. Course length keeps the
  // worst start/goal pair comfortably inside the 6 s window at the planner's
  // 0.5 m/s reference speed.
  ObstacleMap map;
  map.name = name;
  map.bounds = Rect{0.0, -1.2, 3.6, 1.2};
  const double x0 = 1.55, x1 = 2.05;  // slab faces; doorway centered at y = 0
  map.obstacles.push_back(ConvexPolytope::rect(x0, gap / 2, x1, 1.2));
  map.obstacles.push_back(ConvexPolytope::rect(x0, -1.2, x1, -gap / 2));
  map.start_region = Rect{0.5, -0.5, 0.9, 0.5};
  map.goal_region = Rect{2.7, -0.5, 3.1, 0.5};
  map.success_window = 6.0;
  return map;
}

ObstacleMap maze_map(const std::string& name, double w) {
  // Three horizontal lanes of width w inside a walled box, connected by
  // gaps at alternating ends of two baffles (a serpentine). Five poses,
  // shared between starts and goals, sit along the lanes with enough wall
  // clearance for the body circles.
  const double tk = 0.15;            // wall thickness
  const double L = 2.5;              // interior width
  const double H = 3 * w + 2 * tk;   // interior height
  ObstacleMap map;
  map.name = name;
  map.bounds = Rect{-tk, -tk, L + tk, H + tk};
  map.obstacles.push_back(ConvexPolytope::rect(-tk, -tk, L + tk, 0.0));
  map.obstacles.push_back(ConvexPolytope::rect(-tk, H, L + tk, H + tk));
  map.obstacles.push_back(ConvexPolytope::rect(-tk, 0.0, 0.0, H));
  map.obstacles.push_back(ConvexPolytope::rect(L, 0.0, L + tk, H));
  // Baffle between lanes 1-2 leaves its gap at the right end, the one
  // between lanes 2-3 at the left end.
  map.obstacles.push_back(ConvexPolytope::rect(0.0, w, L - w, w + tk));
  map.obstacles.push_back(ConvexPolytope::rect(w, 2 * w + tk, L, 2 * w + 2 * tk));
  const double half_pi = std::numbers::pi / 2;
  map.start_poses = {
      Pose2{0.6, w / 2, 0.0},                 // lane 1, left
      Pose2{L - 0.6, w / 2, half_pi},         // lane 1, right (facing the gap)
      Pose2{L / 2, w + tk + w / 2, std::numbers::pi},  // lane 2, middle
      Pose2{0.6, H - w / 2, 0.0},             // lane 3, left
      Pose2{L - 0.6, H - w / 2, 0.0},         // lane 3, right
  };
  map.goal_poses = map.start_poses;
  map.success_window = 30.0;
  return map;
}

}  // namespace

double ObstacleMap::min_clearance(const Vec2& p) const {
  double best = std::numeric_limits<double>::infinity();
  for (const ConvexPolytope& obs : obstacles) {
    best = std::min(best, obs.distance(p).distance);
  }
  return best;
}

std::vector<ObstacleMap> builtin_maps() {
  return {corridor_map("corridor1", 0.70), corridor_map("corridor2", 0.55),
          maze_map("maze75", 0.75), maze_map("maze70", 0.70)};
}

ObstacleMap builtin_map(const std::string& name) {
  for (ObstacleMap& map : builtin_maps()) {
    if (map.name == name) return std::move(map);
  }
  throw ConfigError("unknown map '" + name +
                    "' (expected corridor1, corridor2, maze75 or maze70)");
}

std::string map_to_json(const ObstacleMap& map) {
  json obstacles = json::array();
  for (const ConvexPolytope& obs : map.obstacles) {
    json verts = json::array();
    for (const Vec2& v : obs.vertices()) verts.push_back({v.x(), v.y()});
    obstacles.push_back(verts);
  }
  const json j{{"format", "koopnav-map"},
               {"version", 1},
               {"name", map.name},
               {"bounds", rect_to_json(map.bounds)},
               {"obstacles", obstacles},
               {"start_region", rect_to_json(map.start_region)},
               {"goal_region", rect_to_json(map.goal_region)},
               {"start_poses", poses_to_json(map.start_poses)},
               {"goal_poses", poses_to_json(map.goal_poses)},
               {"success_window", map.success_window},
               {"goal_tolerance", map.goal_tolerance}};
  return j.dump(2) + "\n";
}

ObstacleMap map_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != "koopnav-map") {
      throw IoError("not a map file");
    }
    if (j.at("version").get<int>() != 1) {
      throw IoError("unsupported map file version");
    }
    ObstacleMap map;
    map.name = j.at("name").get<std::string>();
    map.bounds = rect_from_json(j.at("bounds"));
    for (const auto& verts : j.at("obstacles")) {
      std::vector<Vec2> vs;
      for (const auto& v : verts) {
        vs.emplace_back(v.at(0).get<double>(), v.at(1).get<double>());
      }
      map.obstacles.emplace_back(std::move(vs));
    }
    map.start_region = rect_from_json(j.at("start_region"));
    map.goal_region = rect_from_json(j.at("goal_region"));
    map.start_poses = poses_from_json(j.at("start_poses"));
    map.goal_poses = poses_from_json(j.at("goal_poses"));
    map.success_window = j.at("success_window").get<double>();
    map.goal_tolerance = j.at("goal_tolerance").get<double>();
    return map;
  } catch (const json::exception& e) {
    throw IoError(std::string("bad map file: ") + e.what());
  }
}

}  // namespace koopnav
