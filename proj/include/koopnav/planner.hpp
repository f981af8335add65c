#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "koopnav/map.hpp"
#include "koopnav/types.hpp"

namespace koopnav {

struct GridCell {
  int row = 0;
  int col = 0;

  friend bool operator==(const GridCell&, const GridCell&) = default;
};

/// Exact octile path cost: counts of unit-cost straight steps and sqrt(2)-
/// cost diagonal steps. Because sqrt(2) is irrational, two costs are equal
/// as real numbers iff the counts match, so comparisons can stay in integer
/// arithmetic and search results are reproducible across platforms.
struct GridCost {
  int straight = 0;
  int diag = 0;

  double total() const;

  friend bool operator==(const GridCost&, const GridCost&) = default;
  friend GridCost operator+(const GridCost& a, const GridCost& b) {
    return GridCost{a.straight + b.straight, a.diag + b.diag};
  }
};

/// Exact comparison of a.straight + a.diag*sqrt(2) < b.straight + b.diag*sqrt(2).
bool cost_less(const GridCost& a, const GridCost& b);

/// Row-major boolean raster of the workspace. Cell (0, 0) sits at the map's
/// lower-left corner; rows advance along +y, columns along +x.
struct OccupancyGrid {
  double resolution = 0.0;  // meters per cell, > 0
  Vec2 origin{0.0, 0.0};    // world position of cell (0, 0)'s corner
  int rows = 0;
  int cols = 0;
  double inflation_radius = 0.0;
  std::vector<std::uint8_t> cells;  // row-major, 1 = occupied

  int index(GridCell c) const { return c.row * cols + c.col; }
  bool in_bounds(GridCell c) const {
    return c.row >= 0 && c.row < rows && c.col >= 0 && c.col < cols;
  }
  bool occupied(GridCell c) const { return cells[index(c)] != 0; }
  Vec2 cell_center(GridCell c) const {
    return origin + resolution * Vec2(c.col + 0.5, c.row + 0.5);
  }
  /// Cell containing a world point; may be out of bounds.
  GridCell world_to_cell(const Vec2& p) const;
};

/// Rasters the map at the given resolution: a cell is occupied iff its
/// center's signed distance to some obstacle is at most inflation_radius.
/// The grid covers the map bounds (the last row/column may extend past
/// them). Throws ConfigError on a non-positive resolution or a negative
/// inflation radius.
OccupancyGrid rasterize(const ObstacleMap& map, double resolution,
                        double inflation_radius,
                        ExecMode exec = ExecMode::Parallel);

/// 8-connected shortest path from start to goal, both inclusive, under the
/// octile metric (straight 1, diagonal sqrt(2)) with the octile-distance
/// heuristic. Expansion ties break toward larger g-value, then smaller
/// row-major index, so results are deterministic. Throws
/// OccupiedEndpointError when start or goal is occupied or out of bounds and
/// NoPathError when the goal is unreachable.
std::vector<GridCell> astar(const OccupancyGrid& grid, GridCell start,
                            GridCell goal);

/// Cost of a path as returned by astar. Throws std::invalid_argument if the
/// path is empty or consecutive cells are not 8-adjacent.
GridCost path_cost(std::span<const GridCell> path);

/// Cell-center world polyline of a grid path.
std::vector<Vec2> path_to_world(const OccupancyGrid& grid,
                                std::span<const GridCell> path);

/// Local tracking reference handed to the receding-horizon controller.
struct ReferenceTrajectory {
  std::vector<Pose2> poses;    // length = horizon
  double nominal_speed = 0.0;  // meters/second
};

/// Projects the pose onto the path polyline and emits `horizon` poses
/// advancing nominal_speed * dt_mpc of arc length per step, clamped at the
/// path end. The first pose is the projection point itself. Headings follow
/// the polyline tangent; past the end the final segment's tangent is held.
/// Throws std::invalid_argument on an empty path or non-positive
/// horizon/speed/step.
ReferenceTrajectory local_reference(std::span<const Vec2> path,
                                    const Pose2& pose, int horizon,
                                    double nominal_speed, double dt_mpc);

/// Expands reference poses into full tracked states: world-frame planar
/// velocities by forward differences (the last pose copies its
/// predecessor's, a single pose gets zero) and yaw rates from the heading
/// differences. When initial_heading is given, headings are re-shaped into a
/// ramp from it toward each pose's tangent heading at most max_yaw_rate
/// fast, so path corners and large initial misalignment never demand
/// impossible spins; without it the poses' headings are used as-is and only
/// the yaw rate is clamped.
std::vector<State> to_reference_states(
    const ReferenceTrajectory& reference, double dt_mpc,
    double max_yaw_rate = 1.0,
    std::optional<double> initial_heading = std::nullopt);

/// ASCII PGM image of the grid (occupied black, free white), top row first,
/// for eyeballing rasterizations.
std::string grid_to_pgm(const OccupancyGrid& grid);

/// CSV polyline ("x,y" header plus one row per point) for path export.
std::string path_to_csv(std::span<const Vec2> path);

}  // namespace koopnav
