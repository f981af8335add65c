#include "koopnav/planner.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <sstream>
#include <stdexcept>

#include "koopnav/geometry.hpp"
#include "koopnav/io.hpp"

namespace koopnav {

namespace {

// 3x3 neighborhood in row-major order so expansion order (and therefore
// parent choice on cost ties) is fixed.
constexpr int kOffsets[8][2] = {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1},
                                {0, 1},   {1, -1}, {1, 0},  {1, 1}};

GridCost step_cost(int dr, int dc) {
  return (dr != 0 && dc != 0) ? GridCost{0, 1} : GridCost{1, 0};
}

GridCost octile(GridCell a, GridCell b) {
  const int dr = std::abs(a.row - b.row);
  const int dc = std::abs(a.col - b.col);
  return GridCost{std::abs(dr - dc), std::min(dr, dc)};
}

}  // namespace

double GridCost::total() const {
  return straight + diag * std::numbers::sqrt2;
}

bool cost_less(const GridCost& a, const GridCost& b) {
  // a < b  iff  ds + dd*sqrt(2) > 0 where ds, dd are the count differences.
  const long long ds = b.straight - a.straight;
  const long long dd = b.diag - a.diag;
  if (ds >= 0 && dd >= 0) return ds != 0 || dd != 0;
  if (ds <= 0 && dd <= 0) return false;
  if (ds > 0) return ds * ds > 2 * dd * dd;  // dd < 0: ds > |dd|*sqrt(2)?
  return 2 * dd * dd > ds * ds;              // ds < 0: |dd|*sqrt(2) > |ds|?
}

GridCell OccupancyGrid::world_to_cell(const Vec2& p) const {
  return GridCell{static_cast<int>(std::floor((p.y() - origin.y()) / resolution)),
                  static_cast<int>(std::floor((p.x() - origin.x()) / resolution))};
}

OccupancyGrid rasterize(const ObstacleMap& map, double resolution,
                        double inflation_radius, ExecMode exec) {
  if (!(resolution > 0.0) || !std::isfinite(resolution)) {
    throw ConfigError("rasterize: resolution must be positive");
  }
  if (inflation_radius < 0.0 || !std::isfinite(inflation_radius)) {
    throw ConfigError("rasterize: inflation radius must be non-negative");
  }
  OccupancyGrid grid;
  grid.resolution = resolution;
  grid.origin = Vec2(map.bounds.xmin, map.bounds.ymin);
  grid.inflation_radius = inflation_radius;
  grid.cols = std::max(1, static_cast<int>(std::ceil(map.bounds.width() / resolution - 1e-9)));
  grid.rows = std::max(1, static_cast<int>(std::ceil(map.bounds.height() / resolution - 1e-9)));
  grid.cells.assign(static_cast<std::size_t>(grid.rows) * grid.cols, 0);

  const auto fill_row = [&](int r) {
    for (int c = 0; c < grid.cols; ++c) {
      const GridCell cell{r, c};
      const double d = map.min_clearance(grid.cell_center(cell));
      grid.cells[grid.index(cell)] = d <= inflation_radius ? 1 : 0;
    }
  };
  if (exec == ExecMode::Parallel) {
#pragma omp parallel for schedule(static)
    for (int r = 0; r < grid.rows; ++r) fill_row(r);
  } else {
    for (int r = 0; r < grid.rows; ++r) fill_row(r);
  }
  return grid;
}

std::vector<GridCell> astar(const OccupancyGrid& grid, GridCell start,
                            GridCell goal) {
  const auto check_endpoint = [&](GridCell c, const char* which) {
    if (!grid.in_bounds(c)) {
      throw OccupiedEndpointError(std::string(which) + " cell is outside the grid");
    }
    if (grid.occupied(c)) {
      throw OccupiedEndpointError(std::string(which) + " cell is occupied");
    }
  };
  check_endpoint(start, "start");
  check_endpoint(goal, "goal");
  if (start == goal) return {start};

  const int n = grid.rows * grid.cols;
  std::vector<GridCost> g(n);
  std::vector<char> seen(n, 0), closed(n, 0);
  std::vector<int> parent(n, -1);

  struct Entry {
    GridCost f, g;
    int idx;
  };
  // "Less" for the max-heap: true when a should pop after b. Smaller f wins,
  // then larger g, then smaller row-major index.
  const auto after = [](const Entry& a, const Entry& b) {
    if (!(a.f == b.f)) return cost_less(b.f, a.f);
    if (!(a.g == b.g)) return cost_less(a.g, b.g);
    return a.idx > b.idx;
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(after)> open(after);

  const int start_idx = grid.index(start);
  const int goal_idx = grid.index(goal);
  g[start_idx] = GridCost{};
  seen[start_idx] = 1;
  open.push(Entry{octile(start, goal), GridCost{}, start_idx});

  while (!open.empty()) {
    const Entry e = open.top();
    open.pop();
    if (closed[e.idx] || !(e.g == g[e.idx])) continue;  // stale copy
    closed[e.idx] = 1;
    if (e.idx == goal_idx) {
      std::vector<GridCell> path;
      for (int idx = goal_idx; idx != -1; idx = parent[idx]) {
        path.push_back(GridCell{idx / grid.cols, idx % grid.cols});
      }
      std::reverse(path.begin(), path.end());
      return path;
    }
    const GridCell cell{e.idx / grid.cols, e.idx % grid.cols};
    for (const auto& off : kOffsets) {
      const GridCell nb{cell.row + off[0], cell.col + off[1]};
      if (!grid.in_bounds(nb) || grid.occupied(nb)) continue;
      const int nb_idx = grid.index(nb);
      if (closed[nb_idx]) continue;
      const GridCost cand = e.g + step_cost(off[0], off[1]);
      if (seen[nb_idx] && !cost_less(cand, g[nb_idx])) continue;
      g[nb_idx] = cand;
      seen[nb_idx] = 1;
      parent[nb_idx] = e.idx;
      open.push(Entry{cand + octile(nb, goal), cand, nb_idx});
    }
  }
  throw NoPathError("goal is unreachable from start");
}

GridCost path_cost(std::span<const GridCell> path) {
  if (path.empty()) throw std::invalid_argument("path_cost: empty path");
  GridCost cost;
  for (std::size_t i = 1; i < path.size(); ++i) {
    const int dr = path[i].row - path[i - 1].row;
    const int dc = path[i].col - path[i - 1].col;
    if (std::max(std::abs(dr), std::abs(dc)) != 1) {
      throw std::invalid_argument("path_cost: cells are not 8-adjacent");
    }
    cost = cost + step_cost(dr, dc);
  }
  return cost;
}

std::vector<Vec2> path_to_world(const OccupancyGrid& grid,
                                std::span<const GridCell> path) {
  std::vector<Vec2> out;
  out.reserve(path.size());
  for (const GridCell& c : path) out.push_back(grid.cell_center(c));
  return out;
}

ReferenceTrajectory local_reference(std::span<const Vec2> path,
                                    const Pose2& pose, int horizon,
                                    double nominal_speed, double dt_mpc) {
  if (path.empty()) {
    throw std::invalid_argument("local_reference: empty path");
  }
  if (horizon < 1) {
    throw std::invalid_argument("local_reference: horizon must be positive");
  }
  if (!(nominal_speed > 0.0) || !(dt_mpc > 0.0)) {
    throw std::invalid_argument(
        "local_reference: speed and step must be positive");
  }

  const std::size_t n = path.size();
  std::vector<double> arc(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    arc[i] = arc[i - 1] + (path[i] - path[i - 1]).norm();
  }
  const double total = arc.back();

  // Arc length of the closest point on the polyline; the strict comparison
  // keeps the earliest arc length on exact distance ties.
  const Vec2 p(pose.px, pose.py);
  double s0 = 0.0;
  double best = (p - path[0]).squaredNorm();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const Vec2 a = path[i], d = path[i + 1] - path[i];
    const double len2 = d.squaredNorm();
    if (len2 == 0.0) continue;
    const double t = std::clamp((p - a).dot(d) / len2, 0.0, 1.0);
    const double d2 = (p - (a + t * d)).squaredNorm();
    if (d2 < best) {
      best = d2;
      s0 = arc[i] + t * std::sqrt(len2);
    }
  }

  // Tangent heading of the last non-degenerate segment, used past the end.
  double end_theta = pose.theta;
  for (std::size_t i = n; i-- > 1;) {
    const Vec2 d = path[i] - path[i - 1];
    if (d.squaredNorm() > 0.0) {
      end_theta = std::atan2(d.y(), d.x());
      break;
    }
  }

  const auto sample = [&](double s) -> Pose2 {
    if (s >= total || total == 0.0) {
      return Pose2{path[n - 1].x(), path[n - 1].y(), end_theta};
    }
    // upper_bound brackets s into arc[i] <= s < arc[i+1], so the segment
    // has positive length even when the polyline repeats points.
    const auto it = std::upper_bound(arc.begin(), arc.end(), s);
    const std::size_t i = static_cast<std::size_t>(it - arc.begin()) - 1;
    const Vec2 d = path[i + 1] - path[i];
    const double t = (s - arc[i]) / d.norm();
    const Vec2 q = path[i] + t * d;
    return Pose2{q.x(), q.y(), std::atan2(d.y(), d.x())};
  };

  ReferenceTrajectory ref;
  ref.nominal_speed = nominal_speed;
  ref.poses.reserve(static_cast<std::size_t>(horizon));
  const double ds = nominal_speed * dt_mpc;
  for (int k = 0; k < horizon; ++k) {
    ref.poses.push_back(sample(std::min(s0 + k * ds, total)));
  }
  return ref;
}

std::vector<State> to_reference_states(const ReferenceTrajectory& reference,
                                       double dt_mpc, double max_yaw_rate,
                                       std::optional<double> initial_heading) {
  if (!(dt_mpc > 0.0) || !(max_yaw_rate > 0.0)) {
    throw std::invalid_argument(
        "to_reference_states: dt and yaw-rate bound must be positive");
  }
  const std::size_t n = reference.poses.size();
  const double max_turn = max_yaw_rate * dt_mpc;
  std::vector<double> theta(n);
  double prev = initial_heading.value_or(0.0);
  for (std::size_t k = 0; k < n; ++k) {
    if (initial_heading) {
      const double delta = wrap_angle(reference.poses[k].theta - prev);
      prev += std::clamp(delta, -max_turn, max_turn);
      theta[k] = wrap_angle(prev);
    } else {
      theta[k] = reference.poses[k].theta;
    }
  }
  std::vector<State> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Pose2& cur = reference.poses[k];
    out[k].px = cur.px;
    out[k].py = cur.py;
    out[k].theta = theta[k];
    if (k + 1 < n) {
      const Pose2& next = reference.poses[k + 1];
      out[k].vx = (next.px - cur.px) / dt_mpc;
      out[k].vy = (next.py - cur.py) / dt_mpc;
      out[k].omega = std::clamp(wrap_angle(theta[k + 1] - theta[k]) / dt_mpc,
                                -max_yaw_rate, max_yaw_rate);
    } else if (n >= 2) {
      out[k].vx = out[k - 1].vx;
      out[k].vy = out[k - 1].vy;
      out[k].omega = out[k - 1].omega;
    }
  }
  return out;
}

std::string grid_to_pgm(const OccupancyGrid& grid) {
  std::ostringstream out;
  out << "P2\n" << grid.cols << ' ' << grid.rows << "\n255\n";
  for (int r = grid.rows - 1; r >= 0; --r) {
    for (int c = 0; c < grid.cols; ++c) {
      out << (grid.occupied(GridCell{r, c}) ? "0" : "255")
          << (c + 1 == grid.cols ? '\n' : ' ');
    }
  }
  return out.str();
}

std::string path_to_csv(std::span<const Vec2> path) {
  std::string out = "x,y\n";
  for (const Vec2& p : path) {
    out += format_double(p.x());
    out += ',';
    out += format_double(p.y());
    out += '\n';
  }
  return out;
}

}  // namespace koopnav
