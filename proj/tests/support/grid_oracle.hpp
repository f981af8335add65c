#pragma once

#include <optional>
#include <vector>

#include "koopnav/planner.hpp"
#include "koopnav/rng.hpp"

namespace koopnav::testing {

/// Scan-based Dijkstra over the 8-connected grid; returns the exact octile
/// cost from start to goal, or nothing when the goal is unreachable.
/// Deliberately heapless and heuristic-free so it shares no machinery with
/// the search under test.
inline std::optional<GridCost> dijkstra_cost(const OccupancyGrid& grid,
                                             GridCell start, GridCell goal) {
  const int n = grid.rows * grid.cols;
  std::vector<GridCost> dist(n);
  std::vector<char> seen(n, 0), done(n, 0);
  dist[grid.index(start)] = GridCost{};
  seen[grid.index(start)] = 1;
  for (;;) {
    int u = -1;
    for (int i = 0; i < n; ++i) {
      if (seen[i] && !done[i] && (u < 0 || cost_less(dist[i], dist[u]))) {
        u = i;
      }
    }
    if (u < 0) return std::nullopt;
    if (u == grid.index(goal)) return dist[u];
    done[u] = 1;
    const GridCell cell{u / grid.cols, u % grid.cols};
    for (int dr = -1; dr <= 1; ++dr) {
      for (int dc = -1; dc <= 1; ++dc) {
        if (dr == 0 && dc == 0) continue;
        const GridCell nb{cell.row + dr, cell.col + dc};
        if (!grid.in_bounds(nb) || grid.occupied(nb)) continue;
        const int v = grid.index(nb);
        const GridCost cand =
            dist[u] + (dr != 0 && dc != 0 ? GridCost{0, 1} : GridCost{1, 0});
        if (!seen[v] || cost_less(cand, dist[v])) {
          dist[v] = cand;
          seen[v] = 1;
        }
      }
    }
  }
}

/// Uniform random grid with the given occupancy fraction; start and goal
/// corners are always left free.
inline OccupancyGrid random_grid(int rows, int cols, double fill, Rng& rng) {
  OccupancyGrid grid;
  grid.resolution = 0.05;
  grid.rows = rows;
  grid.cols = cols;
  grid.cells.assign(static_cast<std::size_t>(rows) * cols, 0);
  for (auto& cell : grid.cells) cell = rng.uniform(0.0, 1.0) < fill ? 1 : 0;
  grid.cells.front() = 0;
  grid.cells.back() = 0;
  return grid;
}

}  // namespace koopnav::testing
