// Scratch probe: C9-shaped suites with fitted models, timed.
#include <chrono>
#include <cstdio>

#include "koopnav/dataset.hpp"
#include "koopnav/nav.hpp"
#include "koopnav/plant.hpp"
#include "koopnav/sysid.hpp"

using namespace koopnav;

namespace {
double now() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch())
      .count();
}

void suite(const char* label, const std::string& map_name, int runs,
           const LinearDynamics& dyn, const PlantParams& pp) {
  SuiteConfig sc;
  sc.runs = runs;
  sc.seed = 0;
  const double t0 = now();
  const SuiteResult res =
      run_suite(builtin_map(map_name), dyn, pp, MpcConfig{}, sc);
  const double dt = now() - t0;
  int succ = 0;
  for (const EpisodeResult& ep : res.episodes) succ += ep.metrics.success;
  std::printf(
      "%-14s %-9s %2d/%2d  coll=%.2f pen=%.2f clear=%6.3f t=%4.1fs "
      "wall=%.1fs\n",
      label, map_name.c_str(), succ, runs, res.mean_collision_events,
      res.mean_penetration_steps, res.min_clearance, res.mean_time_to_goal,
      dt);
  std::fflush(stdout);
}
}  // namespace

int main() {
  const PlantParams pp;  // real plant: slip, drift active
  CollectionConfig cc;
  cc.episodes = 50;
  cc.duration_s = 10.0;
  const double t0 = now();
  const std::vector<Trajectory> trajs = collect(pp, cc);
  const KoopmanModel ul = dmd_fit(trajs, cc.window_h, LiftSpec::identity());
  const ComponentwiseModel cw = fit_componentwise(trajs, cc.window_h);
  std::printf("collect+fit wall=%.1fs\n", now() - t0);
  std::fflush(stdout);

  const LinearDynamics dyn_ul = to_linear(ModelVariant{ul});
  const LinearDynamics dyn_cw = to_linear(ModelVariant{cw});
  suite("UnifiedLinear", "corridor1", 20, dyn_ul, pp);
  suite("UnifiedLinear", "maze75", 10, dyn_ul, pp);
  suite("UnifiedLinear", "maze70", 10, dyn_ul, pp);
  suite("Componentwise", "maze70", 10, dyn_cw, pp);
  return 0;
}
