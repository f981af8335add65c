#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "koopnav/plant.hpp"
#include "koopnav/types.hpp"

namespace koopnav {

/// One recorded episode: world-frame states (N+1) and the body-frame
/// commands (N) that produced them.
struct Trajectory {
  std::vector<State> states;
  std::vector<Command> commands;
  double dt = 0.02;
};

/// A localized training window: states re-expressed in the frame of the
/// window's first state, commands rotated into that same frame using the
/// localized heading at their step.
struct WindowSequence {
  std::vector<State> states;     // h + 1
  std::vector<Command> commands; // h
};

struct CollectionConfig {
  int episodes = 100;
  double duration_s = 10.0;
  double resample_interval_s = 0.5;
  int window_h = 100;
  std::uint64_t seed = 2024;

  void validate(const PlantParams& plant) const;
};

/// Rolls out `episodes` excitation episodes from rest. Commands are sampled
/// uniformly in the command box and held for resample_interval_s. Episode i
/// draws from streams (seed, 2i) and (seed, 2i+1) so results do not depend
/// on scheduling.
std::vector<Trajectory> collect(const PlantParams& plant,
                                const CollectionConfig& config,
                                ExecMode mode = ExecMode::Parallel);

/// Localizes the length-h window starting at `start`.
WindowSequence localize_window(const Trajectory& traj, int start, int h);

/// All N-h+1 windows of a trajectory.
std::vector<WindowSequence> extract_windows(const Trajectory& traj, int h);

/// Shuffle-split of n indices at trajectory granularity. Fractions must be
/// positive and sum to 1; rounding leftovers go to the earliest groups.
std::vector<std::vector<std::size_t>> split_indices(
    std::size_t n, std::span<const double> fractions, std::uint64_t seed);

/// View of one training transition inside a window. States up to and
/// including step t form the available history for history-dependent lifts.
struct TransitionPair {
  const WindowSequence* window = nullptr;
  int t = 0;
  bool has_next_command = true;

  std::span<const State> history() const {
    return std::span<const State>(window->states.data(),
                                  static_cast<std::size_t>(t) + 1);
  }
  const State& x() const { return window->states[t]; }
  const State& x_next() const { return window->states[t + 1]; }
  const Command& u() const { return window->commands[t]; }
  const Command& u_next() const { return window->commands[t + 1]; }
};

/// Full transition pairs of each window (h-1 per window); the final
/// transition of a window lacks a successor command and is only included
/// when `include_tail` is set.
std::vector<TransitionPair> transition_pairs(
    std::span<const WindowSequence> windows, bool include_tail = false);

/// On-disk dataset layout: one CSV per trajectory plus manifest.json whose
/// data_hash fingerprints the trajectory bytes.
struct DatasetManifest {
  CollectionConfig config;
  PlantParams plant;
  std::vector<std::string> files;
  std::string data_hash;
};

void write_dataset(const std::filesystem::path& dir,
                   std::span<const Trajectory> trajectories,
                   const CollectionConfig& config, const PlantParams& plant);

struct LoadedDataset {
  std::vector<Trajectory> trajectories;
  DatasetManifest manifest;
};

LoadedDataset read_dataset(const std::filesystem::path& dir);

std::string trajectory_csv(const Trajectory& traj);
Trajectory parse_trajectory_csv(const std::string& text);

}  // namespace koopnav
