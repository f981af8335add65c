#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "koopnav/dataset.hpp"
#include "koopnav/lift.hpp"

namespace koopnav {

/// Whether the regression target is the full lifted pair [phi(x+); u+] or
/// only the lifted successor state phi(x+). The A, B blocks of the solution
/// coincide because least-squares rows decouple; C, D exist only in Full.
enum class FitMode { Full, Reduced };

/// Linear model of the lifted dynamics fit by dynamic mode decomposition:
///   [phi(x+); u+] ~ [[A, B], [C, D]] [phi(x); u]
/// C and D are diagnostic and empty in Reduced mode.
struct KoopmanModel {
  LiftSpec lift;
  int p = 0;
  int m = 3;
  double dt = 0.02;
  Eigen::MatrixXd A, B, C, D;

  long pairs = 0;
  /// J(K) per transition: 0.5 * mean squared residual over all target rows.
  double fit_residual = 0.0;
  /// Same objective restricted to the six raw-state target rows. Unlike
  /// fit_residual this is comparable across dictionaries of different
  /// dimension, so nesting comparisons use it.
  double state_residual = 0.0;
  /// ||K Y - X||_F / max(1, ||X||_F) on the accumulated Gram matrices.
  double normal_eq_residual = 0.0;
};

/// Per-axis linear models over (position, velocity) pairs driven by the
/// matching command channel: (px,vx|u0), (py,vy|u1), (theta,omega|u2).
struct ComponentwiseModel {
  Eigen::Matrix2d A[3];
  Eigen::Vector2d B[3];
  double dt = 0.02;

  long pairs = 0;
  double fit_residual = 0.0;
  double state_residual = 0.0;
  double normal_eq_residual = 0.0;
};

/// Fit-free kinematic baseline: velocities jump to the command, poses
/// advance with the trapezoid of current velocity and command.
struct IntegratorModel {
  double dt = 0.02;
};

using ModelVariant =
    std::variant<KoopmanModel, ComponentwiseModel, IntegratorModel>;

/// One of the five model families selectable on the command line:
/// "identity", "poly3", "td:N", "componentwise", "integrator".
struct ModelSpec {
  enum class Family { Koopman, Componentwise, Integrator };
  Family family = Family::Koopman;
  LiftSpec lift = LiftSpec::identity();  // meaningful for Koopman only

  static ModelSpec parse(const std::string& text);
  std::string name() const;
  bool operator==(const ModelSpec&) const = default;
};

/// Second moments of the lifted transition data, normalized by the pair
/// count:  Y = mean psi psi', X = mean psi+ psi', Z = mean psi+ psi+',
/// with psi = [phi(x); u] and psi+ the fit-mode target.
struct GramMats {
  Eigen::MatrixXd Y, X, Z;
  long pairs = 0;
};

/// Blocked accumulation: per-window matrix products summed into a fixed set
/// of chunk partials combined by a fixed pairwise reduction, so the result
/// does not depend on the OpenMP thread count.
GramMats accumulate_gram(std::span<const Trajectory> trajectories, int h,
                         const LiftSpec& spec, FitMode mode,
                         ExecMode exec = ExecMode::Parallel);

/// Naive reference: rank-1 updates over every transition in order.
GramMats accumulate_gram_serial(std::span<const Trajectory> trajectories,
                                int h, const LiftSpec& spec, FitMode mode);

KoopmanModel dmd_from_gram(const GramMats& gram, const LiftSpec& spec,
                           double rcond, FitMode mode, double dt);

/// DMD fit over explicit transition pairs. Pairs without a successor
/// command are skipped in Full mode (the target needs u+).
KoopmanModel dmd_fit(std::span<const TransitionPair> pairs,
                     const LiftSpec& spec, double rcond = 1e-10,
                     FitMode mode = FitMode::Full, double dt = 0.02);

/// DMD fit over every localized length-h window of the trajectories. Both
/// modes use the h-1 full transitions of each window.
KoopmanModel dmd_fit(std::span<const Trajectory> trajectories, int h,
                     const LiftSpec& spec, double rcond = 1e-10,
                     FitMode mode = FitMode::Full,
                     ExecMode exec = ExecMode::Parallel);

ComponentwiseModel fit_componentwise(std::span<const TransitionPair> pairs,
                                     double rcond = 1e-10, double dt = 0.02);

ComponentwiseModel fit_componentwise(std::span<const Trajectory> trajectories,
                                     int h, double rcond = 1e-10);

/// Multi-step open-loop prediction. `history` is chronological state
/// history ending at the current state; returns one predicted state per
/// command. Time-delay models re-assemble their register from predicted
/// states each step; other lifted models roll phi forward linearly and
/// project to the first six entries.
std::vector<State> predict(const ModelVariant& model,
                           std::span<const State> history,
                           std::span<const Command> commands);

struct PredictionReport {
  int horizon = 0;
  long sequences = 0;
  Eigen::MatrixXd mean_abs;  // horizon x 6, row k = prediction step k+1
  Eigen::MatrixXd std_abs;   // horizon x 6
  double aggregate_mean = 0.0;
  double aggregate_std = 0.0;

  /// Mean absolute error over steps [first, last] (1-based, inclusive) and
  /// all six state dimensions.
  double step_range_mean(int first, int last) const;
};

/// Open-loop prediction error over the last `horizon` transitions of each
/// window, against the window's recorded states. States before the
/// prediction origin (windows may be longer than the horizon) form the
/// initial history.
///
/// Each window time is charged exactly once, at the step where its register
/// entry finalizes. For memoryless lifts that is the step the state is
/// predicted, so row k of the report is the error k+1 steps past the origin.
/// A time-delay register of length n retains each estimate for n-1 further
/// steps, so its entry for window time t finalizes (reaches the oldest slot)
/// at step t+n-1: the first n-1 rows score estimates of lead-in times, which
/// are the recorded states themselves and carry zero error, and later rows
/// show the compounding curve delayed by n-1 steps. Time-delay models
/// therefore require windows with horizon + n - 1 transitions (a true-state
/// lead-in) and a horizon longer than the register.
PredictionReport prediction_error(const ModelVariant& model,
                                  std::span<const WindowSequence> windows,
                                  int horizon = 100,
                                  ExecMode exec = ExecMode::Parallel);

/// Draws `count` localized windows uniformly (trajectory, then start) from
/// a single sequential stream, so a longer draw extends a shorter one.
std::vector<WindowSequence> sample_windows(
    std::span<const Trajectory> trajectories, int h, int count,
    std::uint64_t seed);

inline constexpr std::uint64_t kDefaultEvalSeed = 1000;
inline constexpr int kDefaultEvalWindows = 10000;

/// CSV with columns step,state_index,mean_abs_err,std_abs_err.
std::string prediction_report_csv(const PredictionReport& report);

/// Lifted linear dynamics consumed by the receding-horizon controller.
struct LinearDynamics {
  LiftSpec lift;
  Eigen::MatrixXd A;  // p x p
  Eigen::MatrixXd B;  // p x 3
  double dt = 0.02;
};

LinearDynamics to_linear(const ModelVariant& model);

const char* model_kind(const ModelVariant& model);

/// Versioned JSON with the model family, dimensions, row-major matrices,
/// residuals, and the manifest hash of the dataset it was fit on.
void save_model(const std::filesystem::path& path, const ModelVariant& model,
                const std::string& dataset_hash);

struct LoadedModel {
  ModelVariant model;
  std::string dataset_hash;
};

LoadedModel load_model(const std::filesystem::path& path);

}  // namespace koopnav
