#include "koopnav/sysid.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "koopnav/io.hpp"
#include "koopnav/rng.hpp"

namespace koopnav {
namespace {

using nlohmann::json;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Number of partial sums used by the blocked accumulators. Each chunk is
/// filled serially in window order and the chunks are combined by a fixed
/// pairwise tree, so results are independent of the thread count.
constexpr int kChunks = 32;

template <typename Fn>
void for_each_chunk(ExecMode exec, Fn&& fn) {
  if (exec == ExecMode::Parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int c = 0; c < kChunks; ++c) fn(c);
  } else {
    for (int c = 0; c < kChunks; ++c) fn(c);
  }
}

struct WindowRef {
  const Trajectory* traj = nullptr;
  int traj_index = 0;
  int start = 0;
};

std::vector<WindowRef> enumerate_windows(
    std::span<const Trajectory> trajectories, int h) {
  if (h < 2) {
    throw std::invalid_argument(
        "window length must be at least 2 to contain a full transition");
  }
  std::vector<WindowRef> refs;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const int n = static_cast<int>(trajectories[i].commands.size());
    if (n < h) {
      throw std::invalid_argument("trajectory " + std::to_string(i) +
                                  " is shorter than the window length");
    }
    for (int s = 0; s + h <= n; ++s) {
      refs.push_back({&trajectories[i], static_cast<int>(i), s});
    }
  }
  return refs;
}

struct GramPartial {
  MatrixXd Y, X, Z;
  long pairs = 0;

  void init(Index target_dim, Index source_dim) {
    Y = MatrixXd::Zero(source_dim, source_dim);
    X = MatrixXd::Zero(target_dim, source_dim);
    Z = MatrixXd::Zero(target_dim, target_dim);
    pairs = 0;
  }

  void add(const GramPartial& other) {
    Y += other.Y;
    X += other.X;
    Z += other.Z;
    pairs += other.pairs;
  }
};

struct WindowWork {
  MatrixXd Phi, P0, N;
};

/// Adds one localized window's h-1 full transitions to a partial sum using
/// matrix products over the whole window. Only the lower triangles of Y and
/// Z are maintained.
void window_update(const WindowSequence& w, const LiftSpec& spec,
                   FitMode mode, const WindowRef& ref, GramPartial& g,
                   WindowWork& ws) {
  const int h = static_cast<int>(w.commands.size());
  const int n = h - 1;
  const int p = spec.dim();
  ws.Phi.resize(p, h);
  for (int t = 0; t < h; ++t) {
    lift(spec, std::span<const State>(w.states.data(),
                                      static_cast<std::size_t>(t) + 1),
         ws.Phi.col(t));
  }
  ws.P0.resize(p + 3, n);
  ws.P0.topRows(p) = ws.Phi.leftCols(n);
  for (int t = 0; t < n; ++t) {
    ws.P0.block<3, 1>(p, t) = w.commands[t].vec();
  }
  const int target = mode == FitMode::Full ? p + 3 : p;
  ws.N.resize(target, n);
  ws.N.topRows(p) = ws.Phi.rightCols(n);
  if (mode == FitMode::Full) {
    for (int t = 0; t < n; ++t) {
      ws.N.block<3, 1>(p, t) = w.commands[t + 1].vec();
    }
  }
  if (!ws.P0.allFinite() || !ws.N.allFinite()) {
    throw NumericError("non-finite lifted data in window at step " +
                       std::to_string(ref.start) + " of trajectory " +
                       std::to_string(ref.traj_index));
  }
  g.Y.selfadjointView<Eigen::Lower>().rankUpdate(ws.P0);
  g.Z.selfadjointView<Eigen::Lower>().rankUpdate(ws.N);
  g.X.noalias() += ws.N * ws.P0.transpose();
  g.pairs += n;
}

/// Fixed pairwise reduction of the chunk partials, then symmetrization and
/// normalization by the pair count.
GramMats finalize_gram(std::vector<GramPartial>& parts) {
  for (int step = 1; step < kChunks; step *= 2) {
    for (int i = 0; i + step < kChunks; i += 2 * step) {
      parts[i].add(parts[i + step]);
    }
  }
  const GramPartial& total = parts[0];
  GramMats gram;
  gram.pairs = total.pairs;
  const double inv = total.pairs > 0 ? 1.0 / static_cast<double>(total.pairs)
                                     : 0.0;
  gram.Y = MatrixXd(total.Y.selfadjointView<Eigen::Lower>()) * inv;
  gram.Z = MatrixXd(total.Z.selfadjointView<Eigen::Lower>()) * inv;
  gram.X = total.X * inv;
  return gram;
}

/// Pseudo-inverse of a symmetric positive semidefinite matrix with
/// eigenvalues below rcond times the largest one truncated to zero.
MatrixXd pinv_psd(const MatrixXd& Y, double rcond) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(Y);
  if (eig.info() != Eigen::Success) {
    throw NumericError("eigendecomposition of the Gram matrix failed");
  }
  const VectorXd& lam = eig.eigenvalues();
  const double lmax = lam.size() > 0 ? lam.cwiseAbs().maxCoeff() : 0.0;
  const double cutoff = rcond * lmax;
  VectorXd inv = VectorXd::Zero(lam.size());
  for (Index i = 0; i < lam.size(); ++i) {
    if (lam[i] > cutoff && lam[i] > 0.0) inv[i] = 1.0 / lam[i];
  }
  return eig.eigenvectors() * inv.asDiagonal() *
         eig.eigenvectors().transpose();
}

/// Least-squares solve K = X pinv(Y) with two refinement sweeps. The sweeps
/// leave K unchanged in exact arithmetic and cancel the O(eps * cond) error
/// of the eigensolver path, keeping the normal-equation residual near
/// machine precision.
MatrixXd solve_normal_equations(const MatrixXd& X, const MatrixXd& Y,
                                double rcond) {
  const MatrixXd pinv = pinv_psd(Y, rcond);
  MatrixXd K = X * pinv;
  for (int sweep = 0; sweep < 2; ++sweep) {
    K += (X - K * Y) * pinv;
  }
  return K;
}

/// J(K) per transition over the given target rows of mean-normalized Gram
/// matrices, expanded as 0.5 (tr Z - 2<K,X> + <K, K Y>).
double objective_per_pair(const Eigen::Ref<const MatrixXd>& K,
                          const Eigen::Ref<const MatrixXd>& X,
                          const Eigen::Ref<const MatrixXd>& Y,
                          double z_trace) {
  const double value =
      z_trace - 2.0 * K.cwiseProduct(X).sum() + K.cwiseProduct(K * Y).sum();
  return 0.5 * std::max(0.0, value);
}

double normal_eq_residual(const MatrixXd& K, const MatrixXd& X,
                          const MatrixXd& Y) {
  return (K * Y - X).norm() / std::max(1.0, X.norm());
}

json matrix_to_json(const MatrixXd& M) {
  json arr = json::array();
  for (Index r = 0; r < M.rows(); ++r) {
    for (Index c = 0; c < M.cols(); ++c) arr.push_back(M(r, c));
  }
  return arr;
}

MatrixXd matrix_from_json(const json& arr, Index rows, Index cols,
                          const char* name) {
  if (!arr.is_array() ||
      static_cast<Index>(arr.size()) != rows * cols) {
    throw IoError(std::string("model field '") + name +
                  "' has the wrong number of entries");
  }
  MatrixXd M(rows, cols);
  Index i = 0;
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) M(r, c) = arr[i++].get<double>();
  }
  return M;
}

}  // namespace

GramMats accumulate_gram(std::span<const Trajectory> trajectories, int h,
                         const LiftSpec& spec, FitMode mode, ExecMode exec) {
  const std::vector<WindowRef> refs = enumerate_windows(trajectories, h);
  const int p = spec.dim();
  const Index source = p + 3;
  const Index target = mode == FitMode::Full ? p + 3 : p;
  std::vector<GramPartial> parts(kChunks);
  for (GramPartial& part : parts) part.init(target, source);
  std::vector<std::string> errors(kChunks);
  for_each_chunk(exec, [&](int c) {
    try {
      WindowWork work;
      const std::size_t begin = refs.size() * c / kChunks;
      const std::size_t end = refs.size() * (c + 1) / kChunks;
      for (std::size_t i = begin; i < end; ++i) {
        const WindowSequence w =
            localize_window(*refs[i].traj, refs[i].start, h);
        window_update(w, spec, mode, refs[i], parts[c], work);
      }
    } catch (const std::exception& e) {
      errors[c] = e.what();
    }
  });
  for (const std::string& e : errors) {
    if (!e.empty()) throw NumericError(e);
  }
  return finalize_gram(parts);
}

GramMats accumulate_gram_serial(std::span<const Trajectory> trajectories,
                                int h, const LiftSpec& spec, FitMode mode) {
  const std::vector<WindowRef> refs = enumerate_windows(trajectories, h);
  const int p = spec.dim();
  const Index source = p + 3;
  const Index target = mode == FitMode::Full ? p + 3 : p;
  MatrixXd Y = MatrixXd::Zero(source, source);
  MatrixXd X = MatrixXd::Zero(target, source);
  MatrixXd Z = MatrixXd::Zero(target, target);
  VectorXd psi(source), psi_next(target);
  long pairs = 0;
  for (const WindowRef& ref : refs) {
    const WindowSequence w = localize_window(*ref.traj, ref.start, h);
    const int n = static_cast<int>(w.commands.size()) - 1;
    for (int t = 0; t < n; ++t) {
      lift(spec, std::span<const State>(w.states.data(),
                                        static_cast<std::size_t>(t) + 1),
           psi.head(p));
      psi.tail<3>() = w.commands[t].vec();
      lift(spec, std::span<const State>(w.states.data(),
                                        static_cast<std::size_t>(t) + 2),
           psi_next.head(p));
      if (mode == FitMode::Full) psi_next.tail<3>() = w.commands[t + 1].vec();
      if (!psi.allFinite() || !psi_next.allFinite()) {
        throw NumericError("non-finite lifted data at transition " +
                           std::to_string(t) + " of window " +
                           std::to_string(ref.start) + " in trajectory " +
                           std::to_string(ref.traj_index));
      }
      Y.noalias() += psi * psi.transpose();
      X.noalias() += psi_next * psi.transpose();
      Z.noalias() += psi_next * psi_next.transpose();
      ++pairs;
    }
  }
  GramMats gram;
  gram.pairs = pairs;
  const double inv = pairs > 0 ? 1.0 / static_cast<double>(pairs) : 0.0;
  gram.Y = Y * inv;
  gram.X = X * inv;
  gram.Z = Z * inv;
  return gram;
}

KoopmanModel dmd_from_gram(const GramMats& gram, const LiftSpec& spec,
                           double rcond, FitMode mode, double dt) {
  const Index p = spec.dim();
  const Index source = p + 3;
  const Index target = mode == FitMode::Full ? p + 3 : p;
  if (gram.Y.rows() != source || gram.Y.cols() != source ||
      gram.X.rows() != target || gram.X.cols() != source ||
      gram.Z.rows() != target || gram.Z.cols() != target) {
    throw std::invalid_argument(
        "Gram matrix dimensions do not match the lift");
  }
  const MatrixXd K = solve_normal_equations(gram.X, gram.Y, rcond);
  if (!K.allFinite()) {
    throw NumericError("least-squares solve produced non-finite entries");
  }
  KoopmanModel model;
  model.lift = spec;
  model.p = static_cast<int>(p);
  model.m = 3;
  model.dt = dt;
  model.pairs = gram.pairs;
  model.A = K.topLeftCorner(p, p);
  model.B = K.topRightCorner(p, 3);
  if (mode == FitMode::Full) {
    model.C = K.bottomLeftCorner(3, p);
    model.D = K.bottomRightCorner(3, 3);
  }
  model.fit_residual =
      objective_per_pair(K, gram.X, gram.Y, gram.Z.trace());
  model.state_residual =
      objective_per_pair(K.topRows(6), gram.X.topRows(6), gram.Y,
                         gram.Z.topLeftCorner(6, 6).trace());
  model.normal_eq_residual = normal_eq_residual(K, gram.X, gram.Y);
  return model;
}

KoopmanModel dmd_fit(std::span<const TransitionPair> pairs,
                     const LiftSpec& spec, double rcond, FitMode mode,
                     double dt) {
  const int p = spec.dim();
  const Index source = p + 3;
  const Index target = mode == FitMode::Full ? p + 3 : p;
  MatrixXd Y = MatrixXd::Zero(source, source);
  MatrixXd X = MatrixXd::Zero(target, source);
  MatrixXd Z = MatrixXd::Zero(target, target);
  VectorXd psi(source), psi_next(target);
  long used = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const TransitionPair& pair = pairs[i];
    if (mode == FitMode::Full && !pair.has_next_command) continue;
    lift(spec, pair.history(), psi.head(p));
    psi.tail<3>() = pair.u().vec();
    lift(spec,
         std::span<const State>(pair.window->states.data(),
                                static_cast<std::size_t>(pair.t) + 2),
         psi_next.head(p));
    if (mode == FitMode::Full) psi_next.tail<3>() = pair.u_next().vec();
    if (!psi.allFinite() || !psi_next.allFinite()) {
      throw NumericError("non-finite lifted data at pair " +
                         std::to_string(i));
    }
    Y.noalias() += psi * psi.transpose();
    X.noalias() += psi_next * psi.transpose();
    Z.noalias() += psi_next * psi_next.transpose();
    ++used;
  }
  if (used == 0) {
    throw std::invalid_argument("dmd_fit requires at least one usable pair");
  }
  GramMats gram;
  gram.pairs = used;
  const double inv = 1.0 / static_cast<double>(used);
  gram.Y = Y * inv;
  gram.X = X * inv;
  gram.Z = Z * inv;
  return dmd_from_gram(gram, spec, rcond, mode, dt);
}

KoopmanModel dmd_fit(std::span<const Trajectory> trajectories, int h,
                     const LiftSpec& spec, double rcond, FitMode mode,
                     ExecMode exec) {
  const GramMats gram = accumulate_gram(trajectories, h, spec, mode, exec);
  if (gram.pairs == 0) {
    throw std::invalid_argument("dmd_fit requires at least one usable pair");
  }
  const double dt = trajectories.empty() ? 0.02 : trajectories.front().dt;
  return dmd_from_gram(gram, spec, rcond, mode, dt);
}

namespace {

struct AxisGram {
  Eigen::Matrix3d Y = Eigen::Matrix3d::Zero();
  Eigen::Matrix<double, 2, 3> X = Eigen::Matrix<double, 2, 3>::Zero();
  Eigen::Matrix2d Z = Eigen::Matrix2d::Zero();
};

void axis_update(AxisGram axes[3], const Vec6& x, const Vec6& x_next,
                 const Vec3& u) {
  for (int a = 0; a < 3; ++a) {
    const Eigen::Vector3d s(x[a], x[a + 3], u[a]);
    const Eigen::Vector2d z(x_next[a], x_next[a + 3]);
    axes[a].Y.noalias() += s * s.transpose();
    axes[a].X.noalias() += z * s.transpose();
    axes[a].Z.noalias() += z * z.transpose();
  }
}

ComponentwiseModel solve_componentwise(AxisGram axes[3], long pairs,
                                       double rcond, double dt) {
  if (pairs == 0) {
    throw std::invalid_argument(
        "componentwise fit requires at least one pair");
  }
  const double inv = 1.0 / static_cast<double>(pairs);
  ComponentwiseModel model;
  model.dt = dt;
  model.pairs = pairs;
  double objective = 0.0;
  double neq_num = 0.0;
  double neq_den = 0.0;
  for (int a = 0; a < 3; ++a) {
    const MatrixXd Y = axes[a].Y * inv;
    const MatrixXd X = axes[a].X * inv;
    const Eigen::Matrix2d Z = axes[a].Z * inv;
    const MatrixXd K = solve_normal_equations(X, Y, rcond);
    if (!K.allFinite()) {
      throw NumericError("componentwise solve produced non-finite entries");
    }
    model.A[a] = K.leftCols<2>();
    model.B[a] = K.col(2);
    objective += objective_per_pair(K, X, Y, Z.trace());
    neq_num += (K * Y - X).squaredNorm();
    neq_den += X.squaredNorm();
  }
  model.fit_residual = objective;
  model.state_residual = objective;
  model.normal_eq_residual =
      std::sqrt(neq_num) / std::max(1.0, std::sqrt(neq_den));
  return model;
}

}  // namespace

ComponentwiseModel fit_componentwise(std::span<const TransitionPair> pairs,
                                     double rcond, double dt) {
  AxisGram axes[3];
  long used = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Vec6 x = pairs[i].x().vec();
    const Vec6 x_next = pairs[i].x_next().vec();
    const Vec3 u = pairs[i].u().vec();
    if (!x.allFinite() || !x_next.allFinite() || !u.allFinite()) {
      throw NumericError("non-finite state data at pair " +
                         std::to_string(i));
    }
    axis_update(axes, x, x_next, u);
    ++used;
  }
  return solve_componentwise(axes, used, rcond, dt);
}

ComponentwiseModel fit_componentwise(std::span<const Trajectory> trajectories,
                                     int h, double rcond) {
  const std::vector<WindowRef> refs = enumerate_windows(trajectories, h);
  AxisGram axes[3];
  long used = 0;
  for (const WindowRef& ref : refs) {
    const WindowSequence w = localize_window(*ref.traj, ref.start, h);
    const int n = static_cast<int>(w.commands.size()) - 1;
    for (int t = 0; t < n; ++t) {
      axis_update(axes, w.states[t].vec(), w.states[t + 1].vec(),
                  w.commands[t].vec());
      ++used;
    }
  }
  const double dt = trajectories.empty() ? 0.02 : trajectories.front().dt;
  return solve_componentwise(axes, used, rcond, dt);
}

namespace {

std::vector<State> predict_koopman(const KoopmanModel& model,
                                   std::span<const State> history,
                                   std::span<const Command> commands) {
  const int p = model.lift.dim();
  if (model.p != p || model.A.rows() != p || model.A.cols() != p ||
      model.B.rows() != p || model.B.cols() != 3) {
    throw std::invalid_argument("model dimensions do not match its lift");
  }
  std::vector<State> out;
  out.reserve(commands.size());
  if (model.lift.kind == LiftKind::TimeDelay) {
    // Shift-register semantics: each predicted state is appended to the
    // history and the next lifted vector is rebuilt from it, instead of
    // trusting the rolled copies of past states.
    std::vector<State> buffer(history.begin(), history.end());
    buffer.reserve(history.size() + commands.size());
    VectorXd phi(p);
    for (const Command& u : commands) {
      lift(model.lift, buffer, phi);
      const VectorXd next = model.A * phi + model.B * u.vec();
      const State s = State::from_vec(next.head<6>());
      out.push_back(s);
      buffer.push_back(s);
    }
  } else {
    VectorXd phi = lift_vec(model.lift, history);
    for (const Command& u : commands) {
      phi = model.A * phi + model.B * u.vec();
      out.push_back(State::from_vec(phi.head<6>()));
    }
  }
  return out;
}

std::vector<State> predict_componentwise(const ComponentwiseModel& model,
                                         const State& current,
                                         std::span<const Command> commands) {
  std::vector<State> out;
  out.reserve(commands.size());
  Vec6 x = current.vec();
  for (const Command& u : commands) {
    const Vec3 uv = u.vec();
    Vec6 next;
    for (int a = 0; a < 3; ++a) {
      const Eigen::Vector2d z =
          model.A[a] * Eigen::Vector2d(x[a], x[a + 3]) + model.B[a] * uv[a];
      next[a] = z[0];
      next[a + 3] = z[1];
    }
    x = next;
    out.push_back(State::from_vec(x));
  }
  return out;
}

std::vector<State> predict_integrator(const IntegratorModel& model,
                                      const State& current,
                                      std::span<const Command> commands) {
  std::vector<State> out;
  out.reserve(commands.size());
  Vec6 x = current.vec();
  for (const Command& u : commands) {
    const Vec3 uv = u.vec();
    Vec6 next;
    for (int a = 0; a < 3; ++a) {
      next[a] = x[a] + 0.5 * model.dt * (x[a + 3] + uv[a]);
      next[a + 3] = uv[a];
    }
    x = next;
    out.push_back(State::from_vec(x));
  }
  return out;
}

}  // namespace

std::vector<State> predict(const ModelVariant& model,
                           std::span<const State> history,
                           std::span<const Command> commands) {
  if (history.empty()) {
    throw std::invalid_argument(
        "predict requires at least the current state");
  }
  if (commands.empty()) {
    throw std::invalid_argument("predict requires at least one command");
  }
  if (const auto* km = std::get_if<KoopmanModel>(&model)) {
    return predict_koopman(*km, history, commands);
  }
  if (const auto* cm = std::get_if<ComponentwiseModel>(&model)) {
    return predict_componentwise(*cm, history.back(), commands);
  }
  return predict_integrator(std::get<IntegratorModel>(model),
                            history.back(), commands);
}

double PredictionReport::step_range_mean(int first, int last) const {
  if (first < 1 || last < first || last > horizon) {
    throw std::invalid_argument("step range outside the report horizon");
  }
  return mean_abs.middleRows(first - 1, last - first + 1).mean();
}

namespace {

// Steps an estimate stays in the time-delay register after it is first
// predicted; the evaluation scores each estimate when it leaves.
std::size_t settle_lag(const ModelVariant& model) {
  if (const auto* km = std::get_if<KoopmanModel>(&model)) {
    if (km->lift.kind == LiftKind::TimeDelay) {
      return static_cast<std::size_t>(km->lift.delay) - 1;
    }
  }
  return 0;
}

}  // namespace

PredictionReport prediction_error(const ModelVariant& model,
                                  std::span<const WindowSequence> windows,
                                  int horizon, ExecMode exec) {
  if (horizon < 1) {
    throw std::invalid_argument("prediction horizon must be at least 1");
  }
  const std::size_t lag = settle_lag(model);
  if (static_cast<std::size_t>(horizon) <= lag) {
    throw std::invalid_argument(
        "prediction horizon must exceed the time-delay register length");
  }
  const std::size_t need = static_cast<std::size_t>(horizon) + lag;
  for (const WindowSequence& w : windows) {
    if (w.commands.size() < need || w.states.size() < need + 1) {
      throw std::invalid_argument(
          lag == 0 ? "window shorter than the horizon"
                   : "time-delay evaluation needs horizon + n - 1 "
                     "transitions per window (true-state lead-in)");
    }
  }
  if (!windows.empty()) {
    // Surface dimension mismatches as argument errors before entering the
    // parallel region.
    (void)predict(model,
                  std::span<const State>(windows[0].states.data(), 1),
                  std::span<const Command>(windows[0].commands.data(), 1));
  }
  const auto window_origin = [horizon](const WindowSequence& w) {
    return static_cast<std::size_t>(w.commands.size()) -
           static_cast<std::size_t>(horizon);
  };
  struct ErrPartial {
    MatrixXd sum, sq;
  };
  std::vector<ErrPartial> parts(
      kChunks, ErrPartial{MatrixXd::Zero(horizon, 6),
                          MatrixXd::Zero(horizon, 6)});
  std::vector<std::string> errors(kChunks);
  for_each_chunk(exec, [&](int c) {
    try {
      const std::size_t begin = windows.size() * c / kChunks;
      const std::size_t end = windows.size() * (c + 1) / kChunks;
      for (std::size_t i = begin; i < end; ++i) {
        const WindowSequence& w = windows[i];
        const std::size_t origin = window_origin(w);
        // Estimates scored at steps <= lag are lead-in states the register
        // copied through unchanged (zero error, rows left at zero); the
        // remaining rows need only horizon - lag rollout steps.
        const std::vector<State> preds = predict(
            model, std::span<const State>(w.states.data(), origin + 1),
            std::span<const Command>(w.commands.data() + origin,
                                     static_cast<std::size_t>(horizon) - lag));
        for (std::size_t k = lag; k < static_cast<std::size_t>(horizon); ++k) {
          const Eigen::Array<double, 6, 1> err =
              (preds[k - lag].vec() - w.states[origin + k - lag + 1].vec())
                  .array()
                  .abs();
          parts[c].sum.row(static_cast<Eigen::Index>(k)) +=
              err.matrix().transpose();
          parts[c].sq.row(static_cast<Eigen::Index>(k)) +=
              err.square().matrix().transpose();
        }
      }
    } catch (const std::exception& e) {
      errors[c] = e.what();
    }
  });
  for (const std::string& e : errors) {
    if (!e.empty()) throw NumericError(e);
  }
  for (int step = 1; step < kChunks; step *= 2) {
    for (int i = 0; i + step < kChunks; i += 2 * step) {
      parts[i].sum += parts[i + step].sum;
      parts[i].sq += parts[i + step].sq;
    }
  }
  PredictionReport report;
  report.horizon = horizon;
  report.sequences = static_cast<long>(windows.size());
  if (windows.empty()) {
    report.mean_abs = MatrixXd::Zero(horizon, 6);
    report.std_abs = MatrixXd::Zero(horizon, 6);
    return report;
  }
  const double n = static_cast<double>(windows.size());
  report.mean_abs = parts[0].sum / n;
  report.std_abs = (parts[0].sq.array() / n -
                    report.mean_abs.array().square())
                       .max(0.0)
                       .sqrt();
  const double samples = n * horizon * 6;
  report.aggregate_mean = parts[0].sum.sum() / samples;
  report.aggregate_std =
      std::sqrt(std::max(0.0, parts[0].sq.sum() / samples -
                                  report.aggregate_mean *
                                      report.aggregate_mean));
  return report;
}

std::vector<WindowSequence> sample_windows(
    std::span<const Trajectory> trajectories, int h, int count,
    std::uint64_t seed) {
  if (count < 0) throw std::invalid_argument("sample count must be >= 0");
  if (trajectories.empty()) {
    throw std::invalid_argument("cannot sample windows without trajectories");
  }
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    if (static_cast<int>(trajectories[i].commands.size()) < h) {
      throw std::invalid_argument("trajectory " + std::to_string(i) +
                                  " is shorter than the window length");
    }
  }
  // A single sequential stream keeps shorter draws a prefix of longer ones.
  Rng rng(seed);
  std::vector<WindowSequence> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const std::size_t ti = rng.uniform_index(trajectories.size());
    const std::size_t starts = trajectories[ti].commands.size() -
                               static_cast<std::size_t>(h) + 1;
    const std::size_t si = rng.uniform_index(starts);
    out.push_back(
        localize_window(trajectories[ti], static_cast<int>(si), h));
  }
  return out;
}

std::string prediction_report_csv(const PredictionReport& report) {
  std::string out = "step,state_index,mean_abs_err,std_abs_err\n";
  for (int k = 0; k < report.horizon; ++k) {
    for (int d = 0; d < 6; ++d) {
      out += std::to_string(k + 1);
      out += ',';
      out += std::to_string(d);
      out += ',';
      out += format_double(report.mean_abs(k, d));
      out += ',';
      out += format_double(report.std_abs(k, d));
      out += '\n';
    }
  }
  return out;
}

LinearDynamics to_linear(const ModelVariant& model) {
  LinearDynamics dyn;
  if (const auto* km = std::get_if<KoopmanModel>(&model)) {
    const int p = km->lift.dim();
    if (km->A.rows() != p || km->A.cols() != p || km->B.rows() != p ||
        km->B.cols() != 3) {
      throw std::invalid_argument("model dimensions do not match its lift");
    }
    dyn.lift = km->lift;
    dyn.A = km->A;
    dyn.B = km->B;
    dyn.dt = km->dt;
    return dyn;
  }
  dyn.lift = LiftSpec::identity();
  dyn.A = MatrixXd::Zero(6, 6);
  dyn.B = MatrixXd::Zero(6, 3);
  if (const auto* cm = std::get_if<ComponentwiseModel>(&model)) {
    for (int a = 0; a < 3; ++a) {
      dyn.A(a, a) = cm->A[a](0, 0);
      dyn.A(a, a + 3) = cm->A[a](0, 1);
      dyn.A(a + 3, a) = cm->A[a](1, 0);
      dyn.A(a + 3, a + 3) = cm->A[a](1, 1);
      dyn.B(a, a) = cm->B[a](0);
      dyn.B(a + 3, a) = cm->B[a](1);
    }
    dyn.dt = cm->dt;
    return dyn;
  }
  const auto& im = std::get<IntegratorModel>(model);
  for (int a = 0; a < 3; ++a) {
    dyn.A(a, a) = 1.0;
    dyn.A(a, a + 3) = 0.5 * im.dt;
    dyn.B(a, a) = 0.5 * im.dt;
    dyn.B(a + 3, a) = 1.0;
  }
  dyn.dt = im.dt;
  return dyn;
}

const char* model_kind(const ModelVariant& model) {
  if (std::holds_alternative<KoopmanModel>(model)) return "koopman";
  if (std::holds_alternative<ComponentwiseModel>(model)) {
    return "componentwise";
  }
  return "integrator";
}

ModelSpec ModelSpec::parse(const std::string& text) {
  ModelSpec spec;
  if (text == "componentwise") {
    spec.family = Family::Componentwise;
    return spec;
  }
  if (text == "integrator") {
    spec.family = Family::Integrator;
    return spec;
  }
  spec.family = Family::Koopman;
  try {
    spec.lift = LiftSpec::parse(text);
  } catch (const ConfigError&) {
    throw ConfigError("unknown model '" + text +
                      "' (expected identity, poly3, td:N, componentwise, "
                      "or integrator)");
  }
  return spec;
}

std::string ModelSpec::name() const {
  switch (family) {
    case Family::Componentwise:
      return "componentwise";
    case Family::Integrator:
      return "integrator";
    case Family::Koopman:
      break;
  }
  return lift.name();
}

void save_model(const std::filesystem::path& path, const ModelVariant& model,
                const std::string& dataset_hash) {
  json j;
  j["format_version"] = 1;
  j["dataset_hash"] = dataset_hash;
  if (const auto* km = std::get_if<KoopmanModel>(&model)) {
    if (!km->A.allFinite() || !km->B.allFinite() || !km->C.allFinite() ||
        !km->D.allFinite()) {
      throw NumericError("refusing to save a model with non-finite entries");
    }
    j["kind"] = "koopman";
    j["lift"] = km->lift.name();
    j["p"] = km->p;
    j["m"] = km->m;
    j["dt"] = km->dt;
    j["A"] = matrix_to_json(km->A);
    j["B"] = matrix_to_json(km->B);
    j["C"] = matrix_to_json(km->C);
    j["D"] = matrix_to_json(km->D);
    j["pairs"] = km->pairs;
    j["fit_residual"] = km->fit_residual;
    j["state_residual"] = km->state_residual;
    j["normal_eq_residual"] = km->normal_eq_residual;
  } else if (const auto* cm = std::get_if<ComponentwiseModel>(&model)) {
    j["kind"] = "componentwise";
    j["dt"] = cm->dt;
    json a = json::array();
    json b = json::array();
    for (int axis = 0; axis < 3; ++axis) {
      if (!cm->A[axis].allFinite() || !cm->B[axis].allFinite()) {
        throw NumericError(
            "refusing to save a model with non-finite entries");
      }
      a.push_back(matrix_to_json(cm->A[axis]));
      b.push_back(matrix_to_json(cm->B[axis]));
    }
    j["A"] = a;
    j["B"] = b;
    j["pairs"] = cm->pairs;
    j["fit_residual"] = cm->fit_residual;
    j["state_residual"] = cm->state_residual;
    j["normal_eq_residual"] = cm->normal_eq_residual;
  } else {
    const auto& im = std::get<IntegratorModel>(model);
    j["kind"] = "integrator";
    j["dt"] = im.dt;
  }
  write_file(path, j.dump(2) + "\n");
}

LoadedModel load_model(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    const json j = json::parse(text);
    if (j.at("format_version").get<int>() != 1) {
      throw IoError("unsupported model format version in " + path.string());
    }
    LoadedModel loaded;
    loaded.dataset_hash = j.at("dataset_hash").get<std::string>();
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "koopman") {
      KoopmanModel km;
      km.lift = LiftSpec::parse(j.at("lift").get<std::string>());
      km.p = j.at("p").get<int>();
      km.m = j.at("m").get<int>();
      if (km.p != km.lift.dim() || km.m != 3) {
        throw IoError("model dimensions do not match the lift in " +
                      path.string());
      }
      km.dt = j.at("dt").get<double>();
      km.A = matrix_from_json(j.at("A"), km.p, km.p, "A");
      km.B = matrix_from_json(j.at("B"), km.p, 3, "B");
      const bool full = !j.at("C").empty();
      km.C = matrix_from_json(j.at("C"), full ? 3 : 0, full ? km.p : 0, "C");
      km.D = matrix_from_json(j.at("D"), full ? 3 : 0, full ? 3 : 0, "D");
      km.pairs = j.at("pairs").get<long>();
      km.fit_residual = j.at("fit_residual").get<double>();
      km.state_residual = j.at("state_residual").get<double>();
      km.normal_eq_residual = j.at("normal_eq_residual").get<double>();
      if (!km.A.allFinite() || !km.B.allFinite()) {
        throw IoError("non-finite model entries in " + path.string());
      }
      loaded.model = std::move(km);
    } else if (kind == "componentwise") {
      ComponentwiseModel cm;
      cm.dt = j.at("dt").get<double>();
      const json& a = j.at("A");
      const json& b = j.at("B");
      if (!a.is_array() || a.size() != 3 || !b.is_array() || b.size() != 3) {
        throw IoError("componentwise model needs three axis blocks in " +
                      path.string());
      }
      for (int axis = 0; axis < 3; ++axis) {
        cm.A[axis] = matrix_from_json(a[axis], 2, 2, "A");
        cm.B[axis] = matrix_from_json(b[axis], 2, 1, "B");
        if (!cm.A[axis].allFinite() || !cm.B[axis].allFinite()) {
          throw IoError("non-finite model entries in " + path.string());
        }
      }
      cm.pairs = j.at("pairs").get<long>();
      cm.fit_residual = j.at("fit_residual").get<double>();
      cm.state_residual = j.at("state_residual").get<double>();
      cm.normal_eq_residual = j.at("normal_eq_residual").get<double>();
      loaded.model = std::move(cm);
    } else if (kind == "integrator") {
      IntegratorModel im;
      im.dt = j.at("dt").get<double>();
      loaded.model = im;
    } else {
      throw IoError("unknown model kind '" + kind + "' in " + path.string());
    }
    return loaded;
  } catch (const json::exception& e) {
    throw IoError("invalid model file " + path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw IoError("invalid model file " + path.string() + ": " + e.what());
  }
}

}  // namespace koopnav
