#include "koopnav/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "koopnav/io.hpp"
#include "qp_internal.hpp"

namespace koopnav {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Mat6 = Eigen::Matrix<double, 6, 6>;

constexpr double kRidge = 1e-8;      // command-block regularization
constexpr double kSoftWeight = 1e3;  // L1 penalty on softened clearances

void check_symmetric_weight(const MatrixXd& W, double min_eig,
                            const char* name) {
  if ((W - W.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw ConfigError(std::string("mpc: ") + name + " must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(W,
                                             Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < min_eig) {
    throw ConfigError(std::string("mpc: ") + name +
                      (min_eig > 0.0 ? " must be positive definite"
                                     : " must be positive semidefinite"));
  }
}

void validate_problem(const MpcProblem& pb, const MpcConfig& cfg) {
  const Eigen::Index p = pb.dyn.A.rows();
  if (p < 6 || pb.dyn.A.cols() != p || pb.dyn.B.rows() != p ||
      pb.dyn.B.cols() != 3) {
    throw std::invalid_argument("mpc: model matrices are inconsistent");
  }
  if (pb.phi0.size() != p) {
    throw std::invalid_argument(
        "mpc: phi0 dimension does not match the model");
  }
  if (!pb.phi0.allFinite() || !pb.dyn.A.allFinite() ||
      !pb.dyn.B.allFinite()) {
    throw NumericError("mpc: non-finite model or state");
  }
  if (std::abs(pb.dyn.dt - cfg.dt_mpc) > 1e-9) {
    throw ConfigError("mpc: dt_mpc does not match the model's rate");
  }
  if (static_cast<int>(pb.reference.size()) != cfg.horizon) {
    throw std::invalid_argument(
        "mpc: reference length must equal the horizon");
  }
  if (pb.warm &&
      (static_cast<int>(pb.warm->predicted.size()) != cfg.horizon ||
       static_cast<int>(pb.warm->commands.size()) != cfg.horizon)) {
    throw std::invalid_argument("mpc: warm start has the wrong horizon");
  }
}

/// Linearized clearance of one body circle against one obstacle about xbar:
/// h(x) ≈ w·x + offset with h = distance(center(x)) - radius - margin.
ClearanceRow linearize_clearance(const ConvexPolytope& obs,
                                 const BodyCircle& circle, const State& xbar,
                                 int step, double margin) {
  const double c = std::cos(xbar.theta), s = std::sin(xbar.theta);
  const Vec2 center(xbar.px + circle.offset_x * c,
                    xbar.py + circle.offset_x * s);
  const DistanceResult dr = obs.distance(center);
  ClearanceRow row;
  row.step = step;
  row.w[0] = dr.gradient.x();
  row.w[1] = dr.gradient.y();
  row.w[2] =
      dr.gradient.dot(Vec2(-circle.offset_x * s, circle.offset_x * c));
  row.offset = dr.distance - circle.radius - margin - row.w.dot(xbar.vec());
  return row;
}

/// Internal inequality form shared by the dense materializer and the
/// reduced path: w_next·x_{step_next} + w_cur·x_{step_cur} >= rhs, with
/// step_cur = 0 when only one step is involved.
struct IneqRow {
  int step_next = 0;
  Vec6 w_next = Vec6::Zero();
  int step_cur = 0;
  Vec6 w_cur = Vec6::Zero();
  double rhs = 0.0;
};

std::vector<IneqRow> clearance_ineqs(const MpcProblem& pb,
                                     const MpcConfig& cfg,
                                     std::span<const State> lin) {
  std::vector<IneqRow> rows;
  const int H = cfg.horizon;
  rows.reserve(pb.obstacles.size() * pb.circles.size() *
               static_cast<std::size_t>(H));
  const State x0 = State::from_vec(pb.phi0.head<6>());

  // Steps that provably cannot reach an obstacle get no rows: per step the
  // pose moves at most dt * speed_cap even at the command-box corner, and
  // solution poses stay within one trust radius of incumbents bounded by
  // the same envelope. Dropped rows are slack at every candidate point, so
  // the solution is unchanged; only the working set shrinks. Tightening
  // chains must stay anchored at the measured step-0 gap, so with gamma set
  // only whole out-of-range obstacles are dropped.
  double body = 0.0;
  for (const BodyCircle& b : pb.circles) {
    body = std::max(body, std::abs(b.offset_x) + b.radius);
  }
  const Vec3& blo = cfg.command_box.lo;
  const Vec3& bhi = cfg.command_box.hi;
  const double vbox =
      std::hypot(std::max(std::abs(blo[0]), std::abs(bhi[0])),
                 std::max(std::abs(blo[1]), std::abs(bhi[1])));
  const double speed_cap =
      std::max(1e-6, 1.25 * std::max(vbox, std::hypot(x0.vx, x0.vy)));
  const Vec2 c0(x0.px, x0.py);

  std::vector<ClearanceRow> pair(static_cast<std::size_t>(H));
  for (const ConvexPolytope& obs : pb.obstacles) {
    const double free_gap = obs.distance(c0).distance - body -
                            cfg.safety_margin - cfg.trust_radius - 0.05;
    int k_min = 1;
    if (free_gap > 0.0) {
      const double kd = free_gap / (cfg.dt_mpc * speed_cap);
      k_min = kd >= H ? H + 1 : 1 + static_cast<int>(kd);
    }
    if (k_min > H) continue;
    if (cfg.gamma) k_min = 1;
    for (const BodyCircle& circle : pb.circles) {
      for (int k = k_min; k <= H; ++k) {
        pair[k - 1] =
            linearize_clearance(obs, circle, lin[k - 1], k,
                                cfg.safety_margin);
      }
      if (cfg.gamma) {
        const double co = std::cos(x0.theta), so = std::sin(x0.theta);
        const Vec2 center0(x0.px + circle.offset_x * co,
                           x0.py + circle.offset_x * so);
        const double h0 = obs.distance(center0).distance - circle.radius -
                          cfg.safety_margin;
        for (const TightenedRow& tr : cbf_tighten(pair, h0, *cfg.gamma)) {
          rows.push_back(IneqRow{tr.step + 1, tr.w_next, tr.step, tr.w_cur,
                                 tr.rhs});
        }
      } else {
        for (int k = k_min; k <= H; ++k) {
          const ClearanceRow& cr = pair[k - 1];
          rows.push_back(
              IneqRow{cr.step, cr.w, 0, Vec6::Zero(), -cr.offset});
        }
      }
    }
  }
  return rows;
}

/// Staircase elimination of the dynamics: every variable is an affine
/// function of the command stack y, namely x_k = t0[k-1] + J_k y with
/// J_k's j-th block equal to the top six rows of A^(k-1-j) B.
struct ReducedMpc {
  int H = 0, p = 0, m = 3, nu = 0;
  std::vector<MatrixXd> tops;  // top 6 rows of A^j B
  std::vector<Vec6> t0;        // S A^k phi0, k = 1..H
  MatrixXd G;                  // Hessian of the exact 1/2-form in y
  VectorXd a;
  Eigen::LLT<MatrixXd> llt;
};

/// out += J_kᵀ w (only the first k command blocks are touched).
void add_projected(VectorXd& out, const Vec6& w, int k,
                   const ReducedMpc& rd) {
  for (int j = 0; j < k; ++j) {
    out.segment(j * rd.m, rd.m) += rd.tops[k - 1 - j].transpose() * w;
  }
}

Eigen::LLT<MatrixXd> factor_with_jitter(MatrixXd G, const char* what) {
  Eigen::LLT<MatrixXd> llt(G);
  if (llt.info() != Eigen::Success) {
    G.diagonal().array() +=
        1e-10 * std::max(1.0, G.trace() / static_cast<double>(G.rows()));
    llt.compute(G);
    if (llt.info() != Eigen::Success) {
      throw NumericError(std::string("mpc: ") + what +
                         " Hessian is not positive definite");
    }
  }
  return llt;
}

ReducedMpc make_reduced(const MpcProblem& pb, const MpcConfig& cfg) {
  ReducedMpc rd;
  rd.H = cfg.horizon;
  rd.p = static_cast<int>(pb.dyn.A.rows());
  rd.m = static_cast<int>(pb.dyn.B.cols());
  rd.nu = rd.H * rd.m;

  MatrixXd power = pb.dyn.B;  // A^j B
  rd.tops.reserve(rd.H);
  for (int j = 0; j < rd.H; ++j) {
    rd.tops.push_back(power.topRows(6));
    if (j + 1 < rd.H) power = pb.dyn.A * power;
  }
  VectorXd phik = pb.phi0;
  rd.t0.reserve(rd.H);
  for (int k = 1; k <= rd.H; ++k) {
    phik = pb.dyn.A * phik;
    rd.t0.push_back(phik.head<6>());
  }

  rd.G = MatrixXd::Zero(rd.nu, rd.nu);
  rd.a = VectorXd::Zero(rd.nu);
  const Mat6 P2 = 2.0 * cfg.P;
  MatrixXd J = MatrixXd::Zero(6, rd.nu);
  for (int k = 1; k <= rd.H; ++k) {
    for (int j = 0; j < k; ++j) {
      J.block(0, j * rd.m, 6, rd.m) = rd.tops[k - 1 - j];
    }
    const auto Jk = J.leftCols(k * rd.m);
    rd.G.topLeftCorner(k * rd.m, k * rd.m) +=
        Jk.transpose() * (P2 * Jk);
    rd.a.head(k * rd.m) +=
        Jk.transpose() *
        (P2 * (rd.t0[k - 1] - pb.reference[k - 1].vec()));
  }
  const Eigen::Matrix3d R2 = 2.0 * cfg.R_smooth;
  for (int k = 0; k + 1 < rd.H; ++k) {
    const int i0 = k * rd.m, i1 = (k + 1) * rd.m;
    rd.G.block(i0, i0, rd.m, rd.m) += R2;
    rd.G.block(i1, i1, rd.m, rd.m) += R2;
    rd.G.block(i0, i1, rd.m, rd.m) -= R2;
    rd.G.block(i1, i0, rd.m, rd.m) -= R2;
  }
  rd.G.diagonal().array() += 2.0 * kRidge;
  rd.llt = factor_with_jitter(rd.G, "reduced");
  return rd;
}

struct ReducedRows {
  MatrixXd N;
  VectorXd b;
  int clearance = 0;  // leading softenable rows
};

/// Same rows, in the same order, as the dense materializer emits:
/// clearance/tightened, command box, trust region.
ReducedRows reduce_rows(const ReducedMpc& rd, const MpcConfig& cfg,
                        std::span<const IneqRow> clearance,
                        std::span<const State> lin) {
  const int H = rd.H, m = rd.m;
  const int mi = static_cast<int>(clearance.size()) + 6 * H + 6 * H;
  ReducedRows rr;
  rr.clearance = static_cast<int>(clearance.size());
  rr.N = MatrixXd::Zero(mi, rd.nu);
  rr.b = VectorXd::Zero(mi);
  int r = 0;
  VectorXd v(rd.nu);
  for (const IneqRow& row : clearance) {
    v.setZero();
    add_projected(v, row.w_next, row.step_next, rd);
    double shift = row.w_next.dot(rd.t0[row.step_next - 1]);
    if (row.step_cur >= 1) {
      add_projected(v, row.w_cur, row.step_cur, rd);
      shift += row.w_cur.dot(rd.t0[row.step_cur - 1]);
    }
    rr.N.row(r) = v.transpose();
    rr.b(r) = row.rhs - shift;
    ++r;
  }
  for (int k = 0; k < H; ++k) {
    for (int dim = 0; dim < m; ++dim) {
      rr.N(r, k * m + dim) = 1.0;
      rr.b(r) = cfg.command_box.lo[dim];
      ++r;
    }
    for (int dim = 0; dim < m; ++dim) {
      rr.N(r, k * m + dim) = -1.0;
      rr.b(r) = -cfg.command_box.hi[dim];
      ++r;
    }
  }
  for (int k = 1; k <= H; ++k) {
    const Vec6 xbar = lin[k - 1].vec();
    for (int j = 0; j < 3; ++j) {
      v.setZero();
      add_projected(v, Vec6::Unit(j), k, rd);
      rr.N.row(r) = v.transpose();
      rr.b(r) = xbar[j] - cfg.trust_radius - rd.t0[k - 1][j];
      ++r;
    }
    for (int j = 0; j < 3; ++j) {
      v.setZero();
      add_projected(v, -Vec6::Unit(j), k, rd);
      rr.N.row(r) = v.transpose();
      rr.b(r) = -xbar[j] - cfg.trust_radius + rd.t0[k - 1][j];
      ++r;
    }
  }
  return rr;
}

struct StructuredSolution {
  QpStatus status = QpStatus::Infeasible;
  VectorXd y;
  VectorXd mu;
  double kkt = 0.0;
  double max_violation = 0.0;
  int infeasible_row = -1;
};

void fill_diagnostics(StructuredSolution& out, const MatrixXd& G,
                      const VectorXd& a, const MatrixXd& N,
                      const VectorXd& b) {
  const VectorXd slack = N * out.y - b;
  double kkt = (G * out.y + a - N.transpose() * out.mu)
                   .cwiseAbs()
                   .maxCoeff();
  double viol = 0.0;
  for (Eigen::Index i = 0; i < slack.size(); ++i) {
    viol = std::max(viol, -slack(i));
    kkt = std::max(kkt, std::abs(out.mu(i) * slack(i)));
    kkt = std::max(kkt, -out.mu(i));
  }
  out.kkt = std::max(kkt, viol);
  out.max_violation = viol;
}

StructuredSolution solve_hard(const ReducedMpc& rd, const ReducedRows& rr) {
  const detail::ReducedResult red =
      detail::solve_reduced(rd.llt, rd.a, rr.N, rr.b);
  StructuredSolution out;
  out.status = red.status;
  out.y = red.y;
  out.mu = red.mu;
  out.infeasible_row = red.infeasible_row;
  if (out.status == QpStatus::Optimal) {
    fill_diagnostics(out, rd.G, rd.a, rr.N, rr.b);
  }
  return out;
}

/// L1 softening: one slack per clearance row, objective + 1e3 * sum(s),
/// rows become c·z + s >= d with s >= 0. Box and trust rows stay hard.
StructuredSolution solve_soft(const ReducedMpc& rd, const ReducedRows& rr) {
  const int nu = rd.nu;
  const int nc = rr.clearance;
  const int mi = static_cast<int>(rr.N.rows());
  MatrixXd G2 = MatrixXd::Zero(nu + nc, nu + nc);
  G2.topLeftCorner(nu, nu) = rd.G;
  G2.bottomRightCorner(nc, nc).diagonal().setConstant(2.0 * kRidge);
  VectorXd a2(nu + nc);
  a2.head(nu) = rd.a;
  a2.tail(nc).setConstant(kSoftWeight);
  MatrixXd N2 = MatrixXd::Zero(mi + nc, nu + nc);
  N2.topLeftCorner(mi, nu) = rr.N;
  for (int i = 0; i < nc; ++i) {
    N2(i, nu + i) = 1.0;       // softened clearance row
    N2(mi + i, nu + i) = 1.0;  // slack nonnegativity
  }
  VectorXd b2 = VectorXd::Zero(mi + nc);
  b2.head(mi) = rr.b;

  const Eigen::LLT<MatrixXd> llt = factor_with_jitter(G2, "softened");
  const detail::ReducedResult red = detail::solve_reduced(llt, a2, N2, b2);
  StructuredSolution out;
  out.status = red.status;
  out.infeasible_row = red.infeasible_row;
  if (red.status != QpStatus::Optimal) return out;
  out.y = red.y.head(nu);
  out.mu = red.mu.head(mi);
  // KKT of the softened program; the violation reports what the slacks
  // absorbed on the hard rows.
  StructuredSolution full;
  full.y = red.y;
  full.mu = red.mu;
  fill_diagnostics(full, G2, a2, N2, b2);
  out.kkt = full.kkt;
  out.max_violation = 0.0;
  for (int i = 0; i < mi; ++i) {
    out.max_violation =
        std::max(out.max_violation, rr.b(i) - rr.N.row(i).dot(out.y));
  }
  return out;
}

std::vector<State> predict_reduced(const ReducedMpc& rd, const VectorXd& y) {
  std::vector<State> out;
  out.reserve(rd.H);
  for (int k = 1; k <= rd.H; ++k) {
    Vec6 x = rd.t0[k - 1];
    for (int j = 0; j < k; ++j) {
      x += rd.tops[k - 1 - j] * y.segment(j * rd.m, rd.m);
    }
    out.push_back(State::from_vec(x));
  }
  return out;
}

}  // namespace

Mat6 default_tracking_weight() {
  Mat6 P = Mat6::Zero();
  P.diagonal() << 10.0, 10.0, 2.0, 0.5, 0.5, 0.5;
  return P;
}

void MpcConfig::validate() const {
  if (horizon < 1) throw ConfigError("mpc: horizon must be >= 1");
  if (!(dt_mpc > 0.0) || !std::isfinite(dt_mpc)) {
    throw ConfigError("mpc: dt_mpc must be positive");
  }
  if (sqp_iters < 1) throw ConfigError("mpc: sqp_iters must be >= 1");
  if (!(trust_radius > 0.0)) {
    throw ConfigError("mpc: trust_radius must be positive");
  }
  if (safety_margin < 0.0) {
    throw ConfigError("mpc: safety_margin must be >= 0");
  }
  if (solve_stride < 1) throw ConfigError("mpc: solve_stride must be >= 1");
  if (gamma && (!(*gamma >= 0.0) || *gamma >= 1.0)) {
    throw ConfigError("mpc: safety decay gamma must lie in [0, 1)");
  }
  check_symmetric_weight(P, -1e-10, "tracking weight P");
  check_symmetric_weight(R_smooth, 1e-12, "smoothness weight R");
  for (int i = 0; i < 3; ++i) {
    if (!(command_box.lo[i] < command_box.hi[i])) {
      throw ConfigError("mpc: command box must have lo < hi");
    }
  }
}

const char* to_string(MpcStatus status) {
  return status == MpcStatus::Optimal ? "optimal" : "softened";
}

std::vector<TightenedRow> cbf_tighten(std::span<const ClearanceRow> rows,
                                      double h0, double gamma) {
  if (!(gamma >= 0.0) || gamma >= 1.0) {
    throw ConfigError("mpc: safety decay gamma must lie in [0, 1)");
  }
  if (rows.empty()) {
    throw std::invalid_argument("cbf_tighten: no rows to tighten");
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].step != static_cast<int>(i) + 1) {
      throw std::invalid_argument(
          "cbf_tighten: rows must be ordered k = 1..H");
    }
  }
  std::vector<TightenedRow> out(rows.size());
  out[0].step = 0;
  out[0].w_next = rows[0].w;
  out[0].rhs = gamma * h0 - rows[0].offset;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    out[k].step = static_cast<int>(k);
    out[k].w_next = rows[k].w;
    out[k].w_cur = -gamma * rows[k - 1].w;
    out[k].rhs = gamma * rows[k - 1].offset - rows[k].offset;
  }
  return out;
}

MpcQp build_qp(const MpcProblem& problem, const MpcConfig& config,
               std::span<const State> linearization) {
  config.validate();
  validate_problem(problem, config);
  if (static_cast<int>(linearization.size()) != config.horizon) {
    throw std::invalid_argument(
        "mpc: linearization trajectory must have H states");
  }
  const int H = config.horizon;
  const int p = static_cast<int>(problem.dyn.A.rows());
  const int m = static_cast<int>(problem.dyn.B.cols());
  const int n = H * (p + m);
  const auto uoff = [&](int k) { return H * p + k * m; };

  MpcQp out;
  out.p = p;
  out.m = m;
  out.horizon = H;
  QpProblem& qp = out.qp;
  qp.H = MatrixXd::Zero(n, n);
  qp.g = VectorXd::Zero(n);
  const Mat6 P2 = 2.0 * config.P;
  for (int k = 1; k <= H; ++k) {
    const int off = (k - 1) * p;
    qp.H.block(off, off, 6, 6) += P2;
    qp.g.segment(off, 6) -= P2 * problem.reference[k - 1].vec();
  }
  const Eigen::Matrix3d R2 = 2.0 * config.R_smooth;
  for (int k = 0; k + 1 < H; ++k) {
    qp.H.block(uoff(k), uoff(k), m, m) += R2;
    qp.H.block(uoff(k + 1), uoff(k + 1), m, m) += R2;
    qp.H.block(uoff(k), uoff(k + 1), m, m) -= R2;
    qp.H.block(uoff(k + 1), uoff(k), m, m) -= R2;
  }
  for (int k = 0; k < H; ++k) {
    qp.H.block(uoff(k), uoff(k), m, m).diagonal().array() += 2.0 * kRidge;
  }

  qp.E = MatrixXd::Zero(H * p, n);
  qp.e = VectorXd::Zero(H * p);
  for (int k = 0; k < H; ++k) {
    qp.E.block(k * p, k * p, p, p).setIdentity();
    if (k >= 1) qp.E.block(k * p, (k - 1) * p, p, p) = -problem.dyn.A;
    qp.E.block(k * p, uoff(k), p, m) = -problem.dyn.B;
  }
  qp.e.head(p) = problem.dyn.A * problem.phi0;

  const std::vector<IneqRow> rows =
      clearance_ineqs(problem, config, linearization);
  out.clearance_rows = static_cast<int>(rows.size());
  const int mi = out.clearance_rows + 6 * H + 6 * H;
  qp.C = MatrixXd::Zero(mi, n);
  qp.d = VectorXd::Zero(mi);
  int r = 0;
  for (const IneqRow& row : rows) {
    qp.C.block(r, (row.step_next - 1) * p, 1, 6) = row.w_next.transpose();
    if (row.step_cur >= 1) {
      qp.C.block(r, (row.step_cur - 1) * p, 1, 6) += row.w_cur.transpose();
    }
    qp.d(r) = row.rhs;
    ++r;
  }
  for (int k = 0; k < H; ++k) {
    for (int dim = 0; dim < m; ++dim) {
      qp.C(r, uoff(k) + dim) = 1.0;
      qp.d(r) = config.command_box.lo[dim];
      ++r;
    }
    for (int dim = 0; dim < m; ++dim) {
      qp.C(r, uoff(k) + dim) = -1.0;
      qp.d(r) = -config.command_box.hi[dim];
      ++r;
    }
  }
  for (int k = 1; k <= H; ++k) {
    const Vec6 xbar = linearization[k - 1].vec();
    for (int j = 0; j < 3; ++j) {
      qp.C(r, (k - 1) * p + j) = 1.0;
      qp.d(r) = xbar[j] - config.trust_radius;
      ++r;
    }
    for (int j = 0; j < 3; ++j) {
      qp.C(r, (k - 1) * p + j) = -1.0;
      qp.d(r) = -xbar[j] - config.trust_radius;
      ++r;
    }
  }
  return out;
}

MpcSolution solve_mpc(const MpcProblem& problem, const MpcConfig& config) {
  config.validate();
  validate_problem(problem, config);
  const int H = config.horizon;
  const ReducedMpc rd = make_reduced(problem, config);

  std::vector<State> incumbent;
  incumbent.reserve(H);
  if (problem.warm) {
    // The previous solution is solve_stride steps old: its entry for the
    // same wall-clock time sits that many slots later, tail held.
    for (int k = 1; k <= H; ++k) {
      incumbent.push_back(
          problem.warm
              ->predicted[std::min(k - 1 + config.solve_stride, H - 1)]);
    }
  } else {
    incumbent.assign(problem.reference.begin(), problem.reference.end());
  }

  bool softened = false;
  StructuredSolution sol;
  for (int round = 0; round < config.sqp_iters; ++round) {
    const std::vector<IneqRow> rows =
        clearance_ineqs(problem, config, incumbent);
    const ReducedRows rr = reduce_rows(rd, config, rows, incumbent);
    sol = solve_hard(rd, rr);
    softened = false;
    if (sol.status != QpStatus::Optimal) {
      sol = solve_soft(rd, rr);
      if (sol.status != QpStatus::Optimal) {
        throw MpcFailure(
            "receding-horizon subproblem infeasible even after softening "
            "(reduced row " +
            std::to_string(sol.infeasible_row) + ")");
      }
      softened = true;
    }
    incumbent = predict_reduced(rd, sol.y);
  }

  MpcSolution out;
  out.status = softened ? MpcStatus::SoftenedFeasible : MpcStatus::Optimal;
  out.kkt_residual = sol.kkt;
  out.max_violation = sol.max_violation;
  out.commands.reserve(H);
  for (int k = 0; k < H; ++k) {
    const Eigen::Vector3d u = sol.y.segment(k * rd.m, rd.m);
    out.commands.push_back(
        config.command_box.clamp(Command{u[0], u[1], u[2]}));
  }
  // Re-roll the lifted dynamics from the clamped commands so the returned
  // (commands, predicted) pair satisfies the equalities exactly.
  VectorXd phi = problem.phi0;
  out.predicted.reserve(H);
  double objective = 0.0;
  for (int k = 0; k < H; ++k) {
    phi = problem.dyn.A * phi + problem.dyn.B * out.commands[k].vec();
    out.predicted.push_back(State::from_vec(phi.head<6>()));
    const Vec6 err =
        out.predicted.back().vec() - problem.reference[k].vec();
    objective += err.dot(config.P * err);
    if (k + 1 < H) {
      const Eigen::Vector3d du =
          out.commands[k + 1].vec() - out.commands[k].vec();
      objective += du.dot(config.R_smooth * du);
    }
  }
  out.objective = objective;
  return out;
}

std::string mpc_trace_header() {
  return "solve,status,objective,kkt_residual,min_clearance,wall_seconds\n";
}

std::string mpc_trace_row(const MpcDiag& d) {
  std::string out = std::to_string(d.solve_index);
  out += ',';
  out += to_string(d.status);
  out += ',';
  out += format_double(d.objective);
  out += ',';
  out += format_double(d.kkt_residual);
  out += ',';
  out += format_double(d.min_clearance);
  out += ',';
  out += format_double(d.wall_seconds);
  out += '\n';
  return out;
}

}  // namespace koopnav
