#include "koopnav/qp.hpp"

#include "qp_internal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Jacobi>
#include <Eigen/QR>

#include "koopnav/types.hpp"

namespace koopnav {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

namespace detail {

/// Starts at the unconstrained minimum, which is dual feasible, and
/// activates the most violated row each round (ties to the smallest index),
/// taking dual steps that drop blocking rows until the incoming row admits a
/// full step. The working-set factorization Q' L^-1 N_active = [R; 0] is
/// maintained through plane rotations on J = L^-T Q.
ReducedResult solve_reduced(const Eigen::LLT<MatrixXd>& llt, const VectorXd& a,
                            const MatrixXd& N, const VectorXd& b) {
  const int n = static_cast<int>(a.size());
  const int m = static_cast<int>(N.rows());
  ReducedResult res;
  res.y = llt.solve(-a);
  res.mu = VectorXd::Zero(m);
  if (m == 0) return res;

  MatrixXd J = MatrixXd::Identity(n, n);
  llt.matrixU().solveInPlace(J);  // J = L^-T
  MatrixXd R = MatrixXd::Zero(n, n);
  std::vector<int> active;
  std::vector<char> is_active(m, 0);
  VectorXd u = VectorXd::Zero(n + 1);
  int q = 0;

  const double tol = 1e-10 * (1.0 + b.cwiseAbs().maxCoeff());
  const int max_iters = 100 + 20 * (n + m);

  const auto scatter_duals = [&]() {
    res.mu.setZero();
    for (int j = 0; j < q; ++j) {
      res.mu(active[j]) = std::max(0.0, u(j));
    }
  };

  const auto drop_row = [&](int j) {
    is_active[active[j]] = 0;
    active.erase(active.begin() + j);
    for (int i = j; i + 1 < q; ++i) u(i) = u(i + 1);
    for (int col = j; col + 1 < q; ++col) {
      R.col(col).head(q) = R.col(col + 1).head(q);
    }
    --q;
    for (int i = j; i < q; ++i) {
      Eigen::JacobiRotation<double> rot;
      rot.makeGivens(R(i, i), R(i + 1, i));
      R.applyOnTheLeft(i, i + 1, rot.adjoint());
      J.applyOnTheRight(i, i + 1, rot);
    }
  };

  while (true) {
    // Most violated inactive row; scanning upward keeps the smallest index
    // on exact ties.
    int viol = -1;
    double worst = -tol;
    for (int i = 0; i < m; ++i) {
      if (is_active[i]) continue;
      const double s = N.row(i).dot(res.y) - b(i);
      if (s < worst) {
        worst = s;
        viol = i;
      }
    }
    if (viol < 0) {  // dual feasible + primal feasible = optimal
      scatter_duals();
      return res;
    }

    const VectorXd np = N.row(viol).transpose();
    double u_plus = 0.0;
    double s_viol = worst;

    while (true) {
      if (++res.iterations > max_iters) {
        res.status = QpStatus::MaxIterations;
        scatter_duals();
        return res;
      }
      VectorXd dvec = J.transpose() * np;
      const double d2sq = dvec.tail(n - q).squaredNorm();
      const bool has_step = d2sq > 1e-22 * (1.0 + np.squaredNorm());
      VectorXd z = VectorXd::Zero(n);
      if (has_step) z = J.rightCols(n - q) * dvec.tail(n - q);
      VectorXd r;
      if (q > 0) {
        r = R.topLeftCorner(q, q)
                .triangularView<Eigen::Upper>()
                .solve(dvec.head(q));
      }

      double t1 = kInf;  // dual step length before a working-set dual hits 0
      int block = -1;
      for (int j = 0; j < q; ++j) {
        if (r(j) > 1e-12) {
          const double cand = u(j) / r(j);
          if (cand < t1 || (cand == t1 && active[j] < active[block])) {
            t1 = cand;
            block = j;
          }
        }
      }
      // z'np equals the squared norm of the rejected component, so the
      // primal step closing the violated slack is well defined iff z != 0.
      const double t2 = has_step ? -s_viol / z.dot(np) : kInf;
      const double t = std::min(t1, t2);

      if (t == kInf) {
        // The row's normal lies in the span of the active set and no dual
        // can be traded off: the constraint set is inconsistent.
        res.status = QpStatus::Infeasible;
        res.infeasible_row = viol;
        scatter_duals();
        return res;
      }

      if (q > 0) u.head(q) -= t * r;
      u_plus += t;

      if (t2 == kInf) {  // dual-only step: drop the blocker and retry
        drop_row(block);
        continue;
      }

      res.y += t * z;
      s_viol = np.dot(res.y) - b(viol);

      if (t == t2) {  // full step: activate the incoming row
        for (int i = n - 1; i > q; --i) {
          Eigen::JacobiRotation<double> rot;
          rot.makeGivens(dvec(i - 1), dvec(i));
          dvec.applyOnTheLeft(i - 1, i, rot.adjoint());
          J.applyOnTheRight(i - 1, i, rot);
        }
        R.col(q).head(q + 1) = dvec.head(q + 1);
        active.push_back(viol);
        is_active[viol] = 1;
        u(q) = u_plus;
        ++q;
        break;
      }
      drop_row(block);  // partial step: blocker leaves, keep working
    }
  }
}

}  // namespace detail

QpSolution solve_qp(const QpProblem& qp) {
  const int n = qp.vars();
  const int me = static_cast<int>(qp.E.rows());
  const int mi = static_cast<int>(qp.C.rows());
  if (n < 1) {
    throw std::invalid_argument("QP needs at least one decision variable");
  }
  if (qp.H.rows() != n || qp.H.cols() != n) {
    throw std::invalid_argument("QP Hessian shape does not match g");
  }
  if ((me > 0 && qp.E.cols() != n) || qp.e.size() != me) {
    throw std::invalid_argument("QP equality shapes do not match");
  }
  if ((mi > 0 && qp.C.cols() != n) || qp.d.size() != mi) {
    throw std::invalid_argument("QP inequality shapes do not match");
  }
  if (!qp.H.allFinite() || !qp.g.allFinite() || !qp.E.allFinite() ||
      !qp.e.allFinite() || !qp.C.allFinite() || !qp.d.allFinite()) {
    throw NumericError("QP data contains non-finite entries");
  }

  const MatrixXd Hs = 0.5 * (qp.H + qp.H.transpose());

  QpSolution sol;
  sol.lambda_eq = VectorXd::Zero(me);
  sol.mu = VectorXd::Zero(mi);

  // Eliminate equalities: particular solution plus orthonormal null basis.
  VectorXd zp = VectorXd::Zero(n);
  MatrixXd Z = MatrixXd::Identity(n, n);
  Eigen::ColPivHouseholderQR<MatrixXd> qr_et;
  if (me > 0) {
    qr_et.compute(qp.E.transpose());
    const int rank = static_cast<int>(qr_et.rank());
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(qp.E);
    zp = cod.solve(qp.e);
    const double gap = (qp.E * zp - qp.e).cwiseAbs().maxCoeff();
    if (gap > 1e-9 * (1.0 + qp.e.cwiseAbs().maxCoeff())) {
      sol.status = QpStatus::Infeasible;
      sol.infeasible_row = -1;
      sol.z = zp;
      sol.kkt_residual = gap;
      sol.objective = 0.5 * zp.dot(Hs * zp) + qp.g.dot(zp);
      return sol;
    }
    const MatrixXd Q = qr_et.householderQ();
    Z = Q.rightCols(n - rank);
  }
  const int nz = static_cast<int>(Z.cols());

  detail::ReducedResult red;
  if (nz == 0) {
    // The equalities pin z completely; only feasibility remains.
    red.y = VectorXd::Zero(0);
    red.mu = VectorXd::Zero(mi);
    double worst = -1e-8 * (1.0 + (mi > 0 ? qp.d.cwiseAbs().maxCoeff() : 0.0));
    for (int i = 0; i < mi; ++i) {
      const double s = qp.C.row(i).dot(zp) - qp.d(i);
      if (s < worst) {
        worst = s;
        red.status = QpStatus::Infeasible;
        red.infeasible_row = i;
      }
    }
  } else {
    MatrixXd G = Z.transpose() * Hs * Z;
    Eigen::LLT<MatrixXd> llt(G);
    if (llt.info() != Eigen::Success) {
      // Flat curvature directions get a deterministic hair of regularization
      // so degenerate-but-bounded objectives still pick one minimizer.
      G.diagonal().array() += 1e-10 * std::max(1.0, G.trace() / nz);
      llt.compute(G);
      if (llt.info() != Eigen::Success) {
        throw NumericError(
            "QP objective is not positive definite on the equality null "
            "space");
      }
    }
    const VectorXd a = Z.transpose() * (Hs * zp + qp.g);
    const MatrixXd Cz = mi > 0 ? MatrixXd(qp.C * Z) : MatrixXd(0, nz);
    const VectorXd dz = mi > 0 ? VectorXd(qp.d - qp.C * zp) : VectorXd(0);
    red = detail::solve_reduced(llt, a, Cz, dz);
  }

  sol.status = red.status;
  sol.iterations = red.iterations;
  sol.infeasible_row = red.infeasible_row;
  sol.z = nz == 0 ? zp : VectorXd(zp + Z * red.y);
  sol.mu = red.mu;

  const VectorXd grad = Hs * sol.z + qp.g;
  if (me > 0) {
    VectorXd rhs = grad;
    if (mi > 0) rhs -= qp.C.transpose() * sol.mu;
    sol.lambda_eq = qr_et.solve(rhs);
  }

  VectorXd stat = grad;
  if (me > 0) stat -= qp.E.transpose() * sol.lambda_eq;
  if (mi > 0) stat -= qp.C.transpose() * sol.mu;
  double kkt = stat.cwiseAbs().maxCoeff();
  if (me > 0) {
    kkt = std::max(kkt, (qp.E * sol.z - qp.e).cwiseAbs().maxCoeff());
  }
  if (mi > 0) {
    const VectorXd slack = qp.C * sol.z - qp.d;
    kkt = std::max(kkt, std::max(0.0, -slack.minCoeff()));
    kkt = std::max(kkt, (sol.mu.array() * slack.array()).abs().maxCoeff());
    kkt = std::max(kkt, std::max(0.0, -sol.mu.minCoeff()));
  }
  sol.kkt_residual = kkt;
  sol.objective = 0.5 * sol.z.dot(Hs * sol.z) + qp.g.dot(sol.z);
  return sol;
}

}  // namespace koopnav
