#pragma once

#include <Eigen/Core>

namespace koopnav {

/// Convex quadratic program
///   minimize    1/2 z' H z + g' z
///   subject to  E z  = e
///               C z >= d.
/// H must be positive semidefinite and positive definite on the null space
/// of E (directions the equalities leave free must carry curvature).
struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd E;  // zero rows = no equalities
  Eigen::VectorXd e;
  Eigen::MatrixXd C;  // zero rows = no inequalities
  Eigen::VectorXd d;

  int vars() const { return static_cast<int>(g.size()); }
};

enum class QpStatus { Optimal, Infeasible, MaxIterations };

struct QpSolution {
  QpStatus status = QpStatus::Infeasible;
  Eigen::VectorXd z;          // primal point (last iterate if not Optimal)
  Eigen::VectorXd lambda_eq;  // equality multipliers
  Eigen::VectorXd mu;         // inequality multipliers, >= 0
  double objective = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
  /// Certificate when status == Infeasible: the inequality row that cannot
  /// be satisfied together with the equalities and the rows active at the
  /// point of failure, or -1 when the equalities themselves are
  /// inconsistent (kkt_residual then holds their least-squares gap).
  int infeasible_row = -1;
};

/// Dual active-set solve. Equalities are eliminated through an orthonormal
/// null-space basis; starting from the unconstrained minimum (which is dual
/// feasible), violated inequalities are activated one at a time -- most
/// violated first, ties to the smallest row index -- so the solve path is
/// deterministic. Optimal solutions satisfy the constraints to 1e-8 and the
/// full KKT conditions (stationarity, complementarity, dual sign) to 1e-6;
/// measured residuals are near machine precision.
///
/// kkt_residual reports the largest absolute violation among those
/// conditions at the returned point. Shape mismatches throw
/// std::invalid_argument; non-finite inputs throw NumericError.
QpSolution solve_qp(const QpProblem& qp);

}  // namespace koopnav
