#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "koopnav/qp.hpp"

namespace koopnav::detail {

struct ReducedResult {
  QpStatus status = QpStatus::Optimal;
  Eigen::VectorXd y;
  Eigen::VectorXd mu;  // per inequality row, zero when inactive
  int iterations = 0;
  int infeasible_row = -1;
};

/// Dual active-set iteration for min 1/2 y'Gy + a'y s.t. N y >= b with G
/// positive definite (llt holds its factorization). Shared by the generic
/// solver front end and the receding-horizon fast path, which eliminates its
/// staircase equalities in closed form before calling this.
ReducedResult solve_reduced(const Eigen::LLT<Eigen::MatrixXd>& llt,
                            const Eigen::VectorXd& a, const Eigen::MatrixXd& N,
                            const Eigen::VectorXd& b);

}  // namespace koopnav::detail
