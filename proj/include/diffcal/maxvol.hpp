#pragma once

#include <Eigen/Dense>
#include <vector>

namespace diffcal {

/// Selects r rows of a tall full-column-rank matrix M (rows x r) so the
/// chosen r x r submatrix has locally maximal volume: every entry of
/// M * M_sub^{-1} has magnitude <= 1 + tol on return.
///
/// Starts from the pivot rows of a row-pivoted LU pass and then swaps
/// in dominant rows until the bound holds. Throws
/// degenerate_matrix_error when M is numerically rank deficient.
std::vector<Eigen::Index> maxvol(const Eigen::MatrixXd& M, double tol = 1e-2);

}  // namespace diffcal
