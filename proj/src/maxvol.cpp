#include "diffcal/maxvol.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "diffcal/errors.hpp"

namespace diffcal {

namespace {

// Row-pivoted elimination on a working copy; returns the r pivot rows.
// Also the rank check: a vanishing pivot means M has (numerically)
// dependent columns.
std::vector<Eigen::Index> lu_pivot_rows(const Eigen::MatrixXd& M) {
  const Eigen::Index n = M.rows();
  const Eigen::Index r = M.cols();
  Eigen::MatrixXd U = M;
  std::vector<Eigen::Index> perm(n);
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  const double scale = M.cwiseAbs().maxCoeff();
  const double tiny = 1e-12 * (scale > 0.0 ? scale : 1.0);

  for (Eigen::Index k = 0; k < r; ++k) {
    Eigen::Index p = k;
    double best = std::abs(U(k, k));
    for (Eigen::Index i = k + 1; i < n; ++i) {
      const double v = std::abs(U(i, k));
      if (v > best) {
        best = v;
        p = i;
      }
    }
    if (best <= tiny) {
      throw degenerate_matrix_error("maxvol: input matrix is rank deficient");
    }
    if (p != k) {
      U.row(k).swap(U.row(p));
      std::swap(perm[k], perm[p]);
    }
    for (Eigen::Index i = k + 1; i < n; ++i) {
      const double f = U(i, k) / U(k, k);
      U.row(i).tail(r - k) -= f * U.row(k).tail(r - k);
    }
  }
  return {perm.begin(), perm.begin() + r};
}

}  // namespace

std::vector<Eigen::Index> maxvol(const Eigen::MatrixXd& M, double tol) {
  const Eigen::Index n = M.rows();
  const Eigen::Index r = M.cols();
  if (n < r || r < 1) {
    throw std::invalid_argument("maxvol needs a tall matrix (rows >= cols >= 1)");
  }
  if (tol < 0.0) throw std::invalid_argument("maxvol tolerance must be non-negative");

  std::vector<Eigen::Index> rows = lu_pivot_rows(M);
  if (n == r) return rows;

  // Each accepted swap multiplies |det(M_sub)| by more than 1 + tol, so
  // the loop terminates; the cap is a safety net only.
  const int max_swaps = static_cast<int>(4 * n + 16);
  for (int iter = 0; iter < max_swaps; ++iter) {
    Eigen::MatrixXd sub(r, r);
    for (Eigen::Index j = 0; j < r; ++j) sub.row(j) = M.row(rows[j]);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(sub.transpose());
    if (std::abs(lu.determinant()) == 0.0) {
      throw degenerate_matrix_error("maxvol: selected submatrix is singular");
    }
    const Eigen::MatrixXd B = lu.solve(M.transpose()).transpose();  // M * sub^{-1}

    Eigen::Index bi = 0, bj = 0;
    double bmax = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < r; ++j) {
        const double v = std::abs(B(i, j));
        if (v > bmax) {
          bmax = v;
          bi = i;
          bj = j;
        }
      }
    }
    if (bmax <= 1.0 + tol) return rows;
    rows[bj] = bi;
  }
  return rows;
}

}  // namespace diffcal
