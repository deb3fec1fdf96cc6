#pragma once
// Dense symmetric eigensolvers: divide and conquer for general matrices, MRRR for
// tridiagonal ones (keeps relative accuracy of tiny eigenvalues of graded matrices).
#include <lapacke.h>

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "errors.hpp"

namespace fkirch {

struct SymEig {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // columns, orthonormal
};

inline SymEig sym_eig(const Eigen::MatrixXd& A) {
  require(A.rows() == A.cols(), "sym_eig: matrix not square");
  SymEig out;
  const lapack_int n = lapack_int(A.rows());
  out.vectors = 0.5 * (A + A.transpose());
  out.values.resize(n);
  if (n == 0) return out;
  lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'U', n, out.vectors.data(), n,
                                   out.values.data());
  if (info != 0) throw NumericalFailure("dsyevd failed, info=" + std::to_string(info));
  return out;
}

// Symmetric tridiagonal: diagonal d (n), off-diagonal e (n-1).
inline SymEig sym_tridiag_eig(const Eigen::VectorXd& d, const Eigen::VectorXd& e) {
  const lapack_int n = lapack_int(d.size());
  require(e.size() + 1 == d.size() || (n == 0 && e.size() == 0), "sym_tridiag_eig: size mismatch");
  SymEig out;
  Eigen::VectorXd dd = d;
  out.values.resize(n);
  out.vectors.resize(n, n);
  if (n == 0) return out;
  Eigen::VectorXd ee(n);
  ee.head(n - 1) = e;
  ee(n - 1) = 0;
  lapack_int m = 0;
  lapack_logical tryrac = 1;
  std::vector<lapack_int> isuppz(2 * std::size_t(n));
  lapack_int info = LAPACKE_dstemr(LAPACK_COL_MAJOR, 'V', 'A', n, dd.data(), ee.data(), 0, 0, 0, 0, &m,
                                   out.values.data(), out.vectors.data(), n, n, isuppz.data(), &tryrac);
  if (info != 0 || m != n) throw NumericalFailure("dstemr failed, info=" + std::to_string(info));
  return out;
}

}  // namespace fkirch
