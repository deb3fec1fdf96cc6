#pragma once
// Symmetric eigenvalue drivers: dense for small problems, block subspace iteration
// with Rayleigh-Ritz for large matrix-free operators.
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <string>

#include "dense_eig.hpp"
#include "errors.hpp"

namespace fkirch {

struct SymOperator {
  Eigen::Index n = 0;
  std::function<void(const double*, double*)> apply;  // y = A x, A symmetric
  std::function<void(const Eigen::MatrixXd&, Eigen::MatrixXd&)> apply_block;  // optional, Y = A X
};

struct EigPairs {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
  Eigen::VectorXd residuals;  // |A v - theta v|
  int iterations = 0;
  std::string method;
};

inline Eigen::MatrixXd dense_from_operator(const SymOperator& A) {
  Eigen::MatrixXd M(A.n, A.n);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(A.n), col(A.n);
  for (Eigen::Index j = 0; j < A.n; ++j) {
    e(j) = 1;
    A.apply(e.data(), col.data());
    M.col(j) = col;
    e(j) = 0;
  }
  return 0.5 * (M + M.transpose());
}

inline Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& X) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
  return qr.householderQ() * Eigen::MatrixXd::Identity(X.rows(), X.cols());
}

// The k eigenpairs of largest |theta|. Deterministic for a fixed seed.
inline EigPairs dominant_eigenpairs(const SymOperator& A, int k, int block, unsigned seed,
                                    double tol = 1e-10, int max_iter = 2000) {
  require(k >= 1 && block >= k && block <= A.n, "dominant_eigenpairs: bad block size");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd X(A.n, block);
  for (Eigen::Index j = 0; j < block; ++j)
    for (Eigen::Index i = 0; i < A.n; ++i) X(i, j) = nd(rng);
  X = orthonormalize(X);
  Eigen::MatrixXd Y(A.n, block);
  EigPairs out;
  out.method = "block subspace iteration";
  for (int it = 1; it <= max_iter; ++it) {
    if (A.apply_block)
      A.apply_block(X, Y);
    else
      for (Eigen::Index j = 0; j < block; ++j) A.apply(X.col(j).data(), Y.col(j).data());
    Eigen::MatrixXd H = X.transpose() * Y;
    SymEig se = sym_eig(H);
    // order by |theta| descending
    std::vector<int> ord(block);
    std::iota(ord.begin(), ord.end(), 0);
    std::stable_sort(ord.begin(), ord.end(),
                     [&](int a, int b) { return std::abs(se.values(a)) > std::abs(se.values(b)); });
    Eigen::MatrixXd S(block, block);
    Eigen::VectorXd th(block);
    for (int j = 0; j < block; ++j) {
      S.col(j) = se.vectors.col(ord[j]);
      th(j) = se.values(ord[j]);
    }
    Eigen::MatrixXd V = X * S, AV = Y * S;
    Eigen::VectorXd res(k);
    double top = std::abs(th(0));
    bool done = true;
    for (int j = 0; j < k; ++j) {
      res(j) = (AV.col(j) - th(j) * V.col(j)).norm();
      if (res(j) > tol * top) done = false;
    }
    out.iterations = it;
    if (done || it == max_iter) {
      out.values = th.head(k);
      out.vectors = V.leftCols(k);
      out.residuals = res;
      if (!done) throw NumericalFailure("eigensolver did not converge in " + std::to_string(max_iter) + " iterations");
      return out;
    }
    X = orthonormalize(AV);
  }
  throw NumericalFailure("eigensolver did not converge");
}

// All eigenpairs via LAPACK, ordered by |theta| descending, truncated to k.
inline EigPairs dense_dominant_eigenpairs(const SymOperator& A, int k) {
  Eigen::MatrixXd M = dense_from_operator(A);
  SymEig se = sym_eig(M);
  std::vector<int> ord(se.values.size());
  std::iota(ord.begin(), ord.end(), 0);
  std::stable_sort(ord.begin(), ord.end(),
                   [&](int a, int b) { return std::abs(se.values(a)) > std::abs(se.values(b)); });
  EigPairs out;
  out.method = "dense";
  k = std::min<int>(k, int(ord.size()));
  out.values.resize(k);
  out.vectors.resize(A.n, k);
  out.residuals.resize(k);
  for (int j = 0; j < k; ++j) {
    out.values(j) = se.values(ord[j]);
    out.vectors.col(j) = se.vectors.col(ord[j]);
    out.residuals(j) = (M * out.vectors.col(j) - out.values(j) * out.vectors.col(j)).norm();
  }
  return out;
}

// Cosines of the principal angles between span(A) and span(B).
inline Eigen::VectorXd canonical_correlations(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  if (A.cols() == 0 || B.cols() == 0) return Eigen::VectorXd();
  Eigen::MatrixXd Qa = orthonormalize(A), Qb = orthonormalize(B);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Qa.transpose() * Qb);
  return svd.singularValues();
}

}  // namespace fkirch
