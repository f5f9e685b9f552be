#pragma once

// Independent reference computations shared by the test suites. None of
// these reuse the library's own kernels for the quantity under test.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <vector>

#include "mavik/mavik.hpp"

namespace mavik::testing {

inline Matrix random_matrix(Index rows, Index cols, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  CounterRng rng(seed);
  Matrix M(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) M(i, j) = rng.uniform(lo, hi);
  return M;
}

inline PointSet random_points(Index count, Index dim, std::uint64_t seed) {
  return PointSet(random_matrix(count, dim, seed));
}

inline Matrix centered(Matrix M) {
  M.rowwise() -= M.colwise().mean();
  return M;
}

/// Values of `node` at the rows of P by direct replay (no gradients).
inline Vector values_at(const NodePtr& node, const Matrix& P) {
  PointSet X(P);
  Replayer r(X, false);
  return r(node).eval;
}

/// Central finite-difference gradient of `node` at the rows of P.
inline Matrix fd_gradient(const NodePtr& node, const Matrix& P, double h = 1e-6) {
  Matrix out(P.rows(), P.cols());
  for (Index k = 0; k < P.cols(); ++k) {
    Matrix plus = P, minus = P;
    plus.col(k).array() += h;
    minus.col(k).array() -= h;
    out.col(k) = (values_at(node, plus) - values_at(node, minus)) / (2.0 * h);
  }
  return out;
}

/// Relative error ||a - b|| / max(||b||, floor).
inline double rel_err(const Matrix& a, const Matrix& b, double floor = 1e-300) {
  return (a - b).norm() / std::max(b.norm(), floor);
}

/// Residual of least squares min ||C - F W|| by column-pivoted QR.
inline Matrix qr_residual(const Matrix& F, const Matrix& C) {
  const Matrix W = F.colPivHouseholderQr().solve(C);
  return C - F * W;
}

/// Generalized eigenpairs of (A, N) for positive definite N by Cholesky
/// reduction: L L^T = N, eig of L^-1 A L^-T, V = L^-T Y. Values descending.
struct CholeskyEig {
  Vector values;
  Matrix vectors;
};

inline CholeskyEig cholesky_gen_eig(const Matrix& A, const Matrix& N) {
  Eigen::LLT<Matrix> llt(N);
  const Matrix L = llt.matrixL();
  const Matrix Linv = L.triangularView<Eigen::Lower>().solve(Matrix::Identity(N.rows(), N.cols()));
  const Matrix C = Linv * A * Linv.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (C + C.transpose()));
  CholeskyEig out;
  out.values = es.eigenvalues().reverse();
  out.vectors = (Linv.transpose() * es.eigenvectors()).rowwise().reverse();
  return out;
}

inline Index svd_rank(const Matrix& M, double tol) {
  Eigen::BDCSVD<Matrix> svd(M);
  const Vector s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  Index r = 0;
  for (Index i = 0; i < s.size(); ++i) r += s(i) > tol * s(0) ? 1 : 0;
  return r;
}

/// Random provenance tree of the requested depth over n variables, built
/// from products by degree-1 factors and random linear combinations.
inline Poly random_poly(const PointSet& X, int depth, CounterRng& rng) {
  std::vector<Poly> linear;
  for (int k = 0; k < X.dim(); ++k) linear.push_back(Poly::variable(X, k));
  linear.push_back(Poly::constant(X, 1.0));
  auto random_linear = [&] {
    Vector w(static_cast<Index>(linear.size()));
    for (Index i = 0; i < w.size(); ++i) w(i) = rng.uniform(-1.0, 1.0);
    return linear_combine(linear, w);
  };
  Poly p = random_linear();
  for (int d = 1; d < depth; ++d) {
    Poly prod = multiply(random_linear(), p);
    std::vector<Poly> mix{prod, p, Poly::constant(X, 1.0)};
    Vector w(3);
    w << rng.uniform(0.5, 1.5), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0);
    p = linear_combine(mix, w);
  }
  return p;
}

/// binom(n + tau, n)
inline double binom(Index n, Index tau) {
  double b = 1.0;
  for (Index k = 1; k <= tau; ++k) b = b * static_cast<double>(n + k) / static_cast<double>(k);
  return b;
}

}  // namespace mavik::testing
