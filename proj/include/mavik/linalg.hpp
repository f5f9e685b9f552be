#pragma once

// Matrix kernels for basis construction: projection against earlier strata,
// the symmetric generalized eigenproblem A V = N V Lambda restricted to the
// range of N, and numerical rank.

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "mavik/core.hpp"
#include "mavik/errors.hpp"

namespace mavik {

/// Relative cut-off for the normalization nullspace (eigenvalues of N).
inline constexpr double kDefaultRankTol = 1e-12;

struct GenEigResult {
  Matrix vectors;  // d x r, columns v_i with V^T N V = I
  Vector values;   // lambda_i >= 0, descending
  Index retained_rank = 0;
};

namespace detail {

inline void check_symmetric(const Matrix& M, const char* name) {
  require(M.rows() == M.cols(), std::string(name) + " must be square");
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw ContractViolation(std::string(name) + " is not symmetric");
}

/// Flip each column so its first non-negligible entry is positive.
inline void canonicalize_signs(Matrix& V) {
  for (Index c = 0; c < V.cols(); ++c) {
    const double peak = V.col(c).cwiseAbs().maxCoeff();
    if (peak == 0.0) continue;
    for (Index r = 0; r < V.rows(); ++r) {
      if (std::abs(V(r, c)) > 1e-8 * peak) {
        if (V(r, c) < 0) V.col(c) *= -1.0;
        break;
      }
    }
  }
}

/// Indices ordering `values` descending; ties keep their incoming order.
inline std::vector<Index> descending_order(const Vector& values) {
  std::vector<Index> idx(static_cast<std::size_t>(values.size()));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) { return values(a) > values(b); });
  return idx;
}

}  // namespace detail

/// Solves A V = N V Lambda for symmetric PSD A, N. Directions where N is
/// numerically null (eigenvalue <= rank_tol * max eigenvalue) are discarded;
/// the rest are whitened and A is diagonalized in the whitened coordinates.
inline GenEigResult gen_eig_sym(const Matrix& A, const Matrix& N, double rank_tol = kDefaultRankTol) {
  detail::require(A.rows() >= 1, "gen_eig_sym: empty matrices");
  detail::require(A.rows() == N.rows() && A.cols() == N.cols(), "gen_eig_sym: A and N shapes differ");
  detail::check_symmetric(A, "A");
  detail::check_symmetric(N, "N");
  const Index d = A.rows();

  Eigen::SelfAdjointEigenSolver<Matrix> neig(0.5 * (N + N.transpose()));
  const Vector& s = neig.eigenvalues();
  const double smax = s.maxCoeff();
  GenEigResult out;
  if (!(smax > 0.0)) {
    out.vectors = Matrix(d, 0);
    out.values = Vector(0);
    return out;
  }
  std::vector<Index> keep;
  for (Index i = 0; i < d; ++i)
    if (s(i) > rank_tol * smax) keep.push_back(i);
  const Index r = static_cast<Index>(keep.size());
  Matrix W(d, r);
  for (Index j = 0; j < r; ++j) W.col(j) = neig.eigenvectors().col(keep[j]) / std::sqrt(s(keep[j]));

  Matrix reduced = W.transpose() * A * W;
  reduced = 0.5 * (reduced + reduced.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> aeig(reduced);
  Vector lam = aeig.eigenvalues();
  const double lam_scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
  for (Index i = 0; i < r; ++i) {
    if (lam(i) < 0.0) {
      if (lam(i) < -1e-10 * lam_scale)
        throw InvariantViolation("gen_eig_sym: A is not positive semidefinite on the range of N");
      lam(i) = 0.0;
    }
  }
  // Solver returns ascending order; present it descending with ties in
  // solver order.
  Vector rev = lam.reverse();
  Matrix Y = aeig.eigenvectors().rowwise().reverse();
  const auto order = detail::descending_order(rev);
  out.vectors.resize(d, r);
  out.values.resize(r);
  for (Index j = 0; j < r; ++j) {
    out.vectors.col(j) = W * Y.col(order[static_cast<std::size_t>(j)]);
    out.values(j) = rev(order[static_cast<std::size_t>(j)]);
  }
  detail::canonicalize_signs(out.vectors);
  out.retained_rank = r;
  return out;
}

/// Same problem with A = B^T B and N = M^T M given through their factors
/// (`M` absent means N = I). Working on factors keeps small eigenvalues
/// accurate to roundoff in sqrt(lambda) rather than in lambda.
inline GenEigResult gen_eig_factored(const Matrix& B, const std::optional<Matrix>& M,
                                     double rank_tol = kDefaultRankTol) {
  const Index d = B.cols();
  detail::require(d >= 1, "gen_eig_factored: no columns");
  Matrix W;
  if (M) {
    detail::require(M->cols() == d, "gen_eig_factored: factor column mismatch");
    Eigen::JacobiSVD<Matrix> nsvd(*M, Eigen::ComputeThinV);
    const Vector& s = nsvd.singularValues();
    const double smax = s.size() ? s(0) : 0.0;
    if (!(smax > 0.0)) return {Matrix(d, 0), Vector(0), 0};
    std::vector<Index> keep;
    for (Index i = 0; i < s.size(); ++i)
      if (s(i) * s(i) > rank_tol * smax * smax) keep.push_back(i);
    W.resize(d, static_cast<Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j)
      W.col(static_cast<Index>(j)) = nsvd.matrixV().col(keep[j]) / s(keep[j]);
  } else {
    W = Matrix::Identity(d, d);
  }
  const Index r = W.cols();
  GenEigResult out;
  out.retained_rank = r;
  if (r == 0) {
    out.vectors = Matrix(d, 0);
    out.values = Vector(0);
    return out;
  }
  const Matrix K = B * W;
  Eigen::JacobiSVD<Matrix> ksvd(K, Eigen::ComputeFullV);
  const Vector& sigma = ksvd.singularValues();
  out.values = Vector::Zero(r);
  for (Index i = 0; i < sigma.size(); ++i) out.values(i) = sigma(i) * sigma(i);
  out.vectors = W * ksvd.matrixV();
  detail::canonicalize_signs(out.vectors);
  return out;
}

/// Number of singular values above tol * (largest singular value).
inline Index numerical_rank(const Matrix& M, double tol) {
  if (M.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(M);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || !(s(0) > 0.0)) return 0;
  return static_cast<Index>((s.array() > tol * s(0)).count());
}

/// Removes from each c in C_pre its component in span(F_prev(X)). The columns
/// of F_prev(X) are mutually orthogonal by construction, so the projection is
/// a diagonal solve; a second pass absorbs the loss of orthogonality from
/// roundoff. Gradients and provenance follow the same linear combination.
inline std::vector<Poly> orthogonal_project(std::span<const Poly> C_pre, std::span<const Poly> F_prev) {
  std::vector<Poly> out;
  if (C_pre.empty()) return out;
  if (F_prev.empty()) return {C_pre.begin(), C_pre.end()};
  const Matrix F = eval_matrix(F_prev);
  const Matrix C = eval_matrix(C_pre);
  detail::require(F.rows() == C.rows(), "orthogonal_project: point count mismatch");
  const Vector sq = F.colwise().squaredNorm().transpose();
  for (Index j = 0; j < sq.size(); ++j)
    if (!(sq(j) > 0.0)) throw InvariantViolation("orthogonal_project: zero evaluation vector in previous strata");
  const Vector inv = sq.cwiseInverse();
  Matrix Wt = inv.asDiagonal() * (F.transpose() * C);
  const Matrix R = C - F * Wt;
  Wt.noalias() += inv.asDiagonal() * (F.transpose() * R);

  const Matrix Cev = C - F * Wt;
  const Matrix Cgr = grad_stack(C_pre) - grad_stack(F_prev) * Wt;
  const Index npts = C.rows();
  const Index dim = C_pre.front().dim();
  out.reserve(C_pre.size());
  for (std::size_t j = 0; j < C_pre.size(); ++j) {
    const auto jj = static_cast<Index>(j);
    std::vector<NodePtr> children{C_pre[j].node()};
    std::vector<double> weights{1.0};
    children.reserve(F_prev.size() + 1);
    weights.reserve(F_prev.size() + 1);
    for (std::size_t i = 0; i < F_prev.size(); ++i) {
      children.push_back(F_prev[i].node());
      weights.push_back(-Wt(static_cast<Index>(i), jj));
    }
    Matrix grad = Cgr.col(jj).reshaped(npts, dim);
    out.emplace_back(ProvNode::lincomb(std::move(children), std::move(weights)), Cev.col(jj), std::move(grad));
  }
  return out;
}

}  // namespace mavik
