#pragma once

// Post-processing of a fitted basis: removal of vanishing polynomials whose
// gradients are explained by lower-degree ones, and estimates of the
// dimension of the underlying variety from per-point gradient ranks.

#include <nlohmann/json.hpp>

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "mavik/engine.hpp"
#include "mavik/linalg.hpp"

namespace mavik {

inline constexpr double kDefaultReductionThreshold = 1e-6;

struct RemovedPoly {
  Poly poly;
  std::size_t index = 0;  // position in the degree-major G ordering
  double residual = 0.0;  // max over X of the relative least-squares residual
};

struct ReductionReport {
  std::vector<Poly> kept;
  std::vector<std::size_t> kept_index;
  std::vector<RemovedPoly> removed;
  double threshold = kDefaultReductionThreshold;
};

namespace detail {

/// Least-squares residual of `target` against the span of the rows of
/// `pool`, via an SVD pseudo-inverse that drops directions below rank_tol.
inline double ls_residual(const Matrix& pool, const Eigen::RowVectorXd& target, double rank_tol) {
  if (pool.rows() == 0) return target.norm();
  Eigen::JacobiSVD<Matrix> svd(pool.transpose(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  Vector b = target.transpose();
  if (s.size() == 0 || !(s(0) > 0.0)) return b.norm();
  const Index r = static_cast<Index>((s.array() > rank_tol * s(0)).count());
  const Matrix U = svd.matrixU().leftCols(r);
  return (b - U * (U.transpose() * b)).norm();
}

/// Max over points of ||grad g(x) - v^T grad pool(x)|| / ||grad g(x)||.
/// Points where grad g vanishes (norm at most zero_grad) are trivially
/// explained and count as zero.
inline double max_relative_residual(const Poly& g, std::span<const Poly> pool, double zero_grad = 0.0) {
  const Index npts = g.num_points();
  const Index n = g.dim();
  double worst = 0.0;
  Matrix stack(static_cast<Index>(pool.size()), n);
  for (Index i = 0; i < npts; ++i) {
    const Eigen::RowVectorXd gi = g.grad().row(i);
    const double gnorm = gi.norm();
    if (gnorm <= zero_grad) continue;
    for (std::size_t j = 0; j < pool.size(); ++j) stack.row(static_cast<Index>(j)) = pool[j].grad().row(i);
    worst = std::max(worst, ls_residual(stack, gi, kDefaultRankTol) / gnorm);
  }
  return worst;
}

}  // namespace detail

/// Degree by degree, drops each g whose gradient at every point lies (up to
/// `threshold`, relative) in the span of the gradients of kept polynomials of
/// strictly lower degree. Same-degree polynomials never reduce each other.
inline ReductionReport reduce_basis(const Basis& B, const PointSet& X, double threshold = kDefaultReductionThreshold) {
  detail::require(threshold >= 0.0, "reduce_basis: threshold must be >= 0");
  ReductionReport out;
  out.threshold = threshold;
  // Gradients at roundoff level relative to the largest in G count as zero.
  double grad_scale = 0.0;
  for (const auto& stratum : B.G)
    for (const auto& g : stratum) grad_scale = std::max(grad_scale, g.grad().rowwise().norm().maxCoeff());
  const double zero_grad = kZeroExtentRel * grad_scale;
  std::size_t index = 0;
  std::vector<Poly> pool;
  for (const auto& stratum : B.G) {
    std::vector<Poly> admitted;
    for (const auto& g : stratum) {
      detail::require(g.num_points() == X.size() && g.dim() == X.dim(), "reduce_basis: basis was not fit on these points");
      const double res = detail::max_relative_residual(g, pool, zero_grad);
      if (res <= threshold) {
        out.removed.push_back({g, index, res});
      } else {
        out.kept.push_back(g);
        out.kept_index.push_back(index);
        admitted.push_back(g);
      }
      ++index;
    }
    pool.insert(pool.end(), admitted.begin(), admitted.end());
  }
  return out;
}

/// B with its G replaced by the kept polynomials of `report` (extents follow).
inline Basis apply_reduction(const Basis& B, const ReductionReport& report) {
  Basis out;
  out.n = B.n;
  out.F = B.F;
  std::vector<bool> keep(B.g_size(), false);
  for (std::size_t i : report.kept_index) keep[i] = true;
  std::size_t index = 0;
  for (std::size_t t = 0; t < B.G.size(); ++t) {
    auto& G = out.G.emplace_back();
    auto& E = out.extents.emplace_back();
    for (std::size_t j = 0; j < B.G[t].size(); ++j, ++index) {
      if (!keep[index]) continue;
      G.push_back(B.G[t][j]);
      E.push_back(j < B.extents[t].size() ? B.extents[t][j] : 0.0);
    }
  }
  return out;
}

inline nlohmann::json reduction_to_json(const ReductionReport& r) {
  nlohmann::json removed = nlohmann::json::array();
  for (const auto& rm : r.removed)
    removed.push_back({{"index", rm.index}, {"degree", rm.poly.degree()}, {"max_relative_residual", rm.residual}});
  nlohmann::json kept = nlohmann::json::array();
  for (std::size_t i = 0; i < r.kept.size(); ++i) kept.push_back({{"index", r.kept_index[i]}, {"degree", r.kept[i].degree()}});
  return {{"threshold", r.threshold}, {"kept", kept}, {"removed", removed}};
}

struct DimensionEstimate {
  Index d_min = 0;
  Index d_max = 0;
};

/// d_max = n - min rank over points with a nonzero gradient stack (n when all
/// stacks vanish); d_min = n - max rank. Empty G gives (n, n).
inline DimensionEstimate estimate_dimension(std::span<const Poly> G, const PointSet& X, double tol = 1e-6) {
  const Index n = X.dim();
  if (G.empty()) return {n, n};
  detail::require(G.front().num_points() == X.size(), "estimate_dimension: point count mismatch");
  const auto ranks = pointwise_gradient_ranks(G, tol);
  Index lo = std::numeric_limits<Index>::max();
  Index hi = 0;
  bool any = false;
  for (std::size_t i = 0; i < ranks.rank.size(); ++i) {
    hi = std::max(hi, ranks.rank[i]);
    if (!ranks.nonzero[i]) continue;
    any = true;
    lo = std::min(lo, ranks.rank[i]);
  }
  return {n - hi, any ? n - lo : n};
}

inline DimensionEstimate estimate_dimension(const Basis& B, const PointSet& X, double tol = 1e-6) {
  const auto G = B.all_G();
  return estimate_dimension(G, X, tol);
}

}  // namespace mavik
