#pragma once

// Normalized vanishing component analysis. Degree by degree: form candidate
// products, project out everything lower degrees already explain, solve the
// normalized eigenproblem and split the resulting combinations into
// nonvanishing (F) and approximately vanishing (G) polynomials.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mavik/coefficients.hpp"
#include "mavik/core.hpp"
#include "mavik/errors.hpp"
#include "mavik/linalg.hpp"

namespace mavik {

enum class NormKind { VcaBaseline, Coefficient, Gradient };

struct NormalizationMode {
  NormKind kind = NormKind::Gradient;
  double z = 1.0;  // gradient mode only

  static NormalizationMode vca() { return {NormKind::VcaBaseline, 1.0}; }
  static NormalizationMode coefficient() { return {NormKind::Coefficient, 1.0}; }
  static NormalizationMode gradient(double z = 1.0) { return {NormKind::Gradient, z}; }

  std::string name() const {
    switch (kind) {
      case NormKind::VcaBaseline: return "vca";
      case NormKind::Coefficient: return "coeff";
      case NormKind::Gradient: return "grad";
    }
    return "?";
  }

  static NormalizationMode parse(const std::string& s, double z = 1.0) {
    if (s == "vca") return vca();
    if (s == "coeff" || s == "coefficient") return coefficient();
    if (s == "grad" || s == "gradient") return gradient(z);
    throw ContractViolation("unknown normalization mode '" + s + "'");
  }
};

/// Extents below this fraction of the largest extent at a degree are roundoff.
inline constexpr double kZeroExtentRel = 1e-10;

struct EngineConfig {
  double epsilon = 0.0;
  NormalizationMode mode{};
  std::optional<double> m_constant;  // default depends on mode, see default_m_constant
  std::optional<int> max_degree;     // default |X|
  std::optional<int> d_max;
  std::optional<int> d_min;
  bool dedup_degree2 = true;
  double rank_tol = kDefaultRankTol;
  double dimension_tol = 1e-6;  // relative singular value cut for per-point gradient ranks
  std::size_t term_cap = kDefaultTermCap;
};

enum class Termination { FEmpty, MaxDegree, DimensionRule };

inline std::string to_string(Termination t) {
  switch (t) {
    case Termination::FEmpty: return "F-empty";
    case Termination::MaxDegree: return "max-degree";
    case Termination::DimensionRule: return "dimension-rule";
  }
  return "?";
}

/// Degree-stratified output: F[t], G[t] hold the degree-t polynomials and
/// extents[t][i] = ||G[t][i](X)|| as reported by the eigenproblem.
struct Basis {
  Index n = 0;
  std::vector<std::vector<Poly>> F;
  std::vector<std::vector<Poly>> G;
  std::vector<std::vector<double>> extents;

  std::vector<int> g_profile() const {
    std::vector<int> p;
    for (const auto& s : G) p.push_back(static_cast<int>(s.size()));
    return p;
  }
  std::vector<int> f_profile() const {
    std::vector<int> p;
    for (const auto& s : F) p.push_back(static_cast<int>(s.size()));
    return p;
  }
  std::size_t g_size() const {
    std::size_t k = 0;
    for (const auto& s : G) k += s.size();
    return k;
  }
  std::size_t f_size() const {
    std::size_t k = 0;
    for (const auto& s : F) k += s.size();
    return k;
  }
  std::vector<Poly> all_G() const {
    std::vector<Poly> out;
    for (const auto& s : G) out.insert(out.end(), s.begin(), s.end());
    return out;
  }
  std::vector<Poly> all_F() const {
    std::vector<Poly> out;
    for (const auto& s : F) out.insert(out.end(), s.begin(), s.end());
    return out;
  }
  int max_g_degree() const {
    for (int t = static_cast<int>(G.size()) - 1; t >= 0; --t)
      if (!G[static_cast<std::size_t>(t)].empty()) return t;
    return 0;
  }
};

struct FitReport {
  EngineConfig config;
  double m_constant = 1.0;
  Index num_points = 0;
  Index dim = 0;
  std::vector<int> f_counts;
  std::vector<int> g_counts;
  std::vector<int> candidate_counts;
  std::vector<Index> retained_ranks;
  std::vector<std::vector<double>> spectra;  // eigenvalues lambda per degree, descending
  Termination reason = Termination::FEmpty;
  double wall_seconds = 0.0;
  /// Every epsilon in [stable_low, stable_high) reproduces this run exactly.
  double stable_low = 0.0;
  double stable_high = std::numeric_limits<double>::infinity();
};

struct FitResult {
  Basis basis;
  FitReport report;
};

/// Mode-dependent constant for F_0: 1/sqrt|X| (VCA), 1 (coefficient), mean
/// L-infinity norm of the points (gradient; 1 if all points are zero).
inline double default_m_constant(const PointSet& X, const NormalizationMode& mode) {
  switch (mode.kind) {
    case NormKind::VcaBaseline: return 1.0 / std::sqrt(static_cast<double>(X.size()));
    case NormKind::Coefficient: return 1.0;
    case NormKind::Gradient: {
      const double m = X.points().cwiseAbs().rowwise().maxCoeff().mean();
      return m > 0.0 ? m : 1.0;
    }
  }
  return 1.0;
}

/// Factor M with normalization Gram M^T M; nullopt stands for the identity.
inline std::optional<Matrix> normalization_factor(std::span<const Poly> C, const NormalizationMode& mode,
                                                  Expander* expander = nullptr) {
  switch (mode.kind) {
    case NormKind::VcaBaseline: return std::nullopt;
    case NormKind::Gradient: return Matrix(grad_stack(C) / mode.z);
    case NormKind::Coefficient: {
      if (C.empty()) return Matrix();
      if (expander) return coefficient_matrix(C, *expander);
      Expander local(static_cast<int>(C.front().dim()));
      return coefficient_matrix(C, local);
    }
  }
  return std::nullopt;
}

/// The normalization matrix N(C) = n(C)^T n(C) for the given mode.
inline Matrix normalization_gram(std::span<const Poly> C, const NormalizationMode& mode,
                                 Expander* expander = nullptr) {
  detail::require(mode.z > 0.0, "normalization_gram: Z must be positive");
  const auto M = normalization_factor(C, mode, expander);
  if (!M) return Matrix::Identity(static_cast<Index>(C.size()), static_cast<Index>(C.size()));
  return M->transpose() * *M;
}

/// Per-point numerical rank of the stacked gradients {grad g(x) : g in G}.
/// `nonzero[i]` is false when every gradient vanishes at point i.
struct PointwiseRanks {
  std::vector<Index> rank;
  std::vector<bool> nonzero;
};

inline PointwiseRanks pointwise_gradient_ranks(std::span<const Poly> G, double tol) {
  PointwiseRanks out;
  if (G.empty()) return out;
  const Index npts = G.front().num_points();
  const Index n = G.front().dim();
  Matrix stack(static_cast<Index>(G.size()), n);
  for (Index i = 0; i < npts; ++i) {
    for (std::size_t j = 0; j < G.size(); ++j) stack.row(static_cast<Index>(j)) = G[j].grad().row(i);
    const bool nz = stack.cwiseAbs().maxCoeff() > 0.0;
    out.nonzero.push_back(nz);
    out.rank.push_back(nz ? numerical_rank(stack, tol) : 0);
  }
  return out;
}

/// Dimension-regularized stopping rule. A target of 0 (or none) never fires.
inline bool check_termination_dimension(const Basis& G_so_far, const PointSet& X, std::optional<int> d_max,
                                        std::optional<int> d_min, double tol) {
  const auto G = G_so_far.all_G();
  if (G.empty()) return false;
  detail::require(G.front().num_points() == X.size(), "check_termination_dimension: point count mismatch");
  const Index n = X.dim();
  const auto ranks = pointwise_gradient_ranks(G, tol);
  if (d_max && *d_max > 0) {
    Index min_rank = std::numeric_limits<Index>::max();
    bool any = false;
    for (std::size_t i = 0; i < ranks.rank.size(); ++i) {
      if (!ranks.nonzero[i]) continue;
      any = true;
      min_rank = std::min(min_rank, ranks.rank[i]);
    }
    if (any && n - min_rank <= *d_max) return true;
  }
  if (d_min && *d_min > 0) {
    const Index max_rank = *std::max_element(ranks.rank.begin(), ranks.rank.end());
    if (n - max_rank <= *d_min) return true;
  }
  return false;
}

namespace detail {

inline void validate(const PointSet& X, const EngineConfig& cfg) {
  require(X.size() >= 1 && X.dim() >= 1, "fit: empty point set");
  require(cfg.epsilon >= 0.0 && std::isfinite(cfg.epsilon), "fit: epsilon must be finite and >= 0");
  require(cfg.mode.z > 0.0 && std::isfinite(cfg.mode.z), "fit: Z must be positive");
  if (cfg.m_constant) require(*cfg.m_constant != 0.0 && std::isfinite(*cfg.m_constant), "fit: m must be nonzero");
  if (cfg.max_degree) require(*cfg.max_degree >= 1, "fit: max_degree must be >= 1");
  if (cfg.d_max) require(*cfg.d_max >= 0 && *cfg.d_max <= X.dim(), "fit: d_max must lie in [0, n]");
  if (cfg.d_min) require(*cfg.d_min >= 0 && *cfg.d_min <= X.dim(), "fit: d_min must lie in [0, n]");
}

inline std::vector<Poly> degree_candidates(int t, const PointSet& X, const Basis& basis, bool dedup) {
  std::vector<Poly> pre;
  if (t == 1) {
    for (int k = 0; k < X.dim(); ++k) pre.push_back(Poly::variable(X, k));
    return pre;
  }
  const auto& F1 = basis.F[1];
  const auto& Fprev = basis.F[static_cast<std::size_t>(t - 1)];
  for (std::size_t i = 0; i < F1.size(); ++i) {
    const std::size_t start = (t == 2 && dedup) ? i : 0;
    for (std::size_t j = start; j < Fprev.size(); ++j) pre.push_back(multiply(F1[i], Fprev[j]));
  }
  return pre;
}

/// Columns of WG with extent at roundoff level span an eigenspace of a
/// repeated zero eigenvalue, so any orthonormal rotation of them is an equally
/// valid eigenbasis. Rotate to the right singular vectors of their stacked
/// gradients, which puts combinations that vanish identically (such as
/// x*y - y*x from undeduplicated products) on their own columns.
inline void isolate_gradient_null(std::span<const Poly> C, Matrix& WG, const std::vector<double>& ext, double zero_floor) {
  std::vector<Index> cluster;
  for (std::size_t j = 0; j < ext.size(); ++j)
    if (ext[j] <= zero_floor) cluster.push_back(static_cast<Index>(j));
  if (cluster.size() < 2) return;
  const Index rows = C.front().num_points() * C.front().dim();
  Matrix grads(rows, static_cast<Index>(C.size()));
  for (std::size_t i = 0; i < C.size(); ++i)
    grads.col(static_cast<Index>(i)) = C[i].grad().reshaped();
  Matrix V(WG.rows(), static_cast<Index>(cluster.size()));
  for (std::size_t k = 0; k < cluster.size(); ++k) V.col(static_cast<Index>(k)) = WG.col(cluster[k]);
  Eigen::JacobiSVD<Matrix> svd(grads * V, Eigen::ComputeFullV);
  const Matrix R = V * svd.matrixV();
  for (std::size_t k = 0; k < cluster.size(); ++k) WG.col(cluster[k]) = R.col(static_cast<Index>(k));
}

}  // namespace detail

inline FitResult fit(const PointSet& X, const EngineConfig& cfg) {
  detail::validate(X, cfg);
  const auto start = std::chrono::steady_clock::now();
  const double m = cfg.m_constant.value_or(default_m_constant(X, cfg.mode));
  const bool gradient_mode = cfg.mode.kind == NormKind::Gradient;

  std::optional<Expander> expander;
  if (cfg.mode.kind == NormKind::Coefficient) expander.emplace(static_cast<int>(X.dim()), cfg.term_cap);

  FitResult result;
  Basis& basis = result.basis;
  FitReport& rep = result.report;
  rep.config = cfg;
  rep.m_constant = m;
  rep.num_points = X.size();
  rep.dim = X.dim();

  basis.n = X.dim();
  basis.F.push_back({Poly::constant(X, m)});
  basis.G.emplace_back();
  basis.extents.emplace_back();
  rep.f_counts.push_back(1);
  rep.g_counts.push_back(0);
  rep.candidate_counts.push_back(0);
  rep.retained_ranks.push_back(0);
  rep.spectra.emplace_back();

  std::vector<Poly> lower = basis.F.front();
  const int cap = cfg.max_degree.value_or(static_cast<int>(X.size()));

  for (int t = 1;; ++t) {
    const auto pre = detail::degree_candidates(t, X, basis, cfg.dedup_degree2);
    const auto C = orthogonal_project(pre, lower);

    std::vector<Poly> Ft;
    std::vector<Poly> Gt;
    std::vector<double> ext;
    std::vector<double> spectrum;
    Index retained = 0;
    if (!C.empty()) {
      const Matrix B = eval_matrix(C);
      const auto M = normalization_factor(C, cfg.mode, expander ? &*expander : nullptr);
      const auto eig = gen_eig_factored(B, M, cfg.rank_tol);
      retained = eig.retained_rank;
      std::vector<Index> fi;
      std::vector<Index> gi;
      // Extents at roundoff level relative to the largest one count as zero.
      const double zero_floor =
          eig.retained_rank > 0 ? kZeroExtentRel * std::sqrt(std::max(eig.values.head(eig.retained_rank).maxCoeff(), 0.0))
                                : 0.0;
      for (Index i = 0; i < eig.retained_rank; ++i) {
        const double lam = eig.values(i);
        spectrum.push_back(lam);
        const double extent = std::sqrt(std::max(lam, 0.0));
        if (extent > cfg.epsilon && extent > zero_floor) {
          fi.push_back(i);
          rep.stable_high = std::min(rep.stable_high, extent);
        } else {
          gi.push_back(i);
          rep.stable_low = std::max(rep.stable_low, extent);
        }
      }
      Matrix WF(eig.vectors.rows(), static_cast<Index>(fi.size()));
      for (std::size_t j = 0; j < fi.size(); ++j) {
        WF.col(static_cast<Index>(j)) = eig.vectors.col(fi[j]);
        // Plain VCA keeps nonvanishing polynomials at unit evaluation norm.
        if (cfg.mode.kind == NormKind::VcaBaseline) WF.col(static_cast<Index>(j)) /= std::sqrt(eig.values(fi[j]));
      }
      Matrix WG(eig.vectors.rows(), static_cast<Index>(gi.size()));
      for (std::size_t j = 0; j < gi.size(); ++j) {
        WG.col(static_cast<Index>(j)) = eig.vectors.col(gi[j]);
        ext.push_back(std::sqrt(std::max(eig.values(gi[j]), 0.0)));
      }
      if (!gradient_mode) detail::isolate_gradient_null(C, WG, ext, zero_floor);
      Ft = linear_combine_all(C, WF);
      Gt = linear_combine_all(C, WG);
      if (gradient_mode) {
        for (const auto* set : {&Ft, &Gt})
          for (const auto& h : *set)
            if (!(h.gradient_norm() >= 0.5 * cfg.mode.z))
              throw InvariantViolation("fit: retained polynomial lost its gradient norm");
      }
    }

    lower.insert(lower.end(), Ft.begin(), Ft.end());
    rep.f_counts.push_back(static_cast<int>(Ft.size()));
    rep.g_counts.push_back(static_cast<int>(Gt.size()));
    rep.candidate_counts.push_back(static_cast<int>(C.size()));
    rep.retained_ranks.push_back(retained);
    rep.spectra.push_back(std::move(spectrum));
    const bool f_empty = Ft.empty();
    basis.F.push_back(std::move(Ft));
    basis.G.push_back(std::move(Gt));
    basis.extents.push_back(std::move(ext));

    if (f_empty) {
      rep.reason = Termination::FEmpty;
      break;
    }
    if (t >= cap) {
      rep.reason = Termination::MaxDegree;
      break;
    }
    if (check_termination_dimension(basis, X, cfg.d_max, cfg.d_min, cfg.dimension_tol)) {
      rep.reason = Termination::DimensionRule;
      break;
    }
  }
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

/// Evaluation matrices of F and G on new points, by provenance replay.
/// Columns are ordered by degree, then by position within the stratum.
struct Evaluation {
  Matrix F;
  Matrix G;
};

inline Evaluation evaluate(const Basis& B, const PointSet& X_new) {
  detail::require(X_new.dim() == B.n, "evaluate: point dimension differs from the basis");
  Replayer replay(X_new, false);
  const auto F = B.all_F();
  const auto G = B.all_G();
  Evaluation out{Matrix(X_new.size(), static_cast<Index>(F.size())),
                 Matrix(X_new.size(), static_cast<Index>(G.size()))};
  for (std::size_t j = 0; j < F.size(); ++j) out.F.col(static_cast<Index>(j)) = replay(F[j].node()).eval;
  for (std::size_t j = 0; j < G.size(); ++j) out.G.col(static_cast<Index>(j)) = replay(G[j].node()).eval;
  return out;
}

/// Rebuilds every basis polynomial's data on X (evaluation and gradient) from
/// provenance; used when a basis is loaded from disk.
inline Basis replay_basis(const Basis& B, const PointSet& X) {
  detail::require(X.dim() == B.n, "replay_basis: point dimension differs from the basis");
  Replayer replay(X, true);
  Basis out;
  out.n = B.n;
  out.extents = B.extents;
  for (const auto& stratum : B.F) {
    auto& dst = out.F.emplace_back();
    for (const auto& p : stratum) dst.push_back(replay.poly(p.node()));
  }
  for (const auto& stratum : B.G) {
    auto& dst = out.G.emplace_back();
    for (const auto& p : stratum) dst.push_back(replay.poly(p.node()));
  }
  return out;
}

/// Total G count and per-degree bound checks used by the test suites.
inline bool satisfies_size_bounds(const Basis& B, Index num_points) {
  const Index n = B.n;
  if (num_points > n && static_cast<Index>(B.g_size()) > n * (num_points - n)) return false;
  double cumulative = 0.0;
  for (std::size_t tau = 0; tau < B.F.size(); ++tau) {
    cumulative += static_cast<double>(B.F[tau].size());
    // binom(n + tau, n)
    double bound = 1.0;
    for (std::size_t k = 1; k <= tau; ++k) bound = bound * static_cast<double>(n + static_cast<Index>(k)) / static_cast<double>(k);
    if (cumulative > bound + 1e-9) return false;
  }
  return true;
}

}  // namespace mavik
