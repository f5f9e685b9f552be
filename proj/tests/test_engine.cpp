#include <gtest/gtest.h>

#include "support.hpp"

using namespace mavik;
using namespace mavik::testing;

namespace {

PointSet circle4() {
  Matrix P(4, 2);
  P << 1, 0, 0, 1, -1, 0, 0, -1;
  return PointSet(P);
}

EngineConfig config(double eps, NormalizationMode mode = NormalizationMode::gradient()) {
  EngineConfig c;
  c.epsilon = eps;
  c.mode = mode;
  return c;
}

}  // namespace

TEST(Fit, GenericThreeDimensionalProfile) {
  const auto r = fit(sample_generic(50, 3, 1), config(1e-6));
  EXPECT_EQ(r.basis.g_size(), 40u);
  EXPECT_EQ(r.basis.g_profile(), (std::vector<int>{0, 0, 0, 0, 0, 6, 34}));
  EXPECT_EQ(r.basis.max_g_degree(), 6);
  EXPECT_EQ(r.report.reason, Termination::FEmpty);
}

TEST(Fit, SinglePoint) {
  Matrix P(1, 2);
  P << 0.3, -0.7;
  const auto r = fit(PointSet(P), config(0.0));
  EXPECT_EQ(r.basis.f_size(), 1u);
  EXPECT_EQ(r.basis.g_profile(), (std::vector<int>{0, 2}));
  EXPECT_EQ(r.basis.G.size(), 2u);
}

TEST(Fit, ZeroEpsilonTreatsRoundoffAsZero) {
  const auto X = sample_variety(Variety::V2, 40, 3);
  auto c = config(0.0);
  c.max_degree = 3;
  const auto r = fit(X, c);
  EXPECT_EQ(r.basis.g_profile(), (std::vector<int>{0, 1, 0, 1}));
  for (const auto& stratum : r.basis.extents)
    for (double e : stratum) EXPECT_LE(e, 1e-10);
}

TEST(Fit, CircleFourPoints) {
  const auto r = fit(circle4(), config(1e-8));
  EXPECT_EQ(r.basis.g_size(), 4u);
}

TEST(Fit, RejectsBadConfig) {
  const auto X = sample_generic(5, 2, 2);
  auto c = config(-1.0);
  EXPECT_THROW(fit(X, c), ContractViolation);
  c = config(0.1);
  c.m_constant = 0.0;
  EXPECT_THROW(fit(X, c), ContractViolation);
  c = config(0.1);
  c.d_max = 3;
  EXPECT_THROW(fit(X, c), ContractViolation);
  c = config(0.1, NormalizationMode::gradient(0.0));
  EXPECT_THROW(fit(X, c), ContractViolation);
}

TEST(Fit, CoefficientModeTermCap) {
  auto c = config(1e-6, NormalizationMode::coefficient());
  c.term_cap = 20;
  EXPECT_THROW(fit(sample_generic(30, 4, 3), c), ResourceError);
}

TEST(Fit, MaxDegreeCap) {
  auto c = config(1e-6);
  c.max_degree = 2;
  const auto r = fit(sample_generic(50, 3, 4), c);
  EXPECT_EQ(r.report.reason, Termination::MaxDegree);
  EXPECT_EQ(r.basis.G.size(), 3u);
}

TEST(Fit, BasisInvariants) {
  for (const auto& mode : {NormalizationMode::vca(), NormalizationMode::coefficient(), NormalizationMode::gradient()}) {
    const auto X = sample_generic(25, 3, 5);
    const auto r = fit(X, config(1e-3, mode));
    const auto& B = r.basis;
    // Orthogonality of F strata against each other and lower strata.
    std::vector<Poly> lower;
    for (const auto& Ft : B.F) {
      if (!Ft.empty() && !lower.empty()) {
        const Matrix cross = eval_matrix(lower).transpose() * eval_matrix(Ft);
        EXPECT_LT(cross.cwiseAbs().maxCoeff(), 1e-8) << mode.name();
      }
      if (Ft.size() > 1) {
        Matrix gram = eval_matrix(Ft).transpose() * eval_matrix(Ft);
        gram.diagonal().setZero();
        EXPECT_LT(gram.cwiseAbs().maxCoeff(), 1e-8) << mode.name();
      }
      lower.insert(lower.end(), Ft.begin(), Ft.end());
    }
    // Extent bookkeeping.
    for (std::size_t t = 0; t < B.G.size(); ++t) {
      for (std::size_t j = 0; j < B.G[t].size(); ++j) {
        EXPECT_NEAR(B.G[t][j].eval().norm(), B.extents[t][j], 1e-8) << mode.name();
        EXPECT_LE(B.extents[t][j], 1e-3);
        EXPECT_EQ(B.G[t][j].degree(), static_cast<int>(t));
      }
    }
    EXPECT_TRUE(satisfies_size_bounds(B, X.size())) << mode.name();
    int total = 0;
    for (int c : r.report.g_counts) total += c;
    EXPECT_EQ(static_cast<std::size_t>(total), B.g_size());
  }
}

TEST(Fit, GradientModeKeepsGradientNorms) {
  const auto r = fit(sample_generic(30, 3, 6), config(1e-4, NormalizationMode::gradient(2.0)));
  for (const auto& p : r.basis.all_G()) EXPECT_NEAR(p.gradient_norm(), 2.0, 1e-8);
  for (std::size_t t = 1; t < r.basis.F.size(); ++t)
    for (const auto& p : r.basis.F[t]) EXPECT_NEAR(p.gradient_norm(), 2.0, 1e-8);
}

TEST(Fit, IsDeterministic) {
  const auto X = sample_generic(30, 3, 7);
  const auto a = fit(X, config(1e-5));
  const auto b = fit(X, config(1e-5));
  EXPECT_EQ(eval_matrix(a.basis.all_G()), eval_matrix(b.basis.all_G()));
  EXPECT_EQ(a.report.spectra, b.report.spectra);
}

TEST(Fit, StableIntervalReproducesRun) {
  const auto X = sample_generic(20, 2, 8);
  const auto r = fit(X, config(1e-3));
  ASSERT_LT(r.report.stable_low, r.report.stable_high);
  EXPECT_LE(r.report.stable_low, 1e-3);
  EXPECT_GT(r.report.stable_high, 1e-3);
  const double inside = 0.5 * (r.report.stable_low + std::min(r.report.stable_high, 1.0));
  EXPECT_EQ(fit(X, config(inside)).basis.g_profile(), r.basis.g_profile());
}

TEST(Fit, BoundaryExtentGoesToG) {
  const auto X = sample_generic(12, 2, 9);
  const auto probe = fit(X, config(1e-3));
  // Pick an F extent at degree 1 and use it as epsilon exactly.
  const double lam = probe.report.spectra[1].back();
  const auto r = fit(X, config(std::sqrt(lam)));
  EXPECT_GE(r.basis.G[1].size(), 1u);
}

TEST(NormalizationGram, GradientOfVariablesIsScaledIdentity) {
  const auto X = sample_generic(7, 2, 10);
  std::vector<Poly> C{Poly::variable(X, 0), Poly::variable(X, 1)};
  const Matrix N = normalization_gram(C, NormalizationMode::gradient(1.0));
  EXPECT_LT((N - 7.0 * Matrix::Identity(2, 2)).norm(), 1e-14);
  EXPECT_EQ(normalization_gram(C, NormalizationMode::vca()), Matrix::Identity(2, 2));
}

TEST(NormalizationGram, CoefficientExample) {
  const auto X = sample_generic(3, 2, 11);
  std::vector<Poly> H{Poly::variable(X, 0), Poly::variable(X, 1)};
  std::vector<Poly> C{linear_combine(H, Eigen::Vector2d(1, 1)), linear_combine(H, Eigen::Vector2d(1, -1))};
  Matrix expect(2, 2);
  expect << 2, 0, 0, 2;
  EXPECT_LT((normalization_gram(C, NormalizationMode::coefficient()) - expect).norm(), 1e-14);
}

TEST(NormalizationGram, GradientGramMatchesFiniteDifferences) {
  const auto X = sample_generic(15, 3, 12);
  CounterRng rng(13);
  std::vector<Poly> C;
  for (int i = 0; i < 4; ++i) C.push_back(random_poly(X, 2, rng));
  const double z = 0.5;
  Matrix S(X.size() * X.dim(), 4);
  for (int i = 0; i < 4; ++i) S.col(i) = fd_gradient(C[static_cast<std::size_t>(i)].node(), X.points()).reshaped();
  const Matrix expect = S.transpose() * S / (z * z);
  EXPECT_LT(rel_err(normalization_gram(C, NormalizationMode::gradient(z)), expect), 1e-5);
}

TEST(Evaluate, ReplayOnTrainingPoints) {
  const auto X = sample_generic(20, 3, 14);
  const auto r = fit(X, config(1e-4));
  const auto ev = evaluate(r.basis, X);
  EXPECT_LT(rel_err(ev.F, eval_matrix(r.basis.all_F())), 1e-9);
  EXPECT_LT((ev.G - eval_matrix(r.basis.all_G())).norm(), 1e-9 * std::max(1.0, ev.F.norm()));
}

TEST(Evaluate, ConstantColumnAndDimensionCheck) {
  const auto X = sample_generic(10, 2, 15);
  auto c = config(1e-4);
  c.m_constant = 0.25;
  const auto r = fit(X, c);
  const auto ev = evaluate(r.basis, sample_generic(6, 2, 16));
  EXPECT_EQ(ev.F.col(0), Vector::Constant(6, 0.25));
  EXPECT_THROW(evaluate(r.basis, sample_generic(6, 3, 16)), ContractViolation);
}

TEST(Evaluate, AgreesWithExpansionOnNewPoints) {
  const auto X = sample_generic(20, 2, 17);
  const auto r = fit(X, config(1e-4));
  const auto Y = sample_generic(5, 2, 18);
  const auto ev = evaluate(r.basis, Y);
  const auto G = r.basis.all_G();
  ASSERT_FALSE(G.empty());
  for (std::size_t j = 0; j < G.size(); ++j)
    EXPECT_LT(rel_err(ev.G.col(static_cast<Index>(j)), expand(G[j]).evaluate(Y.points())), 1e-9);
}

TEST(Termination, DisabledTargetsNeverFire) {
  const auto X = sample_generic(20, 2, 19);
  const auto full = fit(X, config(1e-6));
  auto c = config(1e-6);
  c.d_max = 0;
  c.d_min = 0;
  const auto r = fit(X, c);
  EXPECT_EQ(r.basis.g_profile(), full.basis.g_profile());
  EXPECT_EQ(r.report.reason, Termination::FEmpty);
  EXPECT_FALSE(check_termination_dimension(Basis{}, X, 1, 1, 1e-6));
}

TEST(Termination, CircleRankFiresForDmaxOne) {
  const auto X = center_and_unitbox(sample_variety(Variety::V1, 60, 20));
  auto c = config(1e-8);
  const auto full = fit(X, c);
  const auto G = full.basis.all_G();
  ASSERT_FALSE(G.empty());
  // Oracle: explicit per-point SVD rank of the first generator's gradient.
  Basis only_first;
  only_first.n = 2;
  only_first.G = {{G.front()}};
  bool all_rank_one = true;
  for (Index i = 0; i < X.size(); ++i) all_rank_one &= svd_rank(G.front().grad().row(i), 1e-6) == 1;
  EXPECT_EQ(check_termination_dimension(only_first, X, 1, std::nullopt, 1e-6), all_rank_one);
  c.d_max = 1;
  const auto r = fit(X, c);
  EXPECT_EQ(r.report.reason, Termination::DimensionRule);
  EXPECT_LE(r.basis.G.size(), full.basis.G.size());
}

TEST(Properties, TranslationGivesSameEvaluations) {
  const auto X = sample_generic(20, 3, 21);
  Vector beta(3);
  beta << 0.3, -1.2, 2.0;
  for (const auto& mode : {NormalizationMode::vca(), NormalizationMode::coefficient(), NormalizationMode::gradient()}) {
    auto c = config(1e-4, mode);
    c.m_constant = 1.0;
    const auto a = fit(X, c);
    const auto b = fit(X.translated(beta), c);
    EXPECT_EQ(a.basis.g_profile(), b.basis.g_profile()) << mode.name();
    if (mode.kind != NormKind::Coefficient) {
      EXPECT_LT((eval_matrix(a.basis.all_F()) - eval_matrix(b.basis.all_F())).norm(), 1e-8) << mode.name();
      EXPECT_LT((eval_matrix(a.basis.all_G()) - eval_matrix(b.basis.all_G())).norm(), 1e-8) << mode.name();
    }
  }
}

TEST(Properties, GradientScalingConsistency) {
  const auto X = PointSet(centered(random_matrix(25, 3, 22)));
  const double eps = 1e-4;
  auto base = config(eps);
  base.m_constant = 1.0;
  const auto a = fit(X, base);
  for (double alpha : {0.01, 0.1, 10.0, 100.0}) {
    auto c = base;
    c.epsilon = alpha * eps;
    const auto b = fit(X.scaled(alpha), c);
    ASSERT_EQ(a.basis.g_profile(), b.basis.g_profile()) << alpha;
    const Matrix ga = eval_matrix(a.basis.all_G());
    const Matrix gb = eval_matrix(b.basis.all_G());
    EXPECT_LT((gb - alpha * ga).norm(), 1e-7 * alpha * (ga.norm() + 1.0)) << alpha;
  }
}

TEST(Properties, IntraDegreeIndependence) {
  const auto X = sample_generic(30, 3, 23);
  const auto r = fit(X, config(1e-6));
  for (const auto& Gt : r.basis.G) {
    for (std::size_t a = 0; a < Gt.size(); ++a) {
      for (std::size_t b = 0; b < Gt.size(); ++b) {
        if (a == b) continue;
        bool independent_somewhere = false;
        for (Index i = 0; i < X.size() && !independent_somewhere; ++i) {
          Matrix pair(2, X.dim());
          pair.row(0) = Gt[a].grad().row(i);
          pair.row(1) = Gt[b].grad().row(i);
          independent_somewhere = svd_rank(pair, 1e-8) == 2;
        }
        EXPECT_TRUE(independent_somewhere);
      }
    }
  }
}

TEST(SizeBounds, DetectsViolations) {
  const auto X = sample_generic(10, 2, 24);
  auto B = fit(X, config(1e-6)).basis;
  EXPECT_TRUE(satisfies_size_bounds(B, X.size()));
  B.F[1].push_back(B.F[1].front());
  B.F[1].push_back(B.F[1].front());
  EXPECT_FALSE(satisfies_size_bounds(B, X.size()));
}

TEST(SizeBounds, InterpolationBeforeFinalDegreeExceedsGBound) {
  // 10 generic points in R^4: monomials of degree <= 2 have rank 10 on X, so
  // 5 quadrics vanish and every degree-3 product vanishes too.
  const auto X = sample_generic(10, 4, 3);
  Matrix mono(10, 15);
  Index col = 0;
  mono.col(col++).setOnes();
  for (Index i = 0; i < 4; ++i) mono.col(col++) = X.points().col(i);
  for (Index i = 0; i < 4; ++i)
    for (Index j = i; j < 4; ++j) mono.col(col++) = X.points().col(i).cwiseProduct(X.points().col(j));
  ASSERT_EQ(svd_rank(mono, 1e-10), 10);
  const auto B = fit(X, config(1e-6)).basis;
  EXPECT_EQ(B.f_profile(), (std::vector<int>{1, 4, 5, 0}));
  EXPECT_EQ(B.g_profile(), (std::vector<int>{0, 0, 5, 20}));
  EXPECT_GT(B.g_size(), 4u * (10u - 4u));
}

TEST(NormalizationMode, Parse) {
  EXPECT_EQ(NormalizationMode::parse("vca").kind, NormKind::VcaBaseline);
  EXPECT_EQ(NormalizationMode::parse("coeff").kind, NormKind::Coefficient);
  EXPECT_EQ(NormalizationMode::parse("grad", 3.0).z, 3.0);
  EXPECT_THROW(NormalizationMode::parse("other"), ContractViolation);
}
