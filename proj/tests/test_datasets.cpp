#include <gtest/gtest.h>

#include <sstream>

#include "support.hpp"

using namespace mavik;
using namespace mavik::testing;

TEST(CounterRng, ReproducibleStream) {
  CounterRng a(42), b(42), c(43);
  for (int i = 0; i < 10; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    EXPECT_NE(x, c.next());
  }
}

TEST(SampleGeneric, DeterministicAndInRange) {
  const auto a = sample_generic(100, 3, 7);
  const auto b = sample_generic(100, 3, 7);
  EXPECT_EQ(a.points(), b.points());
  EXPECT_LE(a.points().cwiseAbs().maxCoeff(), 1.0);
  EXPECT_NE(a.points(), sample_generic(100, 3, 8).points());
  EXPECT_THROW(sample_generic(0, 3, 1), ContractViolation);
}

TEST(SampleGeneric, MeanNearZero) {
  const auto X = sample_generic(100000, 2, 9);
  const Vector m = X.points().colwise().mean();
  EXPECT_LT(m.cwiseAbs().maxCoeff(), 0.02);
  // Uniform on [-1,1] has variance 1/3.
  const Vector var = (X.points().rowwise() - m.transpose()).array().square().colwise().mean();
  EXPECT_NEAR(var(0), 1.0 / 3.0, 0.01);
}

TEST(SampleVariety, V1AtZeroParameter) {
  // u = 0 maps to (cos 0 cos 0, cos 0 sin 0).
  const double u = 0.0;
  EXPECT_DOUBLE_EQ(std::cos(2 * u) * std::cos(u), 1.0);
  const auto X = sample_variety(Variety::V1, 200, 10);
  EXPECT_LT(variety_residuals(Variety::V1, X.points()).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE(X.points().col(0).maxCoeff(), 1.0);
}

TEST(SampleVariety, DefiningEquations) {
  const auto V2 = sample_variety(Variety::V2, 200, 11);
  const Vector plane = V2.points().col(0) + V2.points().col(1) - V2.points().col(2);
  EXPECT_LT(plane.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(variety_residuals(Variety::V2, V2.points()).cwiseAbs().maxCoeff(), 1e-10);
  const auto V3 = sample_variety(Variety::V3, 200, 12);
  // Oracle: substitute into x^2 - y^2 z^2 + z^3 directly.
  for (Index i = 0; i < V3.size(); ++i) {
    const double x = V3.points()(i, 0), y = V3.points()(i, 1), z = V3.points()(i, 2);
    EXPECT_NEAR(x * x - y * y * z * z + z * z * z, 0.0, 1e-10);
  }
  EXPECT_EQ(variety_dim(Variety::V1), 2);
  EXPECT_EQ(parse_variety("V3"), Variety::V3);
  EXPECT_THROW(parse_variety("V4"), ContractViolation);
}

TEST(Perturb, ZeroNoiseOnlyCenters) {
  const auto X = sample_generic(20, 2, 13);
  const auto Y = perturb(X, 0.0, 1);
  EXPECT_LT((Y.points() - centered(X.points())).norm(), 1e-12);
  EXPECT_LT(Y.points().colwise().mean().norm(), 1e-12);
  EXPECT_THROW(perturb(X, -1.0, 1), ContractViolation);
}

TEST(Perturb, NoiseStandardDeviation) {
  const auto X = sample_generic(10000, 2, 14);
  const double nu = 0.05;
  const auto Y = perturb(X, nu, 15);
  EXPECT_LT(Y.points().colwise().mean().cwiseAbs().maxCoeff(), 1e-12);
  const Matrix D = Y.points() - centered(X.points());
  for (Index k = 0; k < 2; ++k) {
    const double sd = std::sqrt((D.col(k).array() - D.col(k).mean()).square().mean());
    EXPECT_NEAR(sd, nu, 0.1 * nu);
  }
}

TEST(CenterAndUnitbox, Examples) {
  Matrix P(2, 2);
  P << 0, 0, 2, 0;
  const auto Y = center_and_unitbox(PointSet(P));
  Matrix expect(2, 2);
  expect << -1, 0, 1, 0;
  EXPECT_LT((Y.points() - expect).norm(), 1e-15);
  EXPECT_LT((center_and_unitbox(Y).points() - Y.points()).norm(), 1e-12);
  const auto R = center_and_unitbox(PointSet(random_matrix(30, 3, 16, -5.0, 7.0)));
  EXPECT_NEAR(R.points().cwiseAbs().maxCoeff(), 1.0, 1e-12);
  EXPECT_LT(R.points().colwise().mean().norm(), 1e-12);
  EXPECT_THROW(center_and_unitbox(PointSet(Matrix::Ones(3, 2))), DegenerateInput);
}

TEST(SvdPreprocess, LineInThePlane) {
  Matrix P(5, 2);
  for (Index i = 0; i < 5; ++i) P.row(i) << i, 2.0 * i;
  const auto r = svd_preprocess(PointSet(P), 1e-8);
  EXPECT_EQ(r.V_F.cols(), 1);
  EXPECT_EQ(r.V_G.cols(), 1);
  EXPECT_EQ(r.Y.dim(), 1);
}

TEST(SvdPreprocess, FullRankAndDegenerate) {
  const auto X = sample_generic(10, 3, 17);
  const auto r = svd_preprocess(X, 1e-12);
  EXPECT_EQ(r.V_F.cols(), 3);
  EXPECT_EQ(r.V_G.cols(), 0);
  EXPECT_LT((r.V_F.transpose() * r.V_F - Matrix::Identity(3, 3)).norm(), 1e-10);
  const auto d = svd_preprocess(PointSet(Matrix::Ones(4, 2)), 1e-8);
  EXPECT_TRUE(d.fully_degenerate);
  EXPECT_EQ(d.V_F.cols(), 0);
}

TEST(SvdPreprocess, FitOnReducedCoordinates) {
  // Points near the plane x + y + z = 0 in R^3.
  Matrix P = random_matrix(30, 3, 18);
  P.col(2) = -P.col(0) - P.col(1) + 1e-9 * random_matrix(30, 1, 19);
  const PointSet X(P);
  const double eps = 1e-6;
  const auto pre = svd_preprocess(X, eps);
  ASSERT_EQ(pre.V_G.cols(), 1);
  // The linear polynomials (x - mean) V_G vanish on X within eps.
  const Matrix lin = (X.points().rowwise() - pre.mean.transpose()) * pre.V_G;
  EXPECT_LE(lin.norm(), eps);
  EngineConfig c;
  c.epsilon = eps;
  const auto r = fit(pre.Y, c);
  EXPECT_EQ(r.basis.n, 2);
  const auto ev = evaluate(r.basis, pre.Y);
  EXPECT_LT((ev.G - eval_matrix(r.basis.all_G())).norm(), 1e-9);
}

TEST(PointsIo, CsvRoundTripAndErrors) {
  const auto X = sample_generic(5, 3, 20);
  std::stringstream ss;
  write_points_csv(ss, X);
  EXPECT_EQ(ss.str().substr(0, 9), "x1,x2,x3\n");
  const auto Y = read_points_csv(ss);
  EXPECT_EQ(X.points(), Y.points());
  std::stringstream bad("x1,x2\n1,2\n3\n");
  EXPECT_THROW(read_points_csv(bad), FormatError);
  std::stringstream junk("1,abc\n");
  EXPECT_THROW(read_points_csv(junk), FormatError);
  std::stringstream empty("x1\n");
  EXPECT_THROW(read_points_csv(empty), FormatError);
}

TEST(PointsIo, JsonRoundTrip) {
  const auto X = sample_generic(4, 2, 21);
  const auto j = points_to_json(X);
  const auto Y = points_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(X.points(), Y.points());
  EXPECT_EQ(Y.provenance(), X.provenance());
  EXPECT_THROW(points_from_json(nlohmann::json{{"points", 3}}), FormatError);
}
