// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "shapeuq/errors.hpp"
#include "shapeuq/geometry.hpp"
#include "shapeuq/uq.hpp"

using namespace shapeuq;
using Mat3 = Mat<3>;
using Vec3 = Vec<3>;
using Mat2d = Mat<2>;
using Vec2d = Vec<2>;

namespace
{

// Random matrix with det in [0.5, 2].
template <int Dim>
Mat<Dim> random_jacobian(std::mt19937_64 &rng)
{
  std::uniform_real_distribution<double> U(-0.3, 0.3);
  std::uniform_real_distribution<double> D(0.5, 2.0);
  while (true)
  {
    Mat<Dim> A = Mat<Dim>::Identity();
    for (int i = 0; i < Dim; i++)
      for (int j = 0; j < Dim; j++)
        A(i, j) += U(rng);
    const double det = A.determinant();
    if (det <= 0.0)
      continue;
    A *= std::pow(D(rng) / det, 1.0 / Dim);
    return A;
  }
}

template <int Dim>
Mat<Dim> random_matrix(std::mt19937_64 &rng)
{
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  Mat<Dim> R;
  for (int i = 0; i < Dim; i++)
    for (int j = 0; j < Dim; j++)
      R(i, j) = U(rng);
  return R;
}

double rel(const Mat3 &a, const Mat3 &b) { return (a - b).norm() / std::max(1.0, b.norm()); }

DeformationField<2> scaling_field_2d()
{
  return DeformationField<2>({DeformationMode<2>::catalog("axis_scaling", {0, 1})});
}

}  // namespace

TEST(GeometryMap, BoxAffineAndInvertibilityCheck)
{
  const auto box = GeometryMap<2>::box(Vec2d(2.0, 0.5));
  const auto s = box.evaluate(Vec2d(0.25, 0.5));
  EXPECT_NEAR(s.point[0], 0.5, 1e-15);
  EXPECT_NEAR(s.point[1], 0.25, 1e-15);
  EXPECT_NEAR((s.jacobian - Vec2d(2.0, 0.5).asDiagonal().toDenseMatrix()).norm(), 0.0, 1e-14);

  Mat2d A;
  A << 1.0, 0.3, 0.0, 0.8;
  const auto aff = GeometryMap<2>::affine(Vec2d(1.0, -1.0), A);
  const auto a = aff.evaluate(Vec2d(0.5, 0.5));
  EXPECT_NEAR((a.point - (Vec2d(1.0, -1.0) + A * Vec2d(0.5, 0.5))).norm(), 0.0, 1e-14);
  EXPECT_NEAR((a.jacobian - A).norm(), 0.0, 1e-14);

  // Folded map: control points with reversed orientation.
  TensorBasis basis({KnotVector::uniform(1, 1), KnotVector::uniform(1, 1)});
  std::vector<Vec2d> folded{Vec2d(1, 0), Vec2d(0, 0), Vec2d(1, 1), Vec2d(0, 1)};
  EXPECT_THROW(GeometryMap<2>(basis, folded), NumericalError);
}

TEST(GeometryMap, RationalQuarterAnnulusHasUnitRadius)
{
  // Quadratic NURBS quarter annulus, radii 1 and 2.
  TensorBasis basis({KnotVector::uniform(2, 1), KnotVector::uniform(1, 1)});
  const double w = std::sqrt(0.5);
  // Arc runs clockwise from (0, r) to (r, 0) so the Jacobian is positive.
  std::vector<Vec2d> pts{Vec2d(0, 1), Vec2d(1, 1), Vec2d(1, 0), Vec2d(0, 2), Vec2d(2, 2), Vec2d(2, 0)};
  std::vector<double> wts{1, w, 1, 1, w, 1};
  const GeometryMap<2> ring(basis, pts, wts);
  EXPECT_TRUE(ring.rational());
  for (double u : {0.0, 0.1, 0.37, 0.5, 0.9, 1.0})
  {
    EXPECT_NEAR(ring.evaluate(Vec2d(u, 0.0)).point.norm(), 1.0, 1e-14);
    EXPECT_NEAR(ring.evaluate(Vec2d(u, 1.0)).point.norm(), 2.0, 1e-14);
  }
  // Jacobian vs central differences.
  const Vec2d x(0.3, 0.6);
  const double h = 1e-6;
  const auto J = ring.evaluate(x).jacobian;
  for (int d = 0; d < 2; d++)
  {
    Vec2d xp = x, xm = x;
    xp[d] += h;
    xm[d] -= h;
    const Vec2d fd = (ring.evaluate(xp).point - ring.evaluate(xm).point) / (2 * h);
    EXPECT_NEAR((J.col(d) - fd).norm(), 0.0, 1e-8);
  }
}

TEST(EvalMap, ReducesToReferenceAtZeroAmplitude)
{
  Mat2d A;
  A << 1.2, 0.1, -0.2, 0.9;
  const auto G = GeometryMap<2>::affine(Vec2d(0.1, 0.2), A);
  const DeformationField<2> V({DeformationMode<2>::catalog("bump", {1, 0.3}),
                               DeformationMode<2>::catalog("shear", {0, 1, 0.5})});
  const std::vector<double> z{0.7, -0.4};
  const auto s = eval_map<2>(G, V, 0.0, z, Vec2d(0.3, 0.8));
  const auto r = G.evaluate(Vec2d(0.3, 0.8));
  EXPECT_EQ(s.point, r.point);
  EXPECT_EQ(s.jacobian, r.jacobian);
}

TEST(EvalMap, AffineScalingExample)
{
  const auto G = GeometryMap<2>::box(Vec2d(1, 1));
  const std::vector<double> z{1.0};
  const auto s = eval_map<2>(G, scaling_field_2d(), 0.5, z, Vec2d(0.3, 0.7));
  EXPECT_NEAR(s.point[0], 0.45, 1e-15);
  EXPECT_NEAR(s.point[1], 0.7, 1e-15);
  EXPECT_NEAR((s.jacobian - Vec2d(1.5, 1.0).asDiagonal().toDenseMatrix()).norm(), 0.0, 1e-15);
}

TEST(EvalMap, ThreeDimensionalJacobianMatchesFiniteDifferences)
{
  const auto G = GeometryMap<3>::box(Vec3(1, 1, 1));
  const DeformationField<3> V({DeformationMode<3>::function("x2x3", [](const Vec3 &x)
                                                            {
                                                              ModeSample<3> s{Vec3::Zero(), Mat3::Zero()};
                                                              s.value[0] = x[1] * x[2];
                                                              s.jacobian(0, 1) = x[2];
                                                              s.jacobian(0, 2) = x[1];
                                                              return s;
                                                            })});
  const std::vector<double> z{1.0};
  const Vec3 x(0.2, 0.5, 0.4);
  const double h = 1e-6;
  const auto J = eval_map<3>(G, V, 0.1, z, x).jacobian;
  for (int d = 0; d < 3; d++)
  {
    Vec3 xp = x, xm = x;
    xp[d] += h;
    xm[d] -= h;
    const Vec3 fd = (eval_map<3>(G, V, 0.1, z, xp).point - eval_map<3>(G, V, 0.1, z, xm).point) / (2 * h);
    for (int i = 0; i < 3; i++)
    {
      EXPECT_NEAR(J(i, d), fd[i], 1e-6 * std::max(1.0, std::abs(fd[i])));
    }
  }
}

TEST(EvalMap, RejectsFoldedDeformation)
{
  const auto G = GeometryMap<2>::box(Vec2d(1, 1));
  const std::vector<double> z{-1.0};
  EXPECT_THROW(eval_map<2>(G, scaling_field_2d(), 1.0, z, Vec2d(0.5, 0.5)), NonInvertibleMap);
  try
  {
    eval_map<2>(G, scaling_field_2d(), 1.5, z, Vec2d(0.5, 0.5));
  }
  catch (const NumericalError &e)
  {
    EXPECT_NE(std::string(e.what()).find("map not invertible at point"), std::string::npos);
  }
}

TEST(Coefficients, WorkedExamples)
{
  const auto id3 = pullback_coefficients<3>(Mat3::Identity());
  EXPECT_EQ(id3.curl, Mat3::Identity());
  EXPECT_EQ(id3.mass, Mat3::Identity());
  const auto id2 = pullback_coefficients<2>(Mat2d::Identity());
  EXPECT_EQ(id2.curl, 1.0);
  EXPECT_EQ(id2.mass, Mat2d::Identity());

  const auto c3 = pullback_coefficients<3>(Vec3(1.5, 1, 1).asDiagonal().toDenseMatrix());
  EXPECT_LT(rel(c3.curl, Vec3(1.5, 1 / 1.5, 1 / 1.5).asDiagonal().toDenseMatrix()), 1e-15);
  EXPECT_LT(rel(c3.mass, Vec3(1 / 1.5, 1.5, 1.5).asDiagonal().toDenseMatrix()), 1e-15);

  const auto c2 = pullback_coefficients<2>(Vec2d(1.5, 1).asDiagonal().toDenseMatrix());
  EXPECT_NEAR(c2.curl, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR((c2.mass - Vec2d(2.0 / 3.0, 1.5).asDiagonal().toDenseMatrix()).norm(), 0.0, 1e-15);

  EXPECT_THROW(pullback_coefficients<2>(Mat2d::Zero()), NonInvertibleMap);
}

TEST(Coefficients, SymmetryAndDeterminantIdentities)
{
  std::mt19937_64 rng(21);
  for (int k = 0; k < 200; k++)
  {
    const Mat3 J = random_jacobian<3>(rng);
    const double det = J.determinant();
    const auto c = pullback_coefficients<3>(J);
    EXPECT_EQ(c.curl, c.curl.transpose());
    EXPECT_EQ(c.mass, c.mass.transpose());
    EXPECT_NEAR(c.mass.determinant(), det, 1e-10 * det);
    EXPECT_NEAR(c.curl.determinant(), 1.0 / det, 1e-10 / det);
    const auto d = coefficient_derivatives_general<3>(J, random_matrix<3>(rng));
    EXPECT_LT((d.curl - d.curl.transpose()).norm(), 1e-13 * std::max(1.0, d.curl.norm()));
    EXPECT_LT((d.mass - d.mass.transpose()).norm(), 1e-13 * std::max(1.0, d.mass.norm()));
  }
}

TEST(CoefficientDerivatives, StationaryAndUnitExamples)
{
  std::mt19937_64 rng(2);
  const Mat3 J = random_jacobian<3>(rng);
  const auto zero = coefficient_derivatives_general<3>(J, Mat3::Zero());
  EXPECT_LT(zero.curl.norm(), 1e-15);
  EXPECT_LT(zero.mass.norm(), 1e-15);

  const auto d = coefficient_derivatives_general<3>(Mat3::Identity(), Vec3(1, 0, 0).asDiagonal());
  EXPECT_LT(rel(d.curl, Vec3(1, -1, -1).asDiagonal().toDenseMatrix()), 1e-15);
  EXPECT_LT(rel(d.mass, Vec3(-1, 1, 1).asDiagonal().toDenseMatrix()), 1e-15);
}

TEST(CoefficientDerivatives, MatchCentralDifferences)
{
  std::mt19937_64 rng(99);
  const double h = 1e-6;
  for (int k = 0; k < 200; k++)
  {
    const Mat3 J = random_jacobian<3>(rng);
    const Mat3 R = random_matrix<3>(rng);
    const auto d = coefficient_derivatives_general<3>(J, R);
    const auto p = pullback_coefficients<3>(J + h * R);
    const auto m = pullback_coefficients<3>(J - h * R);
    EXPECT_LT(rel(d.curl, Mat3((p.curl - m.curl) / (2 * h))), 1e-5);
    EXPECT_LT(rel(d.mass, Mat3((p.mass - m.mass) / (2 * h))), 1e-5);

    const Mat2d J2 = random_jacobian<2>(rng);
    const Mat2d R2 = random_matrix<2>(rng);
    const auto d2 = coefficient_derivatives_general<2>(J2, R2);
    const auto p2 = pullback_coefficients<2>(J2 + h * R2);
    const auto m2 = pullback_coefficients<2>(J2 - h * R2);
    const double fd = (p2.curl - m2.curl) / (2 * h);
    EXPECT_NEAR(d2.curl, fd, 1e-5 * std::max(1.0, std::abs(fd)));
    EXPECT_LT((d2.mass - (p2.mass - m2.mass) / (2 * h)).norm(), 1e-5 * std::max(1.0, d2.mass.norm()));
  }
}

TEST(ReferenceModeCoefficients, AgreeWithGeneralFormulaAtIdentity)
{
  std::mt19937_64 rng(4);
  for (int k = 0; k < 100; k++)
  {
    const Mat3 dV = random_matrix<3>(rng);
    const auto ref = mode_coefficient_rate<3>(dV);
    const auto gen = coefficient_derivatives_general<3>(Mat3::Identity(), dV);
    EXPECT_LT((ref.curl - gen.curl).norm(), 1e-12);
    EXPECT_LT((ref.mass - gen.mass).norm(), 1e-12);
    EXPECT_EQ(ref.curl + ref.mass, Mat3::Zero());

    const Mat2d dV2 = random_matrix<2>(rng);
    const auto ref2 = mode_coefficient_rate<2>(dV2);
    EXPECT_EQ(ref2.curl, -dV2.trace());
    const auto gen2 = coefficient_derivatives_general<2>(Mat2d::Identity(), dV2);
    EXPECT_NEAR(ref2.curl, gen2.curl, 1e-12);
    EXPECT_LT((ref2.mass - gen2.mass).norm(), 1e-12);
  }
}

TEST(ReferenceModeCoefficients, WorkedExamples)
{
  const auto zero = mode_coefficient_rate<3>(Mat3::Zero());
  EXPECT_EQ(zero.curl, Mat3::Zero());
  EXPECT_EQ(zero.mass, Mat3::Zero());

  const auto d3 = mode_coefficient_rate<3>(Vec3(1, 0, 0).asDiagonal());
  EXPECT_EQ(d3.curl, Mat3(Vec3(1, -1, -1).asDiagonal()));
  EXPECT_EQ(d3.mass, Mat3(Vec3(-1, 1, 1).asDiagonal()));

  Mat2d shear;
  shear << 0, 1, 0, 0;
  const auto d2 = mode_coefficient_rate<2>(shear);
  Mat2d expected;
  expected << 0, -1, -1, 0;
  EXPECT_EQ(d2.mass, expected);
  EXPECT_EQ(d2.curl, 0.0);

  // Through a geometry map: the spatial mode Jacobian of axis scaling is diag(1, 0).
  const auto G = GeometryMap<2>::box(Vec2d(2.0, 3.0));
  const auto r = reference_mode_coefficients<2>(G, scaling_field_2d(), Vec2d(0.4, 0.4));
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].curl, -1.0);
  EXPECT_EQ(r[0].mass, Mat2d(Vec2d(-1, 1).asDiagonal()));
}

TEST(DeformationMode, SplineModeMatchesClosedFormThroughChainRule)
{
  // Non-trivial affine geometry, V = (x_1, 0) in physical coordinates
  // represented exactly as a degree-1 spline over the patch.
  Mat2d A;
  A << 2.0, 0.5, 0.0, 1.5;
  const Vec2d origin(0.3, -0.2);
  const auto G = GeometryMap<2>::affine(origin, A);
  TensorBasis basis({KnotVector::uniform(1, 1), KnotVector::uniform(1, 1)});
  std::vector<Vec2d> coeffs;
  for (int j = 0; j < 2; j++)
    for (int i = 0; i < 2; i++)
    {
      const Vec2d x = origin + A * Vec2d(i, j);
      coeffs.emplace_back(x[0], 0.0);
    }
  const auto spline = DeformationMode<2>::spline(basis, coeffs);
  const auto closed = DeformationMode<2>::catalog("axis_scaling", {0, 1});
  for (const Vec2d xhat : {Vec2d(0.1, 0.2), Vec2d(0.7, 0.4), Vec2d(1.0, 1.0)})
  {
    const auto F = G.evaluate(xhat);
    const auto a = spline.evaluate(xhat, F);
    const auto b = closed.evaluate(xhat, F);
    EXPECT_NEAR((a.value - b.value).norm(), 0.0, 1e-14);
    EXPECT_NEAR((a.jacobian - b.jacobian).norm(), 0.0, 1e-14);
  }
  EXPECT_THROW(DeformationMode<2>::spline(basis, {Vec2d(0, 0)}), ConfigError);
}

TEST(DeformationMode, CatalogErrorsAndBumpJacobian)
{
  EXPECT_THROW(DeformationMode<2>::catalog("twist", {1}), ConfigError);
  EXPECT_THROW(DeformationMode<2>::catalog("axis_scaling", {2, 1}), ConfigError);
  EXPECT_THROW(DeformationMode<2>::catalog("axis_scaling", {0}), ConfigError);
  EXPECT_THROW(DeformationMode<2>::catalog("shear", {1, 1, 0.5}), ConfigError);

  const auto bump = DeformationMode<3>::catalog("bump", {2, 0.7});
  const auto G = GeometryMap<3>::box(Vec3(1, 1, 1));
  const Vec3 x(0.3, 0.6, 0.2);
  const double h = 1e-6;
  const auto s = bump.evaluate(x, G.evaluate(x));
  for (int d = 0; d < 3; d++)
  {
    Vec3 xp = x, xm = x;
    xp[d] += h;
    xm[d] -= h;
    const Vec3 fd = (bump.evaluate(xp, G.evaluate(xp)).value - bump.evaluate(xm, G.evaluate(xm)).value) / (2 * h);
    EXPECT_NEAR((s.jacobian.col(d) - fd).norm(), 0.0, 1e-8);
  }
}

TEST(Coefficients, DerivativeIsCentered)
{
  // D_tC(z) = sum_i z_i [D_tC]_i with z ~ U[-1, 1]^M from the project sampler.
  const auto G = GeometryMap<3>::box(Vec3(1, 1, 1));
  const DeformationField<3> V({DeformationMode<3>::catalog("bump", {0, 1.0}),
                               DeformationMode<3>::catalog("shear", {1, 2, 0.4}),
                               DeformationMode<3>::catalog("axis_scaling", {2, 0.8})});
  const auto rates = reference_mode_coefficients<3>(G, V, Vec3(0.3, 0.4, 0.6));
  const int n = 100000;
  Mat3 sum = Mat3::Zero(), sq = Mat3::Zero();
  for (int s = 0; s < n; s++)
  {
    const auto z = sample_uniform(12345 + s, V.size());
    Mat3 d = Mat3::Zero();
    for (int i = 0; i < V.size(); i++)
      d += z[i] * rates[i].curl;
    sum += d;
    sq += d.cwiseProduct(d);
  }
  const Mat3 mean = sum / n;
  const Mat3 var = (sq - n * mean.cwiseProduct(mean)) / (n - 1);
  const double se = std::sqrt(var.sum() / n);
  EXPECT_LE(mean.norm(), 4.0 * se);
}

TEST(Coefficients, FirstOrderConsistency)
{
  const auto G = GeometryMap<3>::box(Vec3(1, 1, 1));
  const DeformationField<3> V({DeformationMode<3>::catalog("bump", {0, 1.0}),
                               DeformationMode<3>::catalog("shear", {1, 0, 0.6})});
  const std::vector<double> z{0.8, -0.5};
  const Vec3 x(0.3, 0.4, 0.6);
  const auto c0 = coefficients_at<3>(G, V, 0.0, z, x);
  EXPECT_EQ(c0.curl, Mat3::Identity());
  EXPECT_EQ(c0.mass, Mat3::Identity());
  Mat3 lin = Mat3::Zero();
  for (int i = 0; i < V.size(); i++)
    lin += z[i] * c0.curl_rate[i];
  std::vector<double> lt, le;
  for (double t : {1e-1, 1e-2, 1e-3})
  {
    const auto ct = coefficients_at<3>(G, V, t, z, x);
    lt.push_back(std::log(t));
    le.push_back(std::log(((ct.curl - c0.curl) / t - lin).norm()));
  }
  const double slope = (le[2] - le[0]) / (lt[2] - lt[0]);
  EXPECT_GE(slope, 0.9);
}
