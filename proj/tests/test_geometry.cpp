#include <gtest/gtest.h>

#include "shapedyn/geometry.hpp"
#include "test_support.hpp"

using namespace shapedyn;
using shapedyn::testing::Sampler;

namespace {

Configuration two_particles(double x0, double x1) {
  Configuration q = Configuration::Zero(3, 2);
  q(0, 0) = x0;
  q(0, 1) = x1;
  return q;
}

}  // namespace

TEST(MassSystem, RejectsBadInput) {
  EXPECT_THROW(MassSystem(4, Eigen::VectorXd::Ones(2)), Error);
  EXPECT_THROW(MassSystem(3, Eigen::VectorXd()), Error);
  Eigen::VectorXd m(2);
  m << 1.0, -1.0;
  try {
    MassSystem(3, m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidArgument);
    EXPECT_NE(std::string(e.what()).find("masses"), std::string::npos);
  }
}

TEST(ApplyTransform, IdentityAndDilation) {
  Sampler s(1);
  const Configuration q = s.configuration(3, 4);
  EXPECT_EQ(apply_transform(SimilarityTransform::identity(3), q), q);

  SimilarityTransform dil = SimilarityTransform::identity(3);
  dil.scale = 2.0;
  const Configuration out = apply_transform(dil, two_particles(1.0, 0.0));
  EXPECT_EQ(out, two_particles(2.0, 0.0));
}

TEST(ApplyTransform, IsALeftAction) {
  Sampler s(2);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 1 + trial % 3;
    const Configuration q = s.configuration(d, 5);
    const auto t1 = s.transform(d);
    const auto t2 = s.transform(d);
    t1.validate();
    const Configuration lhs = apply_transform(t2, apply_transform(t1, q));
    const Configuration rhs = apply_transform(t2.compose(t1), q);
    worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
    EXPECT_LE((apply_transform(t1.inverse(), apply_transform(t1, q)) - q).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_LE(worst, 1e-12);
}

TEST(ApplyTransform, DimensionMismatch) {
  Sampler s(3);
  try {
    apply_transform(SimilarityTransform::identity(2), s.configuration(3, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
  }
}

TEST(CenterOfMass, Examples) {
  const MassSystem equal = MassSystem::uniform(3, 2);
  EXPECT_TRUE(center_of_mass(equal, two_particles(0.0, 2.0)).isApprox(Eigen::Vector3d(1, 0, 0)));
  Eigen::VectorXd m(2);
  m << 1.0, 3.0;
  const MassSystem unequal(3, m);
  // (1*0 + 3*4) / 4 = 3
  EXPECT_TRUE(center_of_mass(unequal, two_particles(0.0, 4.0)).isApprox(Eigen::Vector3d(3, 0, 0)));

  Sampler s(4);
  const MassSystem sys = s.masses(3, 6);
  for (int trial = 0; trial < 20; ++trial) {
    const Configuration q = s.configuration(3, 6);
    const Eigen::Vector3d u(s.normal(), s.normal(), s.normal());
    const Configuration shifted = q.colwise() + u;
    EXPECT_LE((center_of_mass(sys, shifted) - center_of_mass(sys, q) - u).cwiseAbs().maxCoeff(), 1e-14 * 10);
  }
}

TEST(InertiaScalar, ExamplesAndPairForm) {
  const MassSystem equal = MassSystem::uniform(3, 2);
  const Configuration q = two_particles(-1.0, 1.0);
  EXPECT_DOUBLE_EQ(inertia_scalar(equal, q), 2.0);
  EXPECT_DOUBLE_EQ(inertia_scalar_pairwise(equal, q), 2.0);
  EXPECT_EQ(inertia_scalar(MassSystem::uniform(3, 1), Configuration::Ones(3, 1)), 0.0);
  EXPECT_TRUE(is_totally_coincident(MassSystem::uniform(3, 1), Configuration::Ones(3, 1)));

  Sampler s(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 1 + trial % 3;
    const MassSystem sys = s.masses(d, 5);
    const Configuration x = s.configuration(d, 5);
    EXPECT_LE(shapedyn::testing::relative_error(inertia_scalar(sys, x), inertia_scalar_pairwise(sys, x)), 1e-12);
    const double lambda = s.uniform(0.1, 10.0);
    EXPECT_LE(shapedyn::testing::relative_error(inertia_scalar(sys, Configuration(lambda * x)),
                                                lambda * lambda * inertia_scalar(sys, x)),
              1e-12);
  }
}

TEST(InertiaTensor, ExampleTraceAndScaling) {
  const MassSystem equal = MassSystem::uniform(3, 2);
  const Eigen::MatrixXd m = inertia_tensor(equal, two_particles(-1.0, 1.0));
  EXPECT_TRUE(m.isApprox(Eigen::Vector3d(0, 2, 2).asDiagonal().toDenseMatrix()));
  EXPECT_EQ(inertia_tensor(MassSystem::uniform(1, 3), Configuration::Random(1, 3)).size(), 1);
  EXPECT_NEAR(inertia_tensor(MassSystem::uniform(1, 3), Configuration::Random(1, 3))(0, 0), 0.0, 1e-15);

  Sampler s(6);
  for (int trial = 0; trial < 100; ++trial) {
    const MassSystem sys = s.masses(3, 4);
    const Configuration q = s.configuration(3, 4);
    const Eigen::MatrixXd t = inertia_tensor(sys, q);
    EXPECT_LE(shapedyn::testing::relative_error(0.5 * t.trace(), inertia_scalar(sys, q)), 1e-12);
    EXPECT_LE((t - t.transpose()).cwiseAbs().maxCoeff(), 1e-14);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(t);
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-12);
    const double lambda = s.uniform(0.2, 5.0);
    const double scaled = inertia_tensor(sys, Configuration(lambda * q)).determinant();
    EXPECT_LE(shapedyn::testing::relative_error(scaled, std::pow(lambda, 6) * t.determinant()), 1e-10);
  }
}

TEST(InertiaTensor, PlanarTraceIsInertiaScalar) {
  // The d x d tensor of a planar system has trace (d-1) L^2 = L^2.
  Sampler s(7);
  const MassSystem sys = s.masses(2, 5);
  const Configuration q = s.configuration(2, 5);
  EXPECT_LE(shapedyn::testing::relative_error(inertia_tensor(sys, q).trace(), inertia_scalar(sys, q)), 1e-12);
}

TEST(EuclideanInner, Examples) {
  const MassSystem equal = MassSystem::uniform(3, 2);
  const Configuration u = two_particles(1.0, 0.0);
  EXPECT_DOUBLE_EQ(euclidean_inner(equal, u, u), 1.0);

  Sampler s(8);
  const MassSystem sys = s.masses(3, 4);
  for (int trial = 0; trial < 50; ++trial) {
    const Displacement a = s.configuration(3, 4);
    const Displacement b = s.configuration(3, 4);
    auto t = s.transform(3);
    t.scale = 1.0;
    EXPECT_NEAR(euclidean_inner(sys, apply_linear(t, a), apply_linear(t, b)), euclidean_inner(sys, a, b), 1e-12);
  }
  EXPECT_THROW(euclidean_inner(sys, Displacement::Zero(3, 4), Displacement::Zero(3, 3)), Error);
}

TEST(VerticalBasis, GeneratorCounts) {
  Sampler s(9);
  const MassSystem s3 = s.masses(3, 4);
  EXPECT_EQ(vertical_basis(s3, s.configuration(3, 4)).size(), 7u);
  EXPECT_EQ(vertical_span(s3, s.configuration(3, 4)).rank, 7);
  const MassSystem s1 = s.masses(1, 4);
  EXPECT_EQ(vertical_basis(s1, s.configuration(1, 4)).size(), 2u);
  const MassSystem s2 = s.masses(2, 4);
  EXPECT_EQ(vertical_basis(s2, s.configuration(2, 4)).size(), 4u);
  EXPECT_EQ(vertical_span(s2, s.configuration(2, 4)).rank, 4);
}

TEST(VerticalBasis, CollinearLosesOneRotation) {
  Sampler s(10);
  const MassSystem sys = s.masses(3, 4);
  Configuration q = Configuration::Zero(3, 4);
  const Eigen::Vector3d dir = Eigen::Vector3d(1.0, 2.0, -0.5).normalized();
  for (int a = 0; a < 4; ++a) q.col(a) = Eigen::Vector3d(0.3, -0.1, 0.2) + s.normal() * dir;
  const auto span = vertical_span(sys, q);
  EXPECT_EQ(span.rank, 6);
  EXPECT_TRUE(span.degenerate);
  EXPECT_THROW(horizontal_project(sys, q, Displacement::Ones(3, 4)), Error);
}

TEST(HorizontalProject, KillsVerticalAndIsIdempotent) {
  Sampler s(11);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 1 + trial % 3;
    const MassSystem sys = s.masses(d, 5);
    const Configuration q = s.configuration(d, 5);
    const auto basis = vertical_basis(sys, q);

    Displacement translation = Displacement::Zero(d, 5);
    translation.row(0).setConstant(s.normal());
    EXPECT_LE(euclidean_norm(sys, horizontal_project(sys, q, translation)), 1e-12);
    const Displacement dilation = relative_coordinates(sys, q);
    EXPECT_LE(euclidean_norm(sys, horizontal_project(sys, q, dilation)), 1e-12);

    const Displacement dq = s.configuration(d, 5);
    const Displacement once = horizontal_project(sys, q, dq);
    const Displacement twice = horizontal_project(sys, q, once);
    EXPECT_LE((once - twice).cwiseAbs().maxCoeff(), 1e-12);
    for (const auto& v : basis) {
      EXPECT_LE(std::abs(euclidean_inner(sys, once, v)) / (euclidean_norm(sys, once) * euclidean_norm(sys, v)), 1e-10);
    }
  }
}

TEST(BestMatch, RecoversExactOrbits) {
  Sampler s(12);
  for (int trial = 0; trial < 60; ++trial) {
    const int d = 1 + trial % 3;
    const MassSystem sys = s.masses(d, 5);
    const Configuration q2 = s.configuration(d, 5);
    const auto t = s.transform(d);
    const Configuration q1 = apply_transform(t, q2);
    const auto fit = best_match_align(sys, q1, q2);
    EXPECT_LE(fit.residual, 1e-10);
    fit.transform.validate();
    EXPECT_NEAR(fit.transform.scale, t.scale, 1e-10);
  }
  const MassSystem sys = s.masses(3, 4);
  const Configuration q = s.configuration(3, 4);
  const auto self = best_match_align(sys, q, q);
  EXPECT_LE(self.residual, 1e-12);
  EXPECT_LE((self.transform.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(self.transform.scale, 1.0, 1e-12);
  EXPECT_LE(self.transform.translation.norm(), 1e-12);
}

TEST(BestMatch, VerdictIsSymmetricAndPositiveOffOrbit) {
  Sampler s(13);
  constexpr double tol = 1e-8;
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 1 + trial % 3;
    const MassSystem sys = s.masses(d, 4);
    const Configuration q1 = s.configuration(d, 4);
    const Configuration q2 = (trial % 2 == 0) ? apply_transform(s.transform(d), q1) : s.configuration(d, 4);
    const bool forward = best_match_align(sys, q1, q2).residual <= tol;
    const bool backward = best_match_align(sys, q2, q1).residual <= tol;
    EXPECT_EQ(forward, backward);
    EXPECT_EQ(forward, trial % 2 == 0);
  }
  // Mirror images on a line are different shapes in d = 1.
  const MassSystem line = MassSystem::uniform(1, 3);
  Configuration a(1, 3), b(1, 3);
  a << 0.0, 1.0, 3.0;
  b << 0.0, -1.0, -3.0;
  EXPECT_GT(best_match_align(line, a, b).residual, 0.1);
  // A right triangle is not similar to an equilateral one.
  const MassSystem plane = MassSystem::uniform(2, 3);
  Configuration right(2, 3), equilateral(2, 3);
  right << 0, 1, 0, 0, 0, 1;
  equilateral << 0, 1, 0.5, 0, 0, std::sqrt(3.0) / 2;
  EXPECT_GT(best_match_align(plane, right, equilateral).residual, 1e-3);
}

TEST(BestMatch, RejectsCoincidentSource) {
  const MassSystem sys = MassSystem::uniform(3, 3);
  try {
    best_match_align(sys, Configuration::Random(3, 3), Configuration::Ones(3, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateShape);
  }
}

TEST(Geometry, LongDoubleInstantiation) {
  using Ld = long double;
  MassSystemT<Ld> sys(3, Vector<Ld>::Ones(3));
  ConfigurationT<Ld> q(3, 3);
  q << 0, 1, 0, 0, 0, 1, 0, 0, 0;
  EXPECT_NEAR(static_cast<double>(inertia_scalar(sys, q)), 4.0 / 3.0, 1e-15);
  EXPECT_NEAR(static_cast<double>(best_match_align(sys, q, q).residual), 0.0, 1e-15);
}
