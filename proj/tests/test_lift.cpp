#include <gtest/gtest.h>

#include <numbers>

#include "shapedyn/lift.hpp"
#include "shapedyn/quantum.hpp"
#include "test_support.hpp"

using namespace shapedyn;
using shapedyn::testing::kPaperKinds;
using shapedyn::testing::relative_error;
using shapedyn::testing::Sampler;
using C = std::complex<double>;

namespace {

const ConformalFactorSpec kFb = ConformalFactorSpec::of(ConformalKind::B);
const C kI(0.0, 1.0);
constexpr Gauge kGauges[] = {Gauge::Gauge1, Gauge::Gauge3, Gauge::Schroedinger};

MassSystem three_masses(int d) {
  Eigen::VectorXd m(3);
  m << 1.0, 1.5, 0.7;
  return MassSystem(d, m);
}

// Smooth nodeless shape function on either chart.
C smooth_shape(const Eigen::VectorXd& x) {
  const double a = x(0), b = x.size() > 1 ? x(1) : 0.0;
  return (1.5 + 0.5 * std::cos(a) + 0.3 * std::sin(2 * b)) * std::exp(kI * (std::sin(a) + 0.7 * b - 0.4 * a * b));
}

// Random absolute configurations over the given chart points.
std::vector<Configuration> fiber_samples(const ShapeChart& chart, const std::vector<Eigen::VectorXd>& points, Sampler& s) {
  std::vector<Configuration> out;
  const int d = chart.bundle().system.dimension();
  for (const auto& x : points) {
    SimilarityTransform t = s.transform(d, 0.5, 2.0);
    if (d == 1) t.rotation = Eigen::MatrixXd::Identity(1, 1);
    out.push_back(apply_transform(t, chart.embed(x)));
  }
  return out;
}

std::vector<Eigen::VectorXd> circle_points(int count) {
  std::vector<Eigen::VectorXd> out;
  for (int k = 0; k < count; ++k) out.push_back(Eigen::VectorXd::Constant(1, 0.3 + 6.0 * k / count));
  return out;
}

std::vector<Eigen::VectorXd> disc_points(int count, double radius) {
  std::vector<Eigen::VectorXd> out;
  for (int k = 0; k < count; ++k) out.push_back(Eigen::Vector2d(radius * std::sin(1.3 * k), radius * std::cos(0.7 * k + 0.2)));
  return out;
}

C sphere_height(const Eigen::VectorXd& u) {
  const double r2 = u.squaredNorm();
  return C((1 - r2) / (1 + r2), 0.0);
}

double max_abs(const Displacement& v) { return v.cwiseAbs().maxCoeff(); }

}  // namespace

TEST(Lift, Gauge1IsConstantOnFibers) {
  Sampler s(401);
  for (int d : {1, 3}) {
    const MassSystem sys = three_masses(d);
    const ChartPtr c = d == 1 ? circle_chart(sys, kFb, 64) : triangle_chart(sys, kFb, 16);
    const LiftedWaveFunction psi = lift_function(c, smooth_shape, Gauge::Gauge1);
    const Configuration q = c->embed(d == 1 ? Eigen::VectorXd::Constant(1, 1.1) : Eigen::VectorXd(Eigen::Vector2d(0.1, -0.2)));
    const C ref = psi(q);
    for (int trial = 0; trial < 100; ++trial) {
      SimilarityTransform t = s.transform(d);
      if (d == 1) t.rotation = Eigen::MatrixXd::Identity(1, 1);
      EXPECT_LE(std::abs(psi(apply_transform(t, q)) - ref) / std::abs(ref), 1e-10);
    }
  }
}

TEST(Lift, GaugeFactorsArePositiveAndKeepThePhase) {
  Sampler s(402);
  const MassSystem sys = three_masses(3);
  const auto c = triangle_chart(sys, kFb, 16);
  const LiftedWaveFunction g1 = lift_function(c, smooth_shape, Gauge::Gauge1);
  const LiftedWaveFunction g3 = lift_function(c, smooth_shape, Gauge::Gauge3);
  const LiftedWaveFunction sg = lift_function(c, smooth_shape, Gauge::Schroedinger);
  for (const Configuration& q : fiber_samples(*c, disc_points(50, 0.45), s)) {
    const C a = g1(q), b = g3(q), phi = sg(q);
    const C ratio = b / a;
    EXPECT_GT(ratio.real(), 0.0);
    EXPECT_LE(std::abs(ratio.imag()), 1e-12 * ratio.real());
    EXPECT_LE(std::abs(std::arg(b) - std::arg(a)), 1e-10);
    EXPECT_LE(std::abs(std::arg(phi) - std::arg(a)), 1e-10);
    // Phi = f^(-1/2) Psi3.
    EXPECT_LE(relative_error(std::abs(phi), std::abs(b) / std::sqrt(conformal_factor(sys, kFb, q))), 1e-12);
  }
}

TEST(Lift, OutOfChartQueryIsReported) {
  const MassSystem sys = three_masses(2);
  const auto c = triangle_chart(sys, kFb, 16, 0.3);
  const LiftedWaveFunction psi = lift_function(c, smooth_shape, Gauge::Gauge1);
  try {
    psi(c->bundle().embed(Eigen::Vector2d(0.6, 0.0)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::OutOfChart);
  }
}

TEST(GaugeTransform, ConstantFactorLeavesVelocitiesUnchanged) {
  Sampler s(403);
  const MassSystem sys = three_masses(3);
  const auto c = triangle_chart(sys, kFb, 16);
  const LiftedWaveFunction psi = lift_function(c, smooth_shape, Gauge::Gauge1);
  const LiftedWaveFunction twice = gauge_transform(psi, [](const Configuration&) { return 2.0; });
  for (const Configuration& q : fiber_samples(*c, disc_points(20, 0.4), s)) {
    const Displacement v = lifted_velocity(psi, q);
    EXPECT_LE(max_abs(lifted_velocity(twice, q) - v), 1e-13 * max_abs(v));
  }
}

TEST(GaugeTransform, SmoothPositiveFactorAndRayInvariance) {
  Sampler s(404);
  for (int d : {1, 2, 3}) {
    const MassSystem sys = three_masses(d);
    const ChartPtr c = d == 1 ? circle_chart(sys, kFb, 64) : triangle_chart(sys, kFb, 16);
    const LiftedWaveFunction psi = lift_function(c, smooth_shape, Gauge::Gauge3);
    const LiftedWaveFunction f = gauge_transform(psi, [&sys](const Configuration& q) {
      return std::exp(0.3 * std::sin(q(0, 0)) + 0.2 * q.squaredNorm()) + std::cos(q(0, 1)) * std::cos(q(0, 1));
    });
    const LiftedWaveFunction c_psi = scaled(psi, C(-0.3, 2.1));
    const auto points = d == 1 ? circle_points(20) : disc_points(20, 0.4);
    for (const Configuration& q : fiber_samples(*c, points, s)) {
      const Displacement v = lifted_velocity(psi, q);
      EXPECT_LE(max_abs(lifted_velocity(f, q) - v), 1e-10) << d;
      EXPECT_LE(max_abs(lifted_velocity(c_psi, q) - v), 1e-10) << d;
    }
  }
}

TEST(GaugeTransform, RejectsNonpositiveFactors) {
  const MassSystem sys = three_masses(1);
  const auto c = circle_chart(sys, kFb, 32);
  const LiftedWaveFunction psi = gauge_transform(lift_function(c, smooth_shape, Gauge::Gauge1),
                                                 [](const Configuration& q) { return q(0, 0); });
  EXPECT_THROW(psi(c->embed(Eigen::VectorXd::Constant(1, 0.5))), Error);
  EXPECT_THROW(scaled(psi, C(0.0, 0.0)), Error);
}

TEST(LiftedVelocity, RealWaveFunctionIsAtRest) {
  Sampler s(405);
  const MassSystem sys = three_masses(3);
  const auto c = triangle_chart(sys, kFb, 16);
  const LiftedWaveFunction psi = lift_function(c, sphere_height, Gauge::Gauge3);
  for (const Configuration& q : fiber_samples(*c, disc_points(10, 0.4), s)) EXPECT_EQ(max_abs(lifted_velocity(psi, q)), 0.0);
}

TEST(LiftedVelocity, Gauge1VelocityIsHorizontal) {
  Sampler s(406);
  for (int d : {1, 2, 3}) {
    const MassSystem sys = three_masses(d);
    const ChartPtr c = d == 1 ? circle_chart(sys, kFb, 64) : triangle_chart(sys, kFb, 16);
    const LiftedWaveFunction psi = lift_function(c, smooth_shape, Gauge::Gauge1);
    const auto points = d == 1 ? circle_points(20) : disc_points(20, 0.4);
    for (const Configuration& q : fiber_samples(*c, points, s)) {
      const Displacement v = lifted_velocity(psi, q);
      const double vn = euclidean_norm(sys, v);
      for (const Displacement& xi : vertical_basis(sys, q))
        EXPECT_LE(std::abs(euclidean_inner(sys, v, xi)) / (vn * euclidean_norm(sys, xi)), 1e-8) << d;
    }
  }
}

TEST(LiftedVelocity, ProjectsOntoTheShapeSpaceVelocity) {
  Sampler s(407);
  for (int d : {1, 2}) {
    const MassSystem sys = three_masses(d);
    const ChartPtr c = d == 1 ? circle_chart(sys, kFb, 256, 0.2) : triangle_chart(sys, kFb, 96);
    const WaveFunction psi = sample_wavefunction(c, smooth_shape);
    const LiftedWaveFunction lifted = lift_wavefunction(psi, Gauge::Gauge1);
    const auto points = d == 1 ? circle_points(10) : disc_points(10, 0.35);
    for (const Configuration& q : fiber_samples(*c, points, s)) {
      const Eigen::VectorXd x = c->locate(q);
      const Eigen::VectorXd projected = project_velocity(*c, q, lifted_velocity(lifted, q));
      EXPECT_LE((projected - bohm_velocity(psi, x)).norm(), 1e-5) << d;
    }
  }
}

TEST(LiftedVelocity, SchroedingerGaugeRunsOnNewtonTime) {
  Sampler s(408);
  const MassSystem sys = three_masses(3);
  const auto c = triangle_chart(sys, kFb, 16);
  const LiftedWaveFunction g1 = lift_function(c, smooth_shape, Gauge::Gauge1);
  const LiftedWaveFunction sg = lift_function(c, smooth_shape, Gauge::Schroedinger);
  for (const Configuration& q : fiber_samples(*c, disc_points(10, 0.4), s)) {
    const Displacement v = lifted_velocity(g1, q);
    EXPECT_LE(max_abs(lifted_velocity(sg, q) - conformal_factor(sys, kFb, q) * v), 1e-10 * max_abs(v) * conformal_factor(sys, kFb, q));
  }
}

TEST(PotentialV2, VanishesForConstantFactor) {
  Sampler s(409);
  const MassSystem sys = three_masses(3);
  const Configuration q = s.separated(3, 3);
  EXPECT_LE(std::abs(potential_V2(sys, ConformalFactorSpec::constant_value(2.5), q)), 1e-10);
  EXPECT_LE(std::abs(potential_V2_fd(sys, ConformalFactorSpec::constant_value(2.5), q)), 1e-10);
}

TEST(PotentialV2, TwoImplementationsAgree) {
  Sampler s(410);
  for (ConformalKind kind : kPaperKinds) {
    const auto spec = ConformalFactorSpec::of(kind);
    for (int trial = 0; trial < 100; ++trial) {
      const MassSystem sys = s.masses(3, 3);
      const Configuration q = s.separated(3, 3);
      EXPECT_LE(relative_error(potential_V2(sys, spec, q), potential_V2_fd(sys, spec, q)), 1e-4) << to_string(kind);
    }
  }
}

TEST(PotentialV2, IsScaleInvariant) {
  // f has degree -2 and the expansion pairs f^-1 with two derivatives, so V2
  // is homogeneous of degree 0.
  Sampler s(411);
  for (ConformalKind kind : kPaperKinds) {
    const auto spec = ConformalFactorSpec::of(kind);
    const MassSystem sys = s.masses(3, 3);
    const Configuration q = s.separated(3, 3);
    for (double lambda : {0.2, 3.0}) EXPECT_LE(relative_error(potential_V2(sys, spec, lambda * q), potential_V2(sys, spec, q)), 1e-10);
  }
  // For f_b the value is the constant (n/4)(n/2 - 1)(n - 2) - ... : here n = 9.
  const MassSystem sys = MassSystem::uniform(3, 3);
  EXPECT_NEAR(potential_V2(sys, kFb, s.separated(3, 3)), -3.375, 1e-12);
}

TEST(ScalarCurvature, VanishesForConstantFactor) {
  Sampler s(412);
  const MassSystem sys = three_masses(3);
  const Configuration q = s.separated(3, 3);
  EXPECT_LE(std::abs(scalar_curvature(sys, ConformalFactorSpec::constant_value(0.7), q)), 1e-10);
  EXPECT_LE(std::abs(scalar_curvature_fd(sys, ConformalFactorSpec::constant_value(0.7), q)), 1e-10);
}

TEST(ScalarCurvature, TwoImplementationsAgree) {
  Sampler s(413);
  for (ConformalKind kind : kPaperKinds) {
    const auto spec = ConformalFactorSpec::of(kind);
    for (int trial = 0; trial < 20; ++trial) {
      const MassSystem sys = s.masses(3, 3);
      const Configuration q = s.separated(3, 3);
      EXPECT_LE(relative_error(scalar_curvature(sys, spec, q), scalar_curvature_fd(sys, spec, q)), 1e-3) << to_string(kind);
    }
  }
}

TEST(ScalarCurvature, GenericRoutineOnTheRoundSphere) {
  // Stereographic metric 4/(1+|x|^2)^2 on the unit 2-sphere: R = 2.
  const MetricField g = [](const Eigen::VectorXd& x) {
    return Eigen::MatrixXd(4.0 / std::pow(1 + x.squaredNorm(), 2) * Eigen::MatrixXd::Identity(2, 2));
  };
  EXPECT_NEAR(scalar_curvature_of_metric(g, Eigen::Vector2d(0.3, -0.5), 1e-3), 2.0, 1e-5);
}

TEST(ScalarCurvature, RigidMotionInvariance) {
  Sampler s(414);
  for (ConformalKind kind : kPaperKinds) {
    const auto spec = ConformalFactorSpec::of(kind);
    const MassSystem sys = s.masses(3, 3);
    const Configuration q = s.separated(3, 3);
    SimilarityTransform t = s.transform(3);
    t.scale = 1.0;
    EXPECT_LE(relative_error(scalar_curvature(sys, spec, apply_transform(t, q)), scalar_curvature(sys, spec, q)), 1e-10);
  }
}

TEST(PotentialV1, FiniteAndConvergentUnderRefinement) {
  Sampler s(415);
  for (ConformalKind kind : kPaperKinds) {
    const auto spec = ConformalFactorSpec::of(kind);
    for (int trial = 0; trial < 100; ++trial) {
      const MassSystem sys = s.masses(3, 3);
      const Configuration q = s.separated(3, 3);
      const double coarse = potential_V1(sys, spec, q, 1.0, 2e-3);
      const double fine = potential_V1(sys, spec, q, 1.0, 1e-3);
      ASSERT_TRUE(std::isfinite(fine));
      EXPECT_LE(relative_error(coarse, fine), 1e-3) << to_string(kind);
    }
  }
}

TEST(PotentialV1, OrderTwoConvergence) {
  const MassSystem sys = three_masses(3);
  Configuration q(3, 3);
  q << 0.0, 1.1, 0.3, 0.1, -0.2, 0.9, 0.0, 0.3, -0.4;
  const auto spec = ConformalFactorSpec::of(ConformalKind::G);
  const double v4 = potential_V1(sys, spec, q, 1.0, 4e-2), v2 = potential_V1(sys, spec, q, 1.0, 2e-2),
               v1 = potential_V1(sys, spec, q, 1.0, 1e-2);
  const double ratio = (v4 - v2) / (v2 - v1);
  EXPECT_GT(ratio, 3.5);
  EXPECT_LT(ratio, 4.5);
}

TEST(PotentialV1, SimilarityInvariance) {
  Sampler s(416);
  for (ConformalKind kind : kPaperKinds) {
    const auto spec = ConformalFactorSpec::of(kind);
    const MassSystem sys = s.masses(3, 3);
    const Configuration q = s.separated(3, 3);
    const double ref = potential_V1(sys, spec, q);
    for (int trial = 0; trial < 5; ++trial) {
      SimilarityTransform t = s.transform(3);
      t.scale = 1.0;
      EXPECT_LE(relative_error(potential_V1(sys, spec, apply_transform(t, q)), ref), 1e-8) << to_string(kind);
    }
    // Like V2 it has degree 0 under dilations (step scales with L).
    EXPECT_LE(relative_error(potential_V1(sys, spec, 2.5 * q), ref), 1e-8) << to_string(kind);
  }
}

TEST(PotentialU, StructureOfTheFormula) {
  Sampler s(417);
  const MassSystem sys = three_masses(3);
  const Configuration q = s.separated(3, 3);
  // Constant f: R_g = 0, so U = f V1 - f E.
  const auto flat = ConformalFactorSpec::constant_value(1.7);
  EXPECT_NEAR(schrodinger_gauge_potential_U(sys, flat, q, 0.0), 1.7 * potential_V1(sys, flat, q), 1e-12);
  for (ConformalKind kind : kPaperKinds) {
    const auto spec = ConformalFactorSpec::of(kind);
    const double f = conformal_factor(sys, spec, q);
    const double u1 = schrodinger_gauge_potential_U(sys, spec, q, 0.3), u2 = schrodinger_gauge_potential_U(sys, spec, q, -1.2);
    EXPECT_NEAR(u1 - u2, -f * 1.5, 1e-12 * std::max(1.0, std::abs(u1)));
  }
}

TEST(PotentialU, EquilateralTriangleRegression) {
  // Regression values from the converged V1 and the analytic R_g; the two
  // terms cancel on the equilateral triangle for every conformal factor.
  const MassSystem sys = MassSystem::uniform(3, 3);
  Configuration q(3, 3);
  q << 0.0, 1.0, 0.5, 0.0, 0.0, std::sqrt(3.0) / 2, 0.0, 0.0, 0.0;
  EXPECT_NEAR(potential_V1(sys, kFb, q, 1.0, 5e-4), 0.875, 1e-6);
  EXPECT_NEAR(scalar_curvature(sys, kFb, q), 8.0, 1e-12);
  for (ConformalKind kind : kPaperKinds) {
    EXPECT_LE(std::abs(schrodinger_gauge_potential_U(sys, ConformalFactorSpec::of(kind), q, 0.0, 1.0, 5e-4)), 1e-5)
        << to_string(kind);
  }
}

TEST(PotentialU, IndependentOfTheConformalFactorInThreeDimensions) {
  // With n = 9 the Schroedinger-gauge factor f^(7/4) J^(-1/2) no longer
  // contains f, so U at E = 0 cannot depend on it.
  Sampler s(420);
  for (int trial = 0; trial < 10; ++trial) {
    const MassSystem sys = s.masses(3, 3);
    const Configuration q = s.separated(3, 3);
    const double ref = schrodinger_gauge_potential_U(sys, kFb, q, 0.0, 1.0, 5e-4);
    for (ConformalKind kind : kPaperKinds) {
      const double u = schrodinger_gauge_potential_U(sys, ConformalFactorSpec::of(kind), q, 0.0, 1.0, 5e-4);
      EXPECT_LE(std::abs(u - ref), 1e-5 * std::max(1.0, std::abs(ref))) << to_string(kind);
    }
  }
}

TEST(StationaryResidual, CircleEigenpairInEveryGauge) {
  Sampler s(418);
  const MassSystem sys = three_masses(1);
  const auto c = circle_chart(sys, kFb, 256);
  const Eigenpair e = stationary_solve(c, {}, StationaryTarget::near(1.8));
  ASSERT_NEAR(e.energy, 2.0, 1e-6);
  const auto samples = fiber_samples(*c, circle_points(20), s);
  for (Gauge g : kGauges) {
    const LiftedWaveFunction psi = lift_wavefunction(e.psi, g, Interpolation::Fourier);
    const double coarse = stationary_residual(psi, e.energy, samples, 2e-2);
    const double fine = stationary_residual(psi, e.energy, samples, 1e-2);
    EXPECT_LE(fine, 1e-3) << to_string(g);
    EXPECT_GT(coarse / fine, 3.5) << to_string(g);
    EXPECT_LT(coarse / fine, 4.5) << to_string(g);
  }
}

TEST(StationaryResidual, SphereHarmonicOnTriangles) {
  // The height function of the shape sphere has E = 4 (hbar = 1).
  Sampler s(419);
  const MassSystem sys = three_masses(3);
  const auto c = triangle_chart(sys, kFb, 8, 0.6);
  const auto samples = fiber_samples(*c, disc_points(20, 0.45), s);
  for (Gauge g : kGauges) {
    const LiftedWaveFunction psi = lift_function(c, sphere_height, g);
    const double coarse = stationary_residual(psi, 4.0, samples, 2e-2);
    const double fine = stationary_residual(psi, 4.0, samples, 1e-2);
    EXPECT_LE(fine, 1e-3) << to_string(g);
    EXPECT_GT(coarse / fine, 3.5) << to_string(g);
    EXPECT_LT(coarse / fine, 4.5) << to_string(g);
    // A wrong energy leaves an O(1) residual.
    EXPECT_GT(stationary_residual(psi, 3.0, samples, 1e-2), 0.1) << to_string(g);
  }
}
