#include <gtest/gtest.h>

#include <numbers>

#include "shapedyn/equilibrium.hpp"
#include "test_support.hpp"

using namespace shapedyn;
using C = std::complex<double>;

namespace {

const ConformalFactorSpec kFb = ConformalFactorSpec::of(ConformalKind::B);
constexpr double kPi = std::numbers::pi;
const C kI(0.0, 1.0);

ChartPtr line_shapes(int points) { return circle_chart(MassSystem::uniform(1, 3), kFb, points); }

// 0.45 + e^{i theta} + 0.45 e^{2 i theta}: three circle eigenmodes, no nodes
// at any time because 0.45 + 0.45 < 1.
WaveFunction three_modes(const ChartPtr& c) {
  return sample_wavefunction(c, [](const Eigen::VectorXd& x) {
           return 0.45 + std::exp(kI * x(0)) + 0.45 * std::exp(2.0 * kI * x(0));
         }).normalized();
}

Eigen::VectorXd linspace(int n, double lo, double hi) { return Eigen::VectorXd::LinSpaced(n, lo, hi); }

double wrapped_distance(double a, double b) { return std::abs(std::remainder(a - b, 2.0 * kPi)); }

}  // namespace

TEST(SampleDensity, UniformCountsWithinMultinomialNoise) {
  const auto c = flat_circle_chart(256);
  const WaveFunction psi(c, Eigen::VectorXcd::Ones(c->size()));
  const int m = 100000;
  const Ensemble e = sample_density(psi, m, 11);
  const Eigen::VectorXd hist = ensemble_histogram(e) * m;
  const double expected = double(m) / c->size();
  int inside = 0;
  for (int b = 0; b < hist.size(); ++b) inside += std::abs(hist(b) - expected) <= 4.0 * std::sqrt(expected);
  EXPECT_GE(inside, static_cast<int>(0.95 * c->size()));
  for (const auto& x : e.points) EXPECT_TRUE(c->contains(x));
}

TEST(SampleDensity, SingleCellDensity) {
  const auto c = triangle_chart(MassSystem::uniform(2, 3), kFb, 16, 0.5);
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(c->size());
  v(c->index(5, 9)) = C(0.0, 2.0);
  const Ensemble e = sample_density(WaveFunction(c, v), 2000, 3);
  for (const auto& x : e.points) EXPECT_EQ(cell_of(*c, x), c->index(5, 9));
}

TEST(SampleDensity, SeedDeterminism) {
  const auto c = line_shapes(128);
  const WaveFunction psi = three_modes(c);
  const Ensemble a = sample_density(psi, 500, 42), b = sample_density(psi, 500, 42), d = sample_density(psi, 500, 43);
  EXPECT_EQ(a.seed, 42u);
  int differ = 0;
  for (int k = 0; k < 500; ++k) {
    EXPECT_EQ(a.points[k](0), b.points[k](0));
    differ += a.points[k](0) != d.points[k](0);
  }
  EXPECT_GT(differ, 490);
  // Draws are independent of how many are requested.
  const Ensemble prefix = sample_density(psi, 100, 42);
  for (int k = 0; k < 100; ++k) EXPECT_EQ(prefix.points[k](0), a.points[k](0));
}

TEST(SampleDensity, ZeroNormRejected) {
  const auto c = line_shapes(64);
  EXPECT_THROW(sample_density(WaveFunction(c, Eigen::VectorXcd::Zero(64)), 10, 1), Error);
}

TEST(EvolveEnsemble, RealGroundStateLeavesPointsInPlace) {
  const auto c = triangle_chart(MassSystem::uniform(2, 3), kFb, 32, 0.6);
  const Eigenpair ground = stationary_solve(c, {}, StationaryTarget::ground());
  const Ensemble e = sample_density(ground.psi, 2000, 5);
  const EnsembleEvolution out = evolve_ensemble(static_series(ground.psi), e, 0.05, 1.0);
  ASSERT_EQ(out.ensemble.size(), e.size());
  double moved = 0.0;
  for (int k = 0; k < e.size(); ++k) moved = std::max(moved, (out.ensemble.points[k] - e.points[k]).norm());
  EXPECT_LE(moved, 1e-12);
}

TEST(EvolveEnsemble, Equivariance) {
  const auto c = line_shapes(256);
  const WaveFunction psi0 = three_modes(c);
  const double frame_dt = 5e-3, T = 1.0;
  const WaveSeries series = evolve_series(psi0, T, frame_dt);
  const WaveFunction& psi_t = series.frames.back();
  const int bins = 64;
  // |psi_T|^2 differs from |psi_0|^2, so a frozen ensemble would fail.
  ASSERT_GT(total_variation(binned_probabilities(psi0, bins), binned_probabilities(psi_t, bins)), 0.1);

  double tv_small = 0.0;
  for (int m : {10000, 100000}) {
    const Ensemble e = sample_density(psi0, m, 2024);
    const EnsembleEvolution out = evolve_ensemble(series, e, 2.0 * frame_dt, T);
    EXPECT_EQ(out.node_losses + out.chart_exits, 0);
    const double tv = total_variation(ensemble_histogram(out.ensemble, bins), binned_probabilities(psi_t, bins));
    const NoiseLevel noise = multinomial_tv_noise(binned_probabilities(psi_t, bins), m, 7);
    // Transport error must be invisible under the sampling noise.
    EXPECT_LE(tv, noise.mean + 4.0 * noise.sd) << m;
    if (m == 10000) tv_small = tv;
    else {
      EXPECT_LE(tv, 0.02);
      EXPECT_GT(tv_small / tv, 2.0);
      EXPECT_LT(tv_small / tv, 5.0);
    }
  }
}

TEST(EvolveEnsemble, NodeLossesAreCountedAndBounded) {
  // cos(theta) vanishes on the node at theta = pi/2; points next to it lose
  // their velocity field.
  const auto c = line_shapes(256);
  const WaveFunction psi = sample_wavefunction(c, [](const Eigen::VectorXd& x) { return C(std::cos(x(0)), 0.0); });
  Ensemble e = sample_density(psi, 1999, 9);
  e.points.push_back(Eigen::VectorXd::Constant(1, kPi / 2 + 1e-3));
  const EnsembleEvolution out = evolve_ensemble(static_series(psi), e, 0.1, 1.0, 1e-3);
  EXPECT_EQ(out.node_losses, 1);
  EXPECT_EQ(out.ensemble.size(), 1999);
  EXPECT_THROW(evolve_ensemble(static_series(psi), e, 0.1, 1.0, 0.0), Error);
}

TEST(Histogram, BinsMustDivideTheGrid) {
  const auto c = line_shapes(96);
  const WaveFunction psi = three_modes(c);
  EXPECT_NEAR(binned_probabilities(psi, 32).sum(), 1.0, 1e-12);
  EXPECT_THROW(binned_probabilities(psi, 40), Error);
}

TEST(ConditionalWaveFunction, ProductStateGivesTheFactor) {
  auto psi = [](double x) { return std::exp(-x * x) * std::exp(kI * 0.7 * x); };
  auto phi = [](double y) { return C(1.0 + 0.5 * std::sin(y), 0.2 * y); };
  const SplitSystem split =
      product_split(linspace(40, -3, 3), linspace(30, -2, 2), [&](double x, double y) { return psi(x) * phi(y); });
  Eigen::VectorXcd ref(40);
  for (int i = 0; i < 40; ++i) ref(i) = psi(split.x(i));
  for (int j = 0; j < 30; ++j) {
    const ConditionalWaveFunction cond = conditional_wavefunction(split, j);
    EXPECT_NEAR(cond.norm, std::abs(phi(split.y(j))) * ref.norm(), 1e-12);
    EXPECT_LE((cond.values * cond.norm - ref * phi(split.y(j))).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ConditionalWaveFunction, SchmidtPairAndZeroSlice) {
  SplitSystem split{linspace(2, 0, 1), linspace(3, 0, 2), Eigen::MatrixXcd::Zero(2, 3)};
  split.values(0, 0) = 0.6;
  split.values(1, 1) = C(0.0, 0.8);
  const ConditionalWaveFunction at_y1 = conditional_wavefunction(split, 0);
  EXPECT_NEAR(std::norm(at_y1.values(0)), 1.0, 1e-15);
  EXPECT_EQ(at_y1.values(1), C(0.0));
  EXPECT_NEAR(std::norm(conditional_wavefunction(split, 1).values(1)), 1.0, 1e-15);
  EXPECT_THROW(conditional_wavefunction(split, 2), Error);
  EXPECT_THROW(conditional_wavefunction(split, 3), Error);
}

TEST(ConditionalWaveFunction, SliceLinearity) {
  const Eigen::VectorXd x = linspace(20, -1, 1), y = linspace(10, -1, 1);
  const SplitSystem a = product_split(x, y, [](double u, double v) { return C(1.0 + u * v, u - v); });
  const SplitSystem b = product_split(x, y, [](double u, double v) { return std::exp(kI * (u + 2 * v)); });
  const SplitSystem sum{x, y, a.values + b.values};
  for (int j = 0; j < 10; ++j) {
    const auto ca = conditional_wavefunction(a, j), cb = conditional_wavefunction(b, j),
               cs = conditional_wavefunction(sum, j);
    EXPECT_LE((cs.values * cs.norm - ca.values * ca.norm - cb.values * cb.norm).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ConditionalProbability, ProductStateWithinSamplingNoise) {
  const SplitSystem split = product_split(linspace(64, -4, 4), linspace(64, -4, 4), [](double x, double y) {
    return std::exp(-x * x / 2.0) * std::exp(-(y - 0.5) * (y - 0.5) / 3.0) * std::exp(kI * x * 1.3);
  });
  const ConditionalReport r = conditional_probability_check(split, 100000, 77);
  ASSERT_GE(r.bins.size(), 10u);
  EXPECT_LE(r.worst_sigma, 3.0);
  EXPECT_LE(r.pooled_sigma, 3.0);
  EXPECT_EQ(r.samples, 100000);
  EXPECT_EQ(r.seed, 77u);
}

TEST(ConditionalProbability, EntangledGaussianPair) {
  // |Psi|^2 is a Gaussian with standard deviations 0.5 and 2 along x - y and
  // x + y, so the conditional density of x moves with y.
  const SplitSystem split = product_split(linspace(64, -12, 12), linspace(64, -12, 12), [](double x, double y) {
    const double u = x - y, v = x + y;
    return std::exp(-u * u / (4 * 0.25) - v * v / (4 * 4.0)) * std::exp(kI * 0.3 * x * y);
  });
  const ConditionalReport r = conditional_probability_check(split, 100000, 2718);
  ASSERT_GE(r.bins.size(), 5u);
  EXPECT_LE(r.worst_tv, 0.05);
  EXPECT_LE(r.worst_sigma, 4.0);
  // Sampling noise falls like count^(-1/2).
  EXPECT_LT(r.slope, -0.2);
  EXPECT_GT(r.slope, -0.9);
  EXPECT_THROW(conditional_probability_check(split, 500, 1), Error);
}

TEST(ConditionalProbability, TvFallsWithTheSampleCount) {
  const SplitSystem split = product_split(linspace(64, -12, 12), linspace(64, -12, 12), [](double x, double y) {
    const double u = x - y, v = x + y;
    return C(std::exp(-u * u - v * v / 16.0), 0.0);
  });
  const ConditionalReport coarse = conditional_probability_check(split, 20000, 5, 200);
  const ConditionalReport fine = conditional_probability_check(split, 200000, 6, 200);
  // Mean TV over the environment values that qualify in both runs.
  double sum_coarse = 0.0, sum_fine = 0.0;
  int common = 0;
  for (const auto& a : coarse.bins)
    for (const auto& b : fine.bins)
      if (a.y_index == b.y_index) {
        sum_coarse += a.tv;
        sum_fine += b.tv;
        ++common;
      }
  ASSERT_GE(common, 5);
  EXPECT_GT(sum_coarse / sum_fine, 2.5);
  EXPECT_LT(sum_coarse / sum_fine, 4.0);
}

TEST(Subsystem, ProductStateTrajectoryMatchesTheSubsystemAlone) {
  // Psi(x, y, t) = psi(x, t) phi(y, t) without interaction: the conditional
  // wave function of x is psi(., t) whatever Y(t) is, so X(t) must follow
  // the one-body guidance of psi.
  const int n = 64;
  const double frame_dt = 0.01, T = 1.0;
  const auto circle = flat_circle_chart(n);
  const auto torus = flat_torus_chart({n, n}, {2 * kPi, 2 * kPi});
  const WaveSeries sx = evolve_series(three_modes(circle), T, frame_dt);
  const WaveSeries sy = evolve_series(
      sample_wavefunction(circle, [](const Eigen::VectorXd& y) { return 1.2 + std::exp(-kI * y(0)); }).normalized(),
      T, frame_dt);
  WaveSeries joint;
  joint.frame_dt = frame_dt;
  for (std::size_t f = 0; f < sx.frames.size(); ++f) {
    Eigen::VectorXcd v(n * n);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) v(torus->index(i, j)) = sx.frames[f].values(i) * sy.frames[f].values(j);
    joint.frames.emplace_back(torus, v);
  }
  const ChartPath alone = integrate_bohm_trajectory(sx, Eigen::VectorXd::Constant(1, 0.4), 2 * frame_dt, T);
  const ChartPath both = integrate_bohm_trajectory(joint, Eigen::Vector2d(0.4, 2.0), 2 * frame_dt, T);
  ASSERT_EQ(alone.x.size(), both.x.size());
  double dev = 0.0, travelled = 0.0;
  for (std::size_t k = 0; k < alone.x.size(); ++k) {
    dev = std::max(dev, wrapped_distance(alone.x[k](0), both.x[k](0)));
    travelled = std::max(travelled, wrapped_distance(alone.x[k](0), 0.4));
  }
  EXPECT_LE(dev, 1e-6);
  EXPECT_GT(travelled, 0.1);
  // Y moves as well, so the check is not trivially satisfied.
  EXPECT_GT(wrapped_distance(both.x.back()(1), 2.0), 0.1);
}

TEST(FiberCheck, LiftedWaveFunctionIsConstantAlongFibers) {
  const MassSystem sys(3, (Eigen::VectorXd(3) << 1.0, 1.5, 0.7).finished());
  const auto c = triangle_chart(sys, kFb, 16, 0.6);
  const ShapeFunction shape = [](const Eigen::VectorXd& u) {
    return C(1.0 + u(0) * u(0), 0.5 * u(1)) * std::exp(kI * u(0));
  };
  const LiftedWaveFunction psi = lift_function(c, shape, Gauge::Gauge1);
  const Configuration q = c->embed(Eigen::Vector2d(0.2, -0.1));
  const FiberReport r = fiber_nonnormalizability_check(psi, q, random_transforms(3, 100, 31));
  EXPECT_EQ(r.samples, 100);
  EXPECT_LE(r.max_variation, 1e-10);

  std::vector<SimilarityTransform> sweep;
  for (int k = 0; k <= 40; ++k) {
    SimilarityTransform t = SimilarityTransform::identity(3);
    t.scale = std::pow(10.0, -1.0 + k / 20.0);
    sweep.push_back(t);
  }
  EXPECT_LE(fiber_nonnormalizability_check(psi, q, sweep).max_variation, 1e-10);
}

TEST(FiberCheck, NonInvariantControlFails) {
  const Configuration q = (Eigen::MatrixXd(3, 3) << 0.0, 1.0, 0.5, 0.0, 0.0, 0.8, 0.1, -0.2, 0.0).finished();
  const AbsoluteFunction gaussian = [](const Configuration& y) { return C(std::exp(-y.squaredNorm()), 0.0); };
  EXPECT_GE(fiber_nonnormalizability_check(gaussian, q, random_transforms(3, 100, 32)).max_variation, 0.1);
}

TEST(FiberCheck, RequiresGauge1) {
  const MassSystem sys = MassSystem::uniform(3, 3);
  const auto c = triangle_chart(sys, kFb, 8, 0.5);
  const LiftedWaveFunction psi = lift_function(c, [](const Eigen::VectorXd&) { return C(1.0); }, Gauge::Gauge3);
  EXPECT_THROW(fiber_nonnormalizability_check(psi, c->embed(Eigen::Vector2d::Zero()), random_transforms(3, 2, 1)),
               Error);
}

TEST(RandomTransforms, ReproducibleAndInRange) {
  const auto a = random_transforms(3, 50, 8), b = random_transforms(3, 50, 8);
  for (int k = 0; k < 50; ++k) {
    EXPECT_EQ(a[k].rotation, b[k].rotation);
    EXPECT_EQ(a[k].scale, b[k].scale);
    EXPECT_GE(a[k].scale, 0.1);
    EXPECT_LE(a[k].scale, 10.0);
    EXPECT_NEAR(a[k].rotation.determinant(), 1.0, 1e-12);
  }
}
