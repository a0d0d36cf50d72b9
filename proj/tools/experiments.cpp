#include "experiments.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "shapedyn/classical.hpp"
#include "shapedyn/equilibrium.hpp"
#include "shapedyn/lift.hpp"
#include "shapedyn/quantum.hpp"
#include "shapedyn/rng.hpp"

namespace shapedyn::cli {

namespace {

using C = std::complex<double>;
const C kI(0.0, 1.0);
constexpr ConformalKind kAllKinds[] = {ConformalKind::A, ConformalKind::B, ConformalKind::C, ConformalKind::D,
                                       ConformalKind::G};
constexpr Gauge kGauges[] = {Gauge::Gauge1, Gauge::Gauge3, Gauge::Schroedinger};

// Random draws for one purpose; each purpose owns a stream of the seed.
enum Stream : std::uint64_t { kMasses = 1, kConfigurations = 2, kVelocities = 3, kTransforms = 4, kFactors = 5 };

struct Draws {
  Draws(std::uint64_t seed, Stream stream) : rng(seed, stream) {}

  double normal() { return gauss(rng); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

  Configuration matrix(int d, int n) {
    Configuration q(d, n);
    for (int a = 0; a < n; ++a)
      for (int i = 0; i < d; ++i) q(i, a) = normal();
    return q;
  }

  Configuration separated(int d, int n, double min_distance = 0.5) {
    for (;;) {
      Configuration q = matrix(d, n);
      bool ok = true;
      for (int a = 0; a < n && ok; ++a)
        for (int b = a + 1; b < n && ok; ++b) ok = (q.col(a) - q.col(b)).norm() >= min_distance;
      if (ok) return q;
    }
  }

  SimilarityTransform transform(int d, double min_scale, double max_scale) {
    SimilarityTransform t;
    t.rotation = random_rotation<double>(d, [this] { return normal(); });
    t.translation = Eigen::VectorXd(d);
    for (int i = 0; i < d; ++i) t.translation(i) = 2.0 * normal();
    t.scale = std::exp(uniform(std::log(min_scale), std::log(max_scale)));
    return t;
  }

  CounterRng rng;
  std::normal_distribution<double> gauss;
};

double relative_error(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

Check at_most(std::string name, double value, double upper) {
  Check c;
  c.name = std::move(name);
  c.value = value;
  c.upper = upper;
  return c;
}

Check at_least(std::string name, double value, double lower) {
  Check c;
  c.name = std::move(name);
  c.value = value;
  c.lower = lower;
  return c;
}

MassSystem make_system(const ExperimentConfig& c) {
  if (c.masses) return MassSystem(c.dimension, *c.masses);
  Draws r(c.seed, kMasses);
  Eigen::VectorXd m(c.particles);
  for (int a = 0; a < c.particles; ++a) m(a) = r.uniform(c.mass_range.first, c.mass_range.second);
  return MassSystem(c.dimension, m);
}

// Column names q_<a>_<i> or v_<a>_<i>.
void append_coordinate_columns(std::vector<std::string>& columns, const char* prefix, int d, int n) {
  for (int a = 0; a < n; ++a)
    for (int i = 0; i < d; ++i) columns.push_back(std::string(prefix) + "_" + std::to_string(a) + "_" + std::to_string(i));
}

void append_coordinates(std::vector<Cell>& row, const Eigen::MatrixXd& q) {
  for (int a = 0; a < q.cols(); ++a)
    for (int i = 0; i < q.rows(); ++i) row.emplace_back(q(i, a));
}

// Normalized centered configuration and a horizontal velocity. Presets are
// scaled to L = 1 with a unit velocity; explicit data are used as given
// (the velocity is still projected onto the horizontal space).
std::pair<Configuration, Displacement> initial_data(const ExperimentConfig& c, const MassSystem& sys) {
  const int d = c.dimension, n = c.particles;
  Draws rq(c.seed, kConfigurations), rv(c.seed, kVelocities);
  const bool explicit_q = c.initial.preset == "explicit";
  Configuration q;
  if (explicit_q) {
    q = *c.initial.q;
  } else if (c.initial.preset == "equilateral-triangle") {
    q = Configuration::Zero(d, 3);
    q(0, 1) = 1.0;
    q(0, 2) = 0.5;
    q(1, 2) = std::sqrt(3.0) / 2.0;
  } else {
    q = rq.separated(d, n);
  }
  if (!explicit_q) {
    q = relative_coordinates(sys, q);
    q /= std::sqrt(inertia_scalar(sys, q));
  }
  Displacement v = c.initial.v ? *c.initial.v : rv.matrix(d, n);
  v = horizontal_project(sys, q, v);
  const double norm = euclidean_norm(sys, v);
  if (!(norm > 0.0)) throw Error(ErrorKind::InvalidArgument, "initial.v has no horizontal component");
  if (!c.initial.v) v /= norm;
  return {q, v};
}

RunResult classical_geodesic(const ExperimentConfig& c) {
  RunResult r;
  const MassSystem sys = make_system(c);
  const auto [q0, v0] = initial_data(c, sys);
  const auto traj = integrate_horizontal_geodesic(sys, c.conformal, q0, v0, c.num("T"), c.num("h"));
  const double speed = g_speed(sys, c.conformal, traj.front().q, traj.front().v);
  double momentum = 0.0, drift = 0.0;
  Table t{"trajectory", {"t", "g_speed", "momentum"}, {}};
  append_coordinate_columns(t.columns, "q", c.dimension, c.particles);
  append_coordinate_columns(t.columns, "v", c.dimension, c.particles);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const auto& s = traj[k];
    const double m = normalized_momentum(sys, s.q, s.v);
    const double g = g_speed(sys, c.conformal, s.q, s.v);
    momentum = std::max(momentum, m);
    drift = std::max(drift, relative_error(g, speed));
    if (k % c.stride == 0 || k + 1 == traj.size()) {
      std::vector<Cell> row{s.t, g, m};
      append_coordinates(row, s.q);
      append_coordinates(row, s.v);
      t.rows.push_back(std::move(row));
    }
  }
  r.checks.push_back(at_most("max_momentum", momentum, c.tol("momentum")));
  r.checks.push_back(at_most("speed_drift", drift, c.tol("speed_drift")));
  r.info.emplace_back("g_speed", speed);
  r.tables.push_back(std::move(t));
  return r;
}

RunResult newton_gauge(const ExperimentConfig& c) {
  RunResult r;
  const MassSystem sys = make_system(c);
  const auto [q0, v0] = initial_data(c, sys);
  const auto geo = integrate_horizontal_geodesic(sys, c.conformal, q0, v0, c.num("T"), c.num("h"));
  const auto rep = newton_time_reparam(sys, c.conformal, geo);
  const auto newton =
      integrate_newtonian(sys, c.conformal, rep.front().q, rep.front().v, rep.back().t_prime, c.num("newton_h"));
  double energy = 0.0, newton_energy = 0.0;
  Table t{"reparametrized", {"t", "t_prime", "energy"}, {}};
  append_coordinate_columns(t.columns, "q", c.dimension, c.particles);
  for (std::size_t k = 0; k < rep.size(); ++k) {
    energy = std::max(energy, std::abs(rep[k].energy));
    if (k % c.stride == 0 || k + 1 == rep.size()) {
      std::vector<Cell> row{geo[k].t, rep[k].t_prime, rep[k].energy};
      append_coordinates(row, rep[k].q);
      t.rows.push_back(std::move(row));
    }
  }
  for (const auto& s : newton) newton_energy = std::max(newton_energy, std::abs(s.energy));
  r.checks.push_back(at_most("max_energy", energy, c.tol("energy")));
  r.checks.push_back(
      at_most("path_distance", compare_shape_paths(sys, c.conformal, as_path(geo), as_path(newton)), c.tol("path")));
  r.info.emplace_back("t_prime_end", rep.back().t_prime);
  r.info.emplace_back("newton_max_energy", newton_energy);
  r.tables.push_back(std::move(t));
  return r;
}

RunResult conformal_invariance(const ExperimentConfig& c) {
  RunResult r;
  const MassSystem sys = make_system(c);
  const int d = c.dimension, n = c.particles, trials = c.count("trials");
  Draws rq(c.seed, kConfigurations), rt(c.seed, kTransforms);
  double det_error = 0.0, invariance = 0.0, homogeneity = 0.0;
  Table t{"invariance", {"kind", "max_invariance", "max_homogeneity"}, {}};
  for (ConformalKind kind : kAllKinds) {
    const auto spec = ConformalFactorSpec::of(kind);
    double inv = 0.0, hom = 0.0;
    for (int k = 0; k < trials; ++k) {
      const Configuration q = rq.separated(d, n, 0.1);
      const Displacement dq = rq.matrix(d, n);
      const SimilarityTransform tr = rt.transform(d, 0.1, 10.0);
      const double lambda = std::exp(rt.uniform(std::log(0.1), std::log(10.0)));
      const double ds = shape_line_element(sys, spec, q, dq);
      inv = std::max(inv, relative_error(shape_line_element(sys, spec, apply_transform(tr, q), apply_linear(tr, dq)), ds));
      const double f = conformal_factor(sys, spec, q);
      hom = std::max(hom, relative_error(conformal_factor(sys, spec, Configuration(lambda * q)), f / (lambda * lambda)));
      if (kind == ConformalKind::A) {
        const double det = inertia_tensor(sys, q).determinant();
        const double det_scaled = inertia_tensor(sys, Configuration(lambda * q)).determinant();
        det_error = std::max(det_error, relative_error(det_scaled, std::pow(lambda, 6) * det));
      }
    }
    t.rows.push_back({std::string(to_string(kind)), inv, hom});
    invariance = std::max(invariance, inv);
    homogeneity = std::max(homogeneity, hom);
  }
  r.checks.push_back(at_most("invariance", invariance, c.tol("invariance")));
  r.checks.push_back(at_most("homogeneity", homogeneity, c.tol("homogeneity")));
  r.checks.push_back(at_most("det_scaling", det_error, c.tol("det_scaling")));
  r.tables.push_back(std::move(t));
  return r;
}

RunResult quantum_evolve(const ExperimentConfig& c) {
  RunResult r;
  const MassSystem sys = make_system(c);
  const double hbar = c.num("hbar"), dt = c.num("dt");
  const int modes = c.count("modes");
  const ChartPtr chart = circle_chart(sys, c.conformal, c.count("grid"));

  // Random superposition of the modes |k| <= modes.
  Draws rc(c.seed, kFactors);
  std::vector<C> coef;
  for (int k = -modes; k <= modes; ++k) coef.emplace_back(rc.normal(), rc.normal());
  Eigen::VectorXcd psi = sample_wavefunction(chart, [&](const Eigen::VectorXd& x) {
                           C sum = 0.0;
                           for (int k = -modes; k <= modes; ++k) sum += coef[k + modes] * std::exp(kI * double(k) * x(0));
                           return sum;
                         }).normalized().values;

  const CrankNicolson cn(chart, dt, hbar);
  const int steps = c.count("steps");
  double drift = 0.0;
  Table norms{"norm", {"window", "steps", "norm", "drift"}, {}};
  double before = std::sqrt(inner_product(*chart, psi, psi).real());
  for (int w = 0; w < c.count("windows"); ++w) {
    for (int k = 0; k < steps; ++k) cn.step(psi);
    const double after = std::sqrt(inner_product(*chart, psi, psi).real());
    const double dw = std::abs(after - before) / before;
    drift = std::max(drift, dw);
    norms.rows.push_back({static_cast<long long>(w), static_cast<long long>(steps), after, dw});
    before = after;
  }
  r.checks.push_back(at_most("norm_drift", drift, c.tol("norm_drift")));
  r.tables.push_back(std::move(norms));

  // The circle metric is exactly 1 only for f_b; a constant factor reports
  // the computed levels without a reference.
  const bool reference = c.conformal.kind == ConformalKind::B;
  Table spectrum{"spectrum", {"k", "energy", "exact", "error"}, {}};
  double worst = 0.0;
  for (int k = 0; k <= modes; ++k) {
    const double exact = 0.5 * hbar * hbar * k * k;
    const auto target = k == 0 ? StationaryTarget::ground() : StationaryTarget::near(hbar * hbar * (0.5 * k * k - 0.1));
    const Eigenpair e = stationary_solve(chart, {}, target, hbar);
    const double err = k == 0 ? std::abs(e.energy) : relative_error(e.energy, exact);
    if (reference) worst = std::max(worst, err);
    spectrum.rows.push_back({static_cast<long long>(k), e.energy, reference ? exact : NAN, reference ? err : NAN});
  }
  if (reference) r.checks.push_back(at_most("spectrum_error", worst, c.tol("spectrum")));
  r.tables.push_back(std::move(spectrum));
  return r;
}

RunResult equilibrium(const ExperimentConfig& c) {
  RunResult r;
  const MassSystem sys = make_system(c);
  const ChartPtr chart = circle_chart(sys, c.conformal, c.count("grid"));
  const WaveFunction psi0 = sample_wavefunction(chart, [](const Eigen::VectorXd& x) {
                              return 0.45 + std::exp(kI * x(0)) + 0.45 * std::exp(2.0 * kI * x(0));
                            }).normalized();
  const double T = c.num("T"), frame_dt = c.num("frame_dt");
  const int bins = c.count("bins"), samples = c.count("samples");
  const WaveSeries series = evolve_series(psi0, T, frame_dt);
  const WaveFunction& psi_t = series.frames.back();
  const Ensemble start = sample_density(psi0, samples, c.seed);
  const EnsembleEvolution out = evolve_ensemble(series, start, 2.0 * frame_dt, T, 1.0);
  const Eigen::VectorXd empirical = ensemble_histogram(out.ensemble, bins);
  const Eigen::VectorXd born = binned_probabilities(psi_t, bins);
  const NoiseLevel noise = multinomial_tv_noise(born, out.ensemble.size(), c.seed + 1);
  r.checks.push_back(at_most("tv", total_variation(empirical, born), c.tol("tv")));
  r.checks.push_back(at_most("loss_fraction", out.loss_fraction(samples), c.tol("node_loss")));
  r.info.emplace_back("noise_mean", noise.mean);
  r.info.emplace_back("noise_sd", noise.sd);
  r.info.emplace_back("initial_vs_final_tv", total_variation(binned_probabilities(psi0, bins), born));
  Table t{"histogram", {"bin", "empirical", "born"}, {}};
  for (int b = 0; b < bins; ++b) t.rows.push_back({static_cast<long long>(b), empirical(b), born(b)});
  r.tables.push_back(std::move(t));
  return r;
}

C smooth_shape(const Eigen::VectorXd& x) {
  const double a = x(0), b = x.size() > 1 ? x(1) : 0.0;
  return (1.5 + 0.5 * std::cos(a) + 0.3 * std::sin(2 * b)) * std::exp(kI * (std::sin(a) + 0.7 * b - 0.4 * a * b));
}

// Absolute configurations over random points of the triangle chart, moved
// along their fibers by random similarity transforms.
std::vector<Configuration> triangle_samples(const ShapeChart& chart, int count, double radius, Draws& r) {
  std::vector<Configuration> out;
  const int d = chart.bundle().system.dimension();
  for (int k = 0; k < count; ++k) {
    const Eigen::Vector2d u(r.uniform(-radius, radius), r.uniform(-radius, radius));
    out.push_back(apply_transform(r.transform(d, 0.5, 2.0), chart.embed(u)));
  }
  return out;
}

RunResult gauge_invariance(const ExperimentConfig& c) {
  RunResult r;
  const MassSystem sys = make_system(c);
  const ChartPtr chart = triangle_chart(sys, c.conformal, c.count("grid"));
  Draws rs(c.seed, kConfigurations), rf(c.seed, kFactors);
  const auto samples = triangle_samples(*chart, c.count("points"), 0.4, rs);

  // F(q) = exp(sum_k a_k sin(w_k . q + p_k)) with random a, w, p.
  const int n = sys.dimension() * sys.particle_count();
  std::vector<std::tuple<double, Eigen::VectorXd, double>> waves;
  for (int k = 0; k < 3; ++k) {
    Eigen::VectorXd w(n);
    for (int i = 0; i < n; ++i) w(i) = 0.5 * rf.normal();
    waves.emplace_back(0.5 * rf.normal(), w, rf.uniform(0.0, 2.0 * std::numbers::pi));
  }
  const PositiveField F = [waves](const Configuration& q) {
    const Eigen::Map<const Eigen::VectorXd> flat(q.data(), q.size());
    double s = 0.0;
    for (const auto& [a, w, p] : waves) s += a * std::sin(w.dot(flat) + p);
    return std::exp(s);
  };
  const C constant(rf.normal(), rf.normal());

  Table t{"deviation", {"gauge", "max_speed", "factor_deviation", "constant_deviation"}, {}};
  double worst = 0.0;
  for (Gauge g : kGauges) {
    const LiftedWaveFunction psi = lift_function(chart, smooth_shape, g);
    const LiftedWaveFunction f_psi = gauge_transform(psi, F);
    const LiftedWaveFunction c_psi = scaled(psi, constant);
    double speed = 0.0, dev_f = 0.0, dev_c = 0.0;
    for (const Configuration& q : samples) {
      const Displacement v = lifted_velocity(psi, q);
      speed = std::max(speed, v.cwiseAbs().maxCoeff());
      dev_f = std::max(dev_f, (lifted_velocity(f_psi, q) - v).cwiseAbs().maxCoeff());
      dev_c = std::max(dev_c, (lifted_velocity(c_psi, q) - v).cwiseAbs().maxCoeff());
    }
    t.rows.push_back({std::string(to_string(g)), speed, dev_f, dev_c});
    worst = std::max({worst, dev_f, dev_c});
  }
  r.checks.push_back(at_most("max_deviation", worst, c.tol("velocity")));
  r.tables.push_back(std::move(t));
  return r;
}

RunResult potentials(const ExperimentConfig& c) {
  RunResult r;
  const MassSystem sys = make_system(c);
  Draws rq(c.seed, kConfigurations);
  const int configs = c.count("configs");
  const double fd_step = c.num("fd_step"), curvature_step = c.num("curvature_step");
  std::vector<Configuration> qs;
  for (int k = 0; k < configs; ++k) qs.push_back(rq.separated(3, 3));

  Table t{"potentials", {"kind", "config", "v2", "v2_fd", "v2_error", "curvature", "curvature_fd", "curvature_error"}, {}};
  double v2_error = 0.0, r_error = 0.0;
  for (ConformalKind kind : kAllKinds) {
    const auto spec = ConformalFactorSpec::of(kind);
    for (int k = 0; k < configs; ++k) {
      const double v2 = potential_V2(sys, spec, qs[k]);
      const double v2_fd = potential_V2_fd(sys, spec, qs[k], 1.0, fd_step);
      const double R = scalar_curvature(sys, spec, qs[k]);
      const double R_fd = scalar_curvature_fd(sys, spec, qs[k], curvature_step);
      const double e1 = relative_error(v2, v2_fd), e2 = relative_error(R, R_fd);
      v2_error = std::max(v2_error, e1);
      r_error = std::max(r_error, e2);
      t.rows.push_back({std::string(to_string(kind)), static_cast<long long>(k), v2, v2_fd, e1, R, R_fd, e2});
    }
  }
  double constant = 0.0;
  const auto flat = ConformalFactorSpec::constant_value(2.5);
  for (int k = 0; k < std::min(configs, 10); ++k) {
    constant = std::max({constant, std::abs(potential_V2(sys, flat, qs[k])),
                         std::abs(potential_V2_fd(sys, flat, qs[k], 1.0, fd_step)),
                         std::abs(scalar_curvature(sys, flat, qs[k])),
                         std::abs(scalar_curvature_fd(sys, flat, qs[k], curvature_step))});
  }
  r.checks.push_back(at_most("v2_error", v2_error, c.tol("v2")));
  r.checks.push_back(at_most("curvature_error", r_error, c.tol("curvature")));
  r.checks.push_back(at_most("constant_factor", constant, c.tol("constant")));
  r.tables.push_back(std::move(t));

  // Stationary residuals of the lifted equations at the reference step and
  // twice it: a circle eigenpair for three bodies on a line and, with f_b,
  // the height function of the shape sphere (E = 4).
  const double fine_step = c.num("residual_step");
  const int count = c.count("residual_samples");
  Draws rs(c.seed, kTransforms);
  Table res{"residuals", {"chart", "gauge", "energy", "coarse", "fine", "ratio"}, {}};
  double fine_max = 0.0, ratio_min = INFINITY, ratio_max = -INFINITY;
  auto record = [&](const std::string& name, const LiftedWaveFunction& psi, double energy,
                    const std::vector<Configuration>& samples) {
    const double coarse = stationary_residual(psi, energy, samples, 2.0 * fine_step);
    const double fine = stationary_residual(psi, energy, samples, fine_step);
    fine_max = std::max(fine_max, fine);
    ratio_min = std::min(ratio_min, coarse / fine);
    ratio_max = std::max(ratio_max, coarse / fine);
    res.rows.push_back({name, std::string(to_string(psi.gauge())), energy, coarse, fine, coarse / fine});
  };

  const MassSystem line(1, sys.masses());
  const ChartPtr circle = circle_chart(line, c.conformal, 256);
  const Eigenpair e = stationary_solve(circle, {}, StationaryTarget::near(1.8));
  std::vector<Configuration> circle_samples;
  for (int k = 0; k < count; ++k) {
    SimilarityTransform tr = rs.transform(1, 0.5, 2.0);
    tr.rotation = Eigen::MatrixXd::Identity(1, 1);
    circle_samples.push_back(apply_transform(tr, circle->embed(Eigen::VectorXd::Constant(1, 0.3 + 6.0 * k / count))));
  }
  for (Gauge g : kGauges) record("circle", lift_wavefunction(e.psi, g, Interpolation::Fourier), e.energy, circle_samples);

  if (c.conformal.kind == ConformalKind::B) {
    const ChartPtr sphere = triangle_chart(sys, c.conformal, 8, 0.6);
    const auto sphere_samples = triangle_samples(*sphere, count, 0.45, rs);
    const ShapeFunction height = [](const Eigen::VectorXd& u) {
      const double r2 = u.squaredNorm();
      return C((1 - r2) / (1 + r2), 0.0);
    };
    for (Gauge g : kGauges) record("triangle", lift_function(sphere, height, g), 4.0, sphere_samples);
  }
  r.checks.push_back(at_most("stationary_residual", fine_max, c.tol("residual")));
  r.checks.push_back(at_least("refinement_ratio_min", ratio_min, c.tol("order_low")));
  r.checks.push_back(at_most("refinement_ratio_max", ratio_max, c.tol("order_high")));
  r.tables.push_back(std::move(res));
  return r;
}

void append_bins(Table& t, const std::string& name, const SplitSystem& split, const ConditionalReport& report) {
  for (const ConditionalBin& b : report.bins) {
    t.rows.push_back({name, static_cast<long long>(b.y_index), split.y(b.y_index), static_cast<long long>(b.count), b.tv,
                      b.noise.mean, b.noise.sd});
  }
}

RunResult conditional_check(const ExperimentConfig& c) {
  RunResult r;
  const int grid = c.count("grid"), samples = c.count("samples"), min_count = c.count("min_count");
  const double w = c.num("half_width");
  // |Psi|^2 is a Gaussian with standard deviations 0.5 and 2 along x - y and
  // x + y, so the conditional density of x moves with y.
  const Eigen::VectorXd axis = Eigen::VectorXd::LinSpaced(grid, -w, w);
  const SplitSystem entangled = product_split(axis, axis, [](double x, double y) {
    const double u = x - y, v = x + y;
    return std::exp(-u * u / (4 * 0.25) - v * v / (4 * 4.0)) * std::exp(kI * 0.3 * x * y);
  });
  const Eigen::VectorXd small = Eigen::VectorXd::LinSpaced(grid, -4.0, 4.0);
  const SplitSystem product = product_split(small, small, [](double x, double y) {
    return std::exp(-x * x / 2.0) * std::exp(-(y - 0.5) * (y - 0.5) / 3.0) * std::exp(kI * x * 1.3);
  });
  const ConditionalReport main = conditional_probability_check(entangled, samples, c.seed, min_count);
  const ConditionalReport control = conditional_probability_check(product, samples, c.seed + 1, min_count);
  r.checks.push_back(at_most("worst_tv", main.worst_tv, c.tol("tv")));
  r.checks.push_back(at_most("control_sigma", control.pooled_sigma, c.tol("control_sigma")));
  r.info.emplace_back("checked_bins", static_cast<double>(main.bins.size()));
  r.info.emplace_back("worst_sigma", main.worst_sigma);
  r.info.emplace_back("control_worst_sigma", control.worst_sigma);
  r.info.emplace_back("slope", main.slope);
  Table t{"conditional", {"system", "y_index", "y", "count", "tv", "noise_mean", "noise_sd"}, {}};
  append_bins(t, "entangled", entangled, main);
  append_bins(t, "control", product, control);
  r.tables.push_back(std::move(t));
  return r;
}

RunResult fiber_check(const ExperimentConfig& c) {
  RunResult r;
  const MassSystem sys = make_system(c);
  const ChartPtr chart = triangle_chart(sys, c.conformal, 16, 0.6);
  const ShapeFunction shape = [](const Eigen::VectorXd& u) {
    return C(1.0 + u(0) * u(0), 0.5 * u(1)) * std::exp(kI * u(0));
  };
  const LiftedWaveFunction psi = lift_function(chart, shape, Gauge::Gauge1);
  Draws rq(c.seed, kConfigurations);
  const Configuration q = chart->embed(Eigen::Vector2d(rq.uniform(-0.4, 0.4), rq.uniform(-0.4, 0.4)));
  const auto transforms = random_transforms(c.dimension, c.count("transforms"), c.seed);
  // A Gaussian in absolute coordinates is not invariant under the fiber motion.
  const AbsoluteFunction control = [](const Configuration& y) { return C(std::exp(-y.squaredNorm()), 0.0); };

  const FiberReport lifted = fiber_nonnormalizability_check(psi, q, transforms);
  const FiberReport reference = fiber_nonnormalizability_check(control, q, transforms);
  r.checks.push_back(at_most("max_variation", lifted.max_variation, c.tol("variation")));
  r.checks.push_back(at_least("control_variation", reference.max_variation, c.tol("control_min")));

  Table t{"fiber", {"transform", "scale", "lifted_ratio", "control_ratio"}, {}};
  const double p0 = std::norm(psi(q)), c0 = std::norm(control(q));
  for (std::size_t k = 0; k < transforms.size(); ++k) {
    const Configuration tq = apply_transform(transforms[k], q);
    t.rows.push_back({static_cast<long long>(k), transforms[k].scale, std::norm(psi(tq)) / p0, std::norm(control(tq)) / c0});
  }
  r.tables.push_back(std::move(t));
  return r;
}

std::string cell_text(const Cell& cell, bool json) {
  if (const double* x = std::get_if<double>(&cell)) {
    if (json && !std::isfinite(*x)) return "null";
    return format_double(*x);
  }
  if (const long long* i = std::get_if<long long>(&cell)) return std::to_string(*i);
  const std::string& s = std::get<std::string>(cell);
  return json ? nlohmann::json(s).dump() : s;
}

nlohmann::ordered_json number(double x) {
  if (!std::isfinite(x)) return nullptr;
  return x;
}

}  // namespace

bool RunResult::passed() const {
  for (const Check& c : checks)
    if (!c.passed()) return false;
  return true;
}

RunResult run_experiment(const ExperimentConfig& config) {
  RunResult r;
  switch (config.kind) {
    case ExperimentKind::ClassicalGeodesic: r = classical_geodesic(config); break;
    case ExperimentKind::NewtonGauge: r = newton_gauge(config); break;
    case ExperimentKind::ConformalInvariance: r = conformal_invariance(config); break;
    case ExperimentKind::QuantumEvolve: r = quantum_evolve(config); break;
    case ExperimentKind::Equilibrium: r = equilibrium(config); break;
    case ExperimentKind::GaugeInvariance: r = gauge_invariance(config); break;
    case ExperimentKind::Potentials: r = potentials(config); break;
    case ExperimentKind::ConditionalCheck: r = conditional_check(config); break;
    case ExperimentKind::FiberCheck: r = fiber_check(config); break;
  }
  r.kind = config.kind;
  r.seed = config.seed;
  return r;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string summary_line(const RunResult& result) {
  std::string line = std::string(to_string(result.kind)) + " seed=" + std::to_string(result.seed) +
                     (result.passed() ? " PASS" : " FAIL");
  for (const Check& c : result.checks) {
    line += " " + c.name + "=" + format_double(c.value);
    if (std::isfinite(c.upper) && std::isfinite(c.lower)) {
      line += "[" + format_double(c.lower) + "," + format_double(c.upper) + "]";
    } else if (std::isfinite(c.upper)) {
      line += "(<=" + format_double(c.upper) + ")";
    } else {
      line += "(>=" + format_double(c.lower) + ")";
    }
  }
  for (const auto& [name, value] : result.info) line += " " + name + "=" + format_double(value);
  return line;
}

void write_outputs(const RunResult& result, const ExperimentConfig& config, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const bool json = config.format == OutputFormat::JsonLines;
  for (const Table& t : result.tables) {
    std::ofstream out(dir / (t.name + (json ? ".jsonl" : ".csv")), std::ios::binary);
    if (!json) {
      for (std::size_t j = 0; j < t.columns.size(); ++j) out << (j ? "," : "") << t.columns[j];
      out << '\n';
    }
    for (const auto& row : t.rows) {
      if (json) out << '{';
      for (std::size_t j = 0; j < row.size(); ++j) {
        if (j) out << ',';
        if (json) out << nlohmann::json(t.columns[j]).dump() << ':';
        out << cell_text(row[j], json);
      }
      out << (json ? "}\n" : "\n");
    }
    if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + (dir / t.name).string());
  }

  nlohmann::ordered_json summary;
  summary["kind"] = to_string(result.kind);
  summary["seed"] = result.seed;
  summary["passed"] = result.passed();
  summary["checks"] = nlohmann::ordered_json::array();
  for (const Check& c : result.checks) {
    nlohmann::ordered_json j;
    j["name"] = c.name;
    j["value"] = number(c.value);
    if (std::isfinite(c.lower)) j["lower"] = c.lower;
    if (std::isfinite(c.upper)) j["upper"] = c.upper;
    j["passed"] = c.passed();
    summary["checks"].push_back(j);
  }
  summary["info"] = nlohmann::ordered_json::object();
  for (const auto& [name, value] : result.info) summary["info"][name] = number(value);
  std::ofstream out(dir / "summary.json", std::ios::binary);
  out << summary.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + (dir / "summary.json").string());
}

}  // namespace shapedyn::cli
