#include "shapedyn/lift.hpp"
#include "shapedyn/quantum.hpp"

#include <cmath>
#include <type_traits>

namespace shapedyn {

namespace {

using Complex = std::complex<double>;

int config_size(const MassSystem& sys) { return sys.dimension() * sys.particle_count(); }

double length_scale(const MassSystem& sys, const Configuration& q) { return std::sqrt(inertia_scalar(sys, q)); }

// Smallest mass-weighted length of q: L, the closest pair, and the thinnest
// principal direction (for d > 1). Difference steps are taken relative to it
// so that near-collisions and near-collinear shapes stay resolved.
double local_scale(const MassSystem& sys, const Configuration& q) {
  const auto& m = sys.masses();
  double out = length_scale(sys, q);
  for (int a = 0; a < sys.particle_count(); ++a)
    for (int b = a + 1; b < sys.particle_count(); ++b)
      out = std::min(out, std::sqrt(m(a) * m(b) / (m(a) + m(b))) * (q.col(a) - q.col(b)).norm());
  if (sys.dimension() > 1) {
    const Configuration rho = relative_coordinates(sys, q);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(rho * m.asDiagonal() * rho.transpose(),
                                                       Eigen::EigenvaluesOnly);
    // N points span at most N - 1 directions; skip the empty ones.
    const int first = std::max(0, sys.dimension() - (sys.particle_count() - 1));
    if (eig.eigenvalues()(first) > 0.0) out = std::min(out, std::sqrt(eig.eigenvalues()(first)));
  }
  return out;
}

// q moved to its center of mass and rotated onto its principal axes, with
// axis signs fixed by the third moments. Difference stencils built in this
// frame do not depend on the orientation of q.
Configuration principal_pose(const MassSystem& sys, const Configuration& q) {
  const Configuration rho = relative_coordinates(sys, q);
  const int d = sys.dimension();
  if (d == 1) return rho;
  const Eigen::MatrixXd second = rho * sys.masses().asDiagonal() * rho.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(second);
  Eigen::MatrixXd axes = eig.eigenvectors();
  for (int i = 0; i < d; ++i) {
    const Eigen::VectorXd proj = axes.col(i).transpose() * rho;
    double skew = (proj.array().cube() * sys.masses().array()).sum();
    if (skew == 0.0) skew = proj(0);
    if (skew < 0.0) axes.col(i) *= -1.0;
  }
  return axes.transpose() * rho;
}

// q displaced by h along mass-weighted coordinate i (x = sqrt(m) q), so the
// flat metric in these coordinates is the identity.
Configuration shifted(const MassSystem& sys, const Configuration& q, int i, double h) {
  const int d = sys.dimension();
  Configuration out = q;
  out(i % d, i / d) += h / std::sqrt(sys.masses()(i / d));
  return out;
}

// Gradient of log f in mass-weighted coordinates, flattened.
Eigen::VectorXd log_factor_gradient(const MassSystem& sys, const ConformalFactorSpec& spec, const Configuration& q) {
  const Configuration g = log_conformal_derivatives(sys, spec, q).gradient;
  const int d = sys.dimension();
  Eigen::VectorXd out(config_size(sys));
  for (int i = 0; i < out.size(); ++i) out(i) = g(i % d, i / d) / std::sqrt(sys.masses()(i / d));
  return out;
}

// (1/rho) sum_i d_i(k d_i u) with second-order half-point differences; the
// coefficient k is evaluated at the half points.
template <typename Value, typename Coeff>
auto flux_laplacian(const MassSystem& sys, const Configuration& q, double h, const Value& u, const Coeff& k) {
  const auto u0 = u(q);
  std::remove_cvref_t<decltype(u0)> sum{};
  for (int i = 0; i < config_size(sys); ++i) {
    const double kp = k(shifted(sys, q, i, 0.5 * h));
    const double km = k(shifted(sys, q, i, -0.5 * h));
    sum += kp * (u(shifted(sys, q, i, h)) - u0) - km * (u0 - u(shifted(sys, q, i, -h)));
  }
  return sum / (h * h);
}

}  // namespace

const char* to_string(Gauge gauge) {
  switch (gauge) {
    case Gauge::Gauge1: return "gauge1";
    case Gauge::Gauge3: return "gauge3";
    case Gauge::Schroedinger: return "schroedinger";
  }
  return "unknown";
}

double gauge_factor(const MassSystem& sys, const ConformalFactorSpec& spec, const Configuration& q, Gauge gauge) {
  if (gauge == Gauge::Gauge1) return 1.0;
  const double n = config_size(sys);
  const double f = conformal_factor(sys, spec, q);
  const double j = gauge_jacobian(sys, spec, q);
  const double power = gauge == Gauge::Gauge3 ? n / 4.0 : (n - 2.0) / 4.0;
  return std::pow(f, power) / std::sqrt(j);
}

ShapeFunction shape_function(const WaveFunction& psi, Interpolation mode) {
  return [psi, mode](const Eigen::VectorXd& x) { return psi(x, mode); };
}

LiftedWaveFunction::LiftedWaveFunction(ChartPtr chart, ShapeFunction shape, Gauge gauge, double hbar)
    : chart_(std::move(chart)), shape_(std::move(shape)), gauge_(gauge), hbar_(hbar) {
  if (!chart_ || !chart_->has_bundle()) throw Error(ErrorKind::InvalidArgument, "lifting needs a chart with an embedding");
  if (!(hbar > 0.0)) throw Error(ErrorKind::InvalidArgument, "hbar must be positive");
}

Complex LiftedWaveFunction::shape_value(const Configuration& q) const { return shape_(chart_->locate(q)); }

double LiftedWaveFunction::factor(const Configuration& q) const {
  double out = gauge_factor(system(), spec(), q, gauge_);
  for (const auto& f : extra_) {
    const double v = f(q);
    if (!(v > 0.0)) throw Error(ErrorKind::InvalidArgument, "gauge transformation factor must be positive");
    out *= v;
  }
  return out;
}

Complex LiftedWaveFunction::operator()(const Configuration& q) const { return scale_ * factor(q) * shape_value(q); }

LiftedWaveFunction LiftedWaveFunction::transformed(PositiveField f) const {
  LiftedWaveFunction out = *this;
  out.extra_.push_back(std::move(f));
  return out;
}

LiftedWaveFunction LiftedWaveFunction::scaled(Complex c) const {
  if (c == Complex(0.0, 0.0)) throw Error(ErrorKind::InvalidArgument, "ray representative needs a nonzero constant");
  LiftedWaveFunction out = *this;
  out.scale_ *= c;
  return out;
}

LiftedWaveFunction lift_wavefunction(const WaveFunction& psi, Gauge gauge, Interpolation mode) {
  return LiftedWaveFunction(psi.chart, shape_function(psi, mode), gauge, psi.hbar);
}

LiftedWaveFunction lift_function(ChartPtr chart, ShapeFunction fn, Gauge gauge, double hbar) {
  return LiftedWaveFunction(std::move(chart), std::move(fn), gauge, hbar);
}

LiftedWaveFunction gauge_transform(const LiftedWaveFunction& psi, PositiveField f) { return psi.transformed(std::move(f)); }

LiftedWaveFunction scaled(const LiftedWaveFunction& psi, Complex c) { return psi.scaled(c); }

Displacement lifted_velocity(const LiftedWaveFunction& psi, const Configuration& q, double step) {
  const MassSystem& sys = psi.system();
  const int d = sys.dimension(), n = sys.particle_count();
  const double h = step * length_scale(sys, q);
  const Complex center = psi(q);
  double biggest = std::abs(center);
  Displacement v(d, n);
  for (int a = 0; a < n; ++a) {
    for (int r = 0; r < d; ++r) {
      auto at = [&](double s) {
        Configuration y = q;
        y(r, a) += s;
        const Complex value = psi(y);
        biggest = std::max(biggest, std::abs(value));
        return value;
      };
      const double r1 = std::arg(at(h) * std::conj(at(-h)));
      const double r2 = std::arg(at(2 * h) * std::conj(at(-2 * h)));
      v(r, a) = (8.0 * r1 - r2) / (12.0 * h) / sys.masses()(a);
    }
  }
  if (!(std::abs(center) >= kNodeTolerance * biggest) || biggest == 0.0) {
    throw Error(ErrorKind::NodeEncountered, "lifted wave function vanishes at the query configuration");
  }
  const double speed = psi.gauge() == Gauge::Schroedinger ? 1.0 : 1.0 / conformal_factor(sys, psi.spec(), q);
  return psi.hbar() * speed * v;
}

Eigen::VectorXd project_velocity(const ShapeChart& chart, const Configuration& q, const Displacement& v,
                                 double epsilon) {
  const Eigen::VectorXd plus = chart.bundle().locate(q + epsilon * v);
  const Eigen::VectorXd minus = chart.bundle().locate(q - epsilon * v);
  Eigen::VectorXd diff = plus - minus;
  for (int i = 0; i < chart.dimension(); ++i)
    if (chart.periodic(i)) diff(i) = std::remainder(diff(i), chart.axis(i).length());
  return diff / (2.0 * epsilon);
}

double potential_V1(const MassSystem& sys, const ConformalFactorSpec& spec, const Configuration& q_in, double hbar,
                    double step) {
  using Wide = long double;
  const int d = sys.dimension(), dim = config_size(sys);
  const double n = dim;
  const Configuration q = principal_pose(sys, q_in);
  // The stencil divides rounding noise in J by h^2; extended precision keeps
  // that below the truncation error for the default step.
  const MassSystemT<Wide> wide_sys(d, sys.masses().cast<Wide>());
  const ConformalFactorSpecT<Wide> wide_spec{spec.kind, static_cast<Wide>(spec.constant)};
  const ConfigurationT<Wide> wq = q.cast<Wide>();
  const Wide h = step * local_scale(sys, q);
  auto s = [&](int i, Wide shift) {
    ConfigurationT<Wide> y = wq;
    if (shift != 0) y(i % d, i / d) += shift / std::sqrt(wide_sys.masses()(i / d));
    return std::sqrt(gauge_jacobian(wide_sys, wide_spec, y));
  };
  const Wide s0 = s(0, 0);
  const Eigen::VectorXd grad_log_f = log_factor_gradient(sys, spec, q);
  Wide lap = 0, cross = 0, grad_sq = 0;
  for (int i = 0; i < dim; ++i) {
    const Wide sp = s(i, h), sm = s(i, -h);
    const Wide g = (sp - sm) / (2 * h);
    lap += (sp - 2 * s0 + sm) / (h * h);
    cross += grad_log_f(i) * g;
    grad_sq += g * g;
  }
  const double f = conformal_factor(sys, spec, q);
  const double lifted = static_cast<double>((lap + (n / 2.0 - 1.0) * cross - 2 * grad_sq / s0) / s0) / f;
  return -0.5 * hbar * hbar * lifted;
}

double potential_V2(const MassSystem& sys, const ConformalFactorSpec& spec, const Configuration& q, double hbar) {
  const double n = config_size(sys);
  const auto l = log_conformal_derivatives(sys, spec, q);
  const double f = std::exp(l.value);
  return -0.5 * hbar * hbar * (n / 4.0) * (-l.laplacian + (1.0 - n / 4.0) * l.gradient_square) / f;
}

double potential_V2_fd(const MassSystem& sys, const ConformalFactorSpec& spec, const Configuration& q_in, double hbar,
                       double step) {
  const double n = config_size(sys);
  const Configuration q = principal_pose(sys, q_in);
  const double h = step * local_scale(sys, q);
  auto f = [&](const Configuration& y) { return conformal_factor(sys, spec, y); };
  auto u = [&](const Configuration& y) { return std::pow(f(y), -n / 4.0); };
  auto k = [&](const Configuration& y) { return std::pow(f(y), n / 2.0 - 1.0); };
  const double f0 = f(q);
  // One Richardson step on the second-order flux form.
  const double flux = (4.0 * flux_laplacian(sys, q, 0.5 * h, u, k) - flux_laplacian(sys, q, h, u, k)) / 3.0;
  const double delta = flux / std::pow(f0, n / 2.0);
  return -0.5 * hbar * hbar * std::pow(f0, n / 4.0) * delta;
}

double scalar_curvature(const MassSystem& sys, const ConformalFactorSpec& spec, const Configuration& q) {
  const double n = config_size(sys);
  const auto l = log_conformal_derivatives(sys, spec, q);
  return -(n - 1.0) * (l.laplacian + (n - 2.0) / 4.0 * l.gradient_square) / std::exp(l.value);
}

namespace {

// Gamma[k](i, j) = Christoffel symbol of the second kind at x.
std::vector<Eigen::MatrixXd> christoffel(const MetricField& g, const Eigen::VectorXd& x, double h) {
  const int n = static_cast<int>(x.size());
  std::vector<Eigen::MatrixXd> dg(n);  // dg[m] = d_m g
  for (int m = 0; m < n; ++m) {
    const Eigen::VectorXd e = Eigen::VectorXd::Unit(n, m) * h;
    dg[m] = (g(x + e) - g(x - e)) / (2.0 * h);
  }
  const Eigen::MatrixXd ginv = g(x).inverse();
  std::vector<Eigen::MatrixXd> out(n, Eigen::MatrixXd::Zero(n, n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      Eigen::VectorXd lower(n);  // Gamma_{l ij}
      for (int l = 0; l < n; ++l) lower(l) = 0.5 * (dg[i](l, j) + dg[j](l, i) - dg[l](i, j));
      const Eigen::VectorXd upper = ginv * lower;
      for (int k = 0; k < n; ++k) out[k](i, j) = upper(k);
    }
  }
  return out;
}

}  // namespace

double scalar_curvature_of_metric(const MetricField& g, const Eigen::VectorXd& x, double step) {
  const int n = static_cast<int>(x.size());
  const auto gamma = christoffel(g, x, step);
  // dgamma[m][k](i, j) = d_m Gamma^k_ij
  std::vector<std::vector<Eigen::MatrixXd>> dgamma(n);
  for (int m = 0; m < n; ++m) {
    const Eigen::VectorXd e = Eigen::VectorXd::Unit(n, m) * step;
    const auto plus = christoffel(g, x + e, step);
    const auto minus = christoffel(g, x - e, step);
    dgamma[m].resize(n);
    for (int k = 0; k < n; ++k) dgamma[m][k] = (plus[k] - minus[k]) / (2.0 * step);
  }
  Eigen::MatrixXd ricci = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double r = 0.0;
      for (int k = 0; k < n; ++k) {
        r += dgamma[k][k](i, j) - dgamma[j][k](i, k);
        for (int l = 0; l < n; ++l) r += gamma[k](k, l) * gamma[l](i, j) - gamma[k](j, l) * gamma[l](i, k);
      }
      ricci(i, j) = r;
    }
  }
  return (g(x).inverse().cwiseProduct(ricci)).sum();
}

double scalar_curvature_fd(const MassSystem& sys, const ConformalFactorSpec& spec, const Configuration& q_in,
                           double step) {
  const Configuration q = principal_pose(sys, q_in);
  const int d = sys.dimension(), dim = config_size(sys);
  const Eigen::VectorXd sqrt_m = sys.masses().cwiseSqrt();
  auto to_config = [&](const Eigen::VectorXd& x) {
    Configuration y(d, sys.particle_count());
    for (int i = 0; i < dim; ++i) y(i % d, i / d) = x(i) / sqrt_m(i / d);
    return y;
  };
  Eigen::VectorXd x(dim);
  for (int i = 0; i < dim; ++i) x(i) = q(i % d, i / d) * sqrt_m(i / d);
  const MetricField metric = [&](const Eigen::VectorXd& y) {
    return Eigen::MatrixXd(conformal_factor(sys, spec, to_config(y)) * Eigen::MatrixXd::Identity(dim, dim));
  };
  return scalar_curvature_of_metric(metric, x, step * local_scale(sys, q));
}

double schrodinger_gauge_potential_U(const MassSystem& sys, const ConformalFactorSpec& spec, const Configuration& q,
                                     double energy, double hbar, double step) {
  const double n = config_size(sys);
  const double f = conformal_factor(sys, spec, q);
  const double v1 = potential_V1(sys, spec, q, hbar, step);
  return f * (v1 - energy) - hbar * hbar / 8.0 * ((n - 2.0) / (n - 1.0)) * f * scalar_curvature(sys, spec, q);
}

double stationary_residual(const LiftedWaveFunction& psi, double energy, const std::vector<Configuration>& samples,
                           double step) {
  if (samples.empty()) throw Error(ErrorKind::InvalidArgument, "stationary residual needs sample configurations");
  const MassSystem& sys = psi.system();
  const ConformalFactorSpec& spec = psi.spec();
  const double n = config_size(sys);
  const double c = 0.5 * psi.hbar() * psi.hbar();
  double res2 = 0.0, norm2 = 0.0;
  for (const Configuration& q : samples) {
    const double h = step * local_scale(sys, q);
    const Complex value = psi(q);
    Complex r;
    switch (psi.gauge()) {
      case Gauge::Gauge1: {
        // Dhat = (1/rho) div(rho f^-1 grad), rho = f^(n/2) / J.
        auto k = [&](const Configuration& y) {
          return std::pow(conformal_factor(sys, spec, y), n / 2.0 - 1.0) / gauge_jacobian(sys, spec, y);
        };
        const double rho = std::pow(conformal_factor(sys, spec, q), n / 2.0) / gauge_jacobian(sys, spec, q);
        r = -c * flux_laplacian(sys, q, h, psi, k) / rho - energy * value;
        break;
      }
      case Gauge::Gauge3: {
        auto k = [&](const Configuration& y) { return 1.0 / conformal_factor(sys, spec, y); };
        const double v = potential_V1(sys, spec, q, psi.hbar(), step) + potential_V2(sys, spec, q, psi.hbar());
        r = -c * flux_laplacian(sys, q, h, psi, k) + (v - energy) * value;
        break;
      }
      case Gauge::Schroedinger: {
        auto k = [](const Configuration&) { return 1.0; };
        const double u = schrodinger_gauge_potential_U(sys, spec, q, energy, psi.hbar(), step);
        r = -c * flux_laplacian(sys, q, h, psi, k) + u * value;
        break;
      }
    }
    res2 += std::norm(r);
    norm2 += std::norm(value);
  }
  if (!(norm2 > 0.0)) throw Error(ErrorKind::ZeroNorm, "lifted wave function vanishes on every sample");
  return std::sqrt(res2 / norm2);
}

}  // namespace shapedyn
