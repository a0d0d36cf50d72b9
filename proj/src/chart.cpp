#include "shapedyn/chart.hpp"

#include <cmath>
#include <numbers>

namespace shapedyn {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_angle(double x) {
  double y = std::fmod(x, kTwoPi);
  if (y < 0.0) y += kTwoPi;
  if (y >= kTwoPi) y = 0.0;
  return y;
}

}  // namespace

ShapeChart::ShapeChart(std::string name, std::vector<ChartAxis> axes, MetricFunction metric,
                       std::optional<ChartBundle> bundle)
    : name_(std::move(name)), axes_(std::move(axes)), metric_fn_(std::move(metric)), bundle_(std::move(bundle)) {
  if (axes_.empty() || axes_.size() > 2) throw Error(ErrorKind::InvalidArgument, "charts have one or two axes");
  size_ = 1;
  for (const auto& a : axes_) {
    if (a.points < 4) throw Error(ErrorKind::InvalidArgument, "each chart axis needs at least 4 points");
    if (!(a.upper > a.lower)) throw Error(ErrorKind::InvalidArgument, "chart axis bounds must be increasing");
    size_ *= a.points;
    cell_volume_ *= a.spacing();
  }
  const int k = dimension();
  metric_.resize(size_);
  inverse_metric_.resize(size_);
  sqrt_det_.resize(size_);
  for (int p = 0; p < size_; ++p) {
    Eigen::MatrixXd g = metric_fn_(point(p));
    if (g.rows() != k || g.cols() != k) throw Error(ErrorKind::DimensionMismatch, "metric has the wrong size");
    g = 0.5 * (g + g.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g, Eigen::EigenvaluesOnly);
    if (!(eig.eigenvalues().minCoeff() > 0.0)) {
      throw Error(ErrorKind::SingularFactor, "metric is not positive definite at chart node " + std::to_string(p));
    }
    metric_[p] = g;
    inverse_metric_[p] = g.inverse();
    sqrt_det_(p) = std::sqrt(g.determinant());
  }
  weights_ = sqrt_det_ * cell_volume_;
}

Eigen::VectorXi ShapeChart::multi_index(int flat) const {
  Eigen::VectorXi idx(dimension());
  idx(0) = flat % axes_[0].points;
  if (dimension() > 1) idx(1) = flat / axes_[0].points;
  return idx;
}

Eigen::VectorXd ShapeChart::point(int flat) const {
  const Eigen::VectorXi idx = multi_index(flat);
  Eigen::VectorXd x(dimension());
  for (int i = 0; i < dimension(); ++i) x(i) = axes_[i].coordinate(idx(i));
  return x;
}

Eigen::VectorXd ShapeChart::wrap(const Eigen::VectorXd& x) const {
  if (x.size() != dimension()) throw Error(ErrorKind::DimensionMismatch, "chart point has the wrong size");
  Eigen::VectorXd y = x;
  for (int i = 0; i < dimension(); ++i) {
    const auto& a = axes_[i];
    if (a.boundary == Boundary::Periodic) {
      double t = std::fmod(x(i) - a.lower, a.length());
      if (t < 0.0) t += a.length();
      if (t >= a.length()) t = 0.0;
      y(i) = a.lower + t;
    } else if (!(x(i) >= a.lower && x(i) <= a.upper)) {
      throw Error(ErrorKind::ChartExit, "point left the chart along axis " + std::to_string(i));
    }
  }
  return y;
}

bool ShapeChart::contains(const Eigen::VectorXd& x) const {
  if (x.size() != dimension()) return false;
  for (int i = 0; i < dimension(); ++i) {
    const auto& a = axes_[i];
    if (a.boundary == Boundary::Reflecting && !(x(i) >= a.lower && x(i) <= a.upper)) return false;
    if (!std::isfinite(x(i))) return false;
  }
  return true;
}

const ChartBundle& ShapeChart::bundle() const {
  if (!bundle_) throw Error(ErrorKind::InvalidArgument, "chart '" + name_ + "' has no embedding");
  return *bundle_;
}

Eigen::VectorXd ShapeChart::locate(const Configuration& q) const {
  const Eigen::VectorXd x = bundle().locate(q);
  if (!contains(x)) throw Error(ErrorKind::OutOfChart, "shape lies outside chart '" + name_ + "'");
  return wrap(x);
}

ChartPtr flat_circle_chart(int points, double radius) {
  if (!(radius > 0.0)) throw Error(ErrorKind::InvalidArgument, "radius must be positive");
  const double g = radius * radius;
  return std::make_shared<ShapeChart>("flat-circle", std::vector<ChartAxis>{{points, 0.0, kTwoPi, Boundary::Periodic}},
                                      [g](const Eigen::VectorXd&) { return Eigen::MatrixXd::Constant(1, 1, g); });
}

ChartPtr flat_torus_chart(const std::vector<int>& points, const std::vector<double>& lengths) {
  if (points.size() != lengths.size()) throw Error(ErrorKind::DimensionMismatch, "points and lengths differ in size");
  std::vector<ChartAxis> axes;
  for (std::size_t i = 0; i < points.size(); ++i) axes.push_back({points[i], 0.0, lengths[i], Boundary::Periodic});
  const int k = static_cast<int>(points.size());
  return std::make_shared<ShapeChart>("flat-torus", std::move(axes),
                                      [k](const Eigen::VectorXd&) { return Eigen::MatrixXd::Identity(k, k); });
}

Jacobi3::Jacobi3(const MassSystem& sys) {
  if (sys.particle_count() != 3) throw Error(ErrorKind::InvalidArgument, "Jacobi coordinates need N = 3");
  m1 = sys.masses()(0);
  m2 = sys.masses()(1);
  m3 = sys.masses()(2);
  mu1 = m1 * m2 / (m1 + m2);
  mu2 = (m1 + m2) * m3 / (m1 + m2 + m3);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> Jacobi3::forward(const Configuration& q) const {
  const Eigen::VectorXd com12 = (m1 * q.col(0) + m2 * q.col(1)) / (m1 + m2);
  return {std::sqrt(mu1) * (q.col(1) - q.col(0)), std::sqrt(mu2) * (q.col(2) - com12)};
}

Configuration Jacobi3::inverse(const Eigen::VectorXd& xi1, const Eigen::VectorXd& xi2) const {
  const double mt = m1 + m2 + m3;
  const Eigen::VectorXd r1 = xi1 / std::sqrt(mu1);
  const Eigen::VectorXd r2 = xi2 / std::sqrt(mu2);
  Configuration q(xi1.size(), 3);
  const Eigen::VectorXd com12 = -m3 / mt * r2;
  q.col(2) = (m1 + m2) / mt * r2;
  q.col(0) = com12 - m2 / (m1 + m2) * r1;
  q.col(1) = com12 + m1 / (m1 + m2) * r1;
  return q;
}

Eigen::MatrixXd induced_metric(const ChartBundle& bundle, const Eigen::VectorXd& x, double step) {
  const int k = static_cast<int>(x.size());
  const Configuration q = bundle.embed(x);
  std::vector<Displacement> tangents;
  for (int i = 0; i < k; ++i) {
    auto at = [&](double s) {
      Eigen::VectorXd y = x;
      y(i) += s;
      return bundle.embed(y);
    };
    const Displacement d =
        (8.0 * (at(step) - at(-step)) - (at(2 * step) - at(-2 * step))) / (12.0 * step);
    tangents.push_back(horizontal_project(bundle.system, q, d));
  }
  const double f = conformal_factor(bundle.system, bundle.spec, q);
  Eigen::MatrixXd g(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j <= i; ++j) g(i, j) = g(j, i) = f * euclidean_inner(bundle.system, tangents[i], tangents[j]);
  return g;
}

ChartPtr circle_chart(const MassSystem& sys, const ConformalFactorSpec& spec, int points, double warp) {
  if (sys.dimension() != 1 || sys.particle_count() != 3) {
    throw Error(ErrorKind::InvalidArgument, "circle chart needs d = 1 and N = 3");
  }
  if (!(std::abs(warp) < 1.0)) throw Error(ErrorKind::InvalidArgument, "circle chart warp must satisfy |warp| < 1");
  const Jacobi3 jac(sys);
  ChartBundle bundle{sys, spec, {}, {}};
  bundle.embed = [jac, warp](const Eigen::VectorXd& x) {
    const double theta = x(0) + warp * std::sin(x(0));
    return jac.inverse(Eigen::VectorXd::Constant(1, std::cos(theta)), Eigen::VectorXd::Constant(1, std::sin(theta)));
  };
  bundle.locate = [jac, warp](const Configuration& q) {
    const auto [xi1, xi2] = jac.forward(q);
    if (std::hypot(xi1(0), xi2(0)) < 1e-150) throw Error(ErrorKind::DegenerateShape, "total collision has no shape");
    const double theta = wrap_angle(std::atan2(xi2(0), xi1(0)));
    double s = theta;
    for (int it = 0; it < 60 && warp != 0.0; ++it) {
      const double ds = (s + warp * std::sin(s) - theta) / (1.0 + warp * std::cos(s));
      s -= ds;
      if (std::abs(ds) < 1e-15) break;
    }
    return Eigen::VectorXd::Constant(1, wrap_angle(s));
  };
  auto metric = [bundle](const Eigen::VectorXd& x) { return induced_metric(bundle, x); };
  return std::make_shared<ShapeChart>("circle", std::vector<ChartAxis>{{points, 0.0, kTwoPi, Boundary::Periodic}},
                                      metric, bundle);
}

ChartPtr triangle_chart(const MassSystem& sys, const ConformalFactorSpec& spec, int points_per_axis,
                        double half_width) {
  const int d = sys.dimension();
  if (d < 2 || sys.particle_count() != 3) throw Error(ErrorKind::InvalidArgument, "triangle chart needs d >= 2, N = 3");
  if (!(half_width > 0.0 && half_width < 0.9)) {
    throw Error(ErrorKind::InvalidArgument, "triangle chart half width must lie in (0, 0.9)");
  }
  using C = std::complex<double>;
  const Jacobi3 jac(sys);
  ChartBundle bundle{sys, spec, {}, {}};
  bundle.embed = [jac, d](const Eigen::VectorXd& x) {
    const C u(x(0), x(1));
    const C w = C(0.0, 1.0) * (1.0 + u) / (1.0 - u);
    const C z1 = 1.0 / std::sqrt(1.0 + std::norm(w));
    const C z2 = w * z1;
    Eigen::VectorXd xi1 = Eigen::VectorXd::Zero(d), xi2 = Eigen::VectorXd::Zero(d);
    xi1(0) = z1.real();
    xi1(1) = z1.imag();
    xi2(0) = z2.real();
    xi2(1) = z2.imag();
    return jac.inverse(xi1, xi2);
  };
  bundle.locate = [jac, d](const Configuration& q) {
    const auto [xi1, xi2] = jac.forward(q);
    C z1, z2;
    if (d == 2) {
      z1 = C(xi1(0), xi1(1));
      z2 = C(xi2(0), xi2(1));
    } else {
      const double n1 = xi1.norm();
      if (n1 < 1e-150) throw Error(ErrorKind::OutOfChart, "first Jacobi vector vanishes");
      const Eigen::VectorXd e1 = xi1 / n1;
      const Eigen::VectorXd perp = xi2 - xi2.dot(e1) * e1;
      z1 = C(n1, 0.0);
      z2 = C(xi2.dot(e1), perp.norm());
    }
    if (std::abs(z1) < 1e-150) throw Error(ErrorKind::OutOfChart, "first Jacobi vector vanishes");
    const C w = z2 / z1;
    if (!(w.imag() > 0.0)) throw Error(ErrorKind::OutOfChart, "triangle orientation lies outside the chart");
    const C u = (w - C(0.0, 1.0)) / (w + C(0.0, 1.0));
    Eigen::VectorXd x(2);
    x << u.real(), u.imag();
    return x;
  };
  auto metric = [bundle](const Eigen::VectorXd& x) { return induced_metric(bundle, x); };
  const ChartAxis axis{points_per_axis, -half_width, half_width, Boundary::Reflecting};
  return std::make_shared<ShapeChart>("triangle", std::vector<ChartAxis>{axis, axis}, metric, bundle);
}

Eigen::VectorXd locate_by_best_match(const ShapeChart& chart, const Configuration& q, const Eigen::VectorXd& guess,
                                     double tolerance) {
  const ChartBundle& b = chart.bundle();
  const double l = std::sqrt(inertia_scalar(b.system, q));
  auto objective = [&](const Eigen::VectorXd& x) {
    const double r = best_match_align(b.system, q, b.embed(x)).residual / l;
    return r * r;
  };
  const int k = chart.dimension();
  Eigen::VectorXd x = guess;
  const double h = 1e-4;
  for (int it = 0; it < 50; ++it) {
    const double f0 = objective(x);
    Eigen::VectorXd grad(k);
    Eigen::MatrixXd hess(k, k);
    for (int i = 0; i < k; ++i) {
      Eigen::VectorXd ei = Eigen::VectorXd::Unit(k, i) * h;
      const double fp = objective(x + ei), fm = objective(x - ei);
      grad(i) = (fp - fm) / (2 * h);
      hess(i, i) = (fp - 2 * f0 + fm) / (h * h);
      for (int j = 0; j < i; ++j) {
        Eigen::VectorXd ej = Eigen::VectorXd::Unit(k, j) * h;
        hess(i, j) = hess(j, i) =
            (objective(x + ei + ej) - objective(x + ei - ej) - objective(x - ei + ej) + objective(x - ei - ej)) /
            (4 * h * h);
      }
    }
    Eigen::VectorXd step = -hess.ldlt().solve(grad);
    // Backtrack if the Newton step does not decrease the objective.
    double scale = 1.0;
    while (scale > 1e-6 && objective(x + scale * step) > f0) scale *= 0.5;
    x += scale * step;
    if (scale * step.norm() < tolerance) break;
  }
  return chart.wrap(x);
}

WaveFunction::WaveFunction(ChartPtr c, Eigen::VectorXcd v, double h) : chart(std::move(c)), values(std::move(v)), hbar(h) {
  if (!chart) throw Error(ErrorKind::InvalidArgument, "wave function needs a chart");
  if (values.size() != chart->size()) throw Error(ErrorKind::DimensionMismatch, "wave function size differs from chart");
  if (!(hbar > 0.0)) throw Error(ErrorKind::InvalidArgument, "hbar must be positive");
  if (!values.allFinite()) throw Error(ErrorKind::InvalidArgument, "wave function has non-finite values");
}

double WaveFunction::norm() const { return std::sqrt((values.cwiseAbs2().array() * chart->weights().array()).sum()); }

WaveFunction WaveFunction::normalized() const {
  const double n = norm();
  if (!(n > 0.0)) throw Error(ErrorKind::ZeroNorm, "cannot normalize a zero wave function");
  return WaveFunction(chart, values / n, hbar);
}

std::complex<double> WaveFunction::operator()(const Eigen::VectorXd& x, Interpolation mode) const {
  if (mode == Interpolation::Fourier) {
    if (chart->dimension() != 1 || !chart->periodic(0)) {
      throw Error(ErrorKind::InvalidArgument, "Fourier interpolation needs a one-dimensional periodic chart");
    }
    return fourier_interpolate(*chart, values, x(0));
  }
  return interpolate(*chart, values, x);
}

WaveFunction sample_wavefunction(const ChartPtr& chart,
                                 const std::function<std::complex<double>(const Eigen::VectorXd&)>& fn, double hbar) {
  Eigen::VectorXcd v(chart->size());
  for (int p = 0; p < chart->size(); ++p) v(p) = fn(chart->point(p));
  return WaveFunction(chart, std::move(v), hbar);
}

AxisStencil lagrange_stencil(const ChartAxis& axis, double x) {
  const double offset = axis.boundary == Boundary::Periodic ? 0.0 : 0.5;
  const double s = (x - axis.lower) / axis.spacing() - offset;
  const int i = static_cast<int>(std::floor(s));
  const double t = s - i;
  AxisStencil st;
  for (int j = 0; j < 4; ++j) {
    const int raw = i - 1 + j;
    st.index[j] = axis.fold(raw);
    st.parity[j] = axis.boundary == Boundary::Reflecting && (raw < 0 || raw >= axis.points) ? -1.0 : 1.0;
  }
  st.weight[0] = -t * (t - 1) * (t - 2) / 6.0;
  st.weight[1] = (t + 1) * (t - 1) * (t - 2) / 2.0;
  st.weight[2] = -(t + 1) * t * (t - 2) / 2.0;
  st.weight[3] = (t + 1) * t * (t - 1) / 6.0;
  return st;
}

namespace {

template <typename Field>
typename Field::Scalar interpolate_impl(const ShapeChart& chart, const Field& field, const Eigen::VectorXd& x) {
  using S = typename Field::Scalar;
  if (field.size() != chart.size()) throw Error(ErrorKind::DimensionMismatch, "field size differs from chart");
  const Eigen::VectorXd y = chart.wrap(x);
  const AxisStencil s0 = lagrange_stencil(chart.axis(0), y(0));
  if (chart.dimension() == 1) {
    S v(0);
    for (int a = 0; a < 4; ++a) v += s0.weight[a] * field(s0.index[a]);
    return v;
  }
  const AxisStencil s1 = lagrange_stencil(chart.axis(1), y(1));
  const int n0 = chart.axis(0).points;
  S v(0);
  for (int b = 0; b < 4; ++b) {
    S row(0);
    for (int a = 0; a < 4; ++a) row += s0.weight[a] * field(s0.index[a] + n0 * s1.index[b]);
    v += s1.weight[b] * row;
  }
  return v;
}

}  // namespace

double interpolate(const ShapeChart& chart, const Eigen::VectorXd& field, const Eigen::VectorXd& x) {
  return interpolate_impl(chart, field, x);
}

std::complex<double> interpolate(const ShapeChart& chart, const Eigen::VectorXcd& field, const Eigen::VectorXd& x) {
  return interpolate_impl(chart, field, x);
}

std::complex<double> fourier_interpolate(const ShapeChart& chart, const Eigen::VectorXcd& field, double x) {
  const ChartAxis& a = chart.axis(0);
  const int n = a.points;
  const double h = a.spacing();
  const double s = (chart.wrap(Eigen::VectorXd::Constant(1, x))(0) - a.lower) / h;
  std::complex<double> v(0.0, 0.0);
  for (int j = 0; j < n; ++j) {
    // Periodic sinc kernel; the Nyquist mode enters as a cosine for even n.
    const double y = std::numbers::pi * (s - j) / n;  // half of the angular offset
    const double sy = std::sin(y);
    double kernel = 1.0;
    if (sy != 0.0) kernel = (n % 2 == 0) ? std::sin(n * y) * std::cos(y) / (n * sy) : std::sin(n * y) / (n * sy);
    v += kernel * field(j);
  }
  return v;
}

}  // namespace shapedyn
