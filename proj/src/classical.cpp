#include "shapedyn/classical.hpp"
#include <algorithm>

#include <cmath>
#include <sstream>
#include <string>

namespace shapedyn {

namespace {

double grad_dot(const Configuration& grad, const Displacement& v) { return grad.cwiseProduct(v).sum(); }

std::string describe(const Configuration& q) {
  std::ostringstream os;
  os.precision(17);
  os << '[';
  for (int a = 0; a < q.cols(); ++a) {
    os << (a ? ", [" : "[");
    for (int i = 0; i < q.rows(); ++i) os << (i ? ", " : "") << q(i, a);
    os << ']';
  }
  os << ']';
  return os.str();
}

// f and its gradient, with domain failures reported as a singularity at time t.
FactorDerivatives factor_at(const MassSystem& sys, const ConformalFactorSpec& spec, const Configuration& q, double t) {
  try {
    return conformal_factor_derivatives(sys, spec, q);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::CoincidentPair || e.kind() == ErrorKind::DegenerateShape) {
      throw SingularityError(t, "conformal factor is singular at t=" + std::to_string(t) + ", q=" + describe(q) + " (" + e.what() + ")");
    }
    throw;
  }
}

Displacement acceleration(const MassSystem& sys, const FactorDerivatives& fd, const Displacement& v) {
  const double v2 = (v.cwiseAbs2() * sys.masses()).sum();
  const double fv = grad_dot(fd.gradient, v);
  Displacement a = 0.5 * v2 * fd.gradient * sys.masses().cwiseInverse().asDiagonal() - fv * v;
  return a / fd.value;
}

void check_step(double T, double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw Error(ErrorKind::InvalidArgument, "step size must be positive");
  if (!(T >= 0.0) || !std::isfinite(T)) throw Error(ErrorKind::InvalidArgument, "duration must be non-negative");
}

int step_count(double T, double h) { return static_cast<int>(std::ceil(T / h - 1e-9)); }

}  // namespace

Displacement geodesic_rhs(const MassSystem& sys, const ConformalFactorSpec& spec, const Configuration& q,
                          const Displacement& v) {
  sys.check(v, "velocity");
  return acceleration(sys, conformal_factor_derivatives(sys, spec, q), v);
}

Configuration conformal_gradient_fd(const MassSystem& sys, const ConformalFactorSpec& spec, const Configuration& q,
                                    double h) {
  Configuration grad(q.rows(), q.cols());
  for (Eigen::Index a = 0; a < q.cols(); ++a) {
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
      Configuration p = q, m = q;
      p(i, a) += h;
      m(i, a) -= h;
      grad(i, a) = (conformal_factor(sys, spec, p) - conformal_factor(sys, spec, m)) / (2 * h);
    }
  }
  return grad;
}

MomentumTriple conserved_momenta(const MassSystem& sys, const Configuration& q, const Displacement& v) {
  sys.check(q);
  sys.check(v, "velocity");
  const auto& m = sys.masses();
  MomentumTriple out;
  out.P = v * m;
  out.D = (q.cwiseProduct(v).colwise().sum().transpose().cwiseProduct(m)).sum();
  switch (sys.dimension()) {
    case 1: out.J = Eigen::VectorXd(0); break;
    case 2: {
      out.J = Eigen::VectorXd::Zero(1);
      for (int a = 0; a < sys.particle_count(); ++a) out.J(0) += m(a) * (q(0, a) * v(1, a) - q(1, a) * v(0, a));
      break;
    }
    default: {
      Eigen::Vector3d j = Eigen::Vector3d::Zero();
      for (int a = 0; a < sys.particle_count(); ++a) {
        j += m(a) * Eigen::Vector3d(q.col(a)).cross(Eigen::Vector3d(v.col(a)));
      }
      out.J = j;
    }
  }
  return out;
}

double normalized_momentum(const MassSystem& sys, const Configuration& q, const Displacement& v) {
  const auto mom = conserved_momenta(sys, q, v);
  const double speed = euclidean_norm(sys, v);
  const double l = std::sqrt(inertia_scalar(sys, q));
  if (speed == 0.0) return 0.0;
  double worst = mom.P.norm() / (std::sqrt(sys.total_mass()) * speed);
  if (mom.J.size() > 0) worst = std::max(worst, mom.J.norm() / (l * speed));
  return std::max(worst, std::abs(mom.D) / (l * speed));
}

double g_speed(const MassSystem& sys, const ConformalFactorSpec& spec, const Configuration& q, const Displacement& v) {
  return std::sqrt(conformal_factor(sys, spec, q)) * euclidean_norm(sys, v);
}

std::vector<GeodesicState> integrate_geodesic(const MassSystem& sys, const ConformalFactorSpec& spec,
                                              const Configuration& q0, const Displacement& v0, double T, double h,
                                              const IntegrationOptions& options) {
  sys.check(q0);
  sys.check(v0, "velocity");
  check_step(T, h);
  const double f0 = factor_at(sys, spec, q0, 0.0).value;
  const int steps = step_count(T, h);
  const int stride = std::max(1, options.save_stride);

  auto rhs = [&](const Configuration& q, const Displacement& v, double t) {
    const FactorDerivatives fd = factor_at(sys, spec, q, t);
    if (!(fd.value <= options.blowup_ratio * f0)) {
      throw SingularityError(t, "conformal factor blew up at t=" + std::to_string(t) + ", q=" + describe(q));
    }
    return acceleration(sys, fd, v);
  };

  std::vector<GeodesicState> out;
  out.reserve(steps / stride + 2);
  GeodesicState s{0.0, q0, v0};
  out.push_back(s);
  for (int k = 0; k < steps; ++k) {
    const double dt = std::min(h, T - k * h);
    const double t = k * h;
    const Displacement a1 = rhs(s.q, s.v, t);
    const Configuration q2 = s.q + 0.5 * dt * s.v;
    const Displacement v2 = s.v + 0.5 * dt * a1;
    const Displacement a2 = rhs(q2, v2, t + 0.5 * dt);
    const Configuration q3 = s.q + 0.5 * dt * v2;
    const Displacement v3 = s.v + 0.5 * dt * a2;
    const Displacement a3 = rhs(q3, v3, t + 0.5 * dt);
    const Configuration q4 = s.q + dt * v3;
    const Displacement v4 = s.v + dt * a3;
    const Displacement a4 = rhs(q4, v4, t + dt);
    s.q += dt / 6.0 * (s.v + 2.0 * v2 + 2.0 * v3 + v4);
    s.v += dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
    s.t = (k + 1 == steps) ? T : (k + 1) * h;
    if ((k + 1) % stride == 0 || k + 1 == steps) out.push_back(s);
  }
  rhs(s.q, s.v, s.t);
  return out;
}

std::vector<GeodesicState> integrate_horizontal_geodesic(const MassSystem& sys, const ConformalFactorSpec& spec,
                                                         const Configuration& q0, const Displacement& v0, double T,
                                                         double h, const IntegrationOptions& options) {
  return integrate_geodesic(sys, spec, q0, horizontal_project(sys, q0, v0), T, h, options);
}

std::vector<NewtonianState> newton_time_reparam(const MassSystem& sys, const ConformalFactorSpec& spec,
                                                const std::vector<GeodesicState>& trajectory) {
  std::vector<NewtonianState> out;
  if (trajectory.empty()) return out;
  const double v = g_speed(sys, spec, trajectory.front().q, trajectory.front().v);
  if (!(v > 0.0)) throw Error(ErrorKind::InvalidArgument, "time change needs a moving trajectory");
  out.reserve(trajectory.size());

  double t_prime = 0.0;
  double prev_rate = 0.0, prev_slope = 0.0;
  for (std::size_t k = 0; k < trajectory.size(); ++k) {
    const auto& s = trajectory[k];
    const FactorDerivatives fd = conformal_factor_derivatives(sys, spec, s.q);
    const double rate = v / (std::sqrt(2.0) * fd.value);
    const double slope = -rate / fd.value * grad_dot(fd.gradient, s.v);
    if (k > 0) {
      const double h = s.t - trajectory[k - 1].t;
      t_prime += 0.5 * h * (prev_rate + rate) + h * h / 12.0 * (prev_slope - slope);
    }
    prev_rate = rate;
    prev_slope = slope;
    NewtonianState n;
    n.t_prime = t_prime;
    n.q = s.q;
    n.v = s.v / rate;
    n.energy = 0.5 * (n.v.cwiseAbs2() * sys.masses()).sum() - fd.value;
    out.push_back(std::move(n));
  }
  return out;
}

double newtonian_energy(const MassSystem& sys, const ConformalFactorSpec& spec, const Configuration& q,
                        const Displacement& v) {
  return 0.5 * (v.cwiseAbs2() * sys.masses()).sum() - conformal_factor(sys, spec, q);
}

std::vector<NewtonianState> integrate_newtonian(const MassSystem& sys, const ConformalFactorSpec& spec,
                                                const Configuration& q0, const Displacement& v0, double T, double h,
                                                const IntegrationOptions& options) {
  sys.check(q0);
  sys.check(v0, "velocity");
  check_step(T, h);
  const Eigen::VectorXd inv_m = sys.masses().cwiseInverse();
  const int steps = step_count(T, h);
  const int stride = std::max(1, options.save_stride);

  FactorDerivatives fd = factor_at(sys, spec, q0, 0.0);
  const double f0 = fd.value;
  auto state = [&](double t, const Configuration& q, const Displacement& v) {
    NewtonianState n;
    n.t_prime = t;
    n.q = q;
    n.v = v;
    n.energy = 0.5 * (v.cwiseAbs2() * sys.masses()).sum() - fd.value;
    return n;
  };

  std::vector<NewtonianState> out;
  out.reserve(steps / stride + 2);
  Configuration q = q0;
  Displacement v = v0;
  Displacement a = fd.gradient * inv_m.asDiagonal();
  out.push_back(state(0.0, q, v));
  for (int k = 0; k < steps; ++k) {
    const double dt = std::min(h, T - k * h);
    const double t = (k + 1 == steps) ? T : (k + 1) * h;
    v += 0.5 * dt * a;
    q += dt * v;
    fd = factor_at(sys, spec, q, t);
    if (!(fd.value <= options.blowup_ratio * f0)) {
      throw SingularityError(t, "potential blew up at t'=" + std::to_string(t) + ", q=" + describe(q));
    }
    a = fd.gradient * inv_m.asDiagonal();
    v += 0.5 * dt * a;
    if ((k + 1) % stride == 0 || k + 1 == steps) out.push_back(state(t, q, v));
  }
  return out;
}

double shape_distance(const MassSystem& sys, const Configuration& q1, const Configuration& q2) {
  const double l = std::sqrt(inertia_scalar(sys, q1));
  if (l < std::sqrt(kDegenerateInertia)) throw Error(ErrorKind::DegenerateShape, "shape distance to a coincident point");
  return best_match_align(sys, q1, q2).residual / l;
}

std::vector<PathSample> as_path(const std::vector<GeodesicState>& trajectory) {
  std::vector<PathSample> out;
  out.reserve(trajectory.size());
  for (const auto& s : trajectory) out.push_back({s.t, s.q, s.v});
  return out;
}

std::vector<PathSample> as_path(const std::vector<NewtonianState>& trajectory) {
  std::vector<PathSample> out;
  out.reserve(trajectory.size());
  for (const auto& s : trajectory) out.push_back({s.t_prime, s.q, s.v});
  return out;
}

namespace {

struct ArcLength {
  std::vector<double> s;
  std::vector<double> speed;
};

ArcLength arc_length(const MassSystem& sys, const ConformalFactorSpec& spec, const std::vector<PathSample>& path) {
  ArcLength out;
  out.s.resize(path.size());
  out.speed.resize(path.size());
  for (std::size_t k = 0; k < path.size(); ++k) {
    out.speed[k] = shape_line_element(sys, spec, path[k].q, path[k].v);
    out.s[k] = k == 0 ? 0.0 : out.s[k - 1] + 0.5 * (path[k].t - path[k - 1].t) * (out.speed[k] + out.speed[k - 1]);
  }
  return out;
}

// Cubic Hermite basis on [0, 1].
struct Hermite {
  double h00, h10, h01, h11, d00, d10, d01, d11;
  explicit Hermite(double u) {
    const double u2 = u * u, u3 = u2 * u;
    h00 = 2 * u3 - 3 * u2 + 1;
    h10 = u3 - 2 * u2 + u;
    h01 = -2 * u3 + 3 * u2;
    h11 = u3 - u2;
    d00 = 6 * u2 - 6 * u;
    d10 = 3 * u2 - 4 * u + 1;
    d01 = -6 * u2 + 6 * u;
    d11 = 3 * u2 - 2 * u;
  }
};

Configuration sample_at(const std::vector<PathSample>& path, const ArcLength& arc, double target) {
  std::size_t k = std::upper_bound(arc.s.begin(), arc.s.end(), target) - arc.s.begin();
  k = std::clamp<std::size_t>(k, 1, path.size() - 1) - 1;
  const double dt = path[k + 1].t - path[k].t;
  const double s0 = arc.s[k], s1 = arc.s[k + 1];
  const double m0 = arc.speed[k] * dt, m1 = arc.speed[k + 1] * dt;
  double u = s1 > s0 ? std::clamp((target - s0) / (s1 - s0), 0.0, 1.0) : 0.0;
  for (int it = 0; it < 8; ++it) {
    const Hermite b(u);
    const double value = b.h00 * s0 + b.h10 * m0 + b.h01 * s1 + b.h11 * m1;
    const double slope = b.d00 * s0 + b.d10 * m0 + b.d01 * s1 + b.d11 * m1;
    if (!(slope > 0.0)) break;
    u = std::clamp(u - (value - target) / slope, 0.0, 1.0);
  }
  const Hermite b(u);
  return b.h00 * path[k].q + b.h10 * dt * path[k].v + b.h01 * path[k + 1].q + b.h11 * dt * path[k + 1].v;
}

}  // namespace

double compare_shape_paths(const MassSystem& sys, const ConformalFactorSpec& spec, const std::vector<PathSample>& a,
                           const std::vector<PathSample>& b, int knots) {
  if (a.empty() || b.empty()) throw Error(ErrorKind::InvalidArgument, "compare_shape_paths needs nonempty paths");
  if (a.size() == 1 || b.size() == 1) return shape_distance(sys, a.front().q, b.front().q);
  const ArcLength sa = arc_length(sys, spec, a);
  const ArcLength sb = arc_length(sys, spec, b);
  const double length = std::min(sa.s.back(), sb.s.back());
  if (!(length > 0.0)) throw Error(ErrorKind::InvalidArgument, "compare_shape_paths: zero-length path");
  knots = std::max(knots, 2);
  double worst = 0.0;
  for (int k = 0; k < knots; ++k) {
    const double s = length * k / (knots - 1);
    worst = std::max(worst, shape_distance(sys, sample_at(a, sa, s), sample_at(b, sb, s)));
  }
  return worst;
}

}  // namespace shapedyn
