#include "shapedyn/quantum.hpp"

#include <algorithm>
#include <cmath>

namespace shapedyn {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;
using Complex = std::complex<double>;

// Staggered fourth-order difference at face i + 1/2 of `axis`:
// (27 (psi_{i+1} - psi_i) - (psi_{i+2} - psi_{i-1})) / (24 h).
constexpr double kFaceCoeff[4] = {1.0, -27.0, 27.0, -1.0};
// Face interpolation of a nodal coefficient.
constexpr double kFaceAverage[4] = {-1.0 / 16, 9.0 / 16, 9.0 / 16, -1.0 / 16};
// Central fourth-order derivative at a node, offsets -2..2.
constexpr double kCentral[5] = {1.0, -8.0, 0.0, 8.0, -1.0};
// Central sixth-order derivative at a node, offsets -3..3, over 60 h.
constexpr double kCentral6[7] = {-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0};

int neighbour(const ShapeChart& chart, int flat, int axis, int offset) {
  const Eigen::VectorXi idx = chart.multi_index(flat);
  if (chart.dimension() == 1) return chart.axis(0).fold(idx(0) + offset);
  if (axis == 0) return chart.index(idx(0) + offset, idx(1));
  return chart.index(idx(0), idx(1) + offset);
}

// -1 when the neighbour is a mirror ghost across a reflecting wall.
double ghost_parity(const ShapeChart& chart, int flat, int axis, int offset) {
  const ChartAxis& a = chart.axis(axis);
  const int raw = chart.multi_index(flat)(axis) + offset;
  return a.boundary == Boundary::Reflecting && (raw < 0 || raw >= a.points) ? -1.0 : 1.0;
}

// Lagrange interpolation of a nodal field with the given parity across the
// walls of each axis (odd fields flip sign in the mirror ghosts).
template <typename Field>
typename Field::Scalar interpolate_parity(const ShapeChart& c, const Field& field, const Eigen::VectorXd& x, bool odd0,
                                          bool odd1 = false) {
  using S = typename Field::Scalar;
  const Eigen::VectorXd y = c.wrap(x);
  const AxisStencil s0 = lagrange_stencil(c.axis(0), y(0));
  auto w0 = [&](int a) { return s0.weight[a] * (odd0 ? s0.parity[a] : 1.0); };
  if (c.dimension() == 1) {
    S v(0);
    for (int a = 0; a < 4; ++a) v += w0(a) * field(s0.index[a]);
    return v;
  }
  const AxisStencil s1 = lagrange_stencil(c.axis(1), y(1));
  const int n0 = c.axis(0).points;
  S v(0);
  for (int b = 0; b < 4; ++b) {
    S row(0);
    for (int a = 0; a < 4; ++a) row += w0(a) * field(s0.index[a] + n0 * s1.index[b]);
    v += s1.weight[b] * (odd1 ? s1.parity[b] : 1.0) * row;
  }
  return v;
}

// Rows of the staggered difference operator along one axis, one row per face.
Eigen::SparseMatrix<double> face_difference(const ShapeChart& chart, int axis, Eigen::VectorXd& face_coeff,
                                            const Eigen::VectorXd& nodal_coeff) {
  const ChartAxis& a = chart.axis(axis);
  const int n = a.points;
  const int faces_per_line = a.boundary == Boundary::Periodic ? n : n - 1;
  const int lines = chart.size() / n;
  Triplets t;
  face_coeff.resize(faces_per_line * lines);
  int row = 0;
  for (int p = 0; p < chart.size(); ++p) {
    const int i = chart.multi_index(p)(axis);
    if (i >= faces_per_line) continue;
    double c = 0.0;
    for (int s = 0; s < 4; ++s) {
      const int q = neighbour(chart, p, axis, s - 1);
      t.emplace_back(row, q, kFaceCoeff[s] / (24.0 * a.spacing()));
      c += kFaceAverage[s] * nodal_coeff(q);
    }
    face_coeff(row) = c;
    ++row;
  }
  Eigen::SparseMatrix<double> d(row, chart.size());
  d.setFromTriplets(t.begin(), t.end());
  return d;
}

Eigen::SparseMatrix<double> central_difference(const ShapeChart& chart, int axis) {
  const double h = chart.axis(axis).spacing();
  Triplets t;
  for (int p = 0; p < chart.size(); ++p)
    for (int s = 0; s < 5; ++s)
      if (kCentral[s] != 0.0) t.emplace_back(p, neighbour(chart, p, axis, s - 2), kCentral[s] / (12.0 * h));
  Eigen::SparseMatrix<double> d(chart.size(), chart.size());
  d.setFromTriplets(t.begin(), t.end());
  return d;
}

Eigen::VectorXd potential_or_zero(const ShapeChart& chart, const Eigen::VectorXd& v) {
  if (v.size() == 0) return Eigen::VectorXd::Zero(chart.size());
  if (v.size() != chart.size()) throw Error(ErrorKind::DimensionMismatch, "potential size differs from chart");
  return v;
}

Eigen::SparseMatrix<double> hamiltonian_matrix(const LaplaceBeltrami& lb, double hbar, const Eigen::VectorXd& v) {
  Eigen::SparseMatrix<double> a = 0.5 * hbar * hbar * lb.stiffness();
  Eigen::SparseMatrix<double> pot(lb.chart().size(), lb.chart().size());
  pot.reserve(Eigen::VectorXi::Constant(lb.chart().size(), 1));
  for (int p = 0; p < lb.chart().size(); ++p) pot.insert(p, p) = lb.weights()(p) * v(p);
  return a + pot;
}

Eigen::SparseMatrix<double> diagonal(const Eigen::VectorXd& w) {
  Eigen::SparseMatrix<double> m(w.size(), w.size());
  m.reserve(Eigen::VectorXi::Constant(w.size(), 1));
  for (Eigen::Index p = 0; p < w.size(); ++p) m.insert(p, p) = w(p);
  return m;
}

}  // namespace

LaplaceBeltrami::LaplaceBeltrami(ChartPtr chart) : chart_(std::move(chart)) {
  const ShapeChart& c = *chart_;
  const int k = c.dimension();
  stiffness_.resize(c.size(), c.size());
  for (int axis = 0; axis < k; ++axis) {
    Eigen::VectorXd nodal(c.size());
    for (int p = 0; p < c.size(); ++p) nodal(p) = c.sqrt_det(p) * c.inverse_metric(p)(axis, axis);
    Eigen::VectorXd face;
    const Eigen::SparseMatrix<double> d = face_difference(c, axis, face, nodal);
    stiffness_ += c.cell_volume() * Eigen::SparseMatrix<double>(d.transpose() * diagonal(face) * d);
  }
  if (k == 2) {
    Eigen::VectorXd mixed(c.size());
    for (int p = 0; p < c.size(); ++p) mixed(p) = c.sqrt_det(p) * c.inverse_metric(p)(0, 1);
    if (mixed.cwiseAbs().maxCoeff() > 0.0) {
      const Eigen::SparseMatrix<double> g0 = central_difference(c, 0);
      const Eigen::SparseMatrix<double> g1 = central_difference(c, 1);
      const Eigen::SparseMatrix<double> cross = g0.transpose() * diagonal(mixed) * g1;
      stiffness_ += c.cell_volume() * Eigen::SparseMatrix<double>(cross + Eigen::SparseMatrix<double>(cross.transpose()));
    }
  }
  stiffness_.prune(0.0);
}

Eigen::VectorXcd LaplaceBeltrami::apply(const Eigen::VectorXcd& psi) const {
  if (psi.size() != chart_->size()) throw Error(ErrorKind::DimensionMismatch, "field size differs from chart");
  return -(stiffness_ * psi).cwiseQuotient(weights().cast<Complex>());
}

Eigen::VectorXd LaplaceBeltrami::apply(const Eigen::VectorXd& psi) const {
  if (psi.size() != chart_->size()) throw Error(ErrorKind::DimensionMismatch, "field size differs from chart");
  return -(stiffness_ * psi).cwiseQuotient(weights());
}

Eigen::VectorXcd laplace_beltrami_apply(const ChartPtr& chart, const Eigen::VectorXcd& psi) {
  return LaplaceBeltrami(chart).apply(psi);
}

Complex inner_product(const ShapeChart& chart, const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
  return (a.conjugate().cwiseProduct(b).array() * chart.weights().array()).sum();
}

Eigen::VectorXcd apply_hamiltonian(const LaplaceBeltrami& lb, const Eigen::VectorXcd& psi, double hbar,
                                   const Eigen::VectorXd& potential) {
  const Eigen::VectorXd v = potential_or_zero(lb.chart(), potential);
  return -0.5 * hbar * hbar * lb.apply(psi) + v.cast<Complex>().cwiseProduct(psi);
}

CrankNicolson::CrankNicolson(ChartPtr chart, double dt, double hbar, Eigen::VectorXd potential)
    : lb_(std::move(chart)), dt_(dt), hbar_(hbar) {
  if (!(dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "time step must be positive");
  if (!(hbar > 0.0)) throw Error(ErrorKind::InvalidArgument, "hbar must be positive");
  const Eigen::VectorXd v = potential_or_zero(lb_.chart(), potential);
  const Eigen::SparseMatrix<Complex> a = hamiltonian_matrix(lb_, hbar, v).cast<Complex>();
  const Eigen::SparseMatrix<Complex> w = diagonal(lb_.weights()).cast<Complex>();
  const Complex tau(0.0, dt / (2.0 * hbar));
  const Eigen::SparseMatrix<Complex> implicit = w + tau * a;
  explicit_part_ = w - tau * a;
  solver_ = std::make_shared<Eigen::SparseLU<Eigen::SparseMatrix<Complex>>>();
  solver_->compute(implicit);
  if (solver_->info() != Eigen::Success) throw Error(ErrorKind::NonConvergence, "Crank-Nicolson factorization failed");
}

void CrankNicolson::step(Eigen::VectorXcd& psi) const {
  const Eigen::VectorXcd rhs = explicit_part_ * psi;
  psi = solver_->solve(rhs);
  if (solver_->info() != Eigen::Success) throw Error(ErrorKind::NonConvergence, "Crank-Nicolson solve failed");
}

WaveFunction schrodinger_evolve(const WaveFunction& psi0, double T, double dt, const Eigen::VectorXd& potential) {
  if (!(T >= 0.0)) throw Error(ErrorKind::InvalidArgument, "duration must be non-negative");
  const int steps = static_cast<int>(std::ceil(T / dt - 1e-9));
  Eigen::VectorXcd psi = psi0.values;
  if (steps > 0) {
    const double h = T / steps;
    const CrankNicolson cn(psi0.chart, h, psi0.hbar, potential);
    for (int k = 0; k < steps; ++k) cn.step(psi);
  }
  return WaveFunction(psi0.chart, std::move(psi), psi0.hbar);
}

int WaveSeries::frame_index(double t) const {
  if (frames.empty()) throw Error(ErrorKind::InvalidArgument, "empty wave-function series");
  if (frames.size() == 1) return 0;
  const double s = (t - t0) / frame_dt;
  const long k = std::lround(s);
  if (std::abs(s - static_cast<double>(k)) > 1e-9 || k < 0 || k >= static_cast<long>(frames.size())) {
    throw Error(ErrorKind::InvalidArgument, "time " + std::to_string(t) + " is not a frame of the series");
  }
  return static_cast<int>(k);
}

const WaveFunction& WaveSeries::at(double t) const { return frames[frame_index(t)]; }

WaveSeries evolve_series(const WaveFunction& psi0, double T, double frame_dt, const Eigen::VectorXd& potential) {
  const int steps = static_cast<int>(std::lround(T / frame_dt));
  if (steps < 1 || std::abs(steps * frame_dt - T) > 1e-9 * std::max(1.0, T)) {
    throw Error(ErrorKind::InvalidArgument, "T must be a whole number of frame steps");
  }
  WaveSeries out;
  out.frame_dt = frame_dt;
  out.frames.reserve(steps + 1);
  out.frames.push_back(psi0);
  const CrankNicolson cn(psi0.chart, frame_dt, psi0.hbar, potential);
  Eigen::VectorXcd psi = psi0.values;
  for (int k = 0; k < steps; ++k) {
    cn.step(psi);
    out.frames.emplace_back(psi0.chart, psi, psi0.hbar);
  }
  return out;
}

WaveSeries static_series(const WaveFunction& psi) {
  WaveSeries out;
  out.frames.push_back(psi);
  out.frame_dt = 1.0;
  return out;
}

double stationary_residual_on_chart(const WaveFunction& psi, double energy, const Eigen::VectorXd& potential) {
  const LaplaceBeltrami lb(psi.chart);
  const Eigen::VectorXcd r = apply_hamiltonian(lb, psi.values, psi.hbar, potential) - energy * psi.values;
  return std::sqrt(inner_product(*psi.chart, r, r).real() / inner_product(*psi.chart, psi.values, psi.values).real());
}

Eigenpair stationary_solve(const ChartPtr& chart, const Eigen::VectorXd& potential, StationaryTarget target,
                           double hbar, double tolerance, int max_iterations) {
  const LaplaceBeltrami lb(chart);
  const Eigen::VectorXd v = potential_or_zero(*chart, potential);
  const Eigen::SparseMatrix<double> a = hamiltonian_matrix(lb, hbar, v);
  const Eigen::SparseMatrix<double> w = diagonal(lb.weights());
  const Eigen::VectorXd& wd = lb.weights();

  auto w_norm = [&](const Eigen::VectorXd& x) { return std::sqrt((x.array().square() * wd.array()).sum()); };
  auto rayleigh = [&](const Eigen::VectorXd& x) { return x.dot(a * x) / x.dot(wd.cwiseProduct(x)); };
  auto residual = [&](const Eigen::VectorXd& x, double e) {
    const Eigen::VectorXd r = (a * x).cwiseQuotient(wd) - e * x;
    return w_norm(r) / w_norm(x);
  };

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  auto factor = [&](double sigma) {
    lu.compute(a - sigma * w);
    if (lu.info() != Eigen::Success) {
      lu.compute(a - (sigma * (1 + 1e-10) + 1e-12) * w);
      if (lu.info() != Eigen::Success) throw Error(ErrorKind::NonConvergence, "shifted operator is singular");
    }
  };

  double sigma = target.lowest ? v.minCoeff() - 1.0 : target.energy;
  factor(sigma);
  Eigen::VectorXd x(chart->size());
  for (int p = 0; p < chart->size(); ++p) x(p) = 1.0 + 0.5 * std::sin(1.3 * p + 0.2) + 0.3 * std::cos(0.71 * p);
  x /= w_norm(x);

  bool refining = false;
  Eigenpair out;
  for (int it = 1; it <= max_iterations; ++it) {
    Eigen::VectorXd y = lu.solve(wd.cwiseProduct(x));
    if (lu.info() != Eigen::Success || !y.allFinite()) throw Error(ErrorKind::NonConvergence, "inverse iteration failed");
    x = y / w_norm(y);
    const double e = rayleigh(x);
    const double r = residual(x, e);
    out.iterations = it;
    if (r <= tolerance) {
      out.energy = e;
      out.residual = r;
      out.psi = WaveFunction(chart, x.cast<Complex>(), hbar);
      return out;
    }
    // Switch to Rayleigh-quotient shifts once the eigenvector is well resolved.
    if (r < 1e-3 * std::max(1.0, std::abs(e)) && (refining || !target.lowest || it > 3)) {
      refining = true;
      factor(e);
    }
  }
  throw Error(ErrorKind::NonConvergence, "stationary_solve did not reach the residual tolerance");
}

std::vector<Eigen::VectorXcd> nodal_gradient(const WaveFunction& psi) {
  const ShapeChart& c = *psi.chart;
  std::vector<Eigen::VectorXcd> out;
  for (int axis = 0; axis < c.dimension(); ++axis) {
    const double h = c.axis(axis).spacing();
    Eigen::VectorXcd d(c.size());
    for (int p = 0; p < c.size(); ++p) {
      Complex s(0.0, 0.0);
      for (int o = 0; o < 7; ++o)
        if (kCentral6[o] != 0.0) s += kCentral6[o] * psi.values(neighbour(c, p, axis, o - 3));
      d(p) = s / (60.0 * h);
    }
    out.push_back(std::move(d));
  }
  return out;
}

Eigen::VectorXd bohm_velocity(const WaveFunction& psi, const Eigen::VectorXd& x, VelocityForm form) {
  const ShapeChart& c = *psi.chart;
  const Complex value = interpolate(c, psi.values, x);
  const double scale = psi.values.cwiseAbs().maxCoeff();
  if (!(std::abs(value) >= kNodeTolerance * scale)) {
    throw Error(ErrorKind::NodeEncountered, "wave function vanishes at the query point");
  }
  const auto grad = nodal_gradient(psi);
  const int k = c.dimension();
  // d_i psi is odd across the walls of axis i, g^01 across both.
  Eigen::VectorXcd g(k);
  for (int i = 0; i < k; ++i) g(i) = interpolate_parity(c, grad[i], x, i == 0, i == 1);
  Eigen::MatrixXd ginv(k, k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      Eigen::VectorXd comp(c.size());
      for (int p = 0; p < c.size(); ++p) comp(p) = c.inverse_metric(p)(i, j);
      ginv(i, j) = interpolate_parity(c, comp, x, i != j, i != j);
    }
  }
  const Eigen::VectorXcd raised = ginv.cast<Complex>() * g;
  if (form == VelocityForm::Standard) return psi.hbar * (raised / value).imag();
  return psi.hbar * (std::conj(value) * raised).imag();
}

VelocityField::VelocityField(const WaveFunction& psi, VelocityForm form) : chart_(psi.chart) {
  const ShapeChart& c = *chart_;
  const int k = c.dimension();
  const auto grad = nodal_gradient(psi);
  const double tol = kNodeTolerance * psi.values.cwiseAbs().maxCoeff();
  components_.assign(k, Eigen::VectorXd::Zero(c.size()));
  node_.assign(c.size(), false);
  for (int p = 0; p < c.size(); ++p) {
    const Complex value = psi.values(p);
    Eigen::VectorXcd g(k);
    for (int i = 0; i < k; ++i) g(i) = grad[i](p);
    const Eigen::VectorXcd raised = c.inverse_metric(p).cast<Complex>() * g;
    if (form == VelocityForm::DenominatorFree) {
      for (int i = 0; i < k; ++i) components_[i](p) = psi.hbar * (std::conj(value) * raised(i)).imag();
    } else if (std::abs(value) < tol || !(tol > 0.0)) {
      node_[p] = true;
    } else {
      for (int i = 0; i < k; ++i) components_[i](p) = psi.hbar * (raised(i) / value).imag();
    }
  }
}

Eigen::VectorXd VelocityField::operator()(const Eigen::VectorXd& x) const {
  // Velocity component i is odd across the walls of axis i.
  const ShapeChart& c = *chart_;
  const Eigen::VectorXd y = c.wrap(x);
  const AxisStencil s0 = lagrange_stencil(c.axis(0), y(0));
  const int k = c.dimension();
  Eigen::VectorXd v = Eigen::VectorXd::Zero(k);
  if (k == 1) {
    for (int a = 0; a < 4; ++a) {
      if (node_[s0.index[a]]) throw Error(ErrorKind::NodeEncountered, "trajectory reached a node");
      v(0) += s0.weight[a] * s0.parity[a] * components_[0](s0.index[a]);
    }
    return v;
  }
  const AxisStencil s1 = lagrange_stencil(c.axis(1), y(1));
  const int n0 = c.axis(0).points;
  for (int b = 0; b < 4; ++b) {
    for (int a = 0; a < 4; ++a) {
      const int p = s0.index[a] + n0 * s1.index[b];
      if (node_[p]) throw Error(ErrorKind::NodeEncountered, "trajectory reached a node");
      const double w = s0.weight[a] * s1.weight[b];
      v(0) += w * s0.parity[a] * components_[0](p);
      v(1) += w * s1.parity[b] * components_[1](p);
    }
  }
  return v;
}

namespace {

int stage_stride(double dt, double frame_dt) {
  const double r = dt / (2.0 * frame_dt);
  const long m = std::lround(r);
  if (m < 1 || std::abs(r - static_cast<double>(m)) > 1e-9) {
    throw Error(ErrorKind::InvalidArgument, "RK4 step must be an even multiple of the frame spacing");
  }
  return static_cast<int>(m);
}

}  // namespace

ChartPath integrate_bohm_trajectory(const WaveSeries& series, const Eigen::VectorXd& x0, double dt, double T,
                                    VelocityForm form, int save_stride) {
  if (series.frames.empty()) throw Error(ErrorKind::InvalidArgument, "empty wave-function series");
  const ShapeChart& c = *series.frames.front().chart;
  if (!c.contains(x0)) throw Error(ErrorKind::ChartExit, "initial point lies outside the chart");
  const bool frozen = series.frames.size() == 1;
  const int m = frozen ? 0 : stage_stride(dt, series.frame_dt);
  const int steps = static_cast<int>(std::lround(T / dt));
  const int first = frozen ? 0 : series.frame_index(series.t0);
  if (!frozen && first + 2 * m * steps >= static_cast<int>(series.frames.size())) {
    throw Error(ErrorKind::InvalidArgument, "series is shorter than the requested transport");
  }
  std::vector<std::unique_ptr<VelocityField>> cache(series.frames.size());
  auto field = [&](int frame) -> const VelocityField& {
    if (!cache[frame]) cache[frame] = std::make_unique<VelocityField>(series.frames[frame], form);
    return *cache[frame];
  };

  ChartPath path;
  Eigen::VectorXd x = x0;
  path.t.push_back(series.t0);
  path.x.push_back(x);
  save_stride = std::max(1, save_stride);
  for (int s = 0; s < steps; ++s) {
    const int f0 = frozen ? 0 : first + 2 * m * s;
    const int fh = frozen ? 0 : f0 + m;
    const int f1 = frozen ? 0 : f0 + 2 * m;
    const Eigen::VectorXd k1 = field(f0)(x);
    const Eigen::VectorXd k2 = field(fh)(x + 0.5 * dt * k1);
    const Eigen::VectorXd k3 = field(fh)(x + 0.5 * dt * k2);
    const Eigen::VectorXd k4 = field(f1)(x + dt * k3);
    x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!c.contains(x)) throw Error(ErrorKind::ChartExit, "trajectory left the chart");
    if ((s + 1) % save_stride == 0 || s + 1 == steps) {
      path.t.push_back(series.t0 + (s + 1) * dt);
      path.x.push_back(x);
    }
  }
  return path;
}

Eigen::VectorXd transport_point(const std::vector<VelocityField>& fields, double frame_dt, const Eigen::VectorXd& x0,
                                double dt, double T) {
  const bool frozen = fields.size() == 1;
  const int m = frozen ? 0 : stage_stride(dt, frame_dt);
  const int steps = static_cast<int>(std::lround(T / dt));
  if (!frozen && 2 * m * steps >= static_cast<int>(fields.size())) {
    throw Error(ErrorKind::InvalidArgument, "series is shorter than the requested transport");
  }
  const ShapeChart& c = fields.front().chart();
  Eigen::VectorXd x = x0;
  for (int s = 0; s < steps; ++s) {
    const int f0 = 2 * m * s, fh = f0 + m, f1 = f0 + 2 * m;
    const Eigen::VectorXd k1 = fields[f0](x);
    const Eigen::VectorXd k2 = fields[fh](x + 0.5 * dt * k1);
    const Eigen::VectorXd k3 = fields[fh](x + 0.5 * dt * k2);
    const Eigen::VectorXd k4 = fields[f1](x + dt * k3);
    x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!c.contains(x)) throw Error(ErrorKind::ChartExit, "trajectory left the chart");
  }
  return x;
}

double continuity_residual(const WaveSeries& series, int frame) {
  if (frame < 1 || frame + 1 >= static_cast<int>(series.frames.size())) {
    throw Error(ErrorKind::InvalidArgument, "continuity residual needs an interior frame");
  }
  const WaveFunction& psi = series.frames[frame];
  const ShapeChart& c = *psi.chart;
  const double mass = psi.norm() * psi.norm();
  const Eigen::VectorXd drho =
      (series.frames[frame + 1].density() - series.frames[frame - 1].density()) / (2.0 * series.frame_dt * mass);
  const auto grad = nodal_gradient(psi);
  const int k = c.dimension();
  // sqrt(g) J^i = hbar sqrt(g) Im(psi* g^ij d_j psi)
  std::vector<Eigen::VectorXd> flux(k, Eigen::VectorXd(c.size()));
  for (int p = 0; p < c.size(); ++p) {
    Eigen::VectorXcd g(k);
    for (int i = 0; i < k; ++i) g(i) = grad[i](p);
    const Eigen::VectorXcd raised = c.inverse_metric(p).cast<Complex>() * g;
    for (int i = 0; i < k; ++i) flux[i](p) = psi.hbar * c.sqrt_det(p) * (std::conj(psi.values(p)) * raised(i)).imag() / mass;
  }
  double total = 0.0;
  for (int p = 0; p < c.size(); ++p) {
    double div = 0.0;
    for (int i = 0; i < k; ++i) {
      double s = 0.0;
      for (int o = 0; o < 7; ++o)
        if (kCentral6[o] != 0.0) s += kCentral6[o] * ghost_parity(c, p, i, o - 3) * flux[i](neighbour(c, p, i, o - 3));
      div += s / (60.0 * c.axis(i).spacing());
    }
    total += std::abs(drho(p) + div / c.sqrt_det(p)) * c.weights()(p);
  }
  return total;
}

namespace {

std::vector<double> chart_arc_length(const ShapeChart& c, const ChartPath& path) {
  std::vector<double> s(path.x.size(), 0.0);
  for (std::size_t j = 1; j < path.x.size(); ++j) {
    const Eigen::VectorXd dx = path.x[j] - path.x[j - 1];
    const Eigen::MatrixXd g = c.metric_at(c.wrap(0.5 * (path.x[j] + path.x[j - 1])));
    s[j] = s[j - 1] + std::sqrt(dx.dot(g * dx));
  }
  return s;
}

Eigen::VectorXd at_length(const ChartPath& path, const std::vector<double>& s, double target) {
  std::size_t j = std::upper_bound(s.begin(), s.end(), target) - s.begin();
  j = std::clamp<std::size_t>(j, 1, s.size() - 1);
  const double span = s[j] - s[j - 1];
  const double u = span > 0.0 ? std::clamp((target - s[j - 1]) / span, 0.0, 1.0) : 0.0;
  return (1.0 - u) * path.x[j - 1] + u * path.x[j];
}

}  // namespace

double compare_chart_paths(const ShapeChart& chart, const ChartPath& a, const ChartPath& b, int knots) {
  if (a.x.size() < 2 || b.x.size() < 2) throw Error(ErrorKind::InvalidArgument, "paths need at least two samples");
  const auto sa = chart_arc_length(chart, a);
  const auto sb = chart_arc_length(chart, b);
  const double length = std::min(sa.back(), sb.back());
  double worst = 0.0;
  for (int k = 0; k < knots; ++k) {
    const double s = length * k / (knots - 1);
    worst = std::max(worst, (at_length(a, sa, s) - at_length(b, sb, s)).norm());
  }
  return worst;
}

}  // namespace shapedyn
