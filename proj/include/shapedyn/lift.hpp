#pragma once

#include <functional>
#include <vector>

#include "shapedyn/chart.hpp"

namespace shapedyn {

/// Wave-function gauges on absolute configuration space.
///
///   Gauge1:       Psi1(q) = psi(pi(q)), constant on fibers
///   Gauge3:       Psi3 = F Psi1, F = f^(n/4) J^(-1/2)
///   Schroedinger: Phi  = f^(-1/2) Psi3 = f^((n-2)/4) J^(-1/2) Psi1
///
/// with n = d N. In d = 3, J = L f^(7/2) sqrt(det M); for d = 1, 2 the orbit
/// volume density stands in for J (see gauge_jacobian).
enum class Gauge { Gauge1, Gauge3, Schroedinger };

const char* to_string(Gauge gauge);

/// Positive multiplier of Psi1 that defines the gauge at q.
double gauge_factor(const MassSystem& sys, const ConformalFactorSpec& spec, const Configuration& q, Gauge gauge);

/// A complex function on chart coordinates.
using ShapeFunction = std::function<std::complex<double>(const Eigen::VectorXd&)>;
/// A positive function on absolute configurations.
using PositiveField = std::function<double(const Configuration&)>;

/// Off-grid evaluation of a grid wave function.
ShapeFunction shape_function(const WaveFunction& psi, Interpolation mode = Interpolation::Lagrange);

/// A shape-space function lifted to absolute configurations through a chart
/// with an embedding, in one of the gauges, optionally times further positive
/// factors and a complex constant.
class LiftedWaveFunction {
 public:
  LiftedWaveFunction(ChartPtr chart, ShapeFunction shape, Gauge gauge, double hbar = 1.0);

  std::complex<double> operator()(const Configuration& q) const;
  /// Psi1 at q, before any gauge factor, extra factor or constant.
  std::complex<double> shape_value(const Configuration& q) const;
  /// Total real factor relative to Psi1 (gauge factor times extra factors).
  double factor(const Configuration& q) const;

  LiftedWaveFunction transformed(PositiveField f) const;
  LiftedWaveFunction scaled(std::complex<double> c) const;

  Gauge gauge() const { return gauge_; }
  double hbar() const { return hbar_; }
  const ShapeChart& chart() const { return *chart_; }
  const ChartPtr& chart_ptr() const { return chart_; }
  const MassSystem& system() const { return chart_->bundle().system; }
  const ConformalFactorSpec& spec() const { return chart_->bundle().spec; }

 private:
  ChartPtr chart_;
  ShapeFunction shape_;
  Gauge gauge_;
  double hbar_;
  std::vector<PositiveField> extra_;
  std::complex<double> scale_{1.0, 0.0};
};

LiftedWaveFunction lift_wavefunction(const WaveFunction& psi, Gauge gauge,
                                     Interpolation mode = Interpolation::Lagrange);
LiftedWaveFunction lift_function(ChartPtr chart, ShapeFunction fn, Gauge gauge, double hbar = 1.0);

/// Psi -> F Psi. Evaluation throws InvalidArgument where F is not positive.
LiftedWaveFunction gauge_transform(const LiftedWaveFunction& psi, PositiveField f);
/// Psi -> c Psi for a complex constant c != 0.
LiftedWaveFunction scaled(const LiftedWaveFunction& psi, std::complex<double> c);

/// Guiding velocity of the lifted wave function at q.
///
///   Gauge1, Gauge3:  dQ_a/dt = (hbar / (f m_a)) Im(d_a Psi / Psi)
///   Schroedinger:    dQ_a/dt = (hbar / m_a) Im(d_a Psi / Psi)
///
/// The phase gradient comes from fourth-order differences of phase ratios
/// arg(Psi(q + h e) conj(Psi(q - h e))) with h = step L(q). Throws
/// NodeEncountered when |Psi(q)| is below 1e-12 of the stencil maximum.
Displacement lifted_velocity(const LiftedWaveFunction& psi, const Configuration& q, double step = 1e-4);

/// Chart velocity of an absolute velocity v at q, by central differences of
/// the chart's locate along v.
Eigen::VectorXd project_velocity(const ShapeChart& chart, const Configuration& q, const Displacement& v,
                                 double epsilon = 1e-6);

/// V1 = -(hbar^2/2) Dhat J^(1/2) / J^(1/2), where the lifted Laplacian is
/// Dhat u = Delta_g u - <grad_g log J, grad_g u>_g. Second-order differences
/// of J^(1/2) in mass-weighted coordinates, taken in the principal-axis pose
/// of q with step step * l(q), l the smallest of L, the closest mass-weighted
/// pair distance and the thinnest principal extent.
double potential_V1(const MassSystem& sys, const ConformalFactorSpec& spec, const Configuration& q, double hbar = 1.0,
                    double step = 1e-3);

/// V2 = -(hbar^2/2) f^(n/4) Delta_g f^(-n/4) from the conformal expansion
///   Delta_g u = f^-1 (Lap u + (n/2 - 1) grad log f . grad u).
double potential_V2(const MassSystem& sys, const ConformalFactorSpec& spec, const Configuration& q, double hbar = 1.0);

/// V2 with Delta_g = f^(-n/2) d_i(f^(n/2 - 1) d_i) by nested finite differences
/// (same pose and step rule as potential_V1), Richardson-extrapolated from
/// steps h and h/2. For f_g, V2 is three or more orders of magnitude below its
/// individual terms, so the plain second-order form is not accurate enough.
double potential_V2_fd(const MassSystem& sys, const ConformalFactorSpec& spec, const Configuration& q,
                       double hbar = 1.0, double step = 4e-3);

/// Scalar curvature of g = f g_e:
///   R = -(n - 1) f^-1 (Lap log f + (n - 2)/4 |grad log f|^2).
double scalar_curvature(const MassSystem& sys, const ConformalFactorSpec& spec, const Configuration& q);

/// Scalar curvature of a metric given in coordinates, from Christoffel
/// symbols by central differences of g and their derivatives by central
/// differences of the symbols.
using MetricField = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;
double scalar_curvature_of_metric(const MetricField& g, const Eigen::VectorXd& x, double step);

/// scalar_curvature_of_metric applied to f g_e in mass-weighted coordinates.
double scalar_curvature_fd(const MassSystem& sys, const ConformalFactorSpec& spec, const Configuration& q,
                           double step = 1e-3);

/// U = f (V1 - E) - (hbar^2/8) ((n - 2)/(n - 1)) f R_g.
double schrodinger_gauge_potential_U(const MassSystem& sys, const ConformalFactorSpec& spec, const Configuration& q,
                                     double energy, double hbar = 1.0, double step = 1e-3);

/// Relative residual sqrt(sum |(H - E) Psi|^2 / sum |Psi|^2) over sample
/// configurations, with the operator selected by the gauge of psi:
///
///   Gauge1:       H1 = -(hbar^2/2) Dhat
///   Gauge3:       H3 = -(hbar^2/2) div(f^-1 grad) + V1 + V2
///   Schroedinger: -(hbar^2/2) Lap + U, where U carries E (so E enters once)
///
/// Derivatives are second-order central differences in mass-weighted
/// coordinates with the step rule of potential_V1.
double stationary_residual(const LiftedWaveFunction& psi, double energy, const std::vector<Configuration>& samples,
                           double step = 1e-2);

}  // namespace shapedyn
