#pragma once

#include <complex>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "shapedyn/conformal.hpp"

namespace shapedyn {

enum class Boundary { Periodic, Reflecting };

/// One chart coordinate. Periodic axes are node-centered (x_i = lower + i h),
/// reflecting axes are cell-centered (x_i = lower + (i + 1/2) h) with mirror
/// ghost cells, which gives a zero-flux wall at lower and upper.
struct ChartAxis {
  int points = 0;
  double lower = 0.0;
  double upper = 1.0;
  Boundary boundary = Boundary::Periodic;

  double spacing() const { return (upper - lower) / points; }
  double length() const { return upper - lower; }
  double coordinate(int i) const {
    return lower + (i + (boundary == Boundary::Periodic ? 0.0 : 0.5)) * spacing();
  }
  /// Grid index of a (possibly out of range) neighbor, folded by the boundary rule.
  int fold(int i) const {
    if (boundary == Boundary::Periodic) return ((i % points) + points) % points;
    if (i < 0) return -1 - i;
    if (i >= points) return 2 * points - 1 - i;
    return i;
  }
};

/// The part of a chart that ties it to absolute configurations: an embedding
/// section u -> q(u) and its inverse on the fiber, q -> u.
struct ChartBundle {
  MassSystem system;
  ConformalFactorSpec spec;
  std::function<Configuration(const Eigen::VectorXd&)> embed;
  std::function<Eigen::VectorXd(const Configuration&)> locate;
};

/// A coordinate patch of shape space with a rectangular grid and the metric
/// g_B sampled at every node. Points are flattened with axis 0 fastest.
class ShapeChart {
 public:
  using MetricFunction = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

  ShapeChart(std::string name, std::vector<ChartAxis> axes, MetricFunction metric,
             std::optional<ChartBundle> bundle = std::nullopt);

  const std::string& name() const { return name_; }
  int dimension() const { return static_cast<int>(axes_.size()); }
  const std::vector<ChartAxis>& axes() const { return axes_; }
  const ChartAxis& axis(int i) const { return axes_[i]; }
  int size() const { return size_; }
  double cell_volume() const { return cell_volume_; }
  bool periodic(int axis) const { return axes_[axis].boundary == Boundary::Periodic; }

  int index(int i0, int i1 = 0) const { return axes_[0].fold(i0) + (dimension() > 1 ? axes_[0].points * axes_[1].fold(i1) : 0); }
  Eigen::VectorXi multi_index(int flat) const;
  Eigen::VectorXd point(int flat) const;

  /// g_ij at node `flat`, its inverse, and sqrt(det g).
  const Eigen::MatrixXd& metric(int flat) const { return metric_[flat]; }
  const Eigen::MatrixXd& inverse_metric(int flat) const { return inverse_metric_[flat]; }
  double sqrt_det(int flat) const { return sqrt_det_(flat); }
  /// sqrt(det g) times the cell volume at every node: the discrete volume form.
  const Eigen::VectorXd& weights() const { return weights_; }
  double total_volume() const { return weights_.sum(); }

  /// Metric at an arbitrary point from the defining function.
  Eigen::MatrixXd metric_at(const Eigen::VectorXd& x) const { return metric_fn_(x); }

  /// Wraps periodic coordinates into [lower, upper). Throws ChartExit if a
  /// reflecting coordinate is outside its interval.
  Eigen::VectorXd wrap(const Eigen::VectorXd& x) const;
  bool contains(const Eigen::VectorXd& x) const;

  bool has_bundle() const { return bundle_.has_value(); }
  const ChartBundle& bundle() const;
  Configuration embed(const Eigen::VectorXd& x) const { return bundle().embed(x); }
  /// Chart coordinates of the shape of q; throws OutOfChart outside the patch.
  Eigen::VectorXd locate(const Configuration& q) const;

 private:
  std::string name_;
  std::vector<ChartAxis> axes_;
  MetricFunction metric_fn_;
  std::optional<ChartBundle> bundle_;
  int size_ = 0;
  double cell_volume_ = 1.0;
  std::vector<Eigen::MatrixXd> metric_;
  std::vector<Eigen::MatrixXd> inverse_metric_;
  Eigen::VectorXd sqrt_det_;
  Eigen::VectorXd weights_;
};

using ChartPtr = std::shared_ptr<const ShapeChart>;

/// Circle of the given radius, angle in [0, 2 pi), metric radius^2.
ChartPtr flat_circle_chart(int points, double radius = 1.0);

/// Flat periodic box [0, lengths_i) with the identity metric (k = 1 or 2).
ChartPtr flat_torus_chart(const std::vector<int>& points, const std::vector<double>& lengths);

/// Jacobi coordinates of three bodies: xi1 = sqrt(mu1) (q2 - q1),
/// xi2 = sqrt(mu2) (q3 - com12); sum m |q - com|^2 = |xi1|^2 + |xi2|^2.
struct Jacobi3 {
  explicit Jacobi3(const MassSystem& sys);
  std::pair<Eigen::VectorXd, Eigen::VectorXd> forward(const Configuration& q) const;
  /// Configuration with center of mass at the origin.
  Configuration inverse(const Eigen::VectorXd& xi1, const Eigen::VectorXd& xi2) const;

  double m1, m2, m3, mu1, mu2;
};

/// Shape space of three bodies on a line: the unit circle of Jacobi vectors,
/// theta = atan2(xi2, xi1). With f_b the metric is exactly 1. A nonzero warp
/// reparametrizes theta = s + warp sin(s), |warp| < 1, which makes the
/// metric nonuniform.
ChartPtr circle_chart(const MassSystem& sys, const ConformalFactorSpec& spec, int points, double warp = 0.0);

/// Shape space of planar triangles (d = 2 or 3, N = 3) around the
/// equilateral shape. With z1, z2 the Jacobi vectors as complex numbers,
/// w = z2/z1 and u = (w - i)/(w + i); the chart is u in [-a, a]^2 with
/// reflecting walls and u = 0 the equilateral triangle. With f_b the metric
/// is (1 + |u|^2)^-2 delta, a sphere of radius 1/2.
ChartPtr triangle_chart(const MassSystem& sys, const ConformalFactorSpec& spec, int points_per_axis,
                        double half_width = 0.5);

/// Metric induced on chart coordinates by an embedding section:
/// g_ij = f <(d_i q)_perp, (d_j q)_perp>_e, derivatives by fourth-order
/// central differences with the given step.
Eigen::MatrixXd induced_metric(const ChartBundle& bundle, const Eigen::VectorXd& x, double step = 1e-3);

/// Locates the shape of q by minimizing the best-match shape distance to the
/// embedding section, starting from `guess`. Independent of the chart's
/// analytic locate; used to cross-check it.
Eigen::VectorXd locate_by_best_match(const ShapeChart& chart, const Configuration& q, const Eigen::VectorXd& guess,
                                     double tolerance = 1e-12);

enum class Interpolation { Lagrange, Fourier };

/// Complex amplitude per chart node. The density |psi|^2 is taken with the
/// chart volume form, so the norm is sqrt(sum |psi_i|^2 w_i).
struct WaveFunction {
  ChartPtr chart;
  Eigen::VectorXcd values;
  double hbar = 1.0;

  WaveFunction() = default;
  WaveFunction(ChartPtr c, Eigen::VectorXcd v, double h = 1.0);

  double norm() const;
  WaveFunction normalized() const;
  Eigen::VectorXd density() const { return values.cwiseAbs2(); }

  /// Value at an off-grid point.
  std::complex<double> operator()(const Eigen::VectorXd& x, Interpolation mode = Interpolation::Lagrange) const;
};

WaveFunction sample_wavefunction(const ChartPtr& chart, const std::function<std::complex<double>(const Eigen::VectorXd&)>& fn,
                                 double hbar = 1.0);

/// Stencil and weights for fourth-order Lagrange interpolation along one axis.
/// parity is -1 for mirror ghosts across a reflecting wall; fields that are
/// odd across the wall (normal derivatives, normal currents) use it.
struct AxisStencil {
  int index[4];
  double weight[4];
  double parity[4];
};
AxisStencil lagrange_stencil(const ChartAxis& axis, double x);

/// Fourth-order Lagrange interpolation of a nodal field (one value per node).
double interpolate(const ShapeChart& chart, const Eigen::VectorXd& field, const Eigen::VectorXd& x);
std::complex<double> interpolate(const ShapeChart& chart, const Eigen::VectorXcd& field, const Eigen::VectorXd& x);

/// Trigonometric interpolation on a one-dimensional periodic chart.
std::complex<double> fourier_interpolate(const ShapeChart& chart, const Eigen::VectorXcd& field, double x);

}  // namespace shapedyn
