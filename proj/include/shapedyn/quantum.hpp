#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <memory>
#include <vector>

#include "shapedyn/chart.hpp"

namespace shapedyn {

/// Discrete Laplace-Beltrami operator Delta = -W^-1 K on a chart grid.
///
/// K is the stiffness matrix of the Dirichlet form
/// sum_ij int sqrt|g| g^ij d_i psi* d_j psi, with fourth-order staggered
/// differences for the diagonal terms and fourth-order central differences
/// for the mixed term; W is the volume form sqrt|g| times the cell volume.
/// K is symmetric positive semidefinite, so Delta is self-adjoint and
/// nonpositive in the W inner product.
class LaplaceBeltrami {
 public:
  explicit LaplaceBeltrami(ChartPtr chart);

  const ShapeChart& chart() const { return *chart_; }
  const ChartPtr& chart_ptr() const { return chart_; }
  const Eigen::SparseMatrix<double>& stiffness() const { return stiffness_; }
  const Eigen::VectorXd& weights() const { return chart_->weights(); }

  Eigen::VectorXcd apply(const Eigen::VectorXcd& psi) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& psi) const;

 private:
  ChartPtr chart_;
  Eigen::SparseMatrix<double> stiffness_;
};

Eigen::VectorXcd laplace_beltrami_apply(const ChartPtr& chart, const Eigen::VectorXcd& psi);

/// W-weighted inner product sum conj(a_i) b_i w_i.
std::complex<double> inner_product(const ShapeChart& chart, const Eigen::VectorXcd& a, const Eigen::VectorXcd& b);

/// (H psi) with H = -(hbar^2 / 2) Delta + V; an empty potential means V = 0.
Eigen::VectorXcd apply_hamiltonian(const LaplaceBeltrami& lb, const Eigen::VectorXcd& psi, double hbar,
                                   const Eigen::VectorXd& potential = {});

/// Crank-Nicolson propagator (W + i dt/(2 hbar) A) psi' = (W - i dt/(2 hbar) A) psi,
/// A = (hbar^2/2) K + W V. The scheme is the Cayley transform of a
/// W-self-adjoint operator, so the W-norm is conserved up to round-off.
class CrankNicolson {
 public:
  CrankNicolson(ChartPtr chart, double dt, double hbar = 1.0, Eigen::VectorXd potential = {});

  void step(Eigen::VectorXcd& psi) const;
  double dt() const { return dt_; }
  double hbar() const { return hbar_; }

 private:
  LaplaceBeltrami lb_;
  double dt_;
  double hbar_;
  Eigen::SparseMatrix<std::complex<double>> explicit_part_;
  std::shared_ptr<Eigen::SparseLU<Eigen::SparseMatrix<std::complex<double>>>> solver_;
};

/// psi at time T from steps of size dt (the last step is shortened to land on T).
WaveFunction schrodinger_evolve(const WaveFunction& psi0, double T, double dt, const Eigen::VectorXd& potential = {});

/// Wave functions at t0 + k frame_dt, k = 0 .. frames - 1.
struct WaveSeries {
  std::vector<WaveFunction> frames;
  double t0 = 0.0;
  double frame_dt = 0.0;

  double end_time() const { return t0 + frame_dt * (static_cast<double>(frames.size()) - 1); }
  /// Frame at time t; t must fall on a frame (within 1e-9 frame_dt). A series
  /// with one frame is static.
  const WaveFunction& at(double t) const;
  int frame_index(double t) const;
};

/// Crank-Nicolson with step frame_dt, keeping every step.
WaveSeries evolve_series(const WaveFunction& psi0, double T, double frame_dt, const Eigen::VectorXd& potential = {});

WaveSeries static_series(const WaveFunction& psi);

struct StationaryTarget {
  bool lowest = true;
  double energy = 0.0;

  static StationaryTarget ground() { return {true, 0.0}; }
  static StationaryTarget near(double e) { return {false, e}; }
};

struct Eigenpair {
  WaveFunction psi;
  double energy = 0.0;
  double residual = 0.0;
  int iterations = 0;
};

/// Shift-invert inverse iteration followed by Rayleigh-quotient refinement on
/// the real generalized problem (hbar^2/2 K + W V) x = E W x. The returned
/// state is real and W-normalized; residual = ||(H - E) psi|| / ||psi||.
Eigenpair stationary_solve(const ChartPtr& chart, const Eigen::VectorXd& potential, StationaryTarget target,
                           double hbar = 1.0, double tolerance = 1e-9, int max_iterations = 500);

double stationary_residual_on_chart(const WaveFunction& psi, double energy, const Eigen::VectorXd& potential = {});

/// Sixth-order central derivatives d_i psi at every node (mirror ghosts at walls).
std::vector<Eigen::VectorXcd> nodal_gradient(const WaveFunction& psi);

enum class VelocityForm { Standard, DenominatorFree };

inline constexpr double kNodeTolerance = 1e-12;

/// Chart velocity hbar Im(g^ij d_j psi / psi) at an off-grid point, with psi,
/// its derivatives and g^-1 interpolated from the nodes. DenominatorFree
/// drops the division: hbar Im(psi* g^ij d_j psi). Throws NodeEncountered
/// when |psi(x)| < 1e-12 max |psi|.
Eigen::VectorXd bohm_velocity(const WaveFunction& psi, const Eigen::VectorXd& x,
                              VelocityForm form = VelocityForm::Standard);

/// The velocity field of one wave function, precomputed at the nodes and
/// interpolated; cheap enough for large ensembles.
class VelocityField {
 public:
  VelocityField(const WaveFunction& psi, VelocityForm form = VelocityForm::Standard);
  /// Throws NodeEncountered if any interpolation node is below the node tolerance.
  Eigen::VectorXd operator()(const Eigen::VectorXd& x) const;
  const ShapeChart& chart() const { return *chart_; }

 private:
  ChartPtr chart_;
  std::vector<Eigen::VectorXd> components_;
  std::vector<bool> node_;
};

struct ChartPath {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> x;
};

/// RK4 transport through a wave-function series. dt must be an even
/// multiple of the frame spacing so every stage lands on a frame; a static
/// series accepts any dt.
ChartPath integrate_bohm_trajectory(const WaveSeries& series, const Eigen::VectorXd& x0, double dt, double T,
                                    VelocityForm form = VelocityForm::Standard, int save_stride = 1);

/// Same transport with velocity fields already built for every frame.
Eigen::VectorXd transport_point(const std::vector<VelocityField>& fields, double frame_dt, const Eigen::VectorXd& x0,
                                double dt, double T);

/// L1 norm (volume form) of d rho/dt + div J at an interior frame, with
/// d rho/dt from the neighbouring frames and div J = (1/sqrt g) d_i(sqrt g J^i)
/// by sixth-order differences; rho normalized to unit mass.
double continuity_residual(const WaveSeries& series, int frame);

/// Reparametrizes both chart paths by metric arc length and returns the
/// largest coordinate distance between points at equal arc length (over the
/// shorter of the two lengths). Paths must be densely sampled.
double compare_chart_paths(const ShapeChart& chart, const ChartPath& a, const ChartPath& b, int knots = 201);

}  // namespace shapedyn
