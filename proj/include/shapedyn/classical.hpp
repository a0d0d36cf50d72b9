#pragma once

#include <vector>

#include "shapedyn/conformal.hpp"

namespace shapedyn {

struct GeodesicState {
  double t = 0.0;
  Configuration q;
  Displacement v;
};

/// P = sum m v, J = sum m q x v (one component in d = 2, three in d = 3, none
/// in d = 1), D = sum m q . v.
struct MomentumTriple {
  Eigen::VectorXd P;
  Eigen::VectorXd J;
  double D = 0.0;
};

struct NewtonianState {
  double t_prime = 0.0;
  Configuration q;
  Displacement v;  // dQ/dt'
  double energy = 0.0;
};

struct IntegrationOptions {
  /// Halt when f exceeds this multiple of its initial value.
  double blowup_ratio = 1e12;
  /// Keep every n-th step (the final state is always kept).
  int save_stride = 1;
};

/// Acceleration of a geodesic of g = f g_e, from the Euler-Lagrange equations
/// of L = 1/2 f |v|_e^2:
///   a_a = ( 1/2 |v|_e^2 (df/dq_a) / m_a - v_a (df . v) ) / f.
Displacement geodesic_rhs(const MassSystem& sys, const ConformalFactorSpec& spec, const Configuration& q,
                          const Displacement& v);

/// Central-difference gradient of f, for checking the analytic one.
Configuration conformal_gradient_fd(const MassSystem& sys, const ConformalFactorSpec& spec, const Configuration& q,
                                    double h = 1e-6);

MomentumTriple conserved_momenta(const MassSystem& sys, const Configuration& q, const Displacement& v);

/// Largest of |P|, |J|, |D| after dividing by L |v|_e (by sqrt(M) |v|_e for P).
double normalized_momentum(const MassSystem& sys, const Configuration& q, const Displacement& v);

/// sqrt(f) |v|_e.
double g_speed(const MassSystem& sys, const ConformalFactorSpec& spec, const Configuration& q, const Displacement& v);

/// Fixed-step RK4 integration of the geodesic equation on [0, T].
/// Throws SingularityError with the blow-up time if f leaves its domain or
/// grows past options.blowup_ratio times its initial value.
std::vector<GeodesicState> integrate_geodesic(const MassSystem& sys, const ConformalFactorSpec& spec,
                                              const Configuration& q0, const Displacement& v0, double T, double h,
                                              const IntegrationOptions& options = {});

/// Projects v0 onto the horizontal space at q0 and integrates. Horizontality
/// is not re-imposed along the way; P, J, D are left to the dynamics.
std::vector<GeodesicState> integrate_horizontal_geodesic(const MassSystem& sys, const ConformalFactorSpec& spec,
                                                         const Configuration& q0, const Displacement& v0, double T,
                                                         double h, const IntegrationOptions& options = {});

/// Time change dt'/dt = v / (sqrt(2) f) with v the initial g-speed. The
/// quadrature is the corrected trapezoid rule, exact to fourth order.
std::vector<NewtonianState> newton_time_reparam(const MassSystem& sys, const ConformalFactorSpec& spec,
                                                const std::vector<GeodesicState>& trajectory);

/// E = 1/2 |v|_e^2 - f.
double newtonian_energy(const MassSystem& sys, const ConformalFactorSpec& spec, const Configuration& q,
                        const Displacement& v);

/// Velocity-Verlet for m_a Q'' = grad_a f (potential V = -f) on [0, T].
std::vector<NewtonianState> integrate_newtonian(const MassSystem& sys, const ConformalFactorSpec& spec,
                                                const Configuration& q0, const Displacement& v0, double T, double h,
                                                const IntegrationOptions& options = {});

/// Shape distance: best-match residual of q2 onto q1 relative to the size
/// L(q1) of the target.
double shape_distance(const MassSystem& sys, const Configuration& q1, const Configuration& q2);

/// A sampled path with velocities with respect to its own parameter.
struct PathSample {
  double t = 0.0;
  Configuration q;
  Displacement v;
};

std::vector<PathSample> as_path(const std::vector<GeodesicState>& trajectory);
std::vector<PathSample> as_path(const std::vector<NewtonianState>& trajectory);

/// Reparametrizes both paths by g_B arc length, resamples them at common
/// arc-length knots by cubic Hermite interpolation and returns the largest
/// shape_distance between corresponding points. The common range is the
/// shorter of the two lengths.
double compare_shape_paths(const MassSystem& sys, const ConformalFactorSpec& spec, const std::vector<PathSample>& a,
                           const std::vector<PathSample>& b, int knots = 201);

}  // namespace shapedyn
