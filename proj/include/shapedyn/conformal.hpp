#pragma once

// Conformal factors f turning the mass-weighted Euclidean metric g_e into a
// similarity-invariant metric g = f g_e, their analytic derivatives, and the
// quantities built from them: the best-matching line element and the volume
// density of the group orbits.

#include <cmath>
#include <string>

#include "shapedyn/geometry.hpp"

namespace shapedyn {

enum class ConformalKind { A, B, C, D, G, Constant };

inline const char* to_string(ConformalKind kind) {
  switch (kind) {
    case ConformalKind::A: return "A";
    case ConformalKind::B: return "B";
    case ConformalKind::C: return "C";
    case ConformalKind::D: return "D";
    case ConformalKind::G: return "G";
    case ConformalKind::Constant: return "Constant";
  }
  return "?";
}

template <typename Scalar>
struct ConformalFactorSpecT {
  ConformalKind kind = ConformalKind::B;
  Scalar constant = Scalar(1);  // used by Constant only

  static ConformalFactorSpecT of(ConformalKind k) { return {k, Scalar(1)}; }
  static ConformalFactorSpecT constant_value(Scalar c) {
    if (!(c > Scalar(0))) throw Error(ErrorKind::InvalidArgument, "constant conformal factor must be positive");
    return {ConformalKind::Constant, c};
  }

  /// True for the kinds that are homogeneous of degree -2.
  bool scale_invariant_metric() const { return kind != ConformalKind::Constant; }
};

using ConformalFactorSpec = ConformalFactorSpecT<double>;

/// Value, plain partial derivatives df/dq_{a,i} (d x N) and the mass-weighted
/// Laplacian sum_a (1/m_a) Laplacian_a f.
template <typename Scalar>
struct FactorDerivativesT {
  Scalar value = Scalar(0);
  ConfigurationT<Scalar> gradient;
  Scalar laplacian = Scalar(0);
};

using FactorDerivatives = FactorDerivativesT<double>;

namespace detail {

template <typename Scalar>
void require_kind_supported(const MassSystemT<Scalar>& sys, const ConformalFactorSpecT<Scalar>& spec) {
  if (spec.kind == ConformalKind::Constant && !(spec.constant > Scalar(0))) {
    throw Error(ErrorKind::InvalidArgument, "constant conformal factor must be positive");
  }
  if (spec.kind == ConformalKind::C && sys.dimension() != 3) {
    throw Error(ErrorKind::InvalidArgument, "f_c requires d=3");
  }
}

/// sum_{a<b} m_a m_b / |q_a - q_b|^power with gradient and mass-weighted Laplacian.
template <typename Scalar>
FactorDerivativesT<Scalar> pair_sum(const MassSystemT<Scalar>& sys, const ConfigurationT<Scalar>& q, int power) {
  const int d = sys.dimension();
  const int n = sys.particle_count();
  const auto& m = sys.masses();
  FactorDerivativesT<Scalar> out;
  out.gradient = ConfigurationT<Scalar>::Zero(d, n);
  const Scalar scale = inertia_scalar(sys, q) / sys.total_mass();
  using std::pow;
  using std::sqrt;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      const Vector<Scalar> r = q.col(a) - q.col(b);
      const Scalar r2 = r.squaredNorm();
      if (!(r2 > scale * Scalar(1e-24)) || r2 == Scalar(0)) {
        throw Error(ErrorKind::CoincidentPair,
                    "particles " + std::to_string(a) + " and " + std::to_string(b) + " coincide");
      }
      const Scalar dist = sqrt(r2);
      const Scalar w = m(a) * m(b);
      const Scalar term = w / pow(dist, power);
      out.value += term;
      // d/dq_a |r|^-p = -p r |r|^-(p+2);  Laplacian_a |r|^-p = p (p + 2 - d) |r|^-(p+2)
      const Vector<Scalar> g = -Scalar(power) * term / r2 * r;
      out.gradient.col(a) += g;
      out.gradient.col(b) -= g;
      out.laplacian += Scalar(power) * Scalar(power + 2 - d) * term / r2 * (Scalar(1) / m(a) + Scalar(1) / m(b));
    }
  }
  return out;
}

template <typename Scalar>
Scalar mass_weighted_square(const MassSystemT<Scalar>& sys, const ConfigurationT<Scalar>& grad) {
  return (grad.cwiseAbs2() * sys.masses().cwiseInverse()).sum();
}

template <typename Scalar>
Scalar mass_weighted_dot(const MassSystemT<Scalar>& sys, const ConfigurationT<Scalar>& a,
                         const ConfigurationT<Scalar>& b) {
  return (a.cwiseProduct(b) * sys.masses().cwiseInverse()).sum();
}

/// log det M with gradient and mass-weighted Laplacian (d = 3, non-collinear).
template <typename Scalar>
FactorDerivativesT<Scalar> log_det_inertia(const MassSystemT<Scalar>& sys, const ConfigurationT<Scalar>& q) {
  const int d = sys.dimension();
  const int n = sys.particle_count();
  const auto& m = sys.masses();
  const ConfigurationT<Scalar> rho = relative_coordinates(sys, q);
  const Matrix<Scalar> inertia = inertia_tensor(sys, q);
  const Scalar det = inertia.determinant();
  const Scalar l2 = inertia.trace() / Scalar(2);
  if (!(det > l2 * l2 * l2 * Scalar(1e-24))) {
    throw Error(ErrorKind::DegenerateShape, "inertia tensor is singular (collinear configuration)");
  }
  const Matrix<Scalar> inv = inertia.inverse();
  const Scalar trace_inv = inv.trace();
  FactorDerivativesT<Scalar> out;
  using std::log;
  out.value = log(det);
  out.gradient.resize(d, n);
  const Matrix<Scalar> eye = Matrix<Scalar>::Identity(d, d);
  for (int a = 0; a < n; ++a) {
    const Vector<Scalar> inv_rho = inv * rho.col(a);
    const Scalar reduced = Scalar(1) - m(a) / sys.total_mass();
    for (int k = 0; k < d; ++k) {
      out.gradient(k, a) = Scalar(2) * m(a) * (rho(k, a) * trace_inv - inv_rho(k));
      // dM = 2 m rho_k I - m (e_k rho^T + rho e_k^T);  d2M = 2 m (1 - m/M)(I - e_k e_k^T)
      Matrix<Scalar> dm = Scalar(2) * m(a) * rho(k, a) * eye;
      dm.row(k) -= m(a) * rho.col(a).transpose();
      dm.col(k) -= m(a) * rho.col(a);
      const Scalar second = Scalar(2) * m(a) * reduced * (trace_inv - inv(k, k));
      const Matrix<Scalar> idm = inv * dm;
      out.laplacian += (second - (idm * idm).trace()) / m(a);
    }
  }
  return out;
}

}  // namespace detail

/// Analytic value, gradient and mass-weighted Laplacian of f.
///
///   A: (sum m_a m_b / r_ab)^2          B: L^-2
///   C: L^(-8/7) (det M)^(-1/7)         D: sum m_a m_b / r_ab^2
///   G: L^-1 sum m_a m_b / r_ab         Constant: c
template <typename Scalar, typename Derived>
FactorDerivativesT<Scalar> conformal_factor_derivatives(const MassSystemT<Scalar>& sys,
                                                        const ConformalFactorSpecT<Scalar>& spec,
                                                        const Eigen::MatrixBase<Derived>& q_in) {
  detail::require_kind_supported(sys, spec);
  sys.check(q_in);
  const ConfigurationT<Scalar> q = q_in;
  const int d = sys.dimension();
  const int n = sys.particle_count();
  const auto& m = sys.masses();
  FactorDerivativesT<Scalar> out;
  if (spec.kind == ConformalKind::Constant) {
    out.value = spec.constant;
    out.gradient = ConfigurationT<Scalar>::Zero(d, n);
    return out;
  }
  if (spec.kind == ConformalKind::A || spec.kind == ConformalKind::D) {
    if (spec.kind == ConformalKind::D) return detail::pair_sum(sys, q, 2);
    const auto s1 = detail::pair_sum(sys, q, 1);
    out.value = s1.value * s1.value;
    out.gradient = Scalar(2) * s1.value * s1.gradient;
    out.laplacian = Scalar(2) * detail::mass_weighted_square(sys, s1.gradient) + Scalar(2) * s1.value * s1.laplacian;
    return out;
  }

  const ConfigurationT<Scalar> rho = relative_coordinates(sys, q);
  const Scalar l2 = (rho.cwiseAbs2() * m).sum();
  if (l2 < Scalar(kDegenerateInertia)) throw Error(ErrorKind::DegenerateShape, "configuration is totally coincident");
  const ConfigurationT<Scalar> grad_l2 = Scalar(2) * rho * m.asDiagonal();  // d L^2 / dq_a = 2 m_a rho_a
  const Scalar lap_l2 = Scalar(2 * d * (n - 1));                           // mass-weighted Laplacian of L^2
  using std::exp;
  using std::pow;
  using std::sqrt;

  switch (spec.kind) {
    case ConformalKind::B: {
      out.value = Scalar(1) / l2;
      out.gradient = -grad_l2 / (l2 * l2);
      out.laplacian = (Scalar(8) - lap_l2) / (l2 * l2);
      return out;
    }
    case ConformalKind::G: {
      const auto s1 = detail::pair_sum(sys, q, 1);
      const Scalar l = sqrt(l2);
      const ConfigurationT<Scalar> grad_inv_l = -rho * m.asDiagonal() / (l2 * l);
      const Scalar lap_inv_l = (Scalar(3) - Scalar(d * (n - 1))) / (l2 * l);
      out.value = s1.value / l;
      out.gradient = s1.gradient / l + s1.value * grad_inv_l;
      out.laplacian = s1.laplacian / l + Scalar(2) * detail::mass_weighted_dot(sys, s1.gradient, grad_inv_l) +
                      s1.value * lap_inv_l;
      return out;
    }
    case ConformalKind::C: {
      const auto ldm = detail::log_det_inertia(sys, q);
      const Scalar log_f = -Scalar(4) / Scalar(7) * std::log(l2) - ldm.value / Scalar(7);
      const ConfigurationT<Scalar> grad_log = -Scalar(4) / Scalar(7) * grad_l2 / l2 - ldm.gradient / Scalar(7);
      const Scalar lap_log_l2 = (lap_l2 - Scalar(4)) / l2;
      const Scalar lap_log = -Scalar(4) / Scalar(7) * lap_log_l2 - ldm.laplacian / Scalar(7);
      out.value = exp(log_f);
      out.gradient = out.value * grad_log;
      out.laplacian = out.value * (lap_log + detail::mass_weighted_square(sys, grad_log));
      return out;
    }
    default: break;
  }
  throw Error(ErrorKind::InvalidArgument, "unhandled conformal kind");
}

template <typename Scalar, typename Derived>
Scalar conformal_factor(const MassSystemT<Scalar>& sys, const ConformalFactorSpecT<Scalar>& spec,
                        const Eigen::MatrixBase<Derived>& q) {
  detail::require_kind_supported(sys, spec);
  sys.check(q);
  using std::pow;
  switch (spec.kind) {
    case ConformalKind::Constant: return spec.constant;
    case ConformalKind::B: {
      const Scalar l2 = inertia_scalar(sys, q);
      if (l2 < Scalar(kDegenerateInertia)) throw Error(ErrorKind::DegenerateShape, "configuration is totally coincident");
      return Scalar(1) / l2;
    }
    case ConformalKind::C: {
      const Scalar l2 = inertia_scalar(sys, q);
      if (l2 < Scalar(kDegenerateInertia)) throw Error(ErrorKind::DegenerateShape, "configuration is totally coincident");
      const Scalar det = inertia_tensor(sys, q).determinant();
      if (!(det > l2 * l2 * l2 * Scalar(1e-24))) {
        throw Error(ErrorKind::DegenerateShape, "f_c is singular on collinear configurations");
      }
      return pow(l2, -Scalar(4) / Scalar(7)) * pow(det, -Scalar(1) / Scalar(7));
    }
    default: return conformal_factor_derivatives(sys, spec, q).value;
  }
}

/// Mass-weighted log-derivatives of f: |grad log f|^2_e and the Laplacian of log f,
/// where grad = (1/m_a) d/dq_a and the Laplacian is sum_a (1/m_a) Laplacian_a.
template <typename Scalar>
struct LogFactorDerivativesT {
  Scalar value = Scalar(0);
  ConfigurationT<Scalar> gradient;  // plain partials of log f
  Scalar gradient_square = Scalar(0);
  Scalar laplacian = Scalar(0);
};

template <typename Scalar, typename Derived>
LogFactorDerivativesT<Scalar> log_conformal_derivatives(const MassSystemT<Scalar>& sys,
                                                        const ConformalFactorSpecT<Scalar>& spec,
                                                        const Eigen::MatrixBase<Derived>& q) {
  const auto fd = conformal_factor_derivatives(sys, spec, q);
  LogFactorDerivativesT<Scalar> out;
  using std::log;
  out.value = log(fd.value);
  out.gradient = fd.gradient / fd.value;
  out.gradient_square = detail::mass_weighted_square(sys, out.gradient);
  out.laplacian = fd.laplacian / fd.value - out.gradient_square;
  return out;
}

/// ds = sqrt(f(q)) |dq_perp|_e, the best-matching length of dq.
template <typename Scalar, typename DerivedQ, typename DerivedD>
Scalar shape_line_element(const MassSystemT<Scalar>& sys, const ConformalFactorSpecT<Scalar>& spec,
                          const Eigen::MatrixBase<DerivedQ>& q, const Eigen::MatrixBase<DerivedD>& dq) {
  using std::sqrt;
  const Scalar f = conformal_factor(sys, spec, q);
  const DisplacementT<Scalar> perp = horizontal_project(sys, q, dq);
  return sqrt(f) * euclidean_norm(sys, perp);
}

/// g = f g_e applied to a pair of tangent vectors.
template <typename Scalar, typename DerivedQ, typename DerivedU, typename DerivedV>
Scalar invariant_inner(const MassSystemT<Scalar>& sys, const ConformalFactorSpecT<Scalar>& spec,
                       const Eigen::MatrixBase<DerivedQ>& q, const Eigen::MatrixBase<DerivedU>& u,
                       const Eigen::MatrixBase<DerivedV>& v) {
  return conformal_factor(sys, spec, q) * euclidean_inner(sys, u, v);
}

/// J = L f^(7/2) sqrt(det M), defined for d = 3 on non-collinear shapes.
template <typename Scalar, typename Derived>
Scalar jacobian_factor_J(const MassSystemT<Scalar>& sys, const ConformalFactorSpecT<Scalar>& spec,
                         const Eigen::MatrixBase<Derived>& q) {
  if (sys.dimension() != 3) throw Error(ErrorKind::InvalidArgument, "J factor is defined for d=3");
  const Scalar l2 = inertia_scalar(sys, q);
  if (l2 < Scalar(kDegenerateInertia)) throw Error(ErrorKind::DegenerateShape, "configuration is totally coincident");
  const Scalar det = inertia_tensor(sys, q).determinant();
  if (!(det > l2 * l2 * l2 * Scalar(1e-24))) throw Error(ErrorKind::DegenerateShape, "J vanishes on collinear shapes");
  using std::pow;
  using std::sqrt;
  return sqrt(l2) * pow(conformal_factor(sys, spec, q), Scalar(3.5)) * sqrt(det);
}

/// Volume density of the group orbit through q under g:
/// sqrt(det g(v_a, v_b)) over the vertical generators. In d = 3 this equals
/// M_total^(3/2) J; in lower dimensions it plays the role of J.
template <typename Scalar, typename Derived>
Scalar fiber_volume_density(const MassSystemT<Scalar>& sys, const ConformalFactorSpecT<Scalar>& spec,
                            const Eigen::MatrixBase<Derived>& q) {
  const Scalar f = conformal_factor(sys, spec, q);
  const Matrix<Scalar> gram = f * gram_matrix(sys, vertical_basis(sys, q));
  const Scalar det = gram.determinant();
  if (!(det > Scalar(0))) throw Error(ErrorKind::DegenerateShape, "vertical span is rank deficient");
  using std::sqrt;
  return sqrt(det);
}

/// The orbit-volume factor used by the gauge lifts: J in d = 3, the orbit
/// volume density otherwise. Only log-derivatives of it enter the dynamics.
template <typename Scalar, typename Derived>
Scalar gauge_jacobian(const MassSystemT<Scalar>& sys, const ConformalFactorSpecT<Scalar>& spec,
                      const Eigen::MatrixBase<Derived>& q) {
  if (sys.dimension() == 3) return jacobian_factor_J(sys, spec, q);
  return fiber_volume_density(sys, spec, q);
}

}  // namespace shapedyn
