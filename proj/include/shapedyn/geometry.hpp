#pragma once

// Absolute configuration space of an N-particle system in d dimensions, the
// similarity group acting on it, and the vertical/horizontal splitting of
// tangent vectors induced by the mass-weighted Euclidean metric.
//
// Configurations are stored as d x N matrices (one column per particle) so
// that group actions and mass-weighted sums stay plain Eigen expressions.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "shapedyn/errors.hpp"

namespace shapedyn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Particle positions, one column per particle.
template <typename Scalar>
using ConfigurationT = Matrix<Scalar>;
/// Tangent vector at a configuration (displacement or velocity per particle).
template <typename Scalar>
using DisplacementT = Matrix<Scalar>;

using Configuration = ConfigurationT<double>;
using Displacement = DisplacementT<double>;

/// L^2 below this is treated as a totally coincident configuration.
inline constexpr double kDegenerateInertia = 1e-30;
/// Vertical generator Gram matrices worse conditioned than this are degenerate.
inline constexpr double kDegenerateCondition = 1e12;

template <typename Scalar>
class MassSystemT {
 public:
  MassSystemT(int dimension, Vector<Scalar> masses) : dimension_(dimension), masses_(std::move(masses)) {
    if (dimension_ < 1 || dimension_ > 3) {
      throw Error(ErrorKind::InvalidArgument, "dimension must be 1, 2 or 3");
    }
    if (masses_.size() < 1) {
      throw Error(ErrorKind::InvalidArgument, "masses: at least one particle is required");
    }
    for (Eigen::Index a = 0; a < masses_.size(); ++a) {
      if (!(masses_(a) > Scalar(0)) || !std::isfinite(static_cast<double>(masses_(a)))) {
        throw Error(ErrorKind::InvalidArgument, "masses: every mass must be positive and finite");
      }
    }
  }

  static MassSystemT uniform(int dimension, int particles) {
    return MassSystemT(dimension, Vector<Scalar>::Ones(particles));
  }

  int dimension() const { return dimension_; }
  int particle_count() const { return static_cast<int>(masses_.size()); }
  const Vector<Scalar>& masses() const { return masses_; }
  Scalar total_mass() const { return masses_.sum(); }

  /// n = d N, the dimension of absolute configuration space.
  int configuration_dimension() const { return dimension_ * particle_count(); }
  /// Translations + rotations + dilation.
  int group_dimension() const { return dimension_ + dimension_ * (dimension_ - 1) / 2 + 1; }
  int rotation_count() const { return dimension_ * (dimension_ - 1) / 2; }

  template <typename Derived>
  void check(const Eigen::MatrixBase<Derived>& q, const char* what = "configuration") const {
    if (q.rows() != dimension_ || q.cols() != particle_count()) {
      throw Error(ErrorKind::DimensionMismatch,
                  std::string(what) + " has shape " + std::to_string(q.rows()) + "x" + std::to_string(q.cols()) +
                      ", expected " + std::to_string(dimension_) + "x" + std::to_string(particle_count()));
    }
  }

 private:
  int dimension_;
  Vector<Scalar> masses_;
};

using MassSystem = MassSystemT<double>;

/// x -> scale * rotation * x + translation, rotation in SO(d), scale > 0.
template <typename Scalar>
struct SimilarityTransformT {
  Matrix<Scalar> rotation;
  Vector<Scalar> translation;
  Scalar scale = Scalar(1);

  static SimilarityTransformT identity(int dimension) {
    return {Matrix<Scalar>::Identity(dimension, dimension), Vector<Scalar>::Zero(dimension), Scalar(1)};
  }

  int dimension() const { return static_cast<int>(rotation.rows()); }

  /// (this o other)(x) = this(other(x)).
  SimilarityTransformT compose(const SimilarityTransformT& other) const {
    return {rotation * other.rotation, scale * (rotation * other.translation) + translation, scale * other.scale};
  }

  SimilarityTransformT inverse() const {
    Matrix<Scalar> rt = rotation.transpose();
    return {rt, -(rt * translation) / scale, Scalar(1) / scale};
  }

  /// Throws unless rotation is orthogonal with determinant +1 and scale > 0.
  void validate(Scalar tolerance = Scalar(1e-12)) const {
    const auto d = rotation.rows();
    if (rotation.cols() != d || translation.size() != d) {
      throw Error(ErrorKind::DimensionMismatch, "similarity transform blocks disagree in dimension");
    }
    if (!(scale > Scalar(0))) throw Error(ErrorKind::InvalidArgument, "scale must be positive");
    const Scalar orth = (rotation.transpose() * rotation - Matrix<Scalar>::Identity(d, d)).cwiseAbs().maxCoeff();
    if (orth > tolerance) throw Error(ErrorKind::InvalidArgument, "rotation is not orthogonal");
    using std::abs;
    if (abs(rotation.determinant() - Scalar(1)) > tolerance) {
      throw Error(ErrorKind::InvalidArgument, "rotation determinant is not +1");
    }
  }
};

using SimilarityTransform = SimilarityTransformT<double>;

template <typename Scalar, typename Derived>
ConfigurationT<Scalar> apply_transform(const SimilarityTransformT<Scalar>& T, const Eigen::MatrixBase<Derived>& q) {
  if (q.rows() != T.dimension()) {
    throw Error(ErrorKind::DimensionMismatch, "transform and configuration dimensions differ");
  }
  return ((T.scale * T.rotation) * q).colwise() + T.translation;
}

/// Push-forward of a tangent vector: translation drops out.
template <typename Scalar, typename Derived>
DisplacementT<Scalar> apply_linear(const SimilarityTransformT<Scalar>& T, const Eigen::MatrixBase<Derived>& dq) {
  if (dq.rows() != T.dimension()) {
    throw Error(ErrorKind::DimensionMismatch, "transform and displacement dimensions differ");
  }
  return (T.scale * T.rotation) * dq;
}

/// Haar-distributed rotation in SO(d) from a standard-normal generator.
template <typename Scalar, typename NormalSource>
Matrix<Scalar> random_rotation(int dimension, NormalSource&& normal) {
  Matrix<Scalar> a(dimension, dimension);
  for (int j = 0; j < dimension; ++j)
    for (int i = 0; i < dimension; ++i) a(i, j) = Scalar(normal());
  Eigen::HouseholderQR<Matrix<Scalar>> qr(a);
  Matrix<Scalar> q = qr.householderQ();
  const Matrix<Scalar> r = qr.matrixQR().template triangularView<Eigen::Upper>();
  for (int j = 0; j < dimension; ++j)
    if (r(j, j) < Scalar(0)) q.col(j) = -q.col(j);
  if (q.determinant() < Scalar(0)) q.col(0) = -q.col(0);
  return q;
}

template <typename Scalar, typename Derived>
Vector<Scalar> center_of_mass(const MassSystemT<Scalar>& sys, const Eigen::MatrixBase<Derived>& q) {
  sys.check(q);
  return (q * sys.masses()) / sys.total_mass();
}

/// Coordinates relative to the center of mass.
template <typename Scalar, typename Derived>
ConfigurationT<Scalar> relative_coordinates(const MassSystemT<Scalar>& sys, const Eigen::MatrixBase<Derived>& q) {
  return q.colwise() - center_of_mass(sys, q);
}

/// L^2 = sum_a m_a |q_a - q_cm|^2.
template <typename Scalar, typename Derived>
Scalar inertia_scalar(const MassSystemT<Scalar>& sys, const Eigen::MatrixBase<Derived>& q) {
  const ConfigurationT<Scalar> rho = relative_coordinates(sys, q);
  return (rho.cwiseAbs2() * sys.masses()).sum();
}

/// Same quantity through the pair form (1/M) sum_{a<b} m_a m_b |q_a - q_b|^2.
template <typename Scalar, typename Derived>
Scalar inertia_scalar_pairwise(const MassSystemT<Scalar>& sys, const Eigen::MatrixBase<Derived>& q) {
  sys.check(q);
  const auto& m = sys.masses();
  Scalar sum(0);
  for (int a = 0; a < sys.particle_count(); ++a)
    for (int b = a + 1; b < sys.particle_count(); ++b) sum += m(a) * m(b) * (q.col(a) - q.col(b)).squaredNorm();
  return sum / sys.total_mass();
}

template <typename Scalar, typename Derived>
bool is_totally_coincident(const MassSystemT<Scalar>& sys, const Eigen::MatrixBase<Derived>& q) {
  return inertia_scalar(sys, q) < Scalar(kDegenerateInertia);
}

/// M_ij = sum_a m_a (rho_a^2 delta_ij - rho_ai rho_aj) about the center of mass.
/// In d = 1 this is the 1x1 zero matrix.
template <typename Scalar, typename Derived>
Matrix<Scalar> inertia_tensor(const MassSystemT<Scalar>& sys, const Eigen::MatrixBase<Derived>& q) {
  const ConfigurationT<Scalar> rho = relative_coordinates(sys, q);
  const Matrix<Scalar> second_moment = rho * sys.masses().asDiagonal() * rho.transpose();
  const Scalar l2 = second_moment.trace();
  return l2 * Matrix<Scalar>::Identity(sys.dimension(), sys.dimension()) - second_moment;
}

/// sum_a m_a u_a . v_a
template <typename Scalar, typename DerivedU, typename DerivedV>
Scalar euclidean_inner(const MassSystemT<Scalar>& sys, const Eigen::MatrixBase<DerivedU>& u,
                       const Eigen::MatrixBase<DerivedV>& v) {
  sys.check(u, "first displacement");
  sys.check(v, "second displacement");
  return (u.cwiseProduct(v) * sys.masses()).sum();
}

template <typename Scalar, typename Derived>
Scalar euclidean_norm(const MassSystemT<Scalar>& sys, const Eigen::MatrixBase<Derived>& u) {
  using std::sqrt;
  return sqrt(euclidean_inner(sys, u, u));
}

/// Generators of the similarity group action at q: d translations, the
/// rotation generators (about the center of mass) and the dilation about the
/// center of mass. Count is d + d(d-1)/2 + 1.
template <typename Scalar, typename Derived>
std::vector<DisplacementT<Scalar>> vertical_basis(const MassSystemT<Scalar>& sys, const Eigen::MatrixBase<Derived>& q) {
  const int d = sys.dimension();
  const int n = sys.particle_count();
  const ConfigurationT<Scalar> rho = relative_coordinates(sys, q);
  std::vector<DisplacementT<Scalar>> basis;
  basis.reserve(sys.group_dimension());
  for (int i = 0; i < d; ++i) {
    DisplacementT<Scalar> t = DisplacementT<Scalar>::Zero(d, n);
    t.row(i).setOnes();
    basis.push_back(std::move(t));
  }
  if (d == 2) {
    DisplacementT<Scalar> r(2, n);
    r.row(0) = -rho.row(1);
    r.row(1) = rho.row(0);
    basis.push_back(std::move(r));
  } else if (d == 3) {
    for (int axis = 0; axis < 3; ++axis) {
      Eigen::Matrix<Scalar, 3, 1> omega = Eigen::Matrix<Scalar, 3, 1>::Unit(axis);
      DisplacementT<Scalar> r(3, n);
      for (int a = 0; a < n; ++a) r.col(a) = omega.cross(Eigen::Matrix<Scalar, 3, 1>(rho.col(a)));
      basis.push_back(std::move(r));
    }
  }
  basis.push_back(rho);
  return basis;
}

template <typename Scalar>
Matrix<Scalar> gram_matrix(const MassSystemT<Scalar>& sys, const std::vector<DisplacementT<Scalar>>& vectors) {
  const auto p = static_cast<Eigen::Index>(vectors.size());
  Matrix<Scalar> g(p, p);
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = i; j < p; ++j) g(i, j) = g(j, i) = euclidean_inner(sys, vectors[i], vectors[j]);
  return g;
}

/// Rank and conditioning of the vertical span at q.
template <typename Scalar>
struct VerticalSpan {
  int rank = 0;
  Scalar condition = Scalar(0);
  bool degenerate = true;
};

template <typename Scalar, typename Derived>
VerticalSpan<Scalar> vertical_span(const MassSystemT<Scalar>& sys, const Eigen::MatrixBase<Derived>& q) {
  auto basis = vertical_basis(sys, q);
  // Normalize so the rank test is scale free; zero generators stay zero.
  for (auto& v : basis) {
    const Scalar norm = euclidean_norm(sys, v);
    if (norm > Scalar(0)) v /= norm;
  }
  const Matrix<Scalar> g = gram_matrix(sys, basis);
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(g, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  const Scalar largest = ev.maxCoeff();
  VerticalSpan<Scalar> span;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev(i) > largest * Scalar(1e-10)) ++span.rank;
  const Scalar smallest = ev.minCoeff();
  span.condition = smallest > Scalar(0) ? largest / smallest : std::numeric_limits<Scalar>::infinity();
  span.degenerate = is_totally_coincident(sys, q) || !(span.condition <= Scalar(kDegenerateCondition));
  return span;
}

template <typename Scalar, typename Derived>
bool is_degenerate(const MassSystemT<Scalar>& sys, const Eigen::MatrixBase<Derived>& q) {
  return vertical_span(sys, q).degenerate;
}

/// The g_e-orthogonal complement of the vertical span applied to dq.
template <typename Scalar, typename DerivedQ, typename DerivedD>
DisplacementT<Scalar> horizontal_project(const MassSystemT<Scalar>& sys, const Eigen::MatrixBase<DerivedQ>& q,
                                         const Eigen::MatrixBase<DerivedD>& dq) {
  sys.check(q);
  sys.check(dq, "displacement");
  if (is_degenerate(sys, q)) throw Error(ErrorKind::DegenerateShape, "horizontal projection at a degenerate base");
  const auto basis = vertical_basis(sys, q);
  const Matrix<Scalar> g = gram_matrix(sys, basis);
  Vector<Scalar> rhs(static_cast<Eigen::Index>(basis.size()));
  for (std::size_t a = 0; a < basis.size(); ++a) rhs(a) = euclidean_inner(sys, basis[a], dq);
  const Vector<Scalar> coeff = g.ldlt().solve(rhs);
  DisplacementT<Scalar> out = dq;
  for (std::size_t a = 0; a < basis.size(); ++a) out -= coeff(a) * basis[a];
  return out;
}

template <typename Scalar>
struct AlignmentT {
  SimilarityTransformT<Scalar> transform;
  Scalar residual = Scalar(0);
};

using Alignment = AlignmentT<double>;

/// Weighted Procrustes fit: the similarity T minimizing |q1 - T(q2)|_e.
///
/// Centers of mass are matched, the rotation comes from the SVD of the
/// mass-weighted cross covariance (with a sign fix to stay in SO(d)), and the
/// scale is the analytic least-squares optimum. In d = 1 a reflection is not
/// available; a negative optimal scale is clamped to the smallest positive
/// value, which leaves the residual at |q1 - cm1|_e.
template <typename Scalar, typename Derived1, typename Derived2>
AlignmentT<Scalar> best_match_align(const MassSystemT<Scalar>& sys, const Eigen::MatrixBase<Derived1>& q1,
                                    const Eigen::MatrixBase<Derived2>& q2) {
  sys.check(q1, "target configuration");
  sys.check(q2, "source configuration");
  const int d = sys.dimension();
  const Vector<Scalar> c1 = center_of_mass(sys, q1);
  const Vector<Scalar> c2 = center_of_mass(sys, q2);
  const ConfigurationT<Scalar> y = q1.colwise() - c1;
  const ConfigurationT<Scalar> x = q2.colwise() - c2;
  const Scalar xx = (x.cwiseAbs2() * sys.masses()).sum();
  if (xx < Scalar(kDegenerateInertia)) throw Error(ErrorKind::DegenerateShape, "cannot align onto a coincident configuration");

  const Matrix<Scalar> h = y * sys.masses().asDiagonal() * x.transpose();
  Eigen::JacobiSVD<Matrix<Scalar>> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix<Scalar> u = svd.matrixU();
  const Matrix<Scalar> v = svd.matrixV();
  Vector<Scalar> s = svd.singularValues();
  if ((u * v.transpose()).determinant() < Scalar(0)) {
    u.col(d - 1) = -u.col(d - 1);
    s(d - 1) = -s(d - 1);
  }
  AlignmentT<Scalar> out;
  out.transform.rotation = u * v.transpose();
  Scalar scale = s.sum() / xx;
  if (!(scale > Scalar(0))) scale = std::numeric_limits<Scalar>::min();
  out.transform.scale = scale;
  out.transform.translation = c1 - scale * (out.transform.rotation * c2);
  const ConfigurationT<Scalar> diff = q1 - apply_transform(out.transform, q2);
  using std::sqrt;
  out.residual = sqrt((diff.cwiseAbs2() * sys.masses()).sum());
  return out;
}

}  // namespace shapedyn
