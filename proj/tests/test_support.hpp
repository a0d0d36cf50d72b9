#pragma once

#include <random>
#include <utility>

#include "shapedyn/conformal.hpp"
#include "shapedyn/rng.hpp"

namespace shapedyn::testing {

struct Sampler {
  explicit Sampler(std::uint64_t seed) : rng(seed) {}

  double normal() { return gauss(rng); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

  MassSystem masses(int d, int n, double lo = 0.5, double hi = 2.0) {
    Eigen::VectorXd m(n);
    for (int a = 0; a < n; ++a) m(a) = uniform(lo, hi);
    return MassSystem(d, m);
  }

  Configuration configuration(int d, int n) {
    Configuration q(d, n);
    for (int a = 0; a < n; ++a)
      for (int i = 0; i < d; ++i) q(i, a) = normal();
    return q;
  }

  // Rejection-samples until every pair is at least min_distance apart.
  Configuration separated(int d, int n, double min_distance = 0.5) {
    for (;;) {
      Configuration q = configuration(d, n);
      bool ok = true;
      for (int a = 0; a < n && ok; ++a)
        for (int b = a + 1; b < n && ok; ++b) ok = (q.col(a) - q.col(b)).norm() >= min_distance;
      if (ok) return q;
    }
  }

  // Centered configuration with L = 1 and a horizontal velocity of unit |.|_e.
  std::pair<Configuration, Displacement> normalized_initial_data(const MassSystem& sys) {
    Configuration q = relative_coordinates(sys, separated(sys.dimension(), sys.particle_count()));
    q /= std::sqrt(inertia_scalar(sys, q));
    Displacement v = horizontal_project(sys, q, configuration(sys.dimension(), sys.particle_count()));
    v /= euclidean_norm(sys, v);
    return {q, v};
  }

  SimilarityTransform transform(int d, double min_scale = 0.3, double max_scale = 3.0) {
    SimilarityTransform t;
    t.rotation = random_rotation<double>(d, [this] { return normal(); });
    t.translation = Eigen::VectorXd(d);
    for (int i = 0; i < d; ++i) t.translation(i) = 2.0 * normal();
    t.scale = std::exp(uniform(std::log(min_scale), std::log(max_scale)));
    return t;
  }

  CounterRng rng;
  std::normal_distribution<double> gauss;
};

inline double relative_error(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

inline const ConformalKind kPaperKinds[] = {ConformalKind::A, ConformalKind::B, ConformalKind::C, ConformalKind::D,
                                            ConformalKind::G};

}  // namespace shapedyn::testing
