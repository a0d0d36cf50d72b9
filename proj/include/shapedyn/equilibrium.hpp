#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "shapedyn/lift.hpp"
#include "shapedyn/quantum.hpp"

namespace shapedyn {

/// Chart points drawn from a wave function, with the seed that produced them.
struct Ensemble {
  ChartPtr chart;
  std::vector<Eigen::VectorXd> points;
  std::vector<double> weights;  // empty means equal weights
  std::uint64_t seed = 0;

  int size() const { return static_cast<int>(points.size()); }
};

/// Probability of each grid cell under |psi|^2 sqrt(g) dV, normalized to 1.
Eigen::VectorXd cell_probabilities(const WaveFunction& psi);

/// Grid cell containing x (nearest node on periodic axes, the enclosing cell
/// on reflecting ones).
int cell_of(const ShapeChart& chart, const Eigen::VectorXd& x);

/// M independent draws from the cell probabilities by inverse CDF, each
/// placed uniformly inside its cell. Draw k uses counters (k + 1) (dim + 1)
/// ... of a CounterRng with the given seed, so any subset of draws can be
/// recomputed independently.
Ensemble sample_density(const WaveFunction& psi, int count, std::uint64_t seed);

struct EnsembleEvolution {
  Ensemble ensemble;  // survivors only
  int node_losses = 0;
  int chart_exits = 0;

  double loss_fraction(int initial) const {
    return initial > 0 ? static_cast<double>(node_losses + chart_exits) / initial : 0.0;
  }
};

/// Transports every point through the series with RK4 steps of dt up to time T
/// (see integrate_bohm_trajectory for the step rule). Points that meet a node
/// or leave the chart are dropped and counted. Throws NodeEncountered when
/// more than max_loss_fraction of the ensemble is lost.
EnsembleEvolution evolve_ensemble(const WaveSeries& series, const Ensemble& ensemble, double dt, double T,
                                  double max_loss_fraction = 1e-3);

/// Normalized histogram over `bins` equal bins per axis. bins must divide the
/// points of every axis; bins = 0 means one bin per grid cell.
Eigen::VectorXd ensemble_histogram(const Ensemble& ensemble, int bins = 0);
/// Cell probabilities of psi merged into the same bins.
Eigen::VectorXd binned_probabilities(const WaveFunction& psi, int bins = 0);

/// (1/2) sum |p - q|.
double total_variation(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

/// Mean and standard deviation of the total-variation distance between p and
/// the histogram of n independent draws from p, by Monte Carlo over
/// `replicas` simulated histograms.
struct NoiseLevel {
  double mean = 0.0;
  double sd = 0.0;
};
NoiseLevel multinomial_tv_noise(const Eigen::VectorXd& p, int n, std::uint64_t seed, int replicas = 400);

/// A wave function on a product grid x-grid times y-grid in absolute space:
/// values(i, j) = Psi(x_i, y_j).
struct SplitSystem {
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  Eigen::MatrixXcd values;

  /// Throws DimensionMismatch when the grids and the value matrix disagree.
  void check() const;
};

SplitSystem product_split(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                          const std::function<std::complex<double>(double, double)>& psi);

struct ConditionalWaveFunction {
  Eigen::VectorXcd values;  // normalized to unit l2 norm on the x-grid
  double norm = 0.0;        // l2 norm of the raw slice
};

/// psi(x) = Psi(x, y_j). Throws ZeroNorm for an identically zero slice.
ConditionalWaveFunction conditional_wavefunction(const SplitSystem& split, int y_index);

struct ConditionalBin {
  int y_index = 0;
  int count = 0;
  double tv = 0.0;
  NoiseLevel noise;  // expected TV from sampling alone at this count
};

struct ConditionalReport {
  std::vector<ConditionalBin> bins;  // bins with at least min_count samples
  int worst = -1;                    // index into bins of the largest TV
  double worst_tv = 0.0;
  double worst_sigma = 0.0;          // largest (tv - noise.mean) / noise.sd
  /// (sum tv - sum noise.mean) / sqrt(sum noise.sd^2): one deviation for all
  /// bins together. Unlike worst_sigma its null distribution does not widen
  /// with the number of bins.
  double pooled_sigma = 0.0;
  double slope = 0.0;                // least-squares slope of log tv against log count
  std::uint64_t seed = 0;
  int samples = 0;
};

/// Draws M pairs (X, Y) from |Psi|^2 on the product grid and compares, for
/// every Y with at least min_count draws, the histogram of X with
/// |conditional_wavefunction(Y)|^2. Throws InsufficientSamples when no Y
/// reaches min_count.
ConditionalReport conditional_probability_check(const SplitSystem& split, int count, std::uint64_t seed,
                                                int min_count = 1000);

/// Complex function on absolute configurations.
using AbsoluteFunction = std::function<std::complex<double>(const Configuration&)>;

struct FiberReport {
  double max_variation = 0.0;  // max | |Psi(Tq)|^2 / |Psi(q)|^2 - 1 |
  int samples = 0;
};

/// Compares |Psi|^2 at q with its values along the fiber through q.
FiberReport fiber_nonnormalizability_check(const AbsoluteFunction& psi, const Configuration& q,
                                           const std::vector<SimilarityTransform>& transforms);
/// Same for a lifted wave function; requires Gauge1 (InvalidArgument otherwise).
FiberReport fiber_nonnormalizability_check(const LiftedWaveFunction& psi, const Configuration& q,
                                           const std::vector<SimilarityTransform>& transforms);

/// Random similarity transforms: Haar rotations, translations with standard
/// normal components times translation_scale, log-uniform scales in
/// [min_scale, max_scale].
std::vector<SimilarityTransform> random_transforms(int dimension, int count, std::uint64_t seed,
                                                   double translation_scale = 2.0, double min_scale = 0.1,
                                                   double max_scale = 10.0);

}  // namespace shapedyn
