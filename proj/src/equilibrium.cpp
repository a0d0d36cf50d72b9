#include "shapedyn/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "shapedyn/rng.hpp"

namespace shapedyn {

namespace {

// Index of the first cdf entry above u (cdf increasing, cdf.back() = total).
int search_cdf(const std::vector<double>& cdf, double u) {
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return std::min(static_cast<int>(it - cdf.begin()), static_cast<int>(cdf.size()) - 1);
}

std::vector<double> cumulative(const Eigen::VectorXd& p) {
  std::vector<double> cdf(p.size());
  std::partial_sum(p.data(), p.data() + p.size(), cdf.begin());
  return cdf;
}

int bin_of_cell(const ShapeChart& chart, int cell, int bins) {
  const Eigen::VectorXi idx = chart.multi_index(cell);
  int out = 0, stride = 1;
  for (int i = 0; i < chart.dimension(); ++i) {
    const int factor = chart.axis(i).points / bins;
    out += stride * (idx(i) / factor);
    stride *= bins;
  }
  return out;
}

void check_bins(const ShapeChart& chart, int bins) {
  if (bins < 0) throw Error(ErrorKind::InvalidArgument, "bins must be nonnegative");
  if (bins == 0) return;
  for (int i = 0; i < chart.dimension(); ++i)
    if (chart.axis(i).points % bins != 0)
      throw Error(ErrorKind::InvalidArgument, "bins must divide the number of points on every axis");
}

Eigen::VectorXd merge_cells(const ShapeChart& chart, const Eigen::VectorXd& cells, int bins) {
  check_bins(chart, bins);
  if (bins == 0) return cells;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(std::pow(bins, chart.dimension())));
  for (int p = 0; p < chart.size(); ++p) out(bin_of_cell(chart, p, bins)) += cells(p);
  return out;
}

}  // namespace

Eigen::VectorXd cell_probabilities(const WaveFunction& psi) {
  const Eigen::VectorXd mass = psi.density().cwiseProduct(psi.chart->weights());
  const double total = mass.sum();
  if (!(total > 0.0)) throw Error(ErrorKind::ZeroNorm, "wave function has zero norm");
  return mass / total;
}

int cell_of(const ShapeChart& chart, const Eigen::VectorXd& x) {
  int out = 0, stride = 1;
  for (int i = 0; i < chart.dimension(); ++i) {
    const ChartAxis& a = chart.axis(i);
    const double t = (x(i) - a.lower) / a.spacing();
    int k;
    if (a.boundary == Boundary::Periodic) {
      k = static_cast<int>(std::lround(t)) % a.points;
      if (k < 0) k += a.points;
    } else {
      k = std::clamp(static_cast<int>(std::floor(t)), 0, a.points - 1);
    }
    out += stride * k;
    stride *= a.points;
  }
  return out;
}

Ensemble sample_density(const WaveFunction& psi, int count, std::uint64_t seed) {
  if (count < 0) throw Error(ErrorKind::InvalidArgument, "sample count must be nonnegative");
  const ShapeChart& c = *psi.chart;
  const std::vector<double> cdf = cumulative(cell_probabilities(psi));
  const int k = c.dimension();
  const CounterRng rng(seed);
  Ensemble out;
  out.chart = psi.chart;
  out.seed = seed;
  out.points.resize(count);
  for (int draw = 0; draw < count; ++draw) {
    const std::uint64_t base = static_cast<std::uint64_t>(draw) * (k + 1);
    const int cell = search_cdf(cdf, rng.uniform_at(base) * cdf.back());
    const Eigen::VectorXi idx = c.multi_index(cell);
    Eigen::VectorXd x(k);
    for (int i = 0; i < k; ++i) {
      const ChartAxis& a = c.axis(i);
      const double jitter = rng.uniform_at(base + 1 + i);
      x(i) = a.boundary == Boundary::Periodic ? a.coordinate(idx(i)) + (jitter - 0.5) * a.spacing()
                                              : a.lower + (idx(i) + jitter) * a.spacing();
    }
    out.points[draw] = c.wrap(x);
  }
  return out;
}

EnsembleEvolution evolve_ensemble(const WaveSeries& series, const Ensemble& ensemble, double dt, double T,
                                  double max_loss_fraction) {
  if (series.frames.empty()) throw Error(ErrorKind::InvalidArgument, "empty wave-function series");
  std::vector<VelocityField> fields;
  fields.reserve(series.frames.size());
  for (const WaveFunction& psi : series.frames) fields.emplace_back(psi);
  EnsembleEvolution out;
  out.ensemble.chart = ensemble.chart;
  out.ensemble.seed = ensemble.seed;
  out.ensemble.points.reserve(ensemble.points.size());
  for (std::size_t p = 0; p < ensemble.points.size(); ++p) {
    try {
      out.ensemble.points.push_back(transport_point(fields, series.frame_dt, ensemble.points[p], dt, T));
      if (!ensemble.weights.empty()) out.ensemble.weights.push_back(ensemble.weights[p]);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::NodeEncountered) ++out.node_losses;
      else if (e.kind() == ErrorKind::ChartExit) ++out.chart_exits;
      else throw;
    }
  }
  if (out.loss_fraction(ensemble.size()) > max_loss_fraction) {
    throw Error(ErrorKind::NodeEncountered, std::to_string(out.node_losses) + " node losses and " +
                                                std::to_string(out.chart_exits) + " chart exits out of " +
                                                std::to_string(ensemble.size()) + " points");
  }
  return out;
}

Eigen::VectorXd ensemble_histogram(const Ensemble& ensemble, int bins) {
  const ShapeChart& c = *ensemble.chart;
  Eigen::VectorXd cells = Eigen::VectorXd::Zero(c.size());
  for (int p = 0; p < ensemble.size(); ++p)
    cells(cell_of(c, ensemble.points[p])) += ensemble.weights.empty() ? 1.0 : ensemble.weights[p];
  const double total = cells.sum();
  if (!(total > 0.0)) throw Error(ErrorKind::InsufficientSamples, "empty ensemble");
  return merge_cells(c, cells / total, bins);
}

Eigen::VectorXd binned_probabilities(const WaveFunction& psi, int bins) {
  return merge_cells(*psi.chart, cell_probabilities(psi), bins);
}

double total_variation(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  if (p.size() != q.size()) throw Error(ErrorKind::DimensionMismatch, "distributions have different sizes");
  return 0.5 * (p - q).cwiseAbs().sum();
}

NoiseLevel multinomial_tv_noise(const Eigen::VectorXd& p, int n, std::uint64_t seed, int replicas) {
  if (n <= 0 || replicas < 2) throw Error(ErrorKind::InvalidArgument, "noise estimate needs n > 0 and replicas > 1");
  const std::vector<double> cdf = cumulative(p);
  const Eigen::VectorXd target = p / cdf.back();
  CounterRng rng(seed, 1);
  double sum = 0.0, sum2 = 0.0;
  Eigen::VectorXd hist(p.size());
  for (int r = 0; r < replicas; ++r) {
    hist.setZero();
    for (int k = 0; k < n; ++k) hist(search_cdf(cdf, rng.uniform() * cdf.back())) += 1.0;
    const double tv = total_variation(hist / n, target);
    sum += tv;
    sum2 += tv * tv;
  }
  NoiseLevel out;
  out.mean = sum / replicas;
  out.sd = std::sqrt(std::max(0.0, (sum2 - replicas * out.mean * out.mean) / (replicas - 1)));
  return out;
}

void SplitSystem::check() const {
  if (values.rows() != x.size() || values.cols() != y.size()) {
    throw Error(ErrorKind::DimensionMismatch, "split system values must be x-size by y-size");
  }
}

SplitSystem product_split(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                          const std::function<std::complex<double>(double, double)>& psi) {
  SplitSystem out{x, y, Eigen::MatrixXcd(x.size(), y.size())};
  for (Eigen::Index j = 0; j < y.size(); ++j)
    for (Eigen::Index i = 0; i < x.size(); ++i) out.values(i, j) = psi(x(i), y(j));
  return out;
}

ConditionalWaveFunction conditional_wavefunction(const SplitSystem& split, int y_index) {
  split.check();
  if (y_index < 0 || y_index >= split.y.size()) throw Error(ErrorKind::InvalidArgument, "y index outside the grid");
  ConditionalWaveFunction out;
  const Eigen::VectorXcd slice = split.values.col(y_index);
  out.norm = slice.norm();
  if (!(out.norm > 0.0)) {
    throw Error(ErrorKind::ZeroNorm, "conditional wave function vanishes at y index " + std::to_string(y_index));
  }
  out.values = slice / out.norm;
  return out;
}

ConditionalReport conditional_probability_check(const SplitSystem& split, int count, std::uint64_t seed,
                                                int min_count) {
  split.check();
  const int nx = static_cast<int>(split.x.size()), ny = static_cast<int>(split.y.size());
  const Eigen::MatrixXd density = split.values.cwiseAbs2();
  const Eigen::VectorXd flat = density.reshaped();
  const std::vector<double> cdf = cumulative(flat);
  if (!(cdf.back() > 0.0)) throw Error(ErrorKind::ZeroNorm, "universal wave function has zero norm");
  const CounterRng rng(seed);
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(nx, ny);
  for (int k = 0; k < count; ++k) {
    const int cell = search_cdf(cdf, rng.uniform_at(static_cast<std::uint64_t>(k)) * cdf.back());
    counts(cell % nx, cell / nx) += 1.0;
  }
  ConditionalReport out;
  out.seed = seed;
  out.samples = count;
  for (int j = 0; j < ny; ++j) {
    const int n = static_cast<int>(counts.col(j).sum());
    if (n < min_count) continue;
    const Eigen::VectorXd target = conditional_wavefunction(split, j).values.cwiseAbs2();
    ConditionalBin bin;
    bin.y_index = j;
    bin.count = n;
    bin.tv = total_variation(counts.col(j) / n, target);
    bin.noise = multinomial_tv_noise(target, n, CounterRng::mix64(seed + static_cast<std::uint64_t>(j) + 1));
    out.bins.push_back(bin);
  }
  if (out.bins.empty()) {
    throw Error(ErrorKind::InsufficientSamples,
                "no environment value received " + std::to_string(min_count) + " samples");
  }
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0, tv_sum = 0.0, mean_sum = 0.0, var_sum = 0.0;
  out.worst_sigma = -std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < out.bins.size(); ++b) {
    const ConditionalBin& bin = out.bins[b];
    if (out.worst < 0 || bin.tv > out.worst_tv) {
      out.worst = static_cast<int>(b);
      out.worst_tv = bin.tv;
    }
    if (bin.noise.sd > 0.0) out.worst_sigma = std::max(out.worst_sigma, (bin.tv - bin.noise.mean) / bin.noise.sd);
    tv_sum += bin.tv;
    mean_sum += bin.noise.mean;
    var_sum += bin.noise.sd * bin.noise.sd;
    const double lx = std::log(static_cast<double>(bin.count)), ly = std::log(std::max(bin.tv, 1e-300));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double m = static_cast<double>(out.bins.size());
  const double var = sxx - sx * sx / m;
  out.slope = var > 0.0 ? (sxy - sx * sy / m) / var : 0.0;
  out.pooled_sigma = var_sum > 0.0 ? (tv_sum - mean_sum) / std::sqrt(var_sum) : 0.0;
  return out;
}

FiberReport fiber_nonnormalizability_check(const AbsoluteFunction& psi, const Configuration& q,
                                           const std::vector<SimilarityTransform>& transforms) {
  const double base = std::norm(psi(q));
  if (!(base > 0.0)) throw Error(ErrorKind::ZeroNorm, "wave function vanishes at the base configuration");
  FiberReport out;
  for (const SimilarityTransform& t : transforms) {
    out.max_variation = std::max(out.max_variation, std::abs(std::norm(psi(apply_transform(t, q))) / base - 1.0));
    ++out.samples;
  }
  return out;
}

FiberReport fiber_nonnormalizability_check(const LiftedWaveFunction& psi, const Configuration& q,
                                           const std::vector<SimilarityTransform>& transforms) {
  if (psi.gauge() != Gauge::Gauge1) {
    throw Error(ErrorKind::InvalidArgument, "fiber check applies to Gauge1 lifts");
  }
  return fiber_nonnormalizability_check(AbsoluteFunction([&psi](const Configuration& y) { return psi(y); }), q,
                                        transforms);
}

std::vector<SimilarityTransform> random_transforms(int dimension, int count, std::uint64_t seed,
                                                   double translation_scale, double min_scale, double max_scale) {
  if (!(min_scale > 0.0) || !(max_scale >= min_scale)) {
    throw Error(ErrorKind::InvalidArgument, "scale range must satisfy 0 < min_scale <= max_scale");
  }
  CounterRng rng(seed);
  std::normal_distribution<double> normal;
  std::vector<SimilarityTransform> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) {
    SimilarityTransform t;
    t.rotation = random_rotation<double>(dimension, [&] { return normal(rng); });
    t.translation = Eigen::VectorXd(dimension);
    for (int i = 0; i < dimension; ++i) t.translation(i) = translation_scale * normal(rng);
    t.scale = std::exp(std::log(min_scale) + (std::log(max_scale) - std::log(min_scale)) * rng.uniform());
    out.push_back(t);
  }
  return out;
}

}  // namespace shapedyn
