#include "tdba/stats_post.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tdba/rng.hpp"

namespace tdba {

MomentField moments_from_pce(const std::vector<double>& times,
                             const std::vector<PCExpansion>& pces) {
  if (times.size() != pces.size())
    throw std::invalid_argument("moments_from_pce: times/expansions size mismatch");
  MomentField mf;
  mf.times = times;
  if (pces.empty()) return mf;
  const int n = pces[0].n_points();
  mf.mean.resize(times.size(), n);
  mf.stddev.resize(times.size(), n);
  for (size_t i = 0; i < pces.size(); ++i) {
    if (pces[i].n_points() != n)
      throw std::invalid_argument("moments_from_pce: inconsistent grid sizes");
    mf.mean.row(i) = pce_mean(pces[i]).transpose();
    mf.stddev.row(i) = pce_std(pces[i]).transpose();
  }
  return mf;
}

namespace {

// Interface nodes appear in both neighbors; average them (equal shares).
Field stitch(const std::vector<Field>& pieces, const Partition& part) {
  Field out = Field::Zero(part.global.size());
  Eigen::VectorXd hits = Eigen::VectorXd::Zero(part.global.size());
  for (int s = 0; s < part.count; ++s) {
    out.segment(part.first(s), part.local_size(s)) += pieces[s];
    hits.segment(part.first(s), part.local_size(s)).array() += 1.0;
  }
  return out.cwiseQuotient(hits);
}

}  // namespace

MomentField moments_from_pce(const AdaptedTrajectory& traj) {
  MomentField mf;
  mf.times = traj.times;
  const int n = traj.partition.global.size();
  mf.mean.resize(traj.times.size(), n);
  mf.stddev.resize(traj.times.size(), n);
  for (size_t i = 0; i < traj.times.size(); ++i) {
    std::vector<Field> means(traj.partition.count), stds(traj.partition.count);
    for (int s = 0; s < traj.partition.count; ++s) {
      means[s] = pce_mean(traj.states[i][s]);
      stds[s] = pce_std(traj.states[i][s]);
    }
    mf.mean.row(i) = stitch(means, traj.partition).transpose();
    mf.stddev.row(i) = stitch(stds, traj.partition).transpose();
  }
  return mf;
}

// ---------------------------------------------------------------------------

Eigen::VectorXd kde_density(const Eigen::VectorXd& samples, double bandwidth,
                            const Eigen::VectorXd& abscissae) {
  if (!(bandwidth > 0.0)) throw std::invalid_argument("kde_density: bandwidth must be positive");
  const int n = static_cast<int>(samples.size());
  std::vector<double> sorted(samples.data(), samples.data() + n);
  std::sort(sorted.begin(), sorted.end());
  // exp(-z^2/2) underflows to exactly zero beyond |z| ~ 39, so restricting to
  // that window changes nothing but the work.
  const double cutoff = 39.0 * bandwidth;
  const double norm = 1.0 / (n * bandwidth * std::sqrt(2.0 * M_PI));
  Eigen::VectorXd density(abscissae.size());
  for (int g = 0; g < abscissae.size(); ++g) {
    const double x = abscissae(g);
    auto lo = std::lower_bound(sorted.begin(), sorted.end(), x - cutoff);
    auto hi = std::upper_bound(sorted.begin(), sorted.end(), x + cutoff);
    double acc = 0.0;
    for (auto it = lo; it != hi; ++it) {
      const double z = (x - *it) / bandwidth;
      acc += std::exp(-0.5 * z * z);
    }
    density(g) = norm * acc;
  }
  return density;
}

PdfEstimate kde_estimate(Eigen::VectorXd samples, int n_points) {
  const int n = static_cast<int>(samples.size());
  if (n < 2) throw std::invalid_argument("kde_estimate: need at least two samples");
  if (n_points < 2) throw std::invalid_argument("kde_estimate: need at least two abscissae");
  PdfEstimate est;
  est.sample_count = n;
  const double mean = samples.mean();
  const double var = (samples.array() - mean).square().sum() / (n - 1);
  const double sigma = std::sqrt(std::max(var, 0.0));
  est.bandwidth = 1.06 * sigma * std::pow(static_cast<double>(n), -0.2);
  if (!(est.bandwidth > 0.0)) {
    est.degenerate = true;
    est.bandwidth = 1e-12 * std::max(1.0, std::abs(mean));
  }
  const double lo = samples.minCoeff() - 3.0 * est.bandwidth;
  const double hi = samples.maxCoeff() + 3.0 * est.bandwidth;
  est.abscissae.setLinSpaced(n_points, lo, hi);
  est.density = kde_density(samples, est.bandwidth, est.abscissae);
  est.samples = std::move(samples);
  return est;
}

namespace {

int nearest_grid_index(const SpatialGrid& grid, double x) {
  int best = 0;
  double dist = std::abs(grid.points(0) - x);
  for (int i = 1; i < grid.size(); ++i) {
    const double d = std::abs(grid.points(i) - x);
    if (d < dist) {
      dist = d;
      best = i;
    }
  }
  return best;
}

Eigen::MatrixXd draw_normal(int rows, int cols, std::uint64_t seed) {
  NormalSampler rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.next();
  return m;
}

// Chunked PCE evaluation at one grid point for many sample rows of eta.
Eigen::VectorXd evaluate_samples(const PCExpansion& pce, const Eigen::MatrixXd& eta,
                                 int grid_col) {
  const int n = static_cast<int>(eta.rows());
  const Eigen::VectorXd coeff = pce.coefficients.col(grid_col);
  Eigen::VectorXd values(n);
  constexpr int chunk = 4096;
  for (int begin = 0; begin < n; begin += chunk) {
    const int len = std::min(chunk, n - begin);
    values.segment(begin, len).noalias() =
        basis_values(pce.basis, eta.middleRows(begin, len)) * coeff;
  }
  return values;
}

}  // namespace

PdfEstimate pdf_at_point(const PCExpansion& pce, const SpatialGrid& grid, double x,
                         int n_samples, std::uint64_t seed) {
  const int col = nearest_grid_index(grid, x);
  const Eigen::MatrixXd xi = draw_normal(n_samples, pce.basis.dimension, seed);
  PdfEstimate est = kde_estimate(evaluate_samples(pce, xi, col));
  est.grid_index = col;
  return est;
}

PdfEstimate pdf_at_point(const AdaptedTrajectory& traj, double t, double x, int n_samples,
                         std::uint64_t seed) {
  const Partition& part = traj.partition;
  const double tol = 1e-9 * std::max(1.0, std::abs(t));
  int ti = -1;
  for (size_t i = 0; i < traj.times.size(); ++i)
    if (std::abs(traj.times[i] - t) <= tol) ti = static_cast<int>(i);
  if (ti < 0)
    throw std::invalid_argument("pdf_at_point: time " + std::to_string(t) +
                                " is not a stored output");
  const int gi = nearest_grid_index(part.global, x);
  int s = part.count - 1;
  for (int c = 0; c < part.count; ++c)
    if (gi >= part.first(c) && gi <= part.last(c)) {
      s = c;
      break;
    }
  const int local = gi - part.first(s);
  const PCExpansion& pce = traj.states[ti][s];
  const RotationMap& map = traj.maps[ti][s];
  const int d = static_cast<int>(map.completed.cols());
  const Eigen::MatrixXd xi = draw_normal(n_samples, d, seed);
  const Eigen::MatrixXd eta = xi * map.completed.topRows(map.retained).transpose();
  PdfEstimate est = kde_estimate(evaluate_samples(pce, eta, local));
  est.grid_index = gi;
  return est;
}

// ---------------------------------------------------------------------------

double relative_l2(const Field& test, const Field& ref, const SpatialGrid& grid) {
  if (test.size() != ref.size() || test.size() != grid.size())
    throw std::invalid_argument("relative_l2: size mismatch");
  const double num = (grid.cell_weights.array() * (test - ref).array().square()).sum();
  const double den = (grid.cell_weights.array() * ref.array().square()).sum();
  if (den <= 0.0) return std::sqrt(num);
  return std::sqrt(num / den);
}

ErrorMaps abs_error_map(const MomentField& test, const MomentField& ref) {
  if (test.times.size() != ref.times.size() || test.mean.cols() != ref.mean.cols())
    throw std::invalid_argument("abs_error_map: lattice mismatch");
  for (size_t i = 0; i < test.times.size(); ++i)
    if (std::abs(test.times[i] - ref.times[i]) > 1e-9 * std::max(1.0, std::abs(ref.times[i])))
      throw std::invalid_argument("abs_error_map: output times differ");
  ErrorMaps maps;
  maps.mean_abs = (test.mean - ref.mean).cwiseAbs();
  maps.std_abs = (test.stddev - ref.stddev).cwiseAbs();
  return maps;
}

double pdf_l1_distance(const PdfEstimate& p, const PdfEstimate& q, int n_points) {
  if (n_points < 2) throw std::invalid_argument("pdf_l1_distance: need at least two points");
  const double lo = std::min(p.abscissae(0), q.abscissae(0));
  const double hi = std::max(p.abscissae(p.abscissae.size() - 1),
                             q.abscissae(q.abscissae.size() - 1));
  Eigen::VectorXd common;
  common.setLinSpaced(n_points, lo, hi);
  const Eigen::VectorXd dp = kde_density(p.samples, p.bandwidth, common);
  const Eigen::VectorXd dq = kde_density(q.samples, q.bandwidth, common);
  const Eigen::VectorXd diff = (dp - dq).cwiseAbs();
  double acc = 0.0;
  for (int i = 0; i + 1 < n_points; ++i)
    acc += 0.5 * (diff(i) + diff(i + 1)) * (common(i + 1) - common(i));
  return acc;
}

}  // namespace tdba
