#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "tdba/basis_adaptation.hpp"
#include "tdba/polynomial_chaos.hpp"
#include "tdba/types.hpp"

namespace tdba {

struct MomentField {
  std::vector<double> times;
  Eigen::MatrixXd mean;    // times x grid points
  Eigen::MatrixXd stddev;  // same shape, nonnegative
};

// Full-domain expansions, one per output time.
MomentField moments_from_pce(const std::vector<double>& times,
                             const std::vector<PCExpansion>& pces);
// Per-subdomain expansions stitched to the global grid; interface nodes take
// the average of the two adjacent values (they agree to solver tolerance).
MomentField moments_from_pce(const AdaptedTrajectory& traj);

struct PdfEstimate {
  Eigen::VectorXd abscissae;
  Eigen::VectorXd density;
  Eigen::VectorXd samples;  // retained for re-evaluation on a common grid
  int sample_count = 0;
  double bandwidth = 0.0;
  bool degenerate = false;  // zero sample variance
  int grid_index = 0;       // nearest grid point actually used
};

// Gaussian KDE with Silverman bandwidth 1.06 sigma n^{-1/5}, evaluated on
// `n_points` abscissae spanning the samples plus a 3-bandwidth margin.
PdfEstimate kde_estimate(Eigen::VectorXd samples, int n_points = 401);

// Evaluate the Gaussian KDE defined by (samples, bandwidth) on abscissae.
Eigen::VectorXd kde_density(const Eigen::VectorXd& samples, double bandwidth,
                            const Eigen::VectorXd& abscissae);

// Full-dimension expansion sampled at a grid point: xi ~ N(0, I_d).
PdfEstimate pdf_at_point(const PCExpansion& pce, const SpatialGrid& grid, double x,
                         int n_samples, std::uint64_t seed);

// Reduced expansion: xi ~ N(0, I_d) mapped through eta = A xi for the
// subdomain containing x, then the subdomain expansion is evaluated. Using
// the same seed as the reference draws the identical xi stream.
PdfEstimate pdf_at_point(const AdaptedTrajectory& traj, double t, double x, int n_samples,
                         std::uint64_t seed);

// sqrt(∫(test-ref)² dx / ∫ref² dx) with the grid's trapezoid weights; falls
// back to the absolute norm for a zero reference.
double relative_l2(const Field& test, const Field& ref, const SpatialGrid& grid);

struct ErrorMaps {
  Eigen::MatrixXd mean_abs;  // |Δmean|(t, x)
  Eigen::MatrixXd std_abs;   // |Δstd|(t, x)
};

ErrorMaps abs_error_map(const MomentField& test, const MomentField& ref);

// Trapezoid integral of |p - q| after re-evaluating both estimates on a
// shared abscissa grid covering both supports; lies in [0, 2].
double pdf_l1_distance(const PdfEstimate& p, const PdfEstimate& q, int n_points = 801);

}  // namespace tdba
