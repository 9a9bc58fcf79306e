#pragma once

#include <Eigen/Dense>

#include "tdba/types.hpp"

namespace tdba {

struct CovarianceKernel {
  double variance = 1.0;
  double correlation_length = 1.0;
};

// C(x1, x2) = sigma^2 exp(-|x1-x2|/l)
double exponential_covariance(const CovarianceKernel& kernel, double x1, double x2);

// Truncated Karhunen-Loeve expansion of a Gaussian process on a grid:
// g(x, xi) = mean(x) + sum_i sqrt(lambda_i) phi_i(x) xi_i.
// Discretized by Nystrom with the grid's trapezoid weights; eigenfunctions
// are orthonormal in the weighted inner product, signs fixed so each
// eigenfunction's largest-magnitude component is positive.
struct KLExpansion {
  SpatialGrid grid;
  Field mean;
  Eigen::VectorXd eigenvalues;     // descending
  Eigen::MatrixXd eigenfunctions;  // grid.size() x dimension
  int dimension() const { return static_cast<int>(eigenvalues.size()); }
};

KLExpansion solve_kl_eigenproblem(const CovarianceKernel& kernel, const SpatialGrid& grid,
                                  int n_modes, const Field& mean);
KLExpansion solve_kl_eigenproblem(const CovarianceKernel& kernel, const SpatialGrid& grid,
                                  int n_modes);

Field evaluate_gaussian_field(const KLExpansion& kl, const Eigen::VectorXd& xi);
Field evaluate_lognormal_field(const KLExpansion& kl, const Eigen::VectorXd& xi);

// Batch versions: one realization per row of xi; returned matrix is
// n_realizations x grid.size().
Eigen::MatrixXd evaluate_gaussian_fields(const KLExpansion& kl, const Eigen::MatrixXd& xi);
Eigen::MatrixXd evaluate_lognormal_fields(const KLExpansion& kl, const Eigen::MatrixXd& xi);

// Mean/std of exp(g) for Gaussian g determine (g0, sigma_g):
// sigma_g^2 = ln(1 + std^2/mean^2), g0 = ln(mean) - sigma_g^2/2.
struct LognormalParams {
  double log_mean = 0.0;  // g0
  double log_std = 1.0;   // sigma_g
};

LognormalParams lognormal_params_from_moments(double mean, double stddev);

}  // namespace tdba
