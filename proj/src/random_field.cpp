#include "tdba/random_field.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace tdba {

double exponential_covariance(const CovarianceKernel& kernel, double x1, double x2) {
  if (!(kernel.variance > 0.0) || !(kernel.correlation_length > 0.0))
    throw std::invalid_argument("exponential_covariance: variance and length must be positive");
  return kernel.variance * std::exp(-std::abs(x1 - x2) / kernel.correlation_length);
}

KLExpansion solve_kl_eigenproblem(const CovarianceKernel& kernel, const SpatialGrid& grid,
                                  int n_modes, const Field& mean) {
  const int n = grid.size();
  if (n_modes < 1 || n_modes > n)
    throw std::invalid_argument("solve_kl_eigenproblem: need 1 <= n_modes <= grid size");
  if (mean.size() != n)
    throw std::invalid_argument("solve_kl_eigenproblem: mean field size mismatch");

  Eigen::MatrixXd cov(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      const double c = exponential_covariance(kernel, grid.points(i), grid.points(j));
      cov(i, j) = c;
      cov(j, i) = c;
    }

  // Symmetrized Nystrom: eigensolve W^{1/2} C W^{1/2}, then unscale.
  const Eigen::VectorXd sqrt_w = grid.cell_weights.array().sqrt();
  Eigen::MatrixXd b = sqrt_w.asDiagonal() * cov * sqrt_w.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("solve_kl_eigenproblem: eigensolve failed");

  KLExpansion kl;
  kl.grid = grid;
  kl.mean = mean;
  kl.eigenvalues.resize(n_modes);
  kl.eigenfunctions.resize(n, n_modes);
  for (int m = 0; m < n_modes; ++m) {
    const int src = n - 1 - m;  // Eigen sorts ascending
    kl.eigenvalues(m) = std::max(es.eigenvalues()(src), 0.0);
    Eigen::VectorXd phi = es.eigenvectors().col(src).array() / sqrt_w.array();
    int peak = 0;
    phi.cwiseAbs().maxCoeff(&peak);
    if (phi(peak) < 0.0) phi = -phi;
    kl.eigenfunctions.col(m) = phi;
  }
  return kl;
}

KLExpansion solve_kl_eigenproblem(const CovarianceKernel& kernel, const SpatialGrid& grid,
                                  int n_modes) {
  return solve_kl_eigenproblem(kernel, grid, n_modes, Field::Zero(grid.size()));
}

Field evaluate_gaussian_field(const KLExpansion& kl, const Eigen::VectorXd& xi) {
  if (xi.size() != kl.dimension())
    throw std::invalid_argument("evaluate_gaussian_field: xi dimension mismatch");
  return kl.mean + kl.eigenfunctions * kl.eigenvalues.array().sqrt().matrix().asDiagonal() * xi;
}

Field evaluate_lognormal_field(const KLExpansion& kl, const Eigen::VectorXd& xi) {
  return evaluate_gaussian_field(kl, xi).array().exp();
}

Eigen::MatrixXd evaluate_gaussian_fields(const KLExpansion& kl, const Eigen::MatrixXd& xi) {
  if (xi.cols() != kl.dimension())
    throw std::invalid_argument("evaluate_gaussian_fields: xi dimension mismatch");
  Eigen::MatrixXd fields =
      xi * kl.eigenvalues.array().sqrt().matrix().asDiagonal() * kl.eigenfunctions.transpose();
  fields.rowwise() += kl.mean.transpose();
  return fields;
}

Eigen::MatrixXd evaluate_lognormal_fields(const KLExpansion& kl, const Eigen::MatrixXd& xi) {
  return evaluate_gaussian_fields(kl, xi).array().exp();
}

LognormalParams lognormal_params_from_moments(double mean, double stddev) {
  if (!(mean > 0.0) || !(stddev > 0.0))
    throw std::invalid_argument("lognormal_params_from_moments: moments must be positive");
  LognormalParams p;
  const double sigma2 = std::log1p((stddev * stddev) / (mean * mean));
  p.log_std = std::sqrt(sigma2);
  p.log_mean = std::log(mean) - 0.5 * sigma2;
  return p;
}

}  // namespace tdba
