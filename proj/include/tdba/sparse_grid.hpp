#pragma once

#include <Eigen/Dense>

namespace tdba {

// 1D Gauss-Hermite rule in the probabilists' convention: exact for
// E[p(xi)], xi ~ N(0,1), deg p <= 2n-1; weights sum to 1.
struct QuadratureRule1D {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
  int size() const { return static_cast<int>(nodes.size()); }
};

QuadratureRule1D gauss_hermite_1d(int n);

// Number of points of the 1D rule used at sparse-grid level l (linear growth;
// reproduces the standard isotropic Smolyak-Gauss-Hermite point counts:
// d=10 level 2 -> 21, d=5 level 5 -> 781, d=10 level 5 -> 8761).
int level_rule_size(int level);

// Smolyak sparse Gauss-Hermite grid; nodes deduplicated with combination
// weights merged, ordering deterministic.
struct SparseGrid {
  int dimension = 0;
  int level = 0;
  Eigen::MatrixXd nodes;    // size() x dimension
  Eigen::VectorXd weights;  // signed, sum to 1
  int size() const { return static_cast<int>(weights.size()); }
};

SparseGrid smolyak_grid(int dimension, int level);

// Quadrature sum over per-node values.
double integrate(const SparseGrid& grid, const Eigen::VectorXd& values);

}  // namespace tdba
