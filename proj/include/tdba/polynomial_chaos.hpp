#pragma once

#include <Eigen/Dense>
#include <vector>

#include "tdba/sparse_grid.hpp"
#include "tdba/types.hpp"

namespace tdba {

using MultiIndex = std::vector<int>;

// Normalized probabilists' Hermite polynomial h~_n(x), orthonormal under the
// standard Gaussian weight.
double hermite_normalized(int degree, double x);

// Total-degree Hermite basis in graded lexicographic order: by total degree,
// then earlier variables carry higher exponents first ((1,0) before (0,1)).
struct HermiteBasis {
  int dimension = 0;
  int order = 0;
  std::vector<MultiIndex> indices;
  int size() const { return static_cast<int>(indices.size()); }
};

HermiteBasis build_basis(int dimension, int order);

// Row q = all basis functions at points.row(q).
Eigen::MatrixXd basis_values(const HermiteBasis& basis, const Eigen::MatrixXd& points);

// PC expansion of a spatial field: coefficients(i, j) multiplies basis
// function i at grid point j.
struct PCExpansion {
  HermiteBasis basis;
  Eigen::MatrixXd coefficients;  // basis.size() x n_points
  int n_points() const { return static_cast<int>(coefficients.cols()); }
};

Field evaluate_pce(const PCExpansion& pce, const Eigen::VectorXd& xi);

// Non-intrusive spectral projection: sample_values(q, j) is the model output
// at grid point j for quadrature node q of `grid`.
PCExpansion project(const Eigen::MatrixXd& sample_values, const SparseGrid& grid,
                    const HermiteBasis& basis);

Field pce_mean(const PCExpansion& pce);
Field pce_std(const PCExpansion& pce);

}  // namespace tdba
