#include "tdba/polynomial_chaos.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tdba {

double hermite_normalized(int degree, double x) {
  if (degree < 0) throw std::invalid_argument("hermite_normalized: negative degree");
  double prev = 1.0;  // h~_0
  if (degree == 0) return prev;
  double cur = x;  // h~_1
  for (int n = 1; n < degree; ++n) {
    const double next = (x * cur - std::sqrt(static_cast<double>(n)) * prev) /
                        std::sqrt(static_cast<double>(n + 1));
    prev = cur;
    cur = next;
  }
  return cur;
}

namespace {

void enumerate_indices(int dimension, int budget, MultiIndex& scratch,
                       std::vector<MultiIndex>& out) {
  if (static_cast<int>(scratch.size()) == dimension) {
    out.push_back(scratch);
    return;
  }
  for (int e = 0; e <= budget; ++e) {
    scratch.push_back(e);
    enumerate_indices(dimension, budget - e, scratch, out);
    scratch.pop_back();
  }
}

int total_degree(const MultiIndex& a) {
  int t = 0;
  for (int e : a) t += e;
  return t;
}

}  // namespace

HermiteBasis build_basis(int dimension, int order) {
  if (dimension < 1) throw std::invalid_argument("build_basis: need dimension >= 1");
  if (order < 0) throw std::invalid_argument("build_basis: need order >= 0");
  HermiteBasis basis;
  basis.dimension = dimension;
  basis.order = order;
  MultiIndex scratch;
  enumerate_indices(dimension, order, scratch, basis.indices);
  std::sort(basis.indices.begin(), basis.indices.end(),
            [](const MultiIndex& a, const MultiIndex& b) {
              const int da = total_degree(a), db = total_degree(b);
              if (da != db) return da < db;
              return std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end());
            });
  return basis;
}

Eigen::MatrixXd basis_values(const HermiteBasis& basis, const Eigen::MatrixXd& points) {
  if (points.cols() != basis.dimension)
    throw std::invalid_argument("basis_values: point dimension mismatch");
  const int npts = static_cast<int>(points.rows());
  const int nterms = basis.size();
  // Univariate values once per (point, variable, degree), then products.
  Eigen::MatrixXd result(npts, nterms);
  const int p = basis.order;
  std::vector<double> h(static_cast<size_t>(basis.dimension) * (p + 1));
  for (int q = 0; q < npts; ++q) {
    for (int k = 0; k < basis.dimension; ++k) {
      const double x = points(q, k);
      double* hk = h.data() + static_cast<size_t>(k) * (p + 1);
      hk[0] = 1.0;
      if (p >= 1) hk[1] = x;
      for (int n = 1; n < p; ++n)
        hk[n + 1] = (x * hk[n] - std::sqrt(static_cast<double>(n)) * hk[n - 1]) /
                    std::sqrt(static_cast<double>(n + 1));
    }
    for (int i = 0; i < nterms; ++i) {
      double v = 1.0;
      const MultiIndex& idx = basis.indices[i];
      for (int k = 0; k < basis.dimension; ++k) {
        const int e = idx[k];
        if (e > 0) v *= h[static_cast<size_t>(k) * (p + 1) + e];
      }
      result(q, i) = v;
    }
  }
  return result;
}

Field evaluate_pce(const PCExpansion& pce, const Eigen::VectorXd& xi) {
  if (xi.size() != pce.basis.dimension)
    throw std::invalid_argument("evaluate_pce: xi dimension mismatch");
  Eigen::MatrixXd pt = xi.transpose();
  Eigen::MatrixXd psi = basis_values(pce.basis, pt);  // 1 x nterms
  return pce.coefficients.transpose() * psi.row(0).transpose();
}

PCExpansion project(const Eigen::MatrixXd& sample_values, const SparseGrid& grid,
                    const HermiteBasis& basis) {
  if (sample_values.rows() != grid.size())
    throw std::invalid_argument("project: one sample row per grid node required");
  if (grid.dimension != basis.dimension)
    throw std::invalid_argument("project: grid/basis dimension mismatch");
  PCExpansion pce;
  pce.basis = basis;
  const Eigen::MatrixXd psi = basis_values(basis, grid.nodes);  // nnodes x nterms
  pce.coefficients.noalias() =
      psi.transpose() * grid.weights.asDiagonal() * sample_values;
  return pce;
}

Field pce_mean(const PCExpansion& pce) { return pce.coefficients.row(0).transpose(); }

Field pce_std(const PCExpansion& pce) {
  const int nterms = static_cast<int>(pce.coefficients.rows());
  if (nterms < 1) throw std::invalid_argument("pce_std: empty expansion");
  Field var = Field::Zero(pce.n_points());
  for (int i = 1; i < nterms; ++i)
    var += pce.coefficients.row(i).array().square().matrix().transpose();
  return var.array().max(0.0).sqrt();
}

}  // namespace tdba
