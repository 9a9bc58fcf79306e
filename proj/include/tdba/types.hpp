#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

namespace tdba {

using Field = Eigen::VectorXd;

// 1D grid with trapezoid quadrature weights attached; all spatial fields in
// this library are nodal values on such a grid.
struct SpatialGrid {
  Eigen::VectorXd points;
  Eigen::VectorXd cell_weights;

  int size() const { return static_cast<int>(points.size()); }
  double length() const { return points(points.size() - 1) - points(0); }

  static SpatialGrid uniform(double a, double b, int n);
  static SpatialGrid from_points(const Eigen::VectorXd& pts);
};

inline SpatialGrid SpatialGrid::from_points(const Eigen::VectorXd& pts) {
  const int n = static_cast<int>(pts.size());
  if (n < 2) throw std::invalid_argument("grid needs at least two points");
  for (int i = 1; i < n; ++i)
    if (!(pts(i) > pts(i - 1)))
      throw std::invalid_argument("grid points must be strictly increasing");
  SpatialGrid g;
  g.points = pts;
  g.cell_weights.setZero(n);
  for (int i = 0; i + 1 < n; ++i) {
    const double h = pts(i + 1) - pts(i);
    g.cell_weights(i) += 0.5 * h;
    g.cell_weights(i + 1) += 0.5 * h;
  }
  return g;
}

inline SpatialGrid SpatialGrid::uniform(double a, double b, int n) {
  if (n < 2) throw std::invalid_argument("grid needs at least two points");
  if (!(b > a)) throw std::invalid_argument("grid interval is empty");
  Eigen::VectorXd pts(n);
  const double h = (b - a) / (n - 1);
  for (int i = 0; i < n; ++i) pts(i) = a + h * i;
  pts(n - 1) = b;
  return from_points(pts);
}

}  // namespace tdba
