#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "tdba/sparse_grid.hpp"

using namespace tdba;

namespace {

// E[xi^k] for xi ~ N(0,1): 0 for odd k, (k-1)!! for even k.
double gaussian_moment(int k) {
  if (k % 2 == 1) return 0.0;
  double m = 1.0;
  for (int i = k - 1; i > 1; i -= 2) m *= i;
  return m;
}

}  // namespace

TEST_SUITE("sparse_grid") {

TEST_CASE("small gauss-hermite rules match closed forms") {
  const QuadratureRule1D r1 = gauss_hermite_1d(1);
  REQUIRE(r1.size() == 1);
  CHECK(r1.nodes(0) == 0.0);
  CHECK(std::abs(r1.weights(0) - 1.0) < 1e-15);

  const QuadratureRule1D r2 = gauss_hermite_1d(2);
  REQUIRE(r2.size() == 2);
  CHECK(std::abs(r2.nodes(0) + 1.0) < 1e-14);
  CHECK(std::abs(r2.nodes(1) - 1.0) < 1e-14);
  CHECK(std::abs(r2.weights(0) - 0.5) < 1e-14);
  CHECK(std::abs(r2.weights(1) - 0.5) < 1e-14);

  const QuadratureRule1D r3 = gauss_hermite_1d(3);
  REQUIRE(r3.size() == 3);
  CHECK(std::abs(r3.nodes(0) + std::sqrt(3.0)) < 1e-14);
  CHECK(r3.nodes(1) == 0.0);
  CHECK(std::abs(r3.nodes(2) - std::sqrt(3.0)) < 1e-14);
  CHECK(std::abs(r3.weights(0) - 1.0 / 6.0) < 1e-14);
  CHECK(std::abs(r3.weights(1) - 2.0 / 3.0) < 1e-14);
  CHECK(std::abs(r3.weights(2) - 1.0 / 6.0) < 1e-14);
}

TEST_CASE("rules integrate gaussian moments exactly up to degree 2n-1") {
  for (int n : {4, 8, 13}) {
    const QuadratureRule1D rule = gauss_hermite_1d(n);
    for (int k = 0; k <= 2 * n - 1; ++k) {
      double q = 0.0;
      for (int i = 0; i < n; ++i) q += rule.weights(i) * std::pow(rule.nodes(i), k);
      const double exact = gaussian_moment(k);
      const double scale = std::max(1.0, gaussian_moment(k % 2 == 0 ? k : k + 1));
      CHECK(std::abs(q - exact) < 1e-12 * scale);
    }
  }
}

TEST_CASE("weights are positive, sum to one, nodes symmetric") {
  for (int n = 1; n <= 25; ++n) {
    const QuadratureRule1D rule = gauss_hermite_1d(n);
    CHECK(std::abs(rule.weights.sum() - 1.0) < 1e-13);
    CHECK(rule.weights.minCoeff() > 0.0);
    for (int i = 0; i < n; ++i) {
      // Symmetrized construction: mirror nodes are bit-equal.
      CHECK(rule.nodes(i) == -rule.nodes(n - 1 - i));
      CHECK(std::abs(rule.weights(i) - rule.weights(n - 1 - i)) < 1e-15);
    }
    if (n % 2 == 1) CHECK(rule.nodes(n / 2) == 0.0);
  }
}

TEST_CASE("node counts match the frozen table") {
  CHECK(level_rule_size(1) == 1);
  CHECK(level_rule_size(4) == 4);
  CHECK(smolyak_grid(10, 2).size() == 21);
  CHECK(smolyak_grid(5, 5).size() == 781);
  CHECK(smolyak_grid(3, 5).size() == 165);
  CHECK(smolyak_grid(2, 2).size() == 5);
  CHECK(smolyak_grid(1, 3).size() == 3);
  CHECK(smolyak_grid(10, 5).size() == 8761);
}

TEST_CASE("level-2 grid is the center plus one symmetric pair per dimension") {
  const SparseGrid grid = smolyak_grid(10, 2);
  REQUIRE(grid.size() == 21);
  int center = 0, axis = 0;
  for (int q = 0; q < grid.size(); ++q) {
    int nonzero = 0;
    for (int j = 0; j < 10; ++j)
      if (grid.nodes(q, j) != 0.0) ++nonzero;
    if (nonzero == 0)
      ++center;
    else if (nonzero == 1)
      ++axis;
  }
  CHECK(center == 1);
  CHECK(axis == 20);
  CHECK(std::abs(grid.weights.sum() - 1.0) < 1e-12);
}

TEST_CASE("sparse quadrature integrates low total-degree polynomials") {
  // Level 3 is exact through total degree 5.
  const SparseGrid grid = smolyak_grid(3, 3);
  auto quad = [&](auto f) {
    Eigen::VectorXd v(grid.size());
    for (int q = 0; q < grid.size(); ++q) v(q) = f(grid.nodes.row(q));
    return integrate(grid, v);
  };
  CHECK(std::abs(quad([](auto x) { return 1.0; }) - 1.0) < 1e-12);
  CHECK(std::abs(quad([](auto x) { return x(0); })) < 1e-12);
  CHECK(std::abs(quad([](auto x) { return x(0) * x(0); }) - 1.0) < 1e-12);
  CHECK(std::abs(quad([](auto x) { return std::pow(x(1), 4); }) - 3.0) < 1e-12);
  CHECK(std::abs(quad([](auto x) { return x(0) * x(0) * x(2) * x(2); }) - 1.0) < 1e-12);
  CHECK(std::abs(quad([](auto x) { return x(0) * x(1); })) < 1e-12);
  CHECK(std::abs(quad([](auto x) { return std::pow(x(0), 3) * x(1); })) < 1e-12);
}

TEST_CASE("grids are deterministic and deduplicated") {
  const SparseGrid a = smolyak_grid(4, 4);
  const SparseGrid b = smolyak_grid(4, 4);
  REQUIRE(a.size() == b.size());
  CHECK((a.nodes - b.nodes).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.weights - b.weights).cwiseAbs().maxCoeff() == 0.0);

  std::set<std::vector<double>> seen;
  for (int q = 0; q < a.size(); ++q) {
    std::vector<double> node(a.dimension);
    for (int j = 0; j < a.dimension; ++j) node[j] = a.nodes(q, j);
    CHECK(seen.insert(node).second);  // exact duplicates would have been merged
  }
}

TEST_CASE("integrate is the signed weighted sum") {
  const SparseGrid grid = smolyak_grid(2, 3);
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(grid.size());
  CHECK(std::abs(integrate(grid, ones) - grid.weights.sum()) < 1e-15);
}

}  // TEST_SUITE
