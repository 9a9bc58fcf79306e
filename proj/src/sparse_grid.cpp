#include "tdba/sparse_grid.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include <Eigen/Eigenvalues>

namespace tdba {

QuadratureRule1D gauss_hermite_1d(int n) {
  if (n < 1) throw std::invalid_argument("gauss_hermite_1d: need n >= 1");
  QuadratureRule1D rule;
  if (n == 1) {
    rule.nodes = Eigen::VectorXd::Zero(1);
    rule.weights = Eigen::VectorXd::Ones(1);
    return rule;
  }
  // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite family:
  // zero diagonal, off-diagonal sqrt(k).
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double b = std::sqrt(static_cast<double>(k));
    jacobi(k, k - 1) = b;
    jacobi(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("gauss_hermite_1d: eigensolve failed");
  rule.nodes = es.eigenvalues();  // ascending
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    const double v0 = es.eigenvectors()(0, i);
    rule.weights(i) = v0 * v0;  // beta_0 = total mass = 1
  }
  // Symmetrize: the exact rule satisfies x_i = -x_{n-1-i}, w_i = w_{n-1-i};
  // enforce it so equal nodes across levels compare bit-identically.
  for (int i = 0, j = n - 1; i < j; ++i, --j) {
    const double x = 0.5 * (rule.nodes(j) - rule.nodes(i));
    rule.nodes(i) = -x;
    rule.nodes(j) = x;
    const double w = 0.5 * (rule.weights(i) + rule.weights(j));
    rule.weights(i) = w;
    rule.weights(j) = w;
  }
  if (n % 2 == 1) rule.nodes(n / 2) = 0.0;
  rule.weights /= rule.weights.sum();
  return rule;
}

int level_rule_size(int level) {
  if (level < 1) throw std::invalid_argument("level_rule_size: need level >= 1");
  return level;
}

namespace {

// Enumerate multi-indices i >= 1 with |i| = total into `out` (appended).
void compositions(int total, int parts, std::vector<int>& scratch,
                  std::vector<std::vector<int>>& out) {
  if (parts == 1) {
    scratch.push_back(total);
    out.push_back(scratch);
    scratch.pop_back();
    return;
  }
  for (int first = 1; first <= total - (parts - 1); ++first) {
    scratch.push_back(first);
    compositions(total - first, parts - 1, scratch, out);
    scratch.pop_back();
  }
}

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Shared table of 1D node values across all levels in play, with tolerance
// 1e-12 for identifying coincident coordinates (the symmetrized rules make
// shared values bit-equal, but the tolerance is the contract).
class ValueTable {
 public:
  int id_of(double v) {
    auto it = ids_.lower_bound(v - tol_);
    if (it != ids_.end() && std::abs(it->first - v) <= tol_) return it->second;
    const int id = static_cast<int>(values_.size());
    values_.push_back(v);
    ids_.emplace(v, id);
    return id;
  }
  double value(int id) const { return values_[id]; }

 private:
  static constexpr double tol_ = 1e-12;
  std::vector<double> values_;
  std::map<double, int> ids_;
};

}  // namespace

SparseGrid smolyak_grid(int dimension, int level) {
  if (dimension < 1) throw std::invalid_argument("smolyak_grid: need dimension >= 1");
  if (level < 1) throw std::invalid_argument("smolyak_grid: need level >= 1");
  const int d = dimension;
  const int q = d + level - 1;

  // Per-level 1D rules with coordinate ids into a shared value table.
  ValueTable table;
  std::vector<QuadratureRule1D> rules(level + 1);
  std::vector<std::vector<int>> rule_ids(level + 1);
  for (int l = 1; l <= level; ++l) {
    rules[l] = gauss_hermite_1d(level_rule_size(l));
    rule_ids[l].resize(rules[l].size());
    for (int j = 0; j < rules[l].size(); ++j)
      rule_ids[l][j] = table.id_of(rules[l].nodes(j));
  }

  // Accumulate combination-weighted tensor rules, merging duplicate nodes.
  std::map<std::vector<int>, double> merged;
  std::vector<std::vector<int>> index_sets;
  {
    std::vector<int> scratch;
    for (int total = std::max(d, q - d + 1); total <= q; ++total)
      compositions(total, d, scratch, index_sets);
  }
  std::vector<int> point(d);
  std::vector<int> digit(d);
  for (const auto& levels : index_sets) {
    int total = 0;
    for (int v : levels) total += v;
    const double coeff =
        ((q - total) % 2 == 0 ? 1.0 : -1.0) * binomial(d - 1, q - total);
    if (coeff == 0.0) continue;
    std::fill(digit.begin(), digit.end(), 0);
    bool done = false;
    while (!done) {
      double w = coeff;
      for (int k = 0; k < d; ++k) {
        point[k] = rule_ids[levels[k]][digit[k]];
        w *= rules[levels[k]].weights(digit[k]);
      }
      merged[point] += w;
      // odometer over tensor indices
      int k = 0;
      for (; k < d; ++k) {
        if (++digit[k] < rules[levels[k]].size()) break;
        digit[k] = 0;
      }
      done = (k == d);
    }
  }

  SparseGrid grid;
  grid.dimension = d;
  grid.level = level;
  const int n = static_cast<int>(merged.size());
  grid.nodes.resize(n, d);
  grid.weights.resize(n);
  int row = 0;
  for (const auto& [ids, w] : merged) {
    for (int k = 0; k < d; ++k) grid.nodes(row, k) = table.value(ids[k]);
    grid.weights(row) = w;
    ++row;
  }
  return grid;
}

double integrate(const SparseGrid& grid, const Eigen::VectorXd& values) {
  if (values.size() != grid.size())
    throw std::invalid_argument("integrate: values/grid size mismatch");
  return grid.weights.dot(values);
}

}  // namespace tdba
