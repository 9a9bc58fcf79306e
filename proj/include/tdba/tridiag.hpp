#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace tdba {

// Tridiagonal system in banded storage. Thomas algorithm, no pivoting; fine
// for the diagonally dominant matrices produced by backward-Euler diffusion.
struct Tridiagonal {
  Eigen::VectorXd lower;  // a_i, i = 1..n-1 (sub-diagonal)
  Eigen::VectorXd diag;   // b_i, i = 0..n-1
  Eigen::VectorXd upper;  // c_i, i = 0..n-2 (super-diagonal)

  int size() const { return static_cast<int>(diag.size()); }

  void resize(int n) {
    lower.setZero(n);
    diag.setZero(n);
    upper.setZero(n);
  }
};

// One-off solve; overwrites nothing, allocates scratch internally.
inline Eigen::VectorXd solve_tridiagonal(const Tridiagonal& m, const Eigen::VectorXd& rhs) {
  const int n = m.size();
  if (rhs.size() != n) throw std::invalid_argument("tridiagonal rhs size mismatch");
  Eigen::VectorXd cp(n), dp(n);
  double beta = m.diag(0);
  if (beta == 0.0) throw std::runtime_error("tridiagonal solve: zero pivot");
  cp(0) = (n > 1) ? m.upper(0) / beta : 0.0;
  dp(0) = rhs(0) / beta;
  for (int i = 1; i < n; ++i) {
    beta = m.diag(i) - m.lower(i) * cp(i - 1);
    if (beta == 0.0) throw std::runtime_error("tridiagonal solve: zero pivot");
    cp(i) = (i + 1 < n) ? m.upper(i) / beta : 0.0;
    dp(i) = (rhs(i) - m.lower(i) * dp(i - 1)) / beta;
  }
  Eigen::VectorXd x(n);
  x(n - 1) = dp(n - 1);
  for (int i = n - 2; i >= 0; --i) x(i) = dp(i) - cp(i) * x(i + 1);
  return x;
}

// Factored form for repeated solves against the same matrix (the linear DD
// workspace reuses one factorization for the particular and all unit solves).
struct TridiagonalFactor {
  Eigen::VectorXd cp;     // normalized super-diagonal
  Eigen::VectorXd inv_b;  // reciprocal pivots
  Eigen::VectorXd lower;  // copy of the sub-diagonal

  int size() const { return static_cast<int>(inv_b.size()); }

  static TridiagonalFactor compute(const Tridiagonal& m) {
    const int n = m.size();
    TridiagonalFactor f;
    f.cp.setZero(n);
    f.inv_b.setZero(n);
    f.lower = m.lower;
    double beta = m.diag(0);
    if (beta == 0.0) throw std::runtime_error("tridiagonal factor: zero pivot");
    f.inv_b(0) = 1.0 / beta;
    if (n > 1) f.cp(0) = m.upper(0) * f.inv_b(0);
    for (int i = 1; i < n; ++i) {
      beta = m.diag(i) - m.lower(i) * f.cp(i - 1);
      if (beta == 0.0) throw std::runtime_error("tridiagonal factor: zero pivot");
      f.inv_b(i) = 1.0 / beta;
      if (i + 1 < n) f.cp(i) = m.upper(i) * f.inv_b(i);
    }
    return f;
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    const int n = size();
    if (rhs.size() != n) throw std::invalid_argument("tridiagonal rhs size mismatch");
    Eigen::VectorXd x(n);
    x(0) = rhs(0) * inv_b(0);
    for (int i = 1; i < n; ++i) x(i) = (rhs(i) - lower(i) * x(i - 1)) * inv_b(i);
    for (int i = n - 2; i >= 0; --i) x(i) -= cp(i) * x(i + 1);
    return x;
  }
};

}  // namespace tdba
