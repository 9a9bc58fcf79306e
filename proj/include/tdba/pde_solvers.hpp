#pragma once

#include <Eigen/Dense>
#include <vector>

#include "tdba/tridiag.hpp"
#include "tdba/types.hpp"

namespace tdba {

// Step endpoints for marching from 0 to t_end with nominal step dt, with
// steps shortened where needed so every requested record time is an exact
// step endpoint. All drivers share this so trajectories stay comparable.
struct TimeSchedule {
  std::vector<double> times;  // time after each step
  std::vector<char> record;   // snapshot flag per step
  int steps() const { return static_cast<int>(times.size()); }
};

TimeSchedule build_schedule(double dt, double t_end, const std::vector<double>& record_times);

// ---------------------------------------------------------------------------
// Linear diffusion u_t = (a(x) u_x)_x + f, Dirichlet both ends.

struct LinearDiffusionProblem {
  SpatialGrid grid;
  Field coefficient;  // a(x) > 0 nodal
  Field source;       // f(x) nodal; empty means zero
  double bc_left = 0.0;
  double bc_right = 0.0;
  Field initial;
  double dt = 1e-3;
  double t_end = 1.0;
};

// Backward-Euler system for fixed (a, dt): conservative finite differences
// with harmonic-mean face coefficients, Dirichlet rows as identity. Factor
// once, back-substitute per step.
struct LinearSystemBE {
  Eigen::VectorXd mass;          // trapezoid cell mass
  Eigen::VectorXd mass_over_dt;  // mass / dt
  TridiagonalFactor factor;
};

LinearSystemBE assemble_linear_be(const SpatialGrid& grid, const Field& a, double dt);
Field linear_be_solve(const LinearSystemBE& sys, const Field& u, const Field& f,
                      double bc_left, double bc_right);

// Single backward-Euler step (assembles internally).
Field step_linear(const Field& u, const LinearDiffusionProblem& p, double dt);

struct Trajectory {
  std::vector<double> times;
  std::vector<Field> states;
};

Trajectory solve_linear(const LinearDiffusionProblem& p, const std::vector<double>& record_times);

// ---------------------------------------------------------------------------
// Richards equation in pressure head: psi_t = d/dx [ K(psi) (psi_x + 1) ],
// K(psi) = Ks kr(Se(psi)), van Genuchten-Mualem closures.

struct VanGenuchten {
  double theta_r = 0.078;
  double theta_s = 0.43;
  double alpha = 0.036;
  double n = 1.56;
  double m() const { return 1.0 - 1.0 / n; }
};

double effective_saturation(double psi, const VanGenuchten& vg);
// kr as a function of psi (combines Se and the Mualem form; saturated branch
// returns 1 for psi >= 0).
double relative_conductivity(double psi, const VanGenuchten& vg);
double van_genuchten_K(double psi, double Ks, const VanGenuchten& vg);

struct PicardOptions {
  double tol = 1e-8;       // max-norm increment
  int max_iter = 200;
  int max_halvings = 6;    // dt retries in the drivers
};

struct RichardsProblem {
  SpatialGrid grid;
  Field saturated_conductivity;  // Ks(x) nodal
  VanGenuchten vg;
  double bc_left = 0.0;
  double bc_right = 0.0;
  Field initial;
  double dt = 0.05;
  double t_end = 1.0;
  PicardOptions picard;
};

struct PicardDivergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One backward-Euler step solved by Picard iteration: face conductivities
// (arithmetic mean) and the gravity flux lag one iterate. Throws
// PicardDivergence if max_iter is exhausted.
Field step_richards(const Field& psi, const RichardsProblem& p, double dt);

// Marches the schedule; a step whose Picard iteration fails is retried with
// halved dt, up to picard.max_halvings times.
Trajectory solve_richards(const RichardsProblem& p, const std::vector<double>& record_times);

// Workspace form for tight loops over many realizations.
class RichardsStepper {
 public:
  RichardsStepper(const SpatialGrid& grid, const VanGenuchten& vg, double bc_left,
                  double bc_right, const PicardOptions& opts);
  void set_conductivity(const Field& Ks) { Ks_ = Ks; }
  void set_bcs(double bc_left, double bc_right) {
    bc_left_ = bc_left;
    bc_right_ = bc_right;
  }
  // Advances psi by dt in place, substepping on Picard failure.
  void advance(Field& psi, double dt);
  // Single attempt without substepping; false if Picard hit max_iter.
  bool try_step(const Field& psi, double dt, Field& out);
  long picard_iterations() const { return picard_iterations_; }
  long tridiagonal_solves() const { return tridiagonal_solves_; }
  // Per-iteration max-norm updates of the most recent try_step, for
  // diagnosing convergence failures.
  const std::vector<double>& last_deltas() const { return deltas_; }

 private:
  void advance_recursive(Field& psi, double dt, int depth);

  const SpatialGrid& grid_;
  VanGenuchten vg_;
  double bc_left_, bc_right_;
  PicardOptions opts_;
  Field Ks_;
  Tridiagonal matrix_;
  Field k_nodes_, rhs_, iterate_, next_, update_, prev_update_;
  std::vector<double> deltas_;
  long picard_iterations_ = 0;
  long tridiagonal_solves_ = 0;
};

}  // namespace tdba
