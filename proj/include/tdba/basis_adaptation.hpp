#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tdba/domain_decomposition.hpp"
#include "tdba/pde_solvers.hpp"
#include "tdba/polynomial_chaos.hpp"
#include "tdba/random_field.hpp"
#include "tdba/sparse_grid.hpp"
#include "tdba/types.hpp"

namespace tdba {

// Stochastic problems pair a deterministic solver setup with the KL expansion
// of the log of its random coefficient; the realization field is
// exp(gaussian) per collocation node.
struct LinearStochasticProblem {
  LinearDiffusionProblem deterministic;  // coefficient overwritten per realization
  KLExpansion kl;
};

struct RichardsStochasticProblem {
  RichardsProblem deterministic;  // saturated_conductivity overwritten per realization
  KLExpansion kl;
};

using StochasticProblem = std::variant<LinearStochasticProblem, RichardsStochasticProblem>;

const KLExpansion& problem_kl(const StochasticProblem& problem);
const SpatialGrid& problem_grid(const StochasticProblem& problem);

// ---------------------------------------------------------------------------
// Degree-1 PC solution of the full-dimension problem on a low-level sparse
// grid; the source of every covariance and rotation in this module.
struct LinearPCSolution {
  std::vector<double> times;            // schedule endpoints, including t = 0
  std::vector<Eigen::MatrixXd> coeffs;  // per time: (d+1) x grid size; row 0 = mean
  int dimension = 0;
  int node_count = 0;  // collocation nodes used (21 for d=10, level 2)

  int find_time(double t) const;  // throws if t is not a stored snapshot
};

LinearPCSolution compute_linear_pc(const StochasticProblem& problem,
                                   const TimeSchedule& schedule, int level = 2);

// Covariance of the degree-1 solution on one subdomain, kept in factored form
// (C = U Uᵀ over the linear coefficient fields); dense() materializes it.
struct SolutionCovariance {
  int subdomain = 0;
  double time = 0.0;
  Eigen::MatrixXd factor;   // n_s x d, column j = u_{j+1} restricted to the subdomain
  Eigen::VectorXd weights;  // subdomain trapezoid weights
  Eigen::MatrixXd dense() const { return factor * factor.transpose(); }
};

SolutionCovariance solution_covariance(const LinearPCSolution& lin, double t,
                                       const Partition& part, int s);

struct HilbertKLModes {
  Eigen::VectorXd eigenvalues;  // all of them, descending
  Eigen::MatrixXd modes;        // n_s x retained, orthonormal under the weights
  int retained = 0;
  bool rank_deficient = false;  // fewer than `retained` positive eigenvalues
  double capture_ratio(int r) const;
};

HilbertKLModes hilbert_kl(const SolutionCovariance& cov, int r,
                          const HilbertKLModes* previous = nullptr);

struct RotationMap {
  int subdomain = 0;
  double time = 0.0;
  Eigen::MatrixXd raw_rows;   // r x d, before orthonormalization
  Eigen::MatrixXd completed;  // d x d orthogonal; top r rows = MGS of raw_rows
  int retained = 0;
};

RotationMap rotation_matrix(const LinearPCSolution& lin, const HilbertKLModes& modes,
                            double t, const Partition& part, int s);

// Gram-Schmidt rows of `raw`, then completion with standard-basis vectors
// (candidates whose residual norm falls below `skip_tol` are skipped).
Eigen::MatrixXd complete_rotation(const Eigen::MatrixXd& raw, double skip_tol = 1e-8);

// xi = Ã^T (eta, 0,...,0) for each node of an r-dimensional grid; rows of the
// result are xi vectors.
Eigen::MatrixXd reduced_collocation_points(const RotationMap& map, const SparseGrid& grid_r);

// ---------------------------------------------------------------------------
// Reduced-space propagation.

struct AdaptContext {
  const StochasticProblem* problem = nullptr;
  const Partition* partition = nullptr;
  SparseGrid eta_grid;        // r-dimensional collocation grid
  HermiteBasis basis;         // r-dimensional order-p basis
  Eigen::MatrixXd psi_eta;    // eta_grid.size() x basis.size()
  Eigen::MatrixXd projector;  // basis.size() x eta_grid.size() = psiᵀ diag(w)
  RichardsDDOptions richards_options;
  int workers = 1;
};

AdaptContext make_adapt_context(const StochasticProblem& problem, const Partition& part,
                                int r, int order, int level_reduced,
                                const RichardsDDOptions& richards_options = {},
                                int workers = 1);

struct AdaptStepCounters {
  long realization_steps = 0;  // full-domain DD advances (all subdomains each)
  DDCounters dd;
};

// One implicit time step of all subdomain expansions: recover xi per new-basis
// node, compose the old expansions at eta_old = A_old xi, advance through the
// DD solver, project per subdomain onto the order-p basis in eta_new.
std::vector<PCExpansion> adapt_and_solve_step(const std::vector<PCExpansion>& state_pces,
                                              const std::vector<RotationMap>& maps_old,
                                              const std::vector<RotationMap>& maps_new,
                                              const AdaptContext& ctx, double dt,
                                              AdaptStepCounters* counters = nullptr);

// ---------------------------------------------------------------------------
// Whole-horizon drivers.

enum class AdaptationMode { fixed, time_dependent };

struct AdaptedRunConfig {
  int r = 3;
  int order = 3;
  int level_linear = 2;
  int level_reduced = 5;
  int subdomains = 4;
  int adaptation_interval = 1;        // steps between basis rebuilds (TD mode)
  double variance_floor = 0.9;        // warn below this capture ratio
  std::vector<double> output_times;
  RichardsDDOptions richards_options;
  int workers = 1;
};

struct AdaptedTrajectory {
  std::vector<double> times;                    // output times
  std::vector<std::vector<PCExpansion>> states; // per output, per subdomain
  std::vector<std::vector<RotationMap>> maps;   // per output, per subdomain
  Partition partition;
  double min_capture_ratio = 1.0;
  std::vector<std::string> warnings;
  long linear_pc_nodes = 0;
  long reduced_nodes = 0;        // eta-grid size
  long subdomain_trajectories = 0;  // reduced_nodes * K
  AdaptStepCounters counters;
};

AdaptedTrajectory run_fixed_basis(const StochasticProblem& problem,
                                  const AdaptedRunConfig& config);
AdaptedTrajectory run_time_dependent(const StochasticProblem& problem,
                                     const AdaptedRunConfig& config);

}  // namespace tdba
