#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "tdba/pde_solvers.hpp"
#include "tdba/types.hpp"

namespace tdba {

// Non-overlapping split of a 1D grid into K subdomains sharing interface
// nodes: subdomain s spans global indices [boundaries[s], boundaries[s+1]]
// inclusive, so each interface node is a boundary node of both neighbors.
struct Partition {
  SpatialGrid global;
  int count = 1;
  std::vector<int> boundaries;     // K+1 global node indices
  std::vector<SpatialGrid> local;  // per-subdomain grids

  int interfaces() const { return count - 1; }
  int first(int s) const { return boundaries[s]; }
  int last(int s) const { return boundaries[s + 1]; }
  int local_size(int s) const { return last(s) - first(s) + 1; }
  int interface_node(int k) const { return boundaries[k + 1]; }

  // Restrict a global field to subdomain s (interface nodes included).
  Field restrict_field(const Field& global_field, int s) const;
};

Partition partition_domain(const SpatialGrid& grid, int K);

using SubdomainFields = std::vector<Field>;

struct InterfaceState {
  Eigen::VectorXd values;  // one solution value per interface
};

// Merge per-subdomain fields back to the global grid (interface nodes are
// shared; the two copies agree after a DD step and the left value is taken).
Field assemble_global(const SubdomainFields& states, const Partition& part);

struct DDCounters {
  long particular_solves = 0;
  long unit_solves = 0;
  long interface_system_solves = 0;
  long interface_iterations = 0;
  long subdomain_steps = 0;  // Richards subdomain solves
};

// ---------------------------------------------------------------------------
// Linear equation: interface values by superposition. The subdomain
// factorizations and unit-interface responses depend on (a, dt) only, so the
// workspace computes them once and reuses them every step.
class LinearDDWorkspace {
 public:
  LinearDDWorkspace(const Partition& part, const Field& a, double dt, double bc_left,
                    double bc_right, const Field& source = Field());

  std::pair<SubdomainFields, InterfaceState> step(const SubdomainFields& states);
  const DDCounters& counters() const { return counters_; }

 private:
  const Partition& part_;
  double bc_left_, bc_right_;
  double dt_;
  std::vector<LinearSystemBE> systems_;
  std::vector<Field> source_local_;
  std::vector<Field> unit_left_, unit_right_;  // responses to unit interface values
  // Interface-system ingredients (sized interfaces()):
  Eigen::VectorXd alpha_left_, alpha_right_;  // face conductance / spacing
  Eigen::VectorXd iface_mass_dt_;             // full interface cell mass / dt
  Eigen::VectorXd iface_source_;              // mass * f at the interface
  DDCounters counters_;
};

// One implicit step; assembled result is identical to the monolithic
// step_linear up to roundoff.
std::pair<SubdomainFields, InterfaceState> linear_dd_step(const SubdomainFields& states,
                                                          const Field& a,
                                                          const Partition& part, double dt,
                                                          double bc_left, double bc_right,
                                                          const Field& source = Field());

// ---------------------------------------------------------------------------
// Richards equation: interface values by damped secant iteration on the
// discrete interface balance residual
//   J_k = F_right - F_left - m_k (lambda_k - psi^n_k)/dt
// (one-sided fluxes with the interior face-conductivity convention).
struct RichardsDDOptions {
  double relax = 1.0;
  double tol = 1e-8;  // on max_k |J_k|, flux units
  int max_iter = 200;
  // Subdomain Picard tolerance; must be well below tol/(K_face/h) or the
  // interface residual drowns in inner termination noise.
  double inner_tol = 1e-12;
  int inner_max_iter = 100;
  // When the interface iteration (or an inner Picard) fails at the requested
  // dt, retry as two half steps, recursively, up to this depth.
  int max_halvings = 6;
};

struct InterfaceDivergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class RichardsDDWorkspace {
 public:
  RichardsDDWorkspace(const Partition& part, const VanGenuchten& vg, double bc_left,
                      double bc_right, const RichardsDDOptions& opts = {});

  void set_conductivity(const Field& Ks_global);
  // Interface values warm-start from `warm` when given, else from the states'
  // shared nodes. A step that diverges at the requested dt is retried as two
  // half steps (up to max_halvings deep); only then does InterfaceDivergence
  // with the residual history propagate.
  std::pair<SubdomainFields, InterfaceState> step(const SubdomainFields& states, double dt,
                                                  const InterfaceState* warm = nullptr);
  const DDCounters& counters() const { return counters_; }

 private:
  std::pair<SubdomainFields, InterfaceState> step_once(const SubdomainFields& states, double dt,
                                                       const InterfaceState* warm);
  std::pair<SubdomainFields, InterfaceState> step_halved(const SubdomainFields& states, double dt,
                                                         const InterfaceState* warm, int depth);
  const Partition& part_;
  VanGenuchten vg_;
  double bc_left_, bc_right_;
  RichardsDDOptions opts_;
  Field Ks_global_;
  std::vector<RichardsStepper> steppers_;
  DDCounters counters_;
};

std::pair<SubdomainFields, InterfaceState> richards_dd_step(
    const SubdomainFields& states, const Field& Ks, const Partition& part,
    const VanGenuchten& vg, double dt, double bc_left, double bc_right,
    const RichardsDDOptions& opts = {}, const InterfaceState* warm = nullptr);

}  // namespace tdba
