#include "tdba/pde_solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace tdba {

TimeSchedule build_schedule(double dt, double t_end, const std::vector<double>& record_times) {
  if (!(dt > 0.0)) throw std::invalid_argument("build_schedule: dt must be positive");
  if (!(t_end > 0.0)) throw std::invalid_argument("build_schedule: t_end must be positive");
  const double tol = 1e-9 * std::max(1.0, t_end);
  std::vector<double> outs = record_times;
  std::sort(outs.begin(), outs.end());
  outs.erase(std::unique(outs.begin(), outs.end(),
                         [&](double a, double b) { return std::abs(a - b) <= tol; }),
             outs.end());
  for (double o : outs)
    if (o <= tol || o > t_end + tol)
      throw std::invalid_argument("build_schedule: record times must lie in (0, t_end]");

  TimeSchedule sched;
  double t = 0.0;
  size_t oi = 0;
  while (t < t_end - tol) {
    double tn = std::min(t + dt, t_end);
    if (oi < outs.size() && outs[oi] < tn - tol) tn = outs[oi];
    bool rec = false;
    if (oi < outs.size() && std::abs(tn - outs[oi]) <= tol) {
      tn = outs[oi];
      rec = true;
      ++oi;
    }
    sched.times.push_back(tn);
    sched.record.push_back(rec ? 1 : 0);
    t = tn;
  }
  if (oi != outs.size()) throw std::logic_error("build_schedule: record time not scheduled");
  return sched;
}

// ---------------------------------------------------------------------------

namespace {

inline double harmonic_face(double a, double b) {
  const double s = a + b;
  return s > 0.0 ? 2.0 * a * b / s : 0.0;
}

void check_linear_inputs(const SpatialGrid& grid, const Field& a, double dt) {
  if (a.size() != grid.size())
    throw std::invalid_argument("linear diffusion: coefficient size mismatch");
  if ((a.array() <= 0.0).any())
    throw std::invalid_argument("linear diffusion: coefficient must be positive");
  if (!(dt > 0.0)) throw std::invalid_argument("linear diffusion: dt must be positive");
}

}  // namespace

LinearSystemBE assemble_linear_be(const SpatialGrid& grid, const Field& a, double dt) {
  check_linear_inputs(grid, a, dt);
  const int n = grid.size();
  LinearSystemBE sys;
  sys.mass = grid.cell_weights;
  sys.mass_over_dt = grid.cell_weights / dt;
  Tridiagonal m;
  m.resize(n);
  m.diag(0) = 1.0;
  m.diag(n - 1) = 1.0;
  for (int j = 1; j + 1 < n; ++j) {
    const double hl = grid.points(j) - grid.points(j - 1);
    const double hr = grid.points(j + 1) - grid.points(j);
    const double al = harmonic_face(a(j - 1), a(j)) / hl;
    const double ar = harmonic_face(a(j), a(j + 1)) / hr;
    m.lower(j) = -al;
    m.upper(j) = -ar;
    m.diag(j) = sys.mass_over_dt(j) + al + ar;
  }
  sys.factor = TridiagonalFactor::compute(m);
  return sys;
}

Field linear_be_solve(const LinearSystemBE& sys, const Field& u, const Field& f,
                      double bc_left, double bc_right) {
  const int n = sys.factor.size();
  if (u.size() != n) throw std::invalid_argument("linear_be_solve: state size mismatch");
  Eigen::VectorXd rhs = sys.mass_over_dt.cwiseProduct(u);
  if (f.size() != 0) {
    if (f.size() != n) throw std::invalid_argument("linear_be_solve: source size mismatch");
    rhs += sys.mass.cwiseProduct(f);
  }
  rhs(0) = bc_left;
  rhs(n - 1) = bc_right;
  return sys.factor.solve(rhs);
}

Field step_linear(const Field& u, const LinearDiffusionProblem& p, double dt) {
  LinearSystemBE sys = assemble_linear_be(p.grid, p.coefficient, dt);
  return linear_be_solve(sys, u, p.source, p.bc_left, p.bc_right);
}

Trajectory solve_linear(const LinearDiffusionProblem& p, const std::vector<double>& record_times) {
  check_linear_inputs(p.grid, p.coefficient, p.dt);
  if (p.initial.size() != p.grid.size())
    throw std::invalid_argument("solve_linear: initial state size mismatch");
  TimeSchedule sched = build_schedule(p.dt, p.t_end, record_times);
  Trajectory traj;
  Field u = p.initial;
  double t = 0.0;
  LinearSystemBE sys = assemble_linear_be(p.grid, p.coefficient, p.dt);
  double sys_dt = p.dt;
  for (int i = 0; i < sched.steps(); ++i) {
    const double dt_i = sched.times[i] - t;
    if (std::abs(dt_i - sys_dt) > 1e-12 * std::max(1.0, sys_dt)) {
      sys = assemble_linear_be(p.grid, p.coefficient, dt_i);
      sys_dt = dt_i;
    }
    u = linear_be_solve(sys, u, p.source, p.bc_left, p.bc_right);
    t = sched.times[i];
    if (sched.record[i]) {
      traj.times.push_back(t);
      traj.states.push_back(u);
    }
  }
  return traj;
}

// ---------------------------------------------------------------------------

double effective_saturation(double psi, const VanGenuchten& vg) {
  if (psi >= 0.0) return 1.0;
  const double t = std::exp(vg.n * std::log(vg.alpha * (-psi)));
  return std::exp(-vg.m() * std::log1p(t));
}

namespace {

// Mualem curve at y = |psi| > 0. 1 - Se^{1/m} = t/(1+t) with t = (alpha y)^n;
// keep both ln(1+t) and ln t - ln(1+t) = -ln(1+1/t) in forms that never
// cancel, then use expm1 so the deep-dry limit (exponent -> 0) stays fully
// accurate.
double mualem_kr(double y, const VanGenuchten& vg) {
  const double m = vg.m();
  const double lt = vg.n * std::log(vg.alpha * y);  // ln (alpha y)^n
  double l1, diff;
  if (lt > 0.0) {
    const double s = std::log1p(std::exp(-lt));
    l1 = lt + s;
    diff = -s;
  } else {
    l1 = std::log1p(std::exp(lt));
    diff = lt - l1;
  }
  const double sqrt_se = std::exp(-0.5 * m * l1);
  const double om = -std::expm1(m * diff);  // 1 - (1 - Se^{1/m})^m
  return sqrt_se * om * om;
}

// d kr / d psi at psi = -y (positive toward saturation), in the same pieces:
// kr' = (n m / y) sqrt(Se) [ om^2 w / 2 + 2 om w^m / (1+t) ] with w = t/(1+t).
double mualem_kr_slope(double y, const VanGenuchten& vg) {
  const double m = vg.m();
  const double lt = vg.n * std::log(vg.alpha * y);
  double l1, diff;
  if (lt > 0.0) {
    const double s = std::log1p(std::exp(-lt));
    l1 = lt + s;
    diff = -s;
  } else {
    l1 = std::log1p(std::exp(lt));
    diff = lt - l1;
  }
  const double sqrt_se = std::exp(-0.5 * m * l1);
  const double om = -std::expm1(m * diff);
  return vg.n * m / y * sqrt_se *
         (0.5 * om * om * std::exp(diff) + 2.0 * om * std::exp(m * diff - l1));
}

}  // namespace

double relative_conductivity(double psi, const VanGenuchten& vg) {
  if (psi >= 0.0) return 1.0;
  const double y = -psi;
  // For n < 2 the Mualem curve has unbounded slope at saturation
  // (1 - kr ~ 2 (alpha y)^{n m} with n m < 1), so a lagged-conductivity
  // iteration stops contracting whenever a node lands within ~1e-6 of the air
  // entry. Replace the curve inside a hair-thin band by the monotone C^1
  // Hermite blend to kr = 1; the band keeps alpha y below 3.6e-6, where the
  // loam-like deviation 2 (alpha y)^{n m} stays under 2e-3.
  const double yb = 3.6e-6 / vg.alpha;
  if (y >= yb) return mualem_kr(y, vg);
  const double kb = mualem_kr(yb, vg);
  const double gb = -yb * mualem_kr_slope(yb, vg);  // d kr / du at the edge
  const double u = y / yb;                          // 0 at saturation
  const double u2 = u * u, u3 = u2 * u;
  return (2.0 * u3 - 3.0 * u2 + 1.0) + (3.0 * u2 - 2.0 * u3) * kb + (u3 - u2) * gb;
}

double van_genuchten_K(double psi, double Ks, const VanGenuchten& vg) {
  return Ks * relative_conductivity(psi, vg);
}

RichardsStepper::RichardsStepper(const SpatialGrid& grid, const VanGenuchten& vg,
                                 double bc_left, double bc_right, const PicardOptions& opts)
    : grid_(grid), vg_(vg), bc_left_(bc_left), bc_right_(bc_right), opts_(opts) {
  const int n = grid.size();
  matrix_.resize(n);
  k_nodes_.resize(n);
  rhs_.resize(n);
  iterate_.resize(n);
  next_.resize(n);
}

bool RichardsStepper::try_step(const Field& psi, double dt, Field& out) {
  const int n = grid_.size();
  iterate_ = psi;
  deltas_.clear();
  prev_update_.resize(0);
  // The conductivity cusp at saturation (kr ~ (1 - c|psi|^{nm})^2 with nm < 1)
  // can trap the plain lagged iteration in a limit cycle around the wetting
  // front, and the cycle gain is dt-independent because matrix and rhs are both
  // conductivity-dominated. Damp the update whenever the residual stops
  // shrinking and let the damping recover once contraction resumes.
  double omega = 1.0;
  double prev_delta = std::numeric_limits<double>::infinity();
  double prev_rho = std::numeric_limits<double>::quiet_NaN();
  for (int it = 0; it < opts_.max_iter; ++it) {
    ++picard_iterations_;
    for (int j = 0; j < n; ++j)
      k_nodes_(j) = Ks_(j) * relative_conductivity(iterate_(j), vg_);
    matrix_.diag(0) = 1.0;
    matrix_.upper(0) = 0.0;
    matrix_.diag(n - 1) = 1.0;
    matrix_.lower(n - 1) = 0.0;
    rhs_(0) = bc_left_;
    rhs_(n - 1) = bc_right_;
    for (int j = 1; j + 1 < n; ++j) {
      const double hl = grid_.points(j) - grid_.points(j - 1);
      const double hr = grid_.points(j + 1) - grid_.points(j);
      const double kl = 0.5 * (k_nodes_(j - 1) + k_nodes_(j));
      const double kr = 0.5 * (k_nodes_(j) + k_nodes_(j + 1));
      const double mass_dt = grid_.cell_weights(j) / dt;
      matrix_.lower(j) = -kl / hl;
      matrix_.upper(j) = -kr / hr;
      matrix_.diag(j) = mass_dt + kl / hl + kr / hr;
      rhs_(j) = mass_dt * psi(j) + (kr - kl);  // gravity flux at the lagged iterate
    }
    next_ = solve_tridiagonal(matrix_, rhs_);
    ++tridiagonal_solves_;
    update_ = next_ - iterate_;
    const double delta = update_.cwiseAbs().maxCoeff();
    deltas_.push_back(delta);
    if (delta <= opts_.tol) {
      out = next_;
      return true;
    }
    if (delta > 1.5 * prev_delta) {
      omega = std::max(0.5 * omega, 1.0 / 1024.0);
      nh_ = 0;
    } else if (delta < prev_delta) {
      omega = std::min(1.3 * omega, 1.0);
    }
    prev_delta = delta;
    // Near-saturated columns with large conductivity samples contract with a
    // spectral radius close to 1, often as a rotating complex pair, far too
    // slow for tight tolerances. Window-2 Anderson mixing extrapolates such
    // modes away; it is only attempted while the iteration is undamped, and a
    // large mixing coefficient (ill-conditioned or barely-contracting mode)
    // falls back to the plain damped update.
    bool mixed = false;
    if (omega == 1.0 && nh_ > 0) {
      const int m = std::min(nh_, 2);
      Eigen::MatrixXd dF(n, m), dG(n, m);
      dF.col(0) = update_ - hf_[0];
      dG.col(0) = next_ - hg_[0];
      if (m == 2) {
        dF.col(1) = hf_[0] - hf_[1];
        dG.col(1) = hg_[0] - hg_[1];
      }
      Eigen::MatrixXd gram = dF.transpose() * dF;
      gram.diagonal().array() += 1e-14 * gram.trace();
      const Eigen::VectorXd gamma = gram.ldlt().solve(dF.transpose() * update_);
      if (gamma.allFinite() && gamma.cwiseAbs().maxCoeff() <= 25.0) {
        mix_ = next_ - dG * gamma;
        mixed = true;
      } else {
        nh_ = 0;
      }
    }
    hf_[1] = hf_[0];
    hg_[1] = hg_[0];
    hf_[0] = update_;
    hg_[0] = next_;
    nh_ = std::min(nh_ + 1, 2);
    if (mixed)
      iterate_ = mix_;
    else
      iterate_ += omega * update_;
  }
  return false;
}

void RichardsStepper::advance_recursive(Field& psi, double dt, int depth) {
  Field out;
  if (try_step(psi, dt, out)) {
    psi = out;
    return;
  }
  if (depth >= opts_.max_halvings)
    throw PicardDivergence("Richards step: Picard iteration did not converge within " +
                           std::to_string(opts_.max_iter) + " iterations after " +
                           std::to_string(depth) + " dt halvings");
  advance_recursive(psi, 0.5 * dt, depth + 1);
  advance_recursive(psi, 0.5 * dt, depth + 1);
}

void RichardsStepper::advance(Field& psi, double dt) {
  if (Ks_.size() != grid_.size())
    throw std::invalid_argument("RichardsStepper: conductivity not set");
  if (!(dt > 0.0)) throw std::invalid_argument("RichardsStepper: dt must be positive");
  advance_recursive(psi, dt, 0);
}

Field step_richards(const Field& psi, const RichardsProblem& p, double dt) {
  if (psi.size() != p.grid.size())
    throw std::invalid_argument("step_richards: state size mismatch");
  RichardsStepper stepper(p.grid, p.vg, p.bc_left, p.bc_right, p.picard);
  stepper.set_conductivity(p.saturated_conductivity);
  Field out;
  if (!stepper.try_step(psi, dt, out))
    throw PicardDivergence("step_richards: Picard iteration did not converge within " +
                           std::to_string(p.picard.max_iter) + " iterations");
  return out;
}

Trajectory solve_richards(const RichardsProblem& p, const std::vector<double>& record_times) {
  if (p.initial.size() != p.grid.size())
    throw std::invalid_argument("solve_richards: initial state size mismatch");
  if (p.saturated_conductivity.size() != p.grid.size())
    throw std::invalid_argument("solve_richards: conductivity size mismatch");
  TimeSchedule sched = build_schedule(p.dt, p.t_end, record_times);
  RichardsStepper stepper(p.grid, p.vg, p.bc_left, p.bc_right, p.picard);
  stepper.set_conductivity(p.saturated_conductivity);
  Trajectory traj;
  Field psi = p.initial;
  double t = 0.0;
  for (int i = 0; i < sched.steps(); ++i) {
    stepper.advance(psi, sched.times[i] - t);
    t = sched.times[i];
    if (sched.record[i]) {
      traj.times.push_back(t);
      traj.states.push_back(psi);
    }
  }
  return traj;
}

}  // namespace tdba
