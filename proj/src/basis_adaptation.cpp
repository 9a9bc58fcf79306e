#include "tdba/basis_adaptation.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include <Eigen/SVD>

#include "tdba/parallel.hpp"

namespace tdba {

const KLExpansion& problem_kl(const StochasticProblem& problem) {
  return std::visit([](const auto& p) -> const KLExpansion& { return p.kl; }, problem);
}

const SpatialGrid& problem_grid(const StochasticProblem& problem) {
  return std::visit([](const auto& p) -> const SpatialGrid& { return p.deterministic.grid; },
                    problem);
}

namespace {

const Field& problem_initial(const StochasticProblem& problem) {
  return std::visit([](const auto& p) -> const Field& { return p.deterministic.initial; },
                    problem);
}

}  // namespace

// ---------------------------------------------------------------------------

int LinearPCSolution::find_time(double t) const {
  const double tol = 1e-9 * std::max(1.0, std::abs(t));
  for (size_t i = 0; i < times.size(); ++i)
    if (std::abs(times[i] - t) <= tol) return static_cast<int>(i);
  throw std::invalid_argument("LinearPCSolution: time " + std::to_string(t) +
                              " is not a stored snapshot");
}

LinearPCSolution compute_linear_pc(const StochasticProblem& problem,
                                   const TimeSchedule& schedule, int level) {
  const KLExpansion& kl = problem_kl(problem);
  const SpatialGrid& grid = problem_grid(problem);
  const int d = kl.dimension();
  const int n = grid.size();

  const SparseGrid nodes = smolyak_grid(d, level);
  const HermiteBasis basis1 = build_basis(d, 1);
  const Eigen::MatrixXd projector =
      basis_values(basis1, nodes.nodes).transpose() * nodes.weights.asDiagonal();
  const Eigen::MatrixXd fields = evaluate_lognormal_fields(kl, nodes.nodes);

  LinearPCSolution lin;
  lin.dimension = d;
  lin.node_count = nodes.size();
  lin.times.reserve(schedule.steps() + 1);
  lin.coeffs.reserve(schedule.steps() + 1);

  Eigen::MatrixXd states(nodes.size(), n);
  states.rowwise() = problem_initial(problem).transpose();
  lin.times.push_back(0.0);
  lin.coeffs.push_back(projector * states);

  if (const auto* lp = std::get_if<LinearStochasticProblem>(&problem)) {
    std::vector<LinearSystemBE> systems;
    systems.reserve(nodes.size());
    double sys_dt = -1.0;
    double t = 0.0;
    Field row(n);
    for (int i = 0; i < schedule.steps(); ++i) {
      const double dt = schedule.times[i] - t;
      if (systems.empty() || std::abs(dt - sys_dt) > 1e-12 * std::max(1.0, dt)) {
        systems.clear();
        for (int q = 0; q < nodes.size(); ++q)
          systems.push_back(assemble_linear_be(grid, fields.row(q).transpose(), dt));
        sys_dt = dt;
      }
      for (int q = 0; q < nodes.size(); ++q) {
        row = states.row(q).transpose();
        states.row(q) = linear_be_solve(systems[q], row, lp->deterministic.source,
                                        lp->deterministic.bc_left, lp->deterministic.bc_right)
                            .transpose();
      }
      t = schedule.times[i];
      lin.times.push_back(t);
      lin.coeffs.push_back(projector * states);
    }
  } else {
    const auto& rp = std::get<RichardsStochasticProblem>(problem);
    std::vector<RichardsStepper> steppers;
    steppers.reserve(nodes.size());
    for (int q = 0; q < nodes.size(); ++q) {
      steppers.emplace_back(grid, rp.deterministic.vg, rp.deterministic.bc_left,
                            rp.deterministic.bc_right, rp.deterministic.picard);
      steppers.back().set_conductivity(fields.row(q).transpose());
    }
    double t = 0.0;
    Field psi(n);
    for (int i = 0; i < schedule.steps(); ++i) {
      const double dt = schedule.times[i] - t;
      for (int q = 0; q < nodes.size(); ++q) {
        psi = states.row(q).transpose();
        steppers[q].advance(psi, dt);
        states.row(q) = psi.transpose();
      }
      t = schedule.times[i];
      lin.times.push_back(t);
      lin.coeffs.push_back(projector * states);
    }
  }
  return lin;
}

// ---------------------------------------------------------------------------

SolutionCovariance solution_covariance(const LinearPCSolution& lin, double t,
                                       const Partition& part, int s) {
  if (s < 0 || s >= part.count)
    throw std::invalid_argument("solution_covariance: subdomain index out of range");
  const int idx = lin.find_time(t);
  const Eigen::MatrixXd& c = lin.coeffs[idx];
  SolutionCovariance cov;
  cov.subdomain = s;
  cov.time = t;
  cov.factor = c.block(1, part.first(s), lin.dimension, part.local_size(s)).transpose();
  cov.weights = part.local[s].cell_weights;
  return cov;
}

double HilbertKLModes::capture_ratio(int r) const {
  const double total = eigenvalues.sum();
  if (total <= 0.0) return 1.0;
  return eigenvalues.head(std::min<int>(r, eigenvalues.size())).sum() / total;
}

HilbertKLModes hilbert_kl(const SolutionCovariance& cov, int r,
                          const HilbertKLModes* previous) {
  const int n = static_cast<int>(cov.factor.rows());
  const int d = static_cast<int>(cov.factor.cols());
  if (r < 1 || r > d) throw std::invalid_argument("hilbert_kl: need 1 <= r <= d");

  // Weighted Nystrom reduces to the SVD of diag(sqrt(w)) U since C = U Uᵀ.
  const Eigen::VectorXd sqrt_w = cov.weights.array().sqrt();
  Eigen::MatrixXd b = sqrt_w.asDiagonal() * cov.factor;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeThinU);

  HilbertKLModes modes;
  modes.retained = r;
  modes.eigenvalues = svd.singularValues().array().square();
  modes.modes.setZero(n, r);
  const double floor = 1e-14 * std::max(modes.eigenvalues(0), 1e-300);
  for (int i = 0; i < r; ++i) {
    if (i >= svd.singularValues().size() || modes.eigenvalues(i) <= floor) {
      modes.rank_deficient = true;
      break;  // remaining columns stay zero
    }
    Eigen::VectorXd phi = svd.matrixU().col(i).array() / sqrt_w.array();
    bool flip = false;
    if (previous && previous->modes.rows() == n && previous->modes.cols() >= i + 1) {
      const double dot = (cov.weights.array() * phi.array() *
                          previous->modes.col(i).array())
                             .sum();
      flip = dot < 0.0;
    } else {
      int peak = 0;
      phi.cwiseAbs().maxCoeff(&peak);
      flip = phi(peak) < 0.0;
    }
    modes.modes.col(i) = flip ? Eigen::VectorXd(-phi) : phi;
  }
  return modes;
}

Eigen::MatrixXd complete_rotation(const Eigen::MatrixXd& raw, double skip_tol) {
  const int r = static_cast<int>(raw.rows());
  const int d = static_cast<int>(raw.cols());
  if (r > d) throw std::invalid_argument("complete_rotation: more rows than columns");
  Eigen::MatrixXd q(d, d);
  int rows = 0;
  auto orthogonalize = [&](Eigen::VectorXd v) {
    for (int pass = 0; pass < 2; ++pass)
      for (int j = 0; j < rows; ++j) v -= q.row(j).dot(v) * q.row(j).transpose();
    return v;
  };
  for (int i = 0; i < r; ++i) {
    Eigen::VectorXd v = orthogonalize(raw.row(i).transpose());
    const double nrm = v.norm();
    if (nrm < 1e-10 * std::max(1.0, raw.row(i).norm()))
      throw std::runtime_error("complete_rotation: dependent raw rows");
    q.row(rows++) = v.transpose() / nrm;
  }
  for (int k = 0; k < d && rows < d; ++k) {
    Eigen::VectorXd v = orthogonalize(Eigen::VectorXd::Unit(d, k));
    const double nrm = v.norm();
    if (nrm < skip_tol) continue;
    q.row(rows++) = v.transpose() / nrm;
  }
  if (rows != d) throw std::logic_error("complete_rotation: completion failed");
  return q;
}

RotationMap rotation_matrix(const LinearPCSolution& lin, const HilbertKLModes& modes,
                            double t, const Partition& part, int s) {
  if (modes.rank_deficient)
    throw std::runtime_error("rotation_matrix: zero eigenvalue in retained set");
  const int idx = lin.find_time(t);
  const Eigen::MatrixXd& c = lin.coeffs[idx];
  const int r = modes.retained;
  const Eigen::MatrixXd u_sub =
      c.block(1, part.first(s), lin.dimension, part.local_size(s)).transpose();  // n_s x d
  const Eigen::VectorXd& w = part.local[s].cell_weights;

  RotationMap map;
  map.subdomain = s;
  map.time = t;
  map.retained = r;
  map.raw_rows =
      modes.eigenvalues.head(r).array().sqrt().inverse().matrix().asDiagonal() *
      (modes.modes.transpose() * w.asDiagonal() * u_sub);

  for (int i = 0; i < r; ++i) {
    const double nrm = map.raw_rows.row(i).norm();
    if (std::abs(nrm - 1.0) > 1e-8)
      throw std::runtime_error("rotation_matrix: raw row " + std::to_string(i) +
                               " has norm " + std::to_string(nrm) +
                               ", expected 1 within 1e-8");
    for (int k = 0; k < i; ++k) {
      const double g = map.raw_rows.row(i).dot(map.raw_rows.row(k));
      if (std::abs(g) > 1e-6)
        std::cerr << "rotation_matrix: raw rows " << i << "," << k
                  << " have inner product " << g << " (subdomain " << s << ", t=" << t
                  << ")\n";
    }
  }
  map.completed = complete_rotation(map.raw_rows);
  return map;
}

Eigen::MatrixXd reduced_collocation_points(const RotationMap& map, const SparseGrid& grid_r) {
  if (grid_r.dimension != map.retained)
    throw std::invalid_argument("reduced_collocation_points: grid dimension != r");
  return grid_r.nodes * map.completed.topRows(map.retained);
}

// ---------------------------------------------------------------------------

AdaptContext make_adapt_context(const StochasticProblem& problem, const Partition& part,
                                int r, int order, int level_reduced,
                                const RichardsDDOptions& richards_options, int workers) {
  AdaptContext ctx;
  ctx.problem = &problem;
  ctx.partition = &part;
  ctx.eta_grid = smolyak_grid(r, level_reduced);
  ctx.basis = build_basis(r, order);
  ctx.psi_eta = basis_values(ctx.basis, ctx.eta_grid.nodes);
  ctx.projector = ctx.psi_eta.transpose() * ctx.eta_grid.weights.asDiagonal();
  ctx.richards_options = richards_options;
  ctx.workers = workers;
  return ctx;
}

std::vector<PCExpansion> adapt_and_solve_step(const std::vector<PCExpansion>& state_pces,
                                              const std::vector<RotationMap>& maps_old,
                                              const std::vector<RotationMap>& maps_new,
                                              const AdaptContext& ctx, double dt,
                                              AdaptStepCounters* counters) {
  const Partition& part = *ctx.partition;
  const int K = part.count;
  if (static_cast<int>(state_pces.size()) != K ||
      static_cast<int>(maps_old.size()) != K || static_cast<int>(maps_new.size()) != K)
    throw std::invalid_argument("adapt_and_solve_step: need one state/map per subdomain");
  const KLExpansion& kl = problem_kl(*ctx.problem);
  const int r = ctx.basis.dimension;
  const int nq = ctx.eta_grid.size();
  const auto* lp = std::get_if<LinearStochasticProblem>(ctx.problem);
  const auto* rp = std::get_if<RichardsStochasticProblem>(ctx.problem);

  std::vector<PCExpansion> out(K);
  for (int s = 0; s < K; ++s) {
    const Eigen::MatrixXd xi = reduced_collocation_points(maps_new[s], ctx.eta_grid);
    const Eigen::MatrixXd fields = evaluate_lognormal_fields(kl, xi);

    // Previous nodal states of every subdomain at this target's xi nodes.
    std::vector<Eigen::MatrixXd> prev(K);
    for (int sp = 0; sp < K; ++sp) {
      const Eigen::MatrixXd eta_old = xi * maps_old[sp].completed.topRows(r).transpose();
      prev[sp].noalias() = basis_values(ctx.basis, eta_old) * state_pces[sp].coefficients;
    }

    Eigen::MatrixXd samples(nq, part.local_size(s));
    std::vector<AdaptStepCounters> slot_counters(std::max(1, ctx.workers));
    parallel_for(nq, ctx.workers, [&](int begin, int end, int slot) {
      SubdomainFields states(K);
      std::unique_ptr<RichardsDDWorkspace> rws;
      if (rp)
        rws = std::make_unique<RichardsDDWorkspace>(part, rp->deterministic.vg,
                                                    rp->deterministic.bc_left,
                                                    rp->deterministic.bc_right,
                                                    ctx.richards_options);
      for (int q = begin; q < end; ++q) {
        for (int sp = 0; sp < K; ++sp) states[sp] = prev[sp].row(q).transpose();
        if (lp) {
          LinearDDWorkspace ws(part, fields.row(q).transpose(), dt,
                               lp->deterministic.bc_left, lp->deterministic.bc_right,
                               lp->deterministic.source);
          auto [next, iface] = ws.step(states);
          samples.row(q) = next[s].transpose();
          slot_counters[slot].dd.particular_solves += ws.counters().particular_solves;
          slot_counters[slot].dd.unit_solves += ws.counters().unit_solves;
          slot_counters[slot].dd.interface_system_solves +=
              ws.counters().interface_system_solves;
        } else {
          rws->set_conductivity(fields.row(q).transpose());
          auto [next, iface] = rws->step(states, dt);
          samples.row(q) = next[s].transpose();
        }
        ++slot_counters[slot].realization_steps;
      }
      if (rp) {
        slot_counters[slot].dd.subdomain_steps += rws->counters().subdomain_steps;
        slot_counters[slot].dd.interface_iterations += rws->counters().interface_iterations;
      }
    });
    if (counters)
      for (const auto& sc : slot_counters) {
        counters->realization_steps += sc.realization_steps;
        counters->dd.particular_solves += sc.dd.particular_solves;
        counters->dd.unit_solves += sc.dd.unit_solves;
        counters->dd.interface_system_solves += sc.dd.interface_system_solves;
        counters->dd.interface_iterations += sc.dd.interface_iterations;
        counters->dd.subdomain_steps += sc.dd.subdomain_steps;
      }

    out[s].basis = ctx.basis;
    out[s].coefficients.noalias() = ctx.projector * samples;
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct ProblemTiming {
  double dt;
  double t_end;
};

ProblemTiming problem_timing(const StochasticProblem& problem) {
  return std::visit(
      [](const auto& p) {
        return ProblemTiming{p.deterministic.dt, p.deterministic.t_end};
      },
      problem);
}

// Classical fixed-basis reduction: with a time-independent rotation the
// reduced collocation points never move, so every node is marched over the
// whole horizon as an independent deterministic DD solve and the eta-chaos
// projection happens only at output times.
void march_fixed(const TimeSchedule& sched, const std::vector<RotationMap>& maps,
                 const AdaptContext& ctx, AdaptedTrajectory& traj) {
  const Partition& part = *ctx.partition;
  const int K = part.count;
  const KLExpansion& kl = problem_kl(*ctx.problem);
  const int nq = ctx.eta_grid.size();
  const auto* lp = std::get_if<LinearStochasticProblem>(ctx.problem);
  const auto* rp = std::get_if<RichardsStochasticProblem>(ctx.problem);
  const Field& initial = problem_initial(*ctx.problem);

  int n_out = 0;
  for (int i = 0; i < sched.steps(); ++i) {
    if (!sched.record[i]) continue;
    ++n_out;
    traj.times.push_back(sched.times[i]);
  }
  traj.states.assign(n_out, std::vector<PCExpansion>(K));
  traj.maps.assign(n_out, maps);

  for (int s = 0; s < K; ++s) {
    const Eigen::MatrixXd xi = reduced_collocation_points(maps[s], ctx.eta_grid);
    const Eigen::MatrixXd fields = evaluate_lognormal_fields(kl, xi);
    std::vector<Eigen::MatrixXd> samples(n_out);
    for (auto& m : samples) m.resize(nq, part.local_size(s));
    std::vector<AdaptStepCounters> slot_counters(std::max(1, ctx.workers));

    parallel_for(nq, ctx.workers, [&](int begin, int end, int slot) {
      AdaptStepCounters& acc = slot_counters[slot];
      for (int q = begin; q < end; ++q) {
        SubdomainFields states(K);
        for (int sp = 0; sp < K; ++sp) states[sp] = part.restrict_field(initial, sp);
        std::unique_ptr<LinearDDWorkspace> lws;
        double lws_dt = -1.0;
        auto flush_linear = [&]() {
          if (!lws) return;
          acc.dd.particular_solves += lws->counters().particular_solves;
          acc.dd.unit_solves += lws->counters().unit_solves;
          acc.dd.interface_system_solves += lws->counters().interface_system_solves;
        };
        std::unique_ptr<RichardsDDWorkspace> rws;
        if (rp) {
          rws = std::make_unique<RichardsDDWorkspace>(part, rp->deterministic.vg,
                                                      rp->deterministic.bc_left,
                                                      rp->deterministic.bc_right,
                                                      ctx.richards_options);
          rws->set_conductivity(fields.row(q).transpose());
        }
        InterfaceState warm;
        bool have_warm = false;
        double t = 0.0;
        int o = 0;
        for (int i = 0; i < sched.steps(); ++i) {
          const double dt = sched.times[i] - t;
          if (lp) {
            if (!lws || std::abs(dt - lws_dt) > 1e-12 * std::max(1.0, lws_dt)) {
              flush_linear();
              lws = std::make_unique<LinearDDWorkspace>(
                  part, fields.row(q).transpose(), dt, lp->deterministic.bc_left,
                  lp->deterministic.bc_right, lp->deterministic.source);
              lws_dt = dt;
            }
            states = lws->step(states).first;
          } else {
            auto [next, iface] = rws->step(states, dt, have_warm ? &warm : nullptr);
            states = std::move(next);
            warm = std::move(iface);
            have_warm = true;
          }
          ++acc.realization_steps;
          t = sched.times[i];
          if (sched.record[i]) {
            samples[o].row(q) = states[s].transpose();
            ++o;
          }
        }
        flush_linear();
        if (rp) {
          acc.dd.subdomain_steps += rws->counters().subdomain_steps;
          acc.dd.interface_iterations += rws->counters().interface_iterations;
        }
      }
    });
    for (const auto& sc : slot_counters) {
      traj.counters.realization_steps += sc.realization_steps;
      traj.counters.dd.particular_solves += sc.dd.particular_solves;
      traj.counters.dd.unit_solves += sc.dd.unit_solves;
      traj.counters.dd.interface_system_solves += sc.dd.interface_system_solves;
      traj.counters.dd.interface_iterations += sc.dd.interface_iterations;
      traj.counters.dd.subdomain_steps += sc.dd.subdomain_steps;
    }
    for (int o = 0; o < n_out; ++o) {
      traj.states[o][s].basis = ctx.basis;
      traj.states[o][s].coefficients.noalias() = ctx.projector * samples[o];
    }
  }
}

AdaptedTrajectory run_adapted(const StochasticProblem& problem,
                              const AdaptedRunConfig& config, AdaptationMode mode) {
  if (config.output_times.empty())
    throw std::invalid_argument("adapted run: output_times must not be empty");
  const KLExpansion& kl = problem_kl(problem);
  const SpatialGrid& grid = problem_grid(problem);
  const int d = kl.dimension();
  if (config.r < 1 || config.r > d)
    throw std::invalid_argument("adapted run: need 1 <= r <= d");

  AdaptedTrajectory traj;
  traj.partition = partition_domain(grid, config.subdomains);
  const Partition& part = traj.partition;
  const int K = part.count;
  const ProblemTiming timing = problem_timing(problem);
  const TimeSchedule sched = build_schedule(timing.dt, timing.t_end, config.output_times);

  const LinearPCSolution lin = compute_linear_pc(problem, sched, config.level_linear);
  AdaptContext ctx = make_adapt_context(problem, part, config.r, config.order,
                                        config.level_reduced, config.richards_options,
                                        config.workers);
  traj.linear_pc_nodes = lin.node_count;
  traj.reduced_nodes = ctx.eta_grid.size();
  traj.subdomain_trajectories = static_cast<long>(ctx.eta_grid.size()) * K;

  // Initial per-subdomain expansions: deterministic IC in any basis.
  const Field& initial = problem_initial(problem);
  std::vector<PCExpansion> states(K);
  for (int s = 0; s < K; ++s) {
    states[s].basis = ctx.basis;
    states[s].coefficients.setZero(ctx.basis.size(), part.local_size(s));
    states[s].coefficients.row(0) = part.restrict_field(initial, s).transpose();
  }

  std::vector<HilbertKLModes> prev_modes(K);
  std::vector<bool> have_prev(K, false);
  std::vector<RotationMap> maps_cur(K);

  auto build_maps = [&](double t) {
    std::vector<RotationMap> maps(K);
    for (int s = 0; s < K; ++s) {
      SolutionCovariance cov = solution_covariance(lin, t, part, s);
      HilbertKLModes modes =
          hilbert_kl(cov, config.r, have_prev[s] ? &prev_modes[s] : nullptr);
      const double ratio = modes.capture_ratio(config.r);
      traj.min_capture_ratio = std::min(traj.min_capture_ratio, ratio);
      if (ratio < config.variance_floor) {
        std::ostringstream msg;
        msg << "variance capture " << ratio << " below floor " << config.variance_floor
            << " at t=" << t << " subdomain " << s;
        traj.warnings.push_back(msg.str());
      }
      maps[s] = rotation_matrix(lin, modes, t, part, s);
      prev_modes[s] = std::move(modes);
      have_prev[s] = true;
    }
    return maps;
  };

  if (mode == AdaptationMode::fixed) {
    const double t_adapt = *std::min_element(config.output_times.begin(),
                                             config.output_times.end());
    maps_cur = build_maps(t_adapt);
    march_fixed(sched, maps_cur, ctx, traj);
    return traj;
  }

  double t = 0.0;
  int since_rebuild = 0;
  for (int i = 0; i < sched.steps(); ++i) {
    const double t_next = sched.times[i];
    const double dt = t_next - t;
    std::vector<RotationMap> maps_new;
    if (mode == AdaptationMode::time_dependent &&
        (i == 0 || since_rebuild >= config.adaptation_interval)) {
      maps_new = build_maps(t_next);
      since_rebuild = 1;
    } else {
      maps_new = maps_cur;
      ++since_rebuild;
    }
    const std::vector<RotationMap>& maps_old = (i == 0) ? maps_new : maps_cur;
    states = adapt_and_solve_step(states, maps_old, maps_new, ctx, dt, &traj.counters);
    maps_cur = maps_new;
    t = t_next;
    if (sched.record[i]) {
      traj.times.push_back(t);
      traj.states.push_back(states);
      traj.maps.push_back(maps_cur);
    }
  }
  return traj;
}

}  // namespace

AdaptedTrajectory run_fixed_basis(const StochasticProblem& problem,
                                  const AdaptedRunConfig& config) {
  return run_adapted(problem, config, AdaptationMode::fixed);
}

AdaptedTrajectory run_time_dependent(const StochasticProblem& problem,
                                     const AdaptedRunConfig& config) {
  return run_adapted(problem, config, AdaptationMode::time_dependent);
}

}  // namespace tdba
