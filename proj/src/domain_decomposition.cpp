#include "tdba/domain_decomposition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "tdba/tridiag.hpp"

namespace tdba {

Field Partition::restrict_field(const Field& global_field, int s) const {
  if (global_field.size() != global.size())
    throw std::invalid_argument("restrict_field: global field size mismatch");
  return global_field.segment(first(s), local_size(s));
}

Partition partition_domain(const SpatialGrid& grid, int K) {
  const int n = grid.size();
  if (K < 1) throw std::invalid_argument("partition_domain: need K >= 1");
  if (n < K + 1)
    throw std::invalid_argument("partition_domain: grid too small for K subdomains");
  Partition part;
  part.global = grid;
  part.count = K;
  part.boundaries.resize(K + 1);
  const int cells = (n - 1) / K;  // remainder goes to the last subdomain
  for (int s = 0; s < K; ++s) part.boundaries[s] = s * cells;
  part.boundaries[K] = n - 1;
  part.local.reserve(K);
  for (int s = 0; s < K; ++s)
    part.local.push_back(
        SpatialGrid::from_points(grid.points.segment(part.first(s), part.local_size(s))));
  return part;
}

Field assemble_global(const SubdomainFields& states, const Partition& part) {
  if (static_cast<int>(states.size()) != part.count)
    throw std::invalid_argument("assemble_global: wrong number of subdomain states");
  Field out(part.global.size());
  for (int s = 0; s < part.count; ++s) {
    if (states[s].size() != part.local_size(s))
      throw std::invalid_argument("assemble_global: subdomain state size mismatch");
    out.segment(part.first(s), part.local_size(s)) = states[s];
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

inline double harmonic_face(double a, double b) {
  const double s = a + b;
  return s > 0.0 ? 2.0 * a * b / s : 0.0;
}

void check_states(const SubdomainFields& states, const Partition& part) {
  if (static_cast<int>(states.size()) != part.count)
    throw std::invalid_argument("dd step: wrong number of subdomain states");
  for (int s = 0; s < part.count; ++s)
    if (states[s].size() != part.local_size(s))
      throw std::invalid_argument("dd step: subdomain state size mismatch");
}

}  // namespace

LinearDDWorkspace::LinearDDWorkspace(const Partition& part, const Field& a, double dt,
                                     double bc_left, double bc_right, const Field& source)
    : part_(part), bc_left_(bc_left), bc_right_(bc_right), dt_(dt) {
  const int K = part.count;
  if (a.size() != part.global.size())
    throw std::invalid_argument("LinearDDWorkspace: coefficient size mismatch");
  const bool has_source = source.size() != 0;
  if (has_source && source.size() != part.global.size())
    throw std::invalid_argument("LinearDDWorkspace: source size mismatch");

  systems_.reserve(K);
  source_local_.resize(K);
  unit_left_.resize(K);
  unit_right_.resize(K);
  for (int s = 0; s < K; ++s) {
    systems_.push_back(assemble_linear_be(part.local[s], part.restrict_field(a, s), dt));
    if (has_source) source_local_[s] = part.restrict_field(source, s);
    const int n = part.local_size(s);
    if (s > 0) {
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
      rhs(0) = 1.0;
      unit_left_[s] = systems_[s].factor.solve(rhs);
      ++counters_.unit_solves;
    }
    if (s + 1 < K) {
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
      rhs(n - 1) = 1.0;
      unit_right_[s] = systems_[s].factor.solve(rhs);
      ++counters_.unit_solves;
    }
  }

  const int ni = part.interfaces();
  alpha_left_.resize(ni);
  alpha_right_.resize(ni);
  iface_mass_dt_.resize(ni);
  iface_source_.resize(ni);
  for (int k = 0; k < ni; ++k) {
    const int i = part.interface_node(k);
    const double hl = part.global.points(i) - part.global.points(i - 1);
    const double hr = part.global.points(i + 1) - part.global.points(i);
    alpha_left_(k) = harmonic_face(a(i - 1), a(i)) / hl;
    alpha_right_(k) = harmonic_face(a(i), a(i + 1)) / hr;
    iface_mass_dt_(k) = part.global.cell_weights(i) / dt;
    iface_source_(k) = has_source ? part.global.cell_weights(i) * source(i) : 0.0;
  }
}

std::pair<SubdomainFields, InterfaceState> LinearDDWorkspace::step(
    const SubdomainFields& states) {
  check_states(states, part_);
  const int K = part_.count;
  SubdomainFields out(K);
  InterfaceState iface;
  if (K == 1) {
    out[0] = linear_be_solve(systems_[0], states[0], source_local_[0], bc_left_, bc_right_);
    ++counters_.particular_solves;
    return {std::move(out), std::move(iface)};
  }

  // Particular solves: physical BCs at the outer ends, zero at interfaces.
  std::vector<Field> particular(K);
  for (int s = 0; s < K; ++s) {
    particular[s] = linear_be_solve(systems_[s], states[s], source_local_[s],
                                    s == 0 ? bc_left_ : 0.0, s + 1 == K ? bc_right_ : 0.0);
    ++counters_.particular_solves;
  }

  // Interface system: the monolithic balance row at each interface node,
  // with neighbor values expanded by superposition.
  const int ni = part_.interfaces();
  Tridiagonal sys;
  sys.resize(ni);
  Eigen::VectorXd rhs(ni);
  for (int k = 0; k < ni; ++k) {
    const int nl = part_.local_size(k);
    const double wr_last = unit_right_[k](nl - 2);       // own-interface response, left side
    const double wl_first = unit_left_[k + 1](1);        // own-interface response, right side
    sys.diag(k) = iface_mass_dt_(k) + alpha_left_(k) * (1.0 - wr_last) +
                  alpha_right_(k) * (1.0 - wl_first);
    if (k > 0) sys.lower(k) = -alpha_left_(k) * unit_left_[k](nl - 2);
    if (k + 1 < ni) sys.upper(k) = -alpha_right_(k) * unit_right_[k + 1](1);
    const double u_prev = 0.5 * (states[k](nl - 1) + states[k + 1](0));
    rhs(k) = iface_mass_dt_(k) * u_prev + iface_source_(k) +
             alpha_left_(k) * particular[k](nl - 2) +
             alpha_right_(k) * particular[k + 1](1);
  }
  iface.values = solve_tridiagonal(sys, rhs);
  ++counters_.interface_system_solves;

  for (int s = 0; s < K; ++s) {
    out[s] = std::move(particular[s]);
    if (s > 0) {
      out[s] += iface.values(s - 1) * unit_left_[s];
      out[s](0) = iface.values(s - 1);
    }
    if (s + 1 < K) {
      out[s] += iface.values(s) * unit_right_[s];
      out[s](out[s].size() - 1) = iface.values(s);
    }
  }
  return {std::move(out), std::move(iface)};
}

std::pair<SubdomainFields, InterfaceState> linear_dd_step(const SubdomainFields& states,
                                                          const Field& a,
                                                          const Partition& part, double dt,
                                                          double bc_left, double bc_right,
                                                          const Field& source) {
  LinearDDWorkspace ws(part, a, dt, bc_left, bc_right, source);
  return ws.step(states);
}

// ---------------------------------------------------------------------------

RichardsDDWorkspace::RichardsDDWorkspace(const Partition& part, const VanGenuchten& vg,
                                         double bc_left, double bc_right,
                                         const RichardsDDOptions& opts)
    : part_(part), vg_(vg), bc_left_(bc_left), bc_right_(bc_right), opts_(opts) {
  PicardOptions inner;
  inner.tol = opts.inner_tol;
  inner.max_iter = opts.inner_max_iter;
  steppers_.reserve(part.count);
  for (int s = 0; s < part.count; ++s)
    steppers_.emplace_back(part.local[s], vg, 0.0, 0.0, inner);
}

void RichardsDDWorkspace::set_conductivity(const Field& Ks_global) {
  if (Ks_global.size() != part_.global.size())
    throw std::invalid_argument("RichardsDDWorkspace: conductivity size mismatch");
  Ks_global_ = Ks_global;
  for (int s = 0; s < part_.count; ++s)
    steppers_[s].set_conductivity(part_.restrict_field(Ks_global, s));
}

std::pair<SubdomainFields, InterfaceState> RichardsDDWorkspace::step(
    const SubdomainFields& states, double dt, const InterfaceState* warm) {
  return step_halved(states, dt, warm, 0);
}

std::pair<SubdomainFields, InterfaceState> RichardsDDWorkspace::step_halved(
    const SubdomainFields& states, double dt, const InterfaceState* warm, int depth) {
  try {
    return step_once(states, dt, warm);
  } catch (const InterfaceDivergence&) {
    if (depth >= opts_.max_halvings) throw;
    auto half = step_halved(states, 0.5 * dt, warm, depth + 1);
    const InterfaceState* mid = half.second.values.size() > 0 ? &half.second : nullptr;
    return step_halved(half.first, 0.5 * dt, mid, depth + 1);
  }
}

std::pair<SubdomainFields, InterfaceState> RichardsDDWorkspace::step_once(
    const SubdomainFields& states, double dt, const InterfaceState* warm) {
  check_states(states, part_);
  if (Ks_global_.size() == 0)
    throw std::invalid_argument("RichardsDDWorkspace: conductivity not set");
  const int K = part_.count;
  SubdomainFields sol(K);
  InterfaceState iface;
  if (K == 1) {
    steppers_[0].set_bcs(bc_left_, bc_right_);
    if (!steppers_[0].try_step(states[0], dt, sol[0])) {
      std::ostringstream m;
      m << "richards_dd_step: Picard did not converge (dt=" << dt << ", state in ["
        << states[0].minCoeff() << ", " << states[0].maxCoeff() << "])";
      throw InterfaceDivergence(m.str());
    }
    ++counters_.subdomain_steps;
    return {std::move(sol), std::move(iface)};
  }

  const int ni = part_.interfaces();
  Eigen::VectorXd lam(ni), psi_prev(ni), mass_dt(ni), hl(ni), hr(ni);
  for (int k = 0; k < ni; ++k) {
    const int i = part_.interface_node(k);
    const int nl = part_.local_size(k);
    psi_prev(k) = 0.5 * (states[k](nl - 1) + states[k + 1](0));
    lam(k) = warm ? warm->values(k) : psi_prev(k);
    mass_dt(k) = part_.global.cell_weights(i) / dt;
    hl(k) = part_.global.points(i) - part_.global.points(i - 1);
    hr(k) = part_.global.points(i + 1) - part_.global.points(i);
  }
  if (warm && warm->values.size() != ni)
    throw std::invalid_argument("richards_dd_step: warm start size mismatch");

  Eigen::VectorXd resid(ni), sigma(ni), lam_old(ni), resid_old(ni);
  std::vector<double> history;
  // The per-interface secant ignores cross-interface coupling, so strongly
  // heterogeneous conductivity samples can overshoot; damp the update whenever
  // the residual stops shrinking, exactly like the subdomain Picard.
  double omega = opts_.relax;
  double prev_res = std::numeric_limits<double>::infinity();
  for (int it = 0; it < opts_.max_iter; ++it) {
    ++counters_.interface_iterations;
    for (int s = 0; s < K; ++s) {
      const double bl = s == 0 ? bc_left_ : lam(s - 1);
      const double br = s + 1 == K ? bc_right_ : lam(s);
      steppers_[s].set_bcs(bl, br);
      if (!steppers_[s].try_step(states[s], dt, sol[s])) {
        std::ostringstream m;
        m << "richards_dd_step: subdomain Picard did not converge (s=" << s << ", it=" << it
          << ", dt=" << dt << ", bc=[" << bl << ", " << br << "], state in ["
          << states[s].minCoeff() << ", " << states[s].maxCoeff() << "]; last deltas:";
        const auto& del = steppers_[s].last_deltas();
        for (std::size_t j = del.size() > 12 ? del.size() - 12 : 0; j < del.size(); ++j)
          m << ' ' << del[j];
        m << ')';
        throw InterfaceDivergence(m.str());
      }
      ++counters_.subdomain_steps;
    }
    Eigen::VectorXd kfl(ni), kfr(ni);
    for (int k = 0; k < ni; ++k) {
      const int i = part_.interface_node(k);
      const int nl = part_.local_size(k);
      const double k_im1 = Ks_global_(i - 1) * relative_conductivity(sol[k](nl - 2), vg_);
      const double k_i = Ks_global_(i) * relative_conductivity(lam(k), vg_);
      const double k_ip1 = Ks_global_(i + 1) * relative_conductivity(sol[k + 1](1), vg_);
      kfl(k) = 0.5 * (k_im1 + k_i);
      kfr(k) = 0.5 * (k_i + k_ip1);
      const double flux_left = kfl(k) * ((lam(k) - sol[k](nl - 2)) / hl(k) + 1.0);
      const double flux_right = kfr(k) * ((sol[k + 1](1) - lam(k)) / hr(k) + 1.0);
      resid(k) = flux_right - flux_left - mass_dt(k) * (lam(k) - psi_prev(k));
    }
    const double res_norm = resid.cwiseAbs().maxCoeff();
    history.push_back(res_norm);
    if (res_norm < opts_.tol) {
      for (int s = 0; s < K; ++s) {
        if (s > 0) sol[s](0) = lam(s - 1);
        if (s + 1 < K) sol[s](sol[s].size() - 1) = lam(s);
      }
      iface.values = lam;
      return {std::move(sol), std::move(iface)};
    }
    if (res_norm > 1.5 * prev_res)
      omega = std::max(0.5 * omega, opts_.relax / 64.0);
    else if (res_norm < prev_res)
      omega = std::min(1.3 * omega, opts_.relax);
    prev_res = res_norm;
    for (int k = 0; k < ni; ++k) {
      // Analytic Schur diagonal; the secant usually learns a much smaller
      // effective slope (the subdomain solves transmit most of a lambda move),
      // so only reject nonpositive or absurd values.
      const double sig_a = kfl(k) / hl(k) + kfr(k) / hr(k) + mass_dt(k);
      if (it == 0) {
        sigma(k) = sig_a;
      } else {
        const double dl = lam(k) - lam_old(k);
        if (std::abs(dl) > 1e-14 * (1.0 + std::abs(lam(k)))) {
          const double sec = -(resid(k) - resid_old(k)) / dl;
          sigma(k) = sec > 0.0 ? std::clamp(sec, sig_a / 1000.0, 1000.0 * sig_a) : sig_a;
        }
      }
    }
    lam_old = lam;
    resid_old = resid;
    // Step cap: a garbage slope must not fling an interface across the whole
    // pressure range in one go.
    const double cap = 0.25 * (1.0 + lam.cwiseAbs().maxCoeff());
    lam += (omega * resid.cwiseQuotient(sigma)).cwiseMax(-cap).cwiseMin(cap);
  }
  std::ostringstream msg;
  msg << "richards_dd_step: interface iteration did not reach tol " << opts_.tol << " in "
      << opts_.max_iter << " iterations; residual history:";
  for (double r : history) msg << ' ' << r;
  throw InterfaceDivergence(msg.str());
}

std::pair<SubdomainFields, InterfaceState> richards_dd_step(
    const SubdomainFields& states, const Field& Ks, const Partition& part,
    const VanGenuchten& vg, double dt, double bc_left, double bc_right,
    const RichardsDDOptions& opts, const InterfaceState* warm) {
  RichardsDDWorkspace ws(part, vg, bc_left, bc_right, opts);
  ws.set_conductivity(Ks);
  return ws.step(states, dt, warm);
}

}  // namespace tdba
