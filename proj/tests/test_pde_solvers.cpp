#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "tdba/pde_solvers.hpp"
#include "tdba/stats_post.hpp"
#include "tdba/tridiag.hpp"

using namespace tdba;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Discrete steady state in one backward-Euler step with a huge dt.
Field steady_solve(const SpatialGrid& grid, const Field& a, const Field& f, double bcl,
                   double bcr) {
  LinearDiffusionProblem p;
  p.grid = grid;
  p.coefficient = a;
  p.source = f;
  p.bc_left = bcl;
  p.bc_right = bcr;
  p.initial = Field::Zero(grid.size());
  return step_linear(p.initial, p, 1e10);
}

double manufactured_error(int n) {
  const SpatialGrid grid = SpatialGrid::uniform(0.0, 1.0, n);
  Field a(n), f(n), exact(n);
  for (int j = 0; j < n; ++j) {
    const double x = grid.points(j);
    a(j) = 1.0 + 0.5 * std::sin(2.0 * kPi * x);
    exact(j) = std::sin(kPi * x) + 1.0;
    f(j) = kPi * kPi * ((1.0 + 0.5 * std::sin(2.0 * kPi * x)) * std::sin(kPi * x) -
                        std::cos(2.0 * kPi * x) * std::cos(kPi * x));
  }
  const Field u = steady_solve(grid, a, f, 1.0, 1.0);
  return relative_l2(u, exact, grid);
}

}  // namespace

TEST_SUITE("pde_solvers") {

TEST_CASE("thomas solver matches a dense solve") {
  std::mt19937_64 eng(7);
  std::uniform_real_distribution<double> unif(0.1, 1.0);
  const int n = 40;
  Tridiagonal m;
  m.resize(n);
  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    m.diag(i) = 3.0 + unif(eng);
    dense(i, i) = m.diag(i);
    if (i > 0) {
      m.lower(i) = -unif(eng);
      dense(i, i - 1) = m.lower(i);
    }
    if (i < n - 1) {
      m.upper(i) = -unif(eng);
      dense(i, i + 1) = m.upper(i);
    }
  }
  Eigen::VectorXd rhs(n);
  for (int i = 0; i < n; ++i) rhs(i) = unif(eng) - 0.5;
  const Eigen::VectorXd x = solve_tridiagonal(m, rhs);
  const Eigen::VectorXd ref = dense.partialPivLu().solve(rhs);
  CHECK((x - ref).cwiseAbs().maxCoeff() < 1e-12);

  const TridiagonalFactor factor = TridiagonalFactor::compute(m);
  CHECK((factor.solve(rhs) - ref).cwiseAbs().maxCoeff() < 1e-12);
  const Eigen::VectorXd rhs2 = rhs.reverse();
  CHECK((factor.solve(rhs2) - dense.partialPivLu().solve(rhs2)).cwiseAbs().maxCoeff() <
        1e-12);
}

TEST_CASE("schedule lands exactly on record times") {
  const TimeSchedule sched = build_schedule(0.25, 1.0, {0.3, 1.0});
  CHECK(sched.times.back() == doctest::Approx(1.0).epsilon(1e-12));
  // Every record time appears as a step endpoint with its flag set.
  for (double t : {0.3, 1.0}) {
    bool found = false;
    for (int i = 0; i < sched.steps(); ++i)
      if (std::abs(sched.times[i] - t) < 1e-12 && sched.record[i]) found = true;
    CHECK(found);
  }
  // Steps never exceed the nominal dt and are strictly increasing.
  double prev = 0.0;
  for (int i = 0; i < sched.steps(); ++i) {
    CHECK(sched.times[i] - prev > 0.0);
    CHECK(sched.times[i] - prev <= 0.25 + 1e-12);
    prev = sched.times[i];
  }

  const TimeSchedule uniform = build_schedule(1e-3, 1.6, {0.2, 0.3, 1.6});
  CHECK(uniform.steps() == 1600);
  int flagged = 0;
  for (int i = 0; i < uniform.steps(); ++i) flagged += uniform.record[i] ? 1 : 0;
  CHECK(flagged == 3);
}

TEST_CASE("constant state with matching boundary values is stationary") {
  const SpatialGrid grid = SpatialGrid::uniform(0.0, 1.0, 31);
  LinearDiffusionProblem p;
  p.grid = grid;
  p.coefficient = Field::Constant(31, 0.7);
  p.bc_left = 2.5;
  p.bc_right = 2.5;
  p.initial = Field::Constant(31, 2.5);
  const Field u = step_linear(p.initial, p, 1e-2);
  CHECK((u.array() - 2.5).abs().maxCoeff() < 1e-12);
}

TEST_CASE("linear solver spatial convergence is second order") {
  const double e1 = manufactured_error(26);
  const double e2 = manufactured_error(51);
  const double e3 = manufactured_error(101);
  const double o1 = std::log2(e1 / e2);
  const double o2 = std::log2(e2 / e3);
  CHECK(o1 > 1.7);
  CHECK(o1 < 2.3);
  CHECK(o2 > 1.7);
  CHECK(o2 < 2.3);
}

TEST_CASE("backward euler temporal convergence is first order") {
  const int n = 401;
  const SpatialGrid grid = SpatialGrid::uniform(0.0, 1.0, n);
  Field exact(n), initial(n);
  const double t_end = 0.1;
  for (int j = 0; j < n; ++j) {
    initial(j) = std::sin(kPi * grid.points(j));
    exact(j) = std::exp(-kPi * kPi * t_end) * initial(j);
  }
  auto error_at = [&](double dt) {
    LinearDiffusionProblem p;
    p.grid = grid;
    p.coefficient = Field::Ones(n);
    p.initial = initial;
    p.dt = dt;
    p.t_end = t_end;
    const Trajectory traj = solve_linear(p, {t_end});
    return relative_l2(traj.states.back(), exact, grid);
  };
  const double e1 = error_at(2e-3);
  const double e2 = error_at(1e-3);
  const double e3 = error_at(5e-4);
  CHECK(std::log2(e1 / e2) > 0.85);
  CHECK(std::log2(e1 / e2) < 1.15);
  CHECK(std::log2(e2 / e3) > 0.85);
  CHECK(std::log2(e2 / e3) < 1.15);
}

TEST_CASE("van genuchten closures") {
  const VanGenuchten vg;
  CHECK(vg.m() == doctest::Approx(1.0 - 1.0 / 1.56).epsilon(1e-15));
  CHECK(effective_saturation(0.0, vg) == 1.0);
  CHECK(effective_saturation(1.3, vg) == 1.0);
  CHECK(relative_conductivity(0.0, vg) == 1.0);
  CHECK(relative_conductivity(2.0, vg) == 1.0);

  // Optimized kr against the textbook Mualem composition, evaluated in long
  // double so the oracle itself does not lose bits to cancellation when the
  // medium is very dry.
  for (double psi : {-0.01, -0.5, -1.0, -10.0, -100.0, -1e4}) {
    const long double m = static_cast<long double>(vg.m());
    const long double sel =
        std::pow(1.0L + std::pow(static_cast<long double>(vg.alpha) * std::abs((long double)psi),
                                 static_cast<long double>(vg.n)),
                 -m);
    const double se = static_cast<double>(sel);
    CHECK(std::abs(effective_saturation(psi, vg) - se) < 1e-12 * se);
    const double kr_naive = static_cast<double>(
        std::sqrt(sel) * std::pow(1.0L - std::pow(1.0L - std::pow(sel, 1.0L / m), m), 2));
    const double kr = relative_conductivity(psi, vg);
    CHECK(std::abs(kr - kr_naive) <= 1e-12 * std::max(kr_naive, 1e-300));
    CHECK(van_genuchten_K(psi, 0.05, vg) == doctest::Approx(0.05 * kr).epsilon(1e-15));
  }

  // Monotone in psi, bounded in (0, 1].
  double prev = 0.0;
  for (double psi = -50.0; psi <= 0.0; psi += 0.5) {
    const double kr = relative_conductivity(psi, vg);
    CHECK(kr > prev);
    CHECK(kr <= 1.0);
    prev = kr;
  }

  // Near saturation the curve is blended to 1 inside alpha|psi| < 3.6e-6 so
  // the Picard iteration keeps contracting; the blend must stay monotone, C^0
  // at the band edge, and within 2e-3 of 1 throughout.
  const double yb = 3.6e-6 / vg.alpha;
  CHECK(relative_conductivity(-yb * (1.0 - 1e-9), vg) ==
        doctest::Approx(relative_conductivity(-yb * (1.0 + 1e-9), vg)).epsilon(1e-9));
  prev = relative_conductivity(-2.0 * yb, vg);
  for (int i = 1; i <= 200; ++i) {
    const double y = 2.0 * yb * (1.0 - i / 201.0);
    const double kr = relative_conductivity(-y, vg);
    CHECK(kr >= prev);
    CHECK(kr <= 1.0);
    if (y < yb) CHECK(1.0 - kr < 2e-3);
    prev = kr;
  }
}

TEST_CASE("hydrostatic profile is an exact fixed point of the richards step") {
  const SpatialGrid grid = SpatialGrid::uniform(0.0, 10.0, 101);
  RichardsProblem p;
  p.grid = grid;
  p.saturated_conductivity = Field::Constant(101, 0.05);
  p.initial = Field::Constant(101, -0.2) - grid.points;  // psi_x = -1, zero total flux
  p.bc_left = p.initial(0);
  p.bc_right = p.initial(100);
  const Field next = step_richards(p.initial, p, 0.05);
  CHECK((next - p.initial).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("constant psi with uniform conductivity is stationary") {
  const SpatialGrid grid = SpatialGrid::uniform(0.0, 10.0, 51);
  RichardsProblem p;
  p.grid = grid;
  p.saturated_conductivity = Field::Constant(51, 0.1);
  p.initial = Field::Constant(51, -1.0);
  p.bc_left = -1.0;
  p.bc_right = -1.0;
  const Field next = step_richards(p.initial, p, 0.1);
  CHECK((next.array() + 1.0).abs().maxCoeff() < 1e-10);
}

TEST_CASE("richards infiltration stays within physical bounds") {
  const SpatialGrid grid = SpatialGrid::uniform(0.0, 10.0, 101);
  RichardsProblem p;
  p.grid = grid;
  p.saturated_conductivity = Field::Constant(101, 0.05);
  p.initial = -0.035 * grid.points;
  p.bc_left = 0.0;
  p.bc_right = -0.35;
  p.dt = 0.05;
  p.t_end = 5.0;
  const Trajectory traj = solve_richards(p, {1.0, 5.0});
  REQUIRE(traj.states.size() == 2);
  for (const Field& psi : traj.states) {
    CHECK(psi.maxCoeff() <= 1e-9);
    CHECK(psi.minCoeff() >= -0.351);
    CHECK(psi.allFinite());
  }
  CHECK(traj.times[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("richards stepper substeps are consistent with the plain step") {
  const SpatialGrid grid = SpatialGrid::uniform(0.0, 10.0, 51);
  const VanGenuchten vg;
  PicardOptions opts;
  RichardsStepper stepper(grid, vg, 0.0, -0.35, opts);
  stepper.set_conductivity(Field::Constant(51, 0.05));
  Field psi = -0.035 * grid.points;

  RichardsProblem p;
  p.grid = grid;
  p.saturated_conductivity = Field::Constant(51, 0.05);
  p.initial = psi;
  p.bc_left = 0.0;
  p.bc_right = -0.35;
  const Field direct = step_richards(psi, p, 0.05);

  stepper.advance(psi, 0.05);
  CHECK((psi - direct).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(stepper.picard_iterations() > 0);
}

}  // TEST_SUITE
