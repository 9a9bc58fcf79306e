#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "tdba/basis_adaptation.hpp"
#include "tdba/stats_post.hpp"

using namespace tdba;

namespace {

// Small linear stochastic problem used throughout this suite.
LinearStochasticProblem small_linear(int d, int n_pts, double t_end, double dt) {
  const SpatialGrid grid = SpatialGrid::uniform(0.0, 1.0, n_pts);
  CovarianceKernel kernel{0.22314355131420976, 0.2};
  LinearStochasticProblem p;
  p.kl = solve_kl_eigenproblem(kernel, grid, d,
                               Field::Constant(grid.size(), -0.8047189562170502));
  p.deterministic.grid = grid;
  p.deterministic.bc_left = 2.0;
  p.deterministic.bc_right = 1.0;
  p.deterministic.dt = dt;
  p.deterministic.t_end = t_end;
  p.deterministic.initial = Field::Ones(grid.size());
  for (int j = 0; j < grid.size(); ++j)
    if (grid.points(j) >= 0.375 && grid.points(j) <= 0.625)
      p.deterministic.initial(j) = 2.0;
  return p;
}

}  // namespace

TEST_SUITE("basis_adaptation") {

TEST_CASE("linear pc starts from the deterministic initial condition") {
  const LinearStochasticProblem p = small_linear(3, 41, 0.05, 0.01);
  const TimeSchedule sched =
      build_schedule(p.deterministic.dt, p.deterministic.t_end, {0.05});
  const LinearPCSolution lin = compute_linear_pc(p, sched);
  CHECK(lin.dimension == 3);
  CHECK(lin.node_count == smolyak_grid(3, 2).size());
  REQUIRE(lin.times.size() == static_cast<size_t>(sched.steps() + 1));
  CHECK(lin.times[0] == 0.0);
  CHECK((lin.coeffs[0].row(0).transpose() - p.deterministic.initial).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK(lin.coeffs[0].bottomRows(3).cwiseAbs().maxCoeff() == 0.0);
  // Later snapshots pick up nonzero linear coefficients.
  CHECK(lin.coeffs.back().bottomRows(3).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("linear pc mean approaches the deterministic solve as variance vanishes") {
  LinearStochasticProblem p = small_linear(2, 41, 0.05, 0.01);
  CovarianceKernel tiny{1e-14, 0.2};
  p.kl = solve_kl_eigenproblem(tiny, p.deterministic.grid, 2,
                               Field::Constant(41, std::log(0.5)));
  const TimeSchedule sched = build_schedule(0.01, 0.05, {0.05});
  const LinearPCSolution lin = compute_linear_pc(p, sched);

  LinearDiffusionProblem det = p.deterministic;
  det.coefficient = Field::Constant(41, 0.5);
  const Trajectory traj = solve_linear(det, {0.05});
  CHECK((lin.coeffs.back().row(0).transpose() - traj.states[0]).cwiseAbs().maxCoeff() <
        1e-6);
}

TEST_CASE("solution covariance factor is the restricted linear block") {
  const LinearStochasticProblem p = small_linear(3, 41, 0.05, 0.01);
  const TimeSchedule sched = build_schedule(0.01, 0.05, {0.05});
  const LinearPCSolution lin = compute_linear_pc(p, sched);
  const Partition part = partition_domain(p.deterministic.grid, 2);
  const SolutionCovariance cov = solution_covariance(lin, 0.05, part, 1);
  CHECK(cov.subdomain == 1);
  CHECK(cov.factor.rows() == part.local_size(1));
  CHECK(cov.factor.cols() == 3);
  const int t_idx = lin.find_time(0.05);
  for (int j = 0; j < 3; ++j)
    CHECK((cov.factor.col(j).transpose() -
           lin.coeffs[t_idx].row(j + 1).segment(part.first(1), part.local_size(1)))
              .cwiseAbs()
              .maxCoeff() == 0.0);
  const Eigen::MatrixXd dense = cov.dense();
  CHECK((dense - dense.transpose()).cwiseAbs().maxCoeff() < 1e-14);
  const Eigen::VectorXd evs = dense.selfadjointView<Eigen::Lower>().eigenvalues();
  CHECK(evs.minCoeff() > -1e-12);
}

TEST_CASE("hilbert kl recovers a synthetic spectrum") {
  const SpatialGrid grid = SpatialGrid::uniform(0.0, 1.0, 41);
  const Eigen::VectorXd w = grid.cell_weights;
  // Orthonormal (under w) directions from QR of a fixed random matrix.
  std::mt19937_64 eng(29);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd raw(41, 3);
  for (int i = 0; i < 41; ++i)
    for (int j = 0; j < 3; ++j) raw(i, j) = normal(eng);
  const Eigen::MatrixXd q =
      Eigen::HouseholderQR<Eigen::MatrixXd>(w.cwiseSqrt().asDiagonal() * raw)
          .householderQ() *
      Eigen::MatrixXd::Identity(41, 3);
  const Eigen::VectorXd scales = (Eigen::VectorXd(3) << 2.0, 0.5, 0.125).finished();

  SolutionCovariance cov;
  cov.subdomain = 0;
  cov.time = 1.0;
  cov.weights = w;
  cov.factor = w.cwiseSqrt().cwiseInverse().asDiagonal() * q * scales.asDiagonal();

  const HilbertKLModes modes = hilbert_kl(cov, 2);
  CHECK(modes.retained == 2);
  CHECK(std::abs(modes.eigenvalues(0) - 4.0) < 1e-10);
  CHECK(std::abs(modes.eigenvalues(1) - 0.25) < 1e-10);
  CHECK(std::abs(modes.eigenvalues(2) - 0.015625) < 1e-10);
  const Eigen::MatrixXd gram = modes.modes.transpose() * w.asDiagonal() * modes.modes;
  CHECK((gram - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(std::abs(modes.capture_ratio(2) - 4.25 / (4.25 + 0.015625)) < 1e-12);

  // Alignment: re-solving with the previous modes handed in keeps signs.
  const HilbertKLModes again = hilbert_kl(cov, 2, &modes);
  CHECK((again.modes - modes.modes).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("rotation rows are orthonormal and completion is orthogonal") {
  const LinearStochasticProblem p = small_linear(4, 41, 0.1, 0.01);
  const StochasticProblem sp = p;
  const TimeSchedule sched = build_schedule(0.01, 0.1, {0.1});
  const LinearPCSolution lin = compute_linear_pc(sp, sched);
  const Partition part = partition_domain(p.deterministic.grid, 2);
  for (int s = 0; s < 2; ++s) {
    const SolutionCovariance cov = solution_covariance(lin, 0.1, part, s);
    const HilbertKLModes modes = hilbert_kl(cov, 2);
    const RotationMap map = rotation_matrix(lin, modes, 0.1, part, s);
    CHECK(map.retained == 2);
    CHECK(map.raw_rows.rows() == 2);
    for (int i = 0; i < 2; ++i)
      CHECK(std::abs(map.raw_rows.row(i).norm() - 1.0) < 1e-6);
    const Eigen::MatrixXd eye =
        map.completed * map.completed.transpose() - Eigen::MatrixXd::Identity(4, 4);
    CHECK(eye.cwiseAbs().maxCoeff() < 1e-10);
    CHECK((map.completed.topRows(2) - map.raw_rows).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("complete_rotation extends partial rows with standard basis vectors") {
  Eigen::MatrixXd raw(2, 3);
  raw << 1.0, 0.0, 0.0, 0.0, 1.0, 0.0;
  const Eigen::MatrixXd full = complete_rotation(raw);
  CHECK((full - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-14);

  Eigen::MatrixXd bad(2, 3);
  bad << 1.0, 0.0, 0.0, 1.0, 1e-14, 0.0;  // linearly dependent rows
  CHECK_THROWS(complete_rotation(bad));
}

TEST_CASE("reduced collocation points satisfy the eta-map quadrature identity") {
  const LinearStochasticProblem p = small_linear(4, 41, 0.1, 0.01);
  const StochasticProblem sp = p;
  const TimeSchedule sched = build_schedule(0.01, 0.1, {0.1});
  const LinearPCSolution lin = compute_linear_pc(sp, sched);
  const Partition part = partition_domain(p.deterministic.grid, 2);
  const SolutionCovariance cov = solution_covariance(lin, 0.1, part, 0);
  const RotationMap map = rotation_matrix(lin, hilbert_kl(cov, 2), 0.1, part, 0);

  const SparseGrid grid_r = smolyak_grid(2, 3);
  const Eigen::MatrixXd xi = reduced_collocation_points(map, grid_r);
  CHECK(xi.rows() == grid_r.size());
  CHECK(xi.cols() == 4);
  const Eigen::MatrixXd a_r = map.completed.topRows(2);
  Eigen::MatrixXd second = Eigen::MatrixXd::Zero(4, 4);
  for (int q = 0; q < grid_r.size(); ++q)
    second += grid_r.weights(q) * xi.row(q).transpose() * xi.row(q);
  CHECK((second - a_r.transpose() * a_r).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("adapt context projector inverts the basis on the reduced grid") {
  const LinearStochasticProblem p = small_linear(3, 41, 0.05, 0.01);
  const StochasticProblem sp = p;
  const Partition part = partition_domain(p.deterministic.grid, 2);
  const AdaptContext ctx = make_adapt_context(sp, part, 2, 3, 5);
  CHECK(ctx.eta_grid.size() == smolyak_grid(2, 5).size());
  CHECK(ctx.basis.size() == 10);  // C(2+3, 3)
  const Eigen::MatrixXd eye = ctx.projector * ctx.psi_eta;
  CHECK((eye - Eigen::MatrixXd::Identity(10, 10)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("full-rank adapted runs are invariant to the partition") {
  // With r = d every rotation is a full orthogonal matrix, the reduced basis
  // spans the same polynomial space in any frame, and the linear DD advance
  // is exact, so K = 1 and K = 2 must produce the same moments up to
  // quadrature differences between rotated grids.
  const LinearStochasticProblem p = small_linear(3, 41, 0.06, 0.01);
  const StochasticProblem sp = p;
  AdaptedRunConfig cfg;
  cfg.r = 3;
  cfg.order = 3;
  cfg.level_linear = 2;
  cfg.level_reduced = 4;
  cfg.subdomains = 1;
  cfg.output_times = {0.03, 0.06};
  const AdaptedTrajectory one = run_time_dependent(sp, cfg);
  cfg.subdomains = 2;
  const AdaptedTrajectory two = run_time_dependent(sp, cfg);

  const MomentField m1 = moments_from_pce(one);
  const MomentField m2 = moments_from_pce(two);
  for (size_t i = 0; i < m1.times.size(); ++i) {
    CHECK((m1.mean.row(i) - m2.mean.row(i)).cwiseAbs().maxCoeff() < 1e-5);
    CHECK((m1.stddev.row(i) - m2.stddev.row(i)).cwiseAbs().maxCoeff() < 1e-5);
  }
  CHECK(one.linear_pc_nodes == smolyak_grid(3, 2).size());
  CHECK(one.reduced_nodes == smolyak_grid(3, 4).size());
  CHECK(two.subdomain_trajectories == two.reduced_nodes * 2);
  CHECK(one.min_capture_ratio == 1.0);
}

TEST_CASE("fixed and time-dependent modes build the expected map history") {
  const LinearStochasticProblem p = small_linear(3, 41, 0.04, 0.01);
  const StochasticProblem sp = p;
  AdaptedRunConfig cfg;
  cfg.r = 2;
  cfg.level_reduced = 3;
  cfg.subdomains = 2;
  cfg.output_times = {0.02, 0.04};

  const AdaptedTrajectory fixed = run_fixed_basis(sp, cfg);
  REQUIRE(fixed.maps.size() == 2);
  // Fixed mode: the same map (built at the first output time) everywhere.
  CHECK((fixed.maps[0][0].completed - fixed.maps[1][0].completed).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK(fixed.maps[0][0].time == doctest::Approx(0.02).epsilon(1e-12));

  const AdaptedTrajectory td = run_time_dependent(sp, cfg);
  // Time-dependent mode: maps at the two outputs differ.
  CHECK((td.maps[0][0].completed - td.maps[1][0].completed).cwiseAbs().maxCoeff() > 0.0);
  REQUIRE(td.times.size() == 2);
  CHECK(td.times[0] == doctest::Approx(0.02).epsilon(1e-9));
  CHECK(td.times[1] == doctest::Approx(0.04).epsilon(1e-9));
  for (const auto& per_sub : td.states) {
    REQUIRE(per_sub.size() == 2);
    for (const PCExpansion& pce : per_sub) CHECK(pce.coefficients.allFinite());
  }
}

TEST_CASE("variance floor warning fires when one mode cannot carry the field") {
  const LinearStochasticProblem p = small_linear(4, 41, 0.04, 0.01);
  const StochasticProblem sp = p;
  AdaptedRunConfig cfg;
  cfg.r = 1;
  cfg.level_reduced = 3;
  cfg.subdomains = 2;
  cfg.output_times = {0.04};
  cfg.variance_floor = 0.999999;
  const AdaptedTrajectory traj = run_time_dependent(sp, cfg);
  CHECK(traj.min_capture_ratio < 0.999999);
  CHECK(!traj.warnings.empty());
}

TEST_CASE("richards adapted run completes and stays physical") {
  const SpatialGrid grid = SpatialGrid::uniform(0.0, 10.0, 51);
  CovarianceKernel kernel{0.25, 2.5};
  RichardsStochasticProblem p;
  p.kl = solve_kl_eigenproblem(kernel, grid, 2, Field::Constant(51, std::log(0.05)));
  p.deterministic.grid = grid;
  p.deterministic.bc_left = 0.0;
  p.deterministic.bc_right = -0.35;
  p.deterministic.dt = 0.1;
  p.deterministic.t_end = 1.0;
  p.deterministic.initial = -0.035 * grid.points;
  const StochasticProblem sp = p;

  AdaptedRunConfig cfg;
  cfg.r = 2;
  cfg.level_reduced = 2;
  cfg.subdomains = 2;
  cfg.output_times = {0.5, 1.0};
  const AdaptedTrajectory traj = run_time_dependent(sp, cfg);
  const MomentField m = moments_from_pce(traj);
  CHECK(m.mean.allFinite());
  CHECK(m.stddev.allFinite());
  CHECK(m.mean.maxCoeff() <= 1e-3);
  CHECK(m.mean.minCoeff() >= -0.4);
  CHECK(m.stddev.minCoeff() >= 0.0);
  CHECK(traj.counters.dd.interface_iterations > 0);
}

}  // TEST_SUITE
