// pybind11 surface: numpy-first wrappers around the main library operations.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <stdexcept>

#include "tdba/experiment.hpp"
#include "tdba/pde_solvers.hpp"
#include "tdba/polynomial_chaos.hpp"
#include "tdba/random_field.hpp"
#include "tdba/sparse_grid.hpp"
#include "tdba/stats_post.hpp"

namespace py = pybind11;
using namespace tdba;

namespace {

SpatialGrid grid_from_points(const Eigen::VectorXd& points) {
  return SpatialGrid::from_points(points);
}

py::tuple trajectory_to_tuple(const Trajectory& traj) {
  Eigen::MatrixXd states(traj.states.size(), traj.states.empty() ? 0 : traj.states[0].size());
  for (size_t i = 0; i < traj.states.size(); ++i) states.row(i) = traj.states[i].transpose();
  return py::make_tuple(traj.times, states);
}

py::dict manifest_to_dict(const RunManifest& man) {
  py::dict d;
  d["config"] = man.config;
  d["counts"] = man.counts;
  d["metrics"] = man.metrics;
  d["warnings"] = man.warnings;
  d["files"] = man.files;
  d["wall_seconds"] = man.wall_seconds;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Time-dependent stochastic basis adaptation for 1D diffusion equations";

  m.def(
      "gauss_hermite",
      [](int n) {
        const QuadratureRule1D rule = gauss_hermite_1d(n);
        return py::make_tuple(rule.nodes, rule.weights);
      },
      py::arg("n"),
      "Probabilists' Gauss-Hermite rule: (nodes, weights), weights summing to one.");

  m.def(
      "sparse_grid",
      [](int dimension, int level) {
        const SparseGrid grid = smolyak_grid(dimension, level);
        return py::make_tuple(grid.nodes, grid.weights);
      },
      py::arg("dimension"), py::arg("level"),
      "Smolyak sparse Gauss-Hermite grid: (nodes (N, d), weights (N,)).");

  m.def("hermite", &hermite_normalized, py::arg("degree"), py::arg("x"),
        "Normalized probabilists' Hermite polynomial value.");

  m.def(
      "basis_terms",
      [](int dimension, int order) {
        const HermiteBasis basis = build_basis(dimension, order);
        Eigen::MatrixXi terms(basis.size(), dimension);
        for (int i = 0; i < basis.size(); ++i)
          for (int j = 0; j < dimension; ++j) terms(i, j) = basis.indices[i][j];
        return terms;
      },
      py::arg("dimension"), py::arg("order"),
      "Multi-indices of the total-degree Hermite basis, one row per term.");

  m.def(
      "lognormal_params",
      [](double mean, double stddev) {
        const LognormalParams p = lognormal_params_from_moments(mean, stddev);
        return py::make_tuple(p.log_mean, p.log_std);
      },
      py::arg("mean"), py::arg("stddev"),
      "(log_mean, log_std) of the Gaussian exponent matching the given moments.");

  py::class_<KLExpansion>(m, "KLExpansion",
                          "Truncated Karhunen-Loeve expansion on a 1D grid.")
      .def_property_readonly("points",
                             [](const KLExpansion& kl) { return kl.grid.points; })
      .def_readonly("mean", &KLExpansion::mean)
      .def_readonly("eigenvalues", &KLExpansion::eigenvalues)
      .def_readonly("eigenfunctions", &KLExpansion::eigenfunctions)
      .def_property_readonly("dimension", &KLExpansion::dimension)
      .def("gaussian", &evaluate_gaussian_field, py::arg("xi"),
           "Gaussian field realization for one standard-normal vector xi.")
      .def("lognormal", &evaluate_lognormal_field, py::arg("xi"),
           "Lognormal field realization exp(gaussian(xi)).")
      .def("gaussian_batch", &evaluate_gaussian_fields, py::arg("xi"),
           "One realization per row of xi; returns (n_realizations, n_points).")
      .def("lognormal_batch", &evaluate_lognormal_fields, py::arg("xi"));

  m.def(
      "kl_expansion",
      [](double variance, double correlation_length, const Eigen::VectorXd& points,
         int n_modes, py::object mean) {
        const SpatialGrid grid = grid_from_points(points);
        const CovarianceKernel kernel{variance, correlation_length};
        if (mean.is_none()) return solve_kl_eigenproblem(kernel, grid, n_modes);
        return solve_kl_eigenproblem(kernel, grid, n_modes, mean.cast<Eigen::VectorXd>());
      },
      py::arg("variance"), py::arg("correlation_length"), py::arg("points"),
      py::arg("n_modes"), py::arg("mean") = py::none(),
      "KL expansion of an exponential-covariance Gaussian process on `points`.");

  m.def(
      "solve_linear_diffusion",
      [](const Eigen::VectorXd& points, const Eigen::VectorXd& coefficient,
         const Eigen::VectorXd& initial, double bc_left, double bc_right, double dt,
         double t_end, const std::vector<double>& record_times, py::object source) {
        LinearDiffusionProblem p;
        p.grid = grid_from_points(points);
        p.coefficient = coefficient;
        if (!source.is_none()) p.source = source.cast<Eigen::VectorXd>();
        p.bc_left = bc_left;
        p.bc_right = bc_right;
        p.initial = initial;
        p.dt = dt;
        p.t_end = t_end;
        return trajectory_to_tuple(solve_linear(p, record_times));
      },
      py::arg("points"), py::arg("coefficient"), py::arg("initial"), py::arg("bc_left"),
      py::arg("bc_right"), py::arg("dt"), py::arg("t_end"), py::arg("record_times"),
      py::arg("source") = py::none(),
      "Backward-Euler march of u_t = (a u_x)_x + f; returns (times, states).");

  m.def(
      "solve_richards",
      [](const Eigen::VectorXd& points, const Eigen::VectorXd& saturated_conductivity,
         const Eigen::VectorXd& initial, double bc_left, double bc_right, double dt,
         double t_end, const std::vector<double>& record_times, double vg_alpha,
         double vg_n, double vg_theta_r, double vg_theta_s, double picard_tol,
         int picard_max_iter) {
        RichardsProblem p;
        p.grid = grid_from_points(points);
        p.saturated_conductivity = saturated_conductivity;
        p.vg = VanGenuchten{vg_theta_r, vg_theta_s, vg_alpha, vg_n};
        p.bc_left = bc_left;
        p.bc_right = bc_right;
        p.initial = initial;
        p.dt = dt;
        p.t_end = t_end;
        p.picard.tol = picard_tol;
        p.picard.max_iter = picard_max_iter;
        return trajectory_to_tuple(solve_richards(p, record_times));
      },
      py::arg("points"), py::arg("saturated_conductivity"), py::arg("initial"),
      py::arg("bc_left"), py::arg("bc_right"), py::arg("dt"), py::arg("t_end"),
      py::arg("record_times"), py::arg("vg_alpha") = 0.036, py::arg("vg_n") = 1.56,
      py::arg("vg_theta_r") = 0.078, py::arg("vg_theta_s") = 0.43,
      py::arg("picard_tol") = 1e-8, py::arg("picard_max_iter") = 100,
      "Picard/backward-Euler march of the 1D Richards equation in pressure head.");

  m.def(
      "kde",
      [](const Eigen::VectorXd& samples, int n_points) {
        const PdfEstimate est = kde_estimate(samples, n_points);
        return py::make_tuple(est.abscissae, est.density);
      },
      py::arg("samples"), py::arg("n_points") = 401,
      "Gaussian kernel density estimate with Silverman bandwidth.");

  m.def(
      "run",
      [](const std::string& config_path) {
        const ExperimentConfig config = load_config(config_path);
        RunManifest man;
        {
          py::gil_scoped_release release;
          man = tdba::run(config);
        }
        return manifest_to_dict(man);
      },
      py::arg("config_path"),
      "Execute a config file, write artifacts to its output_dir, return the manifest.");

  m.def(
      "compare",
      [](const std::string& ref_manifest, const std::string& test_manifest) {
        std::ostringstream out;
        const int rc = compare_manifests(ref_manifest, test_manifest, out);
        return py::make_tuple(rc, out.str());
      },
      py::arg("ref_manifest"), py::arg("test_manifest"),
      "Compare the moment artifacts of two run directories; returns (rc, report).");
}
