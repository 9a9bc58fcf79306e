#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "tdba/basis_adaptation.hpp"
#include "tdba/stats_post.hpp"

namespace tdba {

enum class ProblemKind { linear, richards };
enum class RunMethod { reference, fixed, time_dependent };

struct ExperimentConfig {
  ProblemKind kind = ProblemKind::linear;
  RunMethod method = RunMethod::reference;
  int grid_points = 101;
  double dt = 1e-3;
  double t_end = 1.6;
  std::vector<double> output_times = {0.2, 0.3, 0.4, 0.8, 1.2, 1.6};
  int dimension = 10;   // d
  int reduced = 3;      // r
  int order = 3;        // PC order p
  int level_reference = 5;
  int level_linear = 2;
  int level_reduced = 5;
  int subdomains = 4;
  int adaptation_interval = 1;
  double domain_length = 1.0;
  // Random-field triple; for the linear problem these are the mean/std of the
  // lognormal coefficient itself, for Richards the mean/std of the Gaussian
  // log-conductivity (the two cases are conventionally parameterized this way).
  double field_mean = 0.5;
  double field_std = 0.25;
  double correlation_length = 0.2;
  double bc_left = 2.0;
  double bc_right = 1.0;
  VanGenuchten vg;
  double picard_tol = 1e-8;
  int picard_max_iter = 200;
  double interface_tol = 1e-8;
  double interface_relax = 1.0;
  int interface_max_iter = 200;
  double inner_tol = 1e-12;
  double variance_floor = 0.9;
  double pdf_probe_x = 0.7;
  int n_samples = 100000;
  std::uint64_t seed = 42;
  int workers = 0;  // 0 = TDBA_WORKERS env var, else 1
  std::string output_dir = "out";
  std::string reference_manifest;  // optional: enables error maps

  int resolved_workers() const;
};

// `key = value` lines, '#' comments; unknown or duplicate keys are errors
// with the offending line number; kind-dependent defaults are applied for
// keys the document does not set.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Grid + initial condition + KL expansion of the log-field per the config.
StochasticProblem make_problem(const ExperimentConfig& config);

// Full-dimension sparse-grid reference: nodal trajectories projected onto the
// order-p basis at the output times.
struct ReferenceSolution {
  std::vector<double> times;
  std::vector<PCExpansion> states;
  SpatialGrid grid;
  long solves = 0;  // collocation nodes propagated
};

ReferenceSolution solve_reference(const StochasticProblem& problem, int level, int order,
                                  const std::vector<double>& output_times, int workers = 1);

struct RunManifest {
  std::map<std::string, std::string> config;
  std::map<std::string, long> counts;
  std::map<std::string, double> metrics;
  std::vector<std::string> warnings;
  std::vector<std::string> files;
  double wall_seconds = 0.0;

  std::string to_json() const;
  static RunManifest from_json_file(const std::string& path);
};

// Executes the configured pipeline, writes CSV artifacts + manifest.json into
// config.output_dir, and returns the manifest.
RunManifest run(const ExperimentConfig& config);

// Moment field (t, x, value) CSV round-trip used by run() and compare.
void write_field_csv(const std::string& path, const std::vector<double>& times,
                     const SpatialGrid& grid, const Eigen::MatrixXd& values);
void write_pdf_csv(const std::string& path, const PdfEstimate& est);
struct FieldCsv {
  std::vector<double> times;
  std::vector<double> points;
  Eigen::MatrixXd values;
};
FieldCsv read_field_csv(const std::string& path);

// Compares the moment artifacts of two run directories (via their manifests);
// prints a summary, returns nonzero on inconsistent artifacts.
int compare_manifests(const std::string& ref_manifest, const std::string& test_manifest,
                      std::ostream& out);

}  // namespace tdba
