#include "tdba/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "tdba/parallel.hpp"

namespace fs = std::filesystem;

namespace tdba {

int ExperimentConfig::resolved_workers() const {
  if (workers > 0) return workers;
  if (const char* env = std::getenv("TDBA_WORKERS")) {
    const int w = std::atoi(env);
    if (w > 0) return w;
  }
  return 1;
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

struct RawEntry {
  std::string value;
  int line = 0;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void config_error(int line, const std::string& what) {
  throw std::invalid_argument("config line " + std::to_string(line) + ": " + what);
}

double parse_double(const RawEntry& e, const std::string& key) {
  size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(e.value, &pos);
  } catch (const std::exception&) {
    config_error(e.line, "expected a number for '" + key + "', got '" + e.value + "'");
  }
  if (pos != e.value.size())
    config_error(e.line, "trailing characters after number for '" + key + "'");
  return v;
}

long parse_int(const RawEntry& e, const std::string& key) {
  const double v = parse_double(e, key);
  if (v != std::floor(v))
    config_error(e.line, "expected an integer for '" + key + "'");
  return static_cast<long>(v);
}

std::vector<double> parse_list(const RawEntry& e, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(e.value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) config_error(e.line, "empty element in list for '" + key + "'");
    RawEntry sub{item, e.line};
    out.push_back(parse_double(sub, key));
  }
  if (out.empty()) config_error(e.line, "empty list for '" + key + "'");
  return out;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  std::map<std::string, RawEntry> raw;
  {
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) config_error(lineno, "expected 'key = value'");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty()) config_error(lineno, "empty key");
      if (value.empty()) config_error(lineno, "empty value for '" + key + "'");
      if (raw.count(key)) config_error(lineno, "duplicate key '" + key + "'");
      raw[key] = RawEntry{value, lineno};
    }
  }

  ExperimentConfig cfg;

  // Kind first: it selects the defaults for everything else.
  if (auto it = raw.find("kind"); it != raw.end()) {
    if (it->second.value == "linear")
      cfg.kind = ProblemKind::linear;
    else if (it->second.value == "richards")
      cfg.kind = ProblemKind::richards;
    else
      config_error(it->second.line, "kind must be 'linear' or 'richards'");
    raw.erase(it);
  }
  if (cfg.kind == ProblemKind::richards) {
    cfg.grid_points = 201;
    cfg.dt = 0.05;
    cfg.t_end = 50.0;
    cfg.output_times = {0.005, 10.0, 20.0, 30.0, 40.0, 50.0};
    cfg.reduced = 5;
    cfg.field_mean = 5.0;
    cfg.field_std = 0.5;
    cfg.correlation_length = 2.5;
    cfg.bc_left = 0.0;
    cfg.bc_right = -0.35;
    cfg.pdf_probe_x = 6.15;
    cfg.domain_length = 10.0;
  }

  auto take = [&raw](const std::string& key) -> std::optional<RawEntry> {
    auto it = raw.find(key);
    if (it == raw.end()) return std::nullopt;
    RawEntry e = it->second;
    raw.erase(it);
    return e;
  };

  if (auto e = take("method")) {
    if (e->value == "reference")
      cfg.method = RunMethod::reference;
    else if (e->value == "fixed")
      cfg.method = RunMethod::fixed;
    else if (e->value == "time_dependent")
      cfg.method = RunMethod::time_dependent;
    else
      config_error(e->line, "method must be reference, fixed, or time_dependent");
  }
  if (auto e = take("grid_points")) cfg.grid_points = static_cast<int>(parse_int(*e, "grid_points"));
  if (auto e = take("domain_length")) cfg.domain_length = parse_double(*e, "domain_length");
  if (auto e = take("dt")) cfg.dt = parse_double(*e, "dt");
  if (auto e = take("t_end")) cfg.t_end = parse_double(*e, "t_end");
  if (auto e = take("output_times")) cfg.output_times = parse_list(*e, "output_times");
  if (auto e = take("d")) cfg.dimension = static_cast<int>(parse_int(*e, "d"));
  if (auto e = take("r")) cfg.reduced = static_cast<int>(parse_int(*e, "r"));
  if (auto e = take("order")) cfg.order = static_cast<int>(parse_int(*e, "order"));
  if (auto e = take("level_reference"))
    cfg.level_reference = static_cast<int>(parse_int(*e, "level_reference"));
  if (auto e = take("level_linear"))
    cfg.level_linear = static_cast<int>(parse_int(*e, "level_linear"));
  if (auto e = take("level_reduced"))
    cfg.level_reduced = static_cast<int>(parse_int(*e, "level_reduced"));
  if (auto e = take("subdomains")) cfg.subdomains = static_cast<int>(parse_int(*e, "subdomains"));
  if (auto e = take("adaptation_interval"))
    cfg.adaptation_interval = static_cast<int>(parse_int(*e, "adaptation_interval"));
  if (auto e = take("field_mean")) cfg.field_mean = parse_double(*e, "field_mean");
  if (auto e = take("field_std")) cfg.field_std = parse_double(*e, "field_std");
  if (auto e = take("correlation_length"))
    cfg.correlation_length = parse_double(*e, "correlation_length");
  if (auto e = take("bc_left")) cfg.bc_left = parse_double(*e, "bc_left");
  if (auto e = take("bc_right")) cfg.bc_right = parse_double(*e, "bc_right");
  if (auto e = take("vg_alpha")) cfg.vg.alpha = parse_double(*e, "vg_alpha");
  if (auto e = take("vg_n")) cfg.vg.n = parse_double(*e, "vg_n");
  if (auto e = take("vg_theta_r")) cfg.vg.theta_r = parse_double(*e, "vg_theta_r");
  if (auto e = take("vg_theta_s")) cfg.vg.theta_s = parse_double(*e, "vg_theta_s");
  if (auto e = take("picard_tol")) cfg.picard_tol = parse_double(*e, "picard_tol");
  if (auto e = take("picard_max_iter"))
    cfg.picard_max_iter = static_cast<int>(parse_int(*e, "picard_max_iter"));
  if (auto e = take("interface_tol")) cfg.interface_tol = parse_double(*e, "interface_tol");
  if (auto e = take("interface_relax")) cfg.interface_relax = parse_double(*e, "interface_relax");
  if (auto e = take("interface_max_iter"))
    cfg.interface_max_iter = static_cast<int>(parse_int(*e, "interface_max_iter"));
  if (auto e = take("inner_tol")) cfg.inner_tol = parse_double(*e, "inner_tol");
  if (auto e = take("variance_floor")) cfg.variance_floor = parse_double(*e, "variance_floor");
  if (auto e = take("pdf_probe_x")) cfg.pdf_probe_x = parse_double(*e, "pdf_probe_x");
  if (auto e = take("n_samples")) cfg.n_samples = static_cast<int>(parse_int(*e, "n_samples"));
  if (auto e = take("seed")) cfg.seed = static_cast<std::uint64_t>(parse_int(*e, "seed"));
  if (auto e = take("workers")) cfg.workers = static_cast<int>(parse_int(*e, "workers"));
  if (auto e = take("output_dir")) cfg.output_dir = e->value;
  if (auto e = take("reference_manifest")) cfg.reference_manifest = e->value;

  if (!raw.empty()) {
    const auto& [key, entry] = *raw.begin();
    config_error(entry.line, "unknown key '" + key + "'");
  }

  // Validation with field names.
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("config: " + what);
  };
  require(cfg.grid_points >= 3, "grid_points must be >= 3");
  require(cfg.domain_length > 0.0, "domain_length must be positive");
  require(cfg.dt > 0.0, "dt must be positive");
  require(cfg.t_end > 0.0, "t_end must be positive");
  require(cfg.dimension >= 1, "d must be >= 1");
  require(cfg.reduced >= 1 && cfg.reduced <= cfg.dimension, "need 1 <= r <= d");
  require(cfg.order >= 1, "order must be >= 1");
  require(cfg.level_reference >= 1 && cfg.level_linear >= 1 && cfg.level_reduced >= 1,
          "levels must be >= 1");
  require(cfg.subdomains >= 1, "subdomains must be >= 1");
  require(cfg.subdomains + 1 <= cfg.grid_points, "subdomains exceed grid capacity");
  require(cfg.adaptation_interval >= 1, "adaptation_interval must be >= 1");
  require(cfg.field_std > 0.0, "field_std must be positive");
  require(cfg.kind == ProblemKind::richards || cfg.field_mean > 0.0,
          "field_mean must be positive for the linear problem");
  require(cfg.correlation_length > 0.0, "correlation_length must be positive");
  require(cfg.n_samples >= 2, "n_samples must be >= 2");
  require(!cfg.output_times.empty(), "output_times must not be empty");
  const double tol = 1e-9 * std::max(1.0, cfg.t_end);
  for (double t : cfg.output_times)
    require(t > tol && t <= cfg.t_end + tol, "output_times must lie in (0, t_end]");
  require(cfg.pdf_probe_x >= 0.0 && cfg.pdf_probe_x <= cfg.domain_length,
          "pdf_probe_x outside the domain");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

// ---------------------------------------------------------------------------

StochasticProblem make_problem(const ExperimentConfig& config) {
  const SpatialGrid grid = SpatialGrid::uniform(0.0, config.domain_length,
                                                config.grid_points);
  CovarianceKernel kernel;
  kernel.correlation_length = config.correlation_length;

  if (config.kind == ProblemKind::linear) {
    const LognormalParams lp = lognormal_params_from_moments(config.field_mean,
                                                             config.field_std);
    kernel.variance = lp.log_std * lp.log_std;
    LinearStochasticProblem p;
    p.kl = solve_kl_eigenproblem(kernel, grid, config.dimension,
                                 Field::Constant(grid.size(), lp.log_mean));
    p.deterministic.grid = grid;
    p.deterministic.bc_left = config.bc_left;
    p.deterministic.bc_right = config.bc_right;
    p.deterministic.dt = config.dt;
    p.deterministic.t_end = config.t_end;
    p.deterministic.initial = Field::Ones(grid.size());
    for (int i = 0; i < grid.size(); ++i)
      if (grid.points(i) >= 0.375 && grid.points(i) <= 0.625)
        p.deterministic.initial(i) = 2.0;
    return p;
  }

  kernel.variance = config.field_std * config.field_std;
  RichardsStochasticProblem p;
  p.kl = solve_kl_eigenproblem(kernel, grid, config.dimension,
                               Field::Constant(grid.size(), config.field_mean));
  p.deterministic.grid = grid;
  p.deterministic.vg = config.vg;
  p.deterministic.bc_left = config.bc_left;
  p.deterministic.bc_right = config.bc_right;
  p.deterministic.dt = config.dt;
  p.deterministic.t_end = config.t_end;
  p.deterministic.initial = -0.035 * grid.points;
  p.deterministic.picard.tol = config.picard_tol;
  p.deterministic.picard.max_iter = config.picard_max_iter;
  return p;
}

ReferenceSolution solve_reference(const StochasticProblem& problem, int level, int order,
                                  const std::vector<double>& output_times, int workers) {
  const KLExpansion& kl = problem_kl(problem);
  const SpatialGrid& grid = problem_grid(problem);
  const int d = kl.dimension();
  const int n = grid.size();
  const SparseGrid nodes = smolyak_grid(d, level);
  const Eigen::MatrixXd fields = evaluate_lognormal_fields(kl, nodes.nodes);

  const auto* lp = std::get_if<LinearStochasticProblem>(&problem);
  const auto* rp = std::get_if<RichardsStochasticProblem>(&problem);
  const double dt = lp ? lp->deterministic.dt : rp->deterministic.dt;
  const double t_end = lp ? lp->deterministic.t_end : rp->deterministic.t_end;
  const Field& initial = lp ? lp->deterministic.initial : rp->deterministic.initial;
  const TimeSchedule sched = build_schedule(dt, t_end, output_times);

  std::vector<int> record_index(sched.steps(), -1);
  int n_records = 0;
  for (int i = 0; i < sched.steps(); ++i)
    if (sched.record[i]) record_index[i] = n_records++;
  std::vector<Eigen::MatrixXd> snapshots(n_records, Eigen::MatrixXd(nodes.size(), n));

  parallel_for(nodes.size(), workers, [&](int begin, int end, int) {
    Field state(n), scratch(n);
    for (int q = begin; q < end; ++q) {
      state = initial;
      double t = 0.0;
      if (lp) {
        LinearSystemBE sys;
        double sys_dt = -1.0;
        for (int i = 0; i < sched.steps(); ++i) {
          const double dt_i = sched.times[i] - t;
          if (sys_dt < 0.0 || std::abs(dt_i - sys_dt) > 1e-12 * std::max(1.0, dt_i)) {
            sys = assemble_linear_be(grid, fields.row(q).transpose(), dt_i);
            sys_dt = dt_i;
          }
          scratch = linear_be_solve(sys, state, lp->deterministic.source,
                                    lp->deterministic.bc_left, lp->deterministic.bc_right);
          state.swap(scratch);
          t = sched.times[i];
          if (record_index[i] >= 0) snapshots[record_index[i]].row(q) = state.transpose();
        }
      } else {
        RichardsStepper stepper(grid, rp->deterministic.vg, rp->deterministic.bc_left,
                                rp->deterministic.bc_right, rp->deterministic.picard);
        stepper.set_conductivity(fields.row(q).transpose());
        for (int i = 0; i < sched.steps(); ++i) {
          stepper.advance(state, sched.times[i] - t);
          t = sched.times[i];
          if (record_index[i] >= 0) snapshots[record_index[i]].row(q) = state.transpose();
        }
      }
    }
  });

  ReferenceSolution ref;
  ref.grid = grid;
  ref.solves = nodes.size();
  const HermiteBasis basis = build_basis(d, order);
  std::vector<double> outs = output_times;
  std::sort(outs.begin(), outs.end());
  outs.erase(std::unique(outs.begin(), outs.end()), outs.end());
  ref.times = outs;
  ref.states.reserve(n_records);
  for (int i = 0; i < n_records; ++i) ref.states.push_back(project(snapshots[i], nodes, basis));
  return ref;
}

// ---------------------------------------------------------------------------
// Artifacts

namespace {

void write_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << content;
  }
  fs::rename(tmp, path);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

}  // namespace

void write_field_csv(const std::string& path, const std::vector<double>& times,
                     const SpatialGrid& grid, const Eigen::MatrixXd& values) {
  if (static_cast<int>(times.size()) != values.rows() || grid.size() != values.cols())
    throw std::invalid_argument("write_field_csv: shape mismatch");
  std::ostringstream out;
  out << "t,x,value\n";
  for (size_t i = 0; i < times.size(); ++i)
    for (int j = 0; j < grid.size(); ++j)
      out << fmt(times[i]) << ',' << fmt(grid.points(j)) << ','
          << fmt(values(static_cast<int>(i), j)) << '\n';
  write_atomic(path, out.str());
}

void write_pdf_csv(const std::string& path, const PdfEstimate& est) {
  std::ostringstream out;
  out << "u,density\n";
  for (int i = 0; i < est.abscissae.size(); ++i)
    out << fmt(est.abscissae(i)) << ',' << fmt(est.density(i)) << '\n';
  write_atomic(path, out.str());
}

FieldCsv read_field_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  if (trim(line) != "t,x,value") throw std::runtime_error(path + ": unexpected header");
  FieldCsv csv;
  std::vector<double> flat;
  double prev_t = 0.0;
  bool first = true;
  size_t row_points = 0;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    double t, x, v;
    if (std::sscanf(line.c_str(), "%lg,%lg,%lg", &t, &x, &v) != 3)
      throw std::runtime_error(path + ": malformed row '" + line + "'");
    if (first || t != prev_t) {
      csv.times.push_back(t);
      if (!first && row_points == 0) throw std::runtime_error(path + ": empty time block");
      row_points = 0;
      prev_t = t;
      first = false;
    }
    if (csv.times.size() == 1) csv.points.push_back(x);
    flat.push_back(v);
    ++row_points;
  }
  const size_t nt = csv.times.size();
  const size_t nx = csv.points.size();
  if (nt == 0 || nx == 0 || flat.size() != nt * nx)
    throw std::runtime_error(path + ": ragged field data");
  csv.values.resize(nt, nx);
  for (size_t i = 0; i < nt; ++i)
    for (size_t j = 0; j < nx; ++j) csv.values(i, j) = flat[i * nx + j];
  return csv;
}

// ---------------------------------------------------------------------------
// Manifest

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["config"] = config;
  j["counts"] = counts;
  j["metrics"] = metrics;
  j["warnings"] = warnings;
  j["files"] = files;
  j["wall_seconds"] = wall_seconds;
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path);
  nlohmann::json j;
  in >> j;
  RunManifest m;
  m.config = j.at("config").get<std::map<std::string, std::string>>();
  m.counts = j.at("counts").get<std::map<std::string, long>>();
  m.metrics = j.at("metrics").get<std::map<std::string, double>>();
  m.warnings = j.at("warnings").get<std::vector<std::string>>();
  m.files = j.at("files").get<std::vector<std::string>>();
  m.wall_seconds = j.at("wall_seconds").get<double>();
  return m;
}

namespace {

std::map<std::string, std::string> echo_config(const ExperimentConfig& c) {
  std::map<std::string, std::string> e;
  e["kind"] = c.kind == ProblemKind::linear ? "linear" : "richards";
  e["method"] = c.method == RunMethod::reference
                    ? "reference"
                    : (c.method == RunMethod::fixed ? "fixed" : "time_dependent");
  e["grid_points"] = std::to_string(c.grid_points);
  e["domain_length"] = fmt_short(c.domain_length);
  e["dt"] = fmt_short(c.dt);
  e["t_end"] = fmt_short(c.t_end);
  std::string outs;
  for (double t : c.output_times) {
    if (!outs.empty()) outs += ",";
    outs += fmt_short(t);
  }
  e["output_times"] = outs;
  e["d"] = std::to_string(c.dimension);
  e["r"] = std::to_string(c.reduced);
  e["order"] = std::to_string(c.order);
  e["level_reference"] = std::to_string(c.level_reference);
  e["level_linear"] = std::to_string(c.level_linear);
  e["level_reduced"] = std::to_string(c.level_reduced);
  e["subdomains"] = std::to_string(c.subdomains);
  e["adaptation_interval"] = std::to_string(c.adaptation_interval);
  e["field_mean"] = fmt_short(c.field_mean);
  e["field_std"] = fmt_short(c.field_std);
  e["correlation_length"] = fmt_short(c.correlation_length);
  e["bc_left"] = fmt_short(c.bc_left);
  e["bc_right"] = fmt_short(c.bc_right);
  e["vg_alpha"] = fmt_short(c.vg.alpha);
  e["vg_n"] = fmt_short(c.vg.n);
  e["vg_theta_r"] = fmt_short(c.vg.theta_r);
  e["vg_theta_s"] = fmt_short(c.vg.theta_s);
  e["picard_tol"] = fmt_short(c.picard_tol);
  e["picard_max_iter"] = std::to_string(c.picard_max_iter);
  e["interface_tol"] = fmt_short(c.interface_tol);
  e["interface_relax"] = fmt_short(c.interface_relax);
  e["interface_max_iter"] = std::to_string(c.interface_max_iter);
  e["inner_tol"] = fmt_short(c.inner_tol);
  e["variance_floor"] = fmt_short(c.variance_floor);
  e["pdf_probe_x"] = fmt_short(c.pdf_probe_x);
  e["n_samples"] = std::to_string(c.n_samples);
  e["seed"] = std::to_string(c.seed);
  e["workers"] = std::to_string(c.resolved_workers());
  e["output_dir"] = c.output_dir;
  if (!c.reference_manifest.empty()) e["reference_manifest"] = c.reference_manifest;
  return e;
}

}  // namespace

RunManifest run(const ExperimentConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(config.output_dir);
  const StochasticProblem problem = make_problem(config);
  const SpatialGrid& grid = problem_grid(problem);
  const int workers = config.resolved_workers();

  RunManifest manifest;
  manifest.config = echo_config(config);

  std::vector<double> out_times = config.output_times;
  std::sort(out_times.begin(), out_times.end());
  out_times.erase(std::unique(out_times.begin(), out_times.end()), out_times.end());

  MomentField moments;
  std::vector<PdfEstimate> pdfs;

  if (config.method == RunMethod::reference) {
    const ReferenceSolution ref = solve_reference(problem, config.level_reference,
                                                  config.order, out_times, workers);
    moments = moments_from_pce(ref.times, ref.states);
    for (size_t i = 0; i < ref.times.size(); ++i)
      pdfs.push_back(pdf_at_point(ref.states[i], grid, config.pdf_probe_x,
                                  config.n_samples, config.seed));
    manifest.counts["reference_solves"] = ref.solves;
  } else {
    AdaptedRunConfig rc;
    rc.r = config.reduced;
    rc.order = config.order;
    rc.level_linear = config.level_linear;
    rc.level_reduced = config.level_reduced;
    rc.subdomains = config.subdomains;
    rc.adaptation_interval = config.adaptation_interval;
    rc.variance_floor = config.variance_floor;
    rc.output_times = out_times;
    rc.richards_options.relax = config.interface_relax;
    rc.richards_options.tol = config.interface_tol;
    rc.richards_options.max_iter = config.interface_max_iter;
    rc.richards_options.inner_tol = config.inner_tol;
    rc.richards_options.inner_max_iter = config.picard_max_iter;
    rc.workers = workers;
    const AdaptedTrajectory traj = config.method == RunMethod::fixed
                                       ? run_fixed_basis(problem, rc)
                                       : run_time_dependent(problem, rc);
    moments = moments_from_pce(traj);
    for (double t : traj.times)
      pdfs.push_back(pdf_at_point(traj, t, config.pdf_probe_x, config.n_samples,
                                  config.seed));
    manifest.counts["linear_pc_solves"] = traj.linear_pc_nodes;
    manifest.counts["reduced_realizations"] = traj.reduced_nodes;
    manifest.counts["subdomain_realization_solves"] = traj.subdomain_trajectories;
    manifest.counts["realization_steps"] = traj.counters.realization_steps;
    manifest.counts["dd_interface_iterations"] = traj.counters.dd.interface_iterations;
    manifest.counts["dd_subdomain_steps"] = traj.counters.dd.subdomain_steps;
    manifest.counts["dd_particular_solves"] = traj.counters.dd.particular_solves;
    manifest.counts["dd_unit_solves"] = traj.counters.dd.unit_solves;
    manifest.metrics["min_capture_ratio"] = traj.min_capture_ratio;
    manifest.warnings = traj.warnings;
  }

  const fs::path dir(config.output_dir);
  write_field_csv((dir / "mean.csv").string(), moments.times, grid, moments.mean);
  manifest.files.push_back("mean.csv");
  write_field_csv((dir / "std.csv").string(), moments.times, grid, moments.stddev);
  manifest.files.push_back("std.csv");
  for (size_t i = 0; i < pdfs.size(); ++i) {
    const std::string name = "pdf_t" + std::string(fmt_short(moments.times[i])) + ".csv";
    write_pdf_csv((dir / name).string(), pdfs[i]);
    manifest.files.push_back(name);
  }

  if (!config.reference_manifest.empty()) {
    const RunManifest ref_manifest = RunManifest::from_json_file(config.reference_manifest);
    const fs::path ref_dir = fs::path(config.reference_manifest).parent_path();
    const FieldCsv ref_mean = read_field_csv((ref_dir / "mean.csv").string());
    const FieldCsv ref_std = read_field_csv((ref_dir / "std.csv").string());
    MomentField ref_field;
    ref_field.times = ref_mean.times;
    ref_field.mean = ref_mean.values;
    ref_field.stddev = ref_std.values;
    const ErrorMaps maps = abs_error_map(moments, ref_field);
    write_field_csv((dir / "error_mean.csv").string(), moments.times, grid, maps.mean_abs);
    manifest.files.push_back("error_mean.csv");
    write_field_csv((dir / "error_std.csv").string(), moments.times, grid, maps.std_abs);
    manifest.files.push_back("error_std.csv");
    manifest.metrics["max_abs_mean_error"] = maps.mean_abs.maxCoeff();
    manifest.metrics["max_abs_std_error"] = maps.std_abs.maxCoeff();
    manifest.metrics["mean_abs_std_error"] = maps.std_abs.mean();
  }

  manifest.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_atomic((dir / "manifest.json").string(), manifest.to_json());
  return manifest;
}

// ---------------------------------------------------------------------------

int compare_manifests(const std::string& ref_manifest_path,
                      const std::string& test_manifest_path, std::ostream& out) {
  const RunManifest ref_m = RunManifest::from_json_file(ref_manifest_path);
  const RunManifest test_m = RunManifest::from_json_file(test_manifest_path);
  const fs::path ref_dir = fs::path(ref_manifest_path).parent_path();
  const fs::path test_dir = fs::path(test_manifest_path).parent_path();

  const FieldCsv ref_mean = read_field_csv((ref_dir / "mean.csv").string());
  const FieldCsv ref_std = read_field_csv((ref_dir / "std.csv").string());
  const FieldCsv test_mean = read_field_csv((test_dir / "mean.csv").string());
  const FieldCsv test_std = read_field_csv((test_dir / "std.csv").string());

  if (ref_mean.times.size() != test_mean.times.size() ||
      ref_mean.points.size() != test_mean.points.size()) {
    out << "lattice mismatch: ref " << ref_mean.times.size() << "x"
        << ref_mean.points.size() << " vs test " << test_mean.times.size() << "x"
        << test_mean.points.size() << "\n";
    return 2;
  }

  Eigen::VectorXd pts(static_cast<int>(ref_mean.points.size()));
  for (size_t j = 0; j < ref_mean.points.size(); ++j)
    pts(static_cast<int>(j)) = ref_mean.points[j];
  const SpatialGrid grid = SpatialGrid::from_points(pts);

  out << "time  rel_l2_mean  rel_l2_std\n";
  double max_std_err = 0.0, sum_std_err = 0.0;
  for (size_t i = 0; i < ref_mean.times.size(); ++i) {
    const int r = static_cast<int>(i);
    const double em = relative_l2(test_mean.values.row(r).transpose(),
                                  ref_mean.values.row(r).transpose(), grid);
    const double es = relative_l2(test_std.values.row(r).transpose(),
                                  ref_std.values.row(r).transpose(), grid);
    out << fmt_short(ref_mean.times[i]) << "  " << em << "  " << es << "\n";
    max_std_err = std::max(
        max_std_err, (test_std.values.row(r) - ref_std.values.row(r)).cwiseAbs().maxCoeff());
    sum_std_err += (test_std.values.row(r) - ref_std.values.row(r)).cwiseAbs().mean();
  }
  out << "max_abs_std_error " << max_std_err << "\n";
  out << "mean_abs_std_error " << sum_std_err / ref_mean.times.size() << "\n";
  out << "ref_wall_seconds " << ref_m.wall_seconds << " test_wall_seconds "
      << test_m.wall_seconds << "\n";
  return 0;
}

}  // namespace tdba
