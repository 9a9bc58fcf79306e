#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <string>

#include "tdba/experiment.hpp"
#include "tdba/sparse_grid.hpp"

namespace {

// gridinfo takes positional `d=<d>` and `level=<l>` tokens in either order.
int parse_kv(const std::string& token, const std::string& key) {
  const std::string prefix = key + "=";
  if (token.rfind(prefix, 0) != 0)
    throw CLI::ValidationError("gridinfo", "expected '" + key + "=<int>', got '" + token + "'");
  try {
    size_t pos = 0;
    const int v = std::stoi(token.substr(prefix.size()), &pos);
    if (pos != token.size() - prefix.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw CLI::ValidationError("gridinfo", "bad integer in '" + token + "'");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"time-dependent basis adaptation for 1D stochastic diffusion"};
  app.require_subcommand(1);

  std::string config_path;
  CLI::App* run_cmd = app.add_subcommand("run", "execute the experiment described by a config file");
  run_cmd->add_option("config", config_path, "path to a key=value config file")->required();

  std::string grid_d, grid_level;
  CLI::App* grid_cmd =
      app.add_subcommand("gridinfo", "print the sparse-grid node count for d=<d> level=<l>");
  grid_cmd->add_option("d", grid_d, "d=<dimension>")->required();
  grid_cmd->add_option("level", grid_level, "level=<level>")->required();

  std::string ref_manifest, test_manifest;
  CLI::App* cmp_cmd =
      app.add_subcommand("compare", "compare moment artifacts of two run directories");
  cmp_cmd->add_option("ref", ref_manifest, "reference manifest.json")->required();
  cmp_cmd->add_option("test", test_manifest, "test manifest.json")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      const tdba::ExperimentConfig config = tdba::load_config(config_path);
      const tdba::RunManifest manifest = tdba::run(config);
      std::cout << "wrote " << config.output_dir << "/manifest.json\n";
      for (const auto& [key, value] : manifest.counts)
        std::cout << "  " << key << " = " << value << "\n";
      for (const auto& [key, value] : manifest.metrics)
        std::cout << "  " << key << " = " << value << "\n";
      for (const auto& w : manifest.warnings) std::cout << "  warning: " << w << "\n";
      std::printf("  wall_seconds = %.2f\n", manifest.wall_seconds);
      return 0;
    }
    if (*grid_cmd) {
      // Accept the two tokens in either order.
      int d, level;
      if (grid_d.rfind("level=", 0) == 0 && grid_level.rfind("d=", 0) == 0)
        std::swap(grid_d, grid_level);
      d = parse_kv(grid_d, "d");
      level = parse_kv(grid_level, "level");
      const tdba::SparseGrid grid = tdba::smolyak_grid(d, level);
      std::cout << grid.size() << "\n";
      return 0;
    }
    if (*cmp_cmd) return tdba::compare_manifests(ref_manifest, test_manifest, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
