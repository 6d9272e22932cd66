#pragma once

#include "latticeopt/constraints.hpp"
#include "latticeopt/homogenization.hpp"
#include "latticeopt/projection.hpp"
#include "latticeopt/sensitivities.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace latticeopt {

/// Run configuration. See README for the file format and every key.
struct RunConfig {
  ProblemKind problem = ProblemKind::max_bulk;
  int grid_n = 16;
  double cell_edge = 1.0;
  std::vector<Material> materials;
  Material ersatz{1e-6, 0.3, 1.0};

  std::string symmetry = "cubic";
  std::vector<Vec3> symmetry_planes;

  int bar_count = 10;
  double bar_width = 0.1;
  unsigned bar_seed = 1;
  /// Initial bar length as a fraction of the cell edge.
  double bar_length = 1e-3;
  /// Initial size variables; empty means 1/N_m for every material.
  std::vector<double> bar_alpha;
  /// Explicit bars; when present they replace the random placement.
  std::vector<Bar> bars;

  ConstraintState constraints;
  double heaviside_p = 2.0;
  /// 0 selects the sample window radius.
  double heaviside_eps = 0.0;
  double ks_k = 25.0;
  double move_limit = 0.1;
  double window_c = 1.0;
  double objtol = 1e-4;
  int max_iters = 500;
  SolverOptions solver;

  /// Objective and constraint scaling inside the optimizer.
  double objective_scale = 1.0;

  /// Fixed no-cut offsets; calibrated on the initial design when absent.
  std::optional<std::vector<double>> no_cut_offsets;

  std::string output_dir = "out";

  int fd_samples = 20;
  double fd_step = 1e-6;
  double fd_tol = 1e-4;
  unsigned fd_seed = 1;
  double fd_kink_tol = 1e-4;

  int num_materials() const { return static_cast<int>(materials.size()); }
};

/// Parses "key = value" lines; '#' starts a comment. Unknown or repeated keys
/// (other than "bar") raise ConfigError with the line number.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

/// Serializes every key. When bars are given they are written as explicit
/// "bar" lines in place of the configured ones.
std::string format_config(const RunConfig& config, const std::vector<Bar>* bars = nullptr);

SymmetryGroup make_symmetry(const RunConfig& config);
Model make_model(const RunConfig& config);

}  // namespace latticeopt
