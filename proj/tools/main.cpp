// Command-line driver. Exit codes: 0 success, 1 config error, 2 solver
// failure, 3 infeasible termination, 4 gradient check failed.

#include "CLI11.hpp"

#include "latticeopt/driver.hpp"
#include "latticeopt/export.hpp"

#include <cstdio>
#include <fstream>

using namespace latticeopt;

namespace {

enum ExitCode { kOk = 0, kConfig = 1, kSolver = 2, kInfeasible = 3, kGradient = 4 };

void print_tensor(const Evaluation& ev) {
  std::printf("C^H =\n");
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) {
      std::printf(" %12.6g", ev.eff.CH(i, j));
    }
    std::printf("\n");
  }
  std::printf("K = %.10g  G = %.10g  nu = %.10g\n", ev.eff.K, ev.eff.G, ev.eff.nu);
  std::printf("w_f = %.10g  g_d = %.6g  g_m = %.6g  g_n = %.6g  voigt_bound = %.10g\n", ev.w_f,
              ev.g_d, ev.g_m, ev.g_n, ev.voigt_bound);
}

int cmd_optimize(const std::string& path, const std::string& out_override, bool quiet) {
  RunConfig cfg = load_config(path);
  if (!out_override.empty()) {
    cfg.output_dir = out_override;
  }
  const RunResult res = run_optimization(cfg, [quiet](const IterationRecord& r) {
    if (!quiet) {
      std::printf("%4d f=%-12.6g K=%-10.5g G=%-10.5g nu=%-9.4g w_f=%-8.5f g_d=%-9.3g g_m=%-9.3g "
                  "g_n=%-9.3g eps=(%.2f,%.2f) df=%.2e t=%.1fs\n",
                  r.iteration, r.f, r.K, r.G, r.nu, r.w_f, r.g_d, r.g_m, r.g_n, r.eps_d, r.eps_m,
                  r.delta_f, r.wall_time);
      std::fflush(stdout);
    }
  });

  const std::filesystem::path out = cfg.output_dir;
  std::filesystem::create_directories(out);
  write_history_csv(out / "history.csv", res.history);
  RunConfig design = cfg;
  design.no_cut_offsets = res.no_cut_offsets;
  design.bars.clear();
  {
    std::ofstream f(out / "design.cfg");
    f << "# optimized design; load with the homogenize or export commands\n"
      << format_config(design, &res.bars);
    if (!f) {
      throw std::runtime_error("cannot write " + (out / "design.cfg").string());
    }
  }
  if (res.status == RunStatus::solver_failure) {
    std::fprintf(stderr, "solver failure at %s\n", res.diagnostic.c_str());
    return kSolver;
  }
  const Model model = make_model(cfg);
  export_design(res.bars, model.grid, model.symmetry, res.final.rho, out);
  std::printf("initial K = %.10g\n", res.initial.eff.K);
  print_tensor(res.final);
  std::printf("no-cut offsets logged in %s\n", (out / "design.cfg").c_str());
  if (res.subproblem_stalls > 0) {
    std::printf("MMA subproblem stalled in %d iterations (worst relative KKT residual %.2e)\n",
                res.subproblem_stalls, res.worst_subproblem_residual);
  }
  switch (res.status) {
    case RunStatus::converged:
      std::printf("converged after %zu iterations\n", res.history.size());
      return kOk;
    case RunStatus::max_iterations:
      std::printf("stopped at max_iters = %d with a feasible design\n", cfg.max_iters);
      return kOk;
    default:
      std::printf("stopped at max_iters = %d with an infeasible design\n", cfg.max_iters);
      return kInfeasible;
  }
}

int cmd_homogenize(const std::string& path) {
  const RunConfig cfg = load_config(path);
  const HomogenizeResult res = homogenize(cfg);
  print_tensor(res.evaluation);
  return kOk;
}

int cmd_check_gradients(const std::string& path) {
  const RunConfig cfg = load_config(path);
  const GradientCheckReport rep = check_gradients(cfg);
  std::printf("sample  objective  w_f        g_d        g_m        g_n        K\n");
  for (std::size_t s = 0; s < rep.samples.size(); ++s) {
    std::printf("%6zu  %.3e", s + 1, rep.samples[s].objective_error);
    for (double e : rep.samples[s].constraint_error) {
      std::printf("  %.3e", e);
    }
    std::printf("\n");
  }
  std::printf("skipped near kinks: %d\nmax relative error %.3e (tolerance %.1e): %s\n",
              rep.skipped_near_kink, rep.max_error, cfg.fd_tol, rep.passed ? "PASS" : "FAIL");
  return rep.passed ? kOk : kGradient;
}

int cmd_export(const std::string& path, const std::string& out_dir) {
  const RunConfig cfg = load_config(path);
  const Model model = make_model(cfg);
  const auto bars = initial_design(cfg);
  const ProjectedField field = project_field(bars, model.grid, model.symmetry, model.projection,
                                             cfg.num_materials(), false);
  export_design(bars, model.grid, model.symmetry, field.rho, out_dir);
  std::printf("wrote %s/densities.vtk and %s/bars.txt\n", out_dir.c_str(), out_dir.c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-material lattice unit-cell optimization"};
  app.require_subcommand(1);

  std::string config, out_dir, design;
  bool quiet = false;
  auto* opt = app.add_subcommand("optimize", "run the optimizer and export the result");
  opt->add_option("config", config, "run configuration")->required();
  opt->add_option("-o,--output", out_dir, "override output.dir");
  opt->add_flag("-q,--quiet", quiet, "no per-iteration log");
  auto* hom = app.add_subcommand("homogenize", "effective tensor of a fixed design");
  hom->add_option("config", config, "run or design configuration")->required();
  auto* chk = app.add_subcommand("check-gradients", "finite-difference gradient audit");
  chk->add_option("config", config, "run configuration")->required();
  auto* exp = app.add_subcommand("export", "write VTK densities and the bar list");
  exp->add_option("design", design, "design configuration")->required();
  exp->add_option("out_dir", out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (opt->parsed()) {
      return cmd_optimize(config, out_dir, quiet);
    }
    if (hom->parsed()) {
      return cmd_homogenize(config);
    }
    if (chk->parsed()) {
      return cmd_check_gradients(config);
    }
    return cmd_export(design, out_dir);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kSolver;
  }
}
