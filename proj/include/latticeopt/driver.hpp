#pragma once

#include "latticeopt/config.hpp"
#include "latticeopt/mma.hpp"

#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace latticeopt {

/// Seeded random placement of near-zero-length bars (or the configured bars),
/// every capsule strictly inside the reference region and the cell. Throws
/// ConfigError when a configured bar lies outside.
std::vector<Bar> initial_design(const RunConfig& config);

struct IterationRecord {
  int iteration = 0;
  double f = 0.0;
  double K = 0.0;
  double G = 0.0;
  double nu = 0.0;
  double w_f = 0.0;
  double g_d = 0.0;
  double g_m = 0.0;
  double g_n = 0.0;
  double eps_d = 0.0;
  double eps_m = 0.0;
  /// Relative objective change from the previous iterate; 0 on iteration 0.
  double delta_f = 0.0;
  double wall_time = 0.0;
};

/// CSV with a header naming every IterationRecord field.
void write_history_csv(const std::filesystem::path& path,
                       const std::vector<IterationRecord>& history);

/// Relative change of the objective, with |f| floored at 1e-3.
double objective_change(double f, double f_prev);

/// Constraint values checked against the final limits: w_f <= wf* + 1e-3,
/// g_d <= eps_d*, g_m <= eps_m*, g_n <= eps_n and K >= K_min for min_poisson.
bool is_feasible(const Evaluation& ev, const RunConfig& config);

/// Optimizer-side constraint vector f_j <= 0 and its Jacobian.
struct ScaledProblem {
  double f0 = 0.0;
  Eigen::VectorXd df0;
  Eigen::VectorXd g;
  Eigen::MatrixXd dg;
};
ScaledProblem scale_problem(const Evaluation& ev, const RunConfig& config,
                            const ConstraintState& state);

enum class RunStatus { converged, max_iterations, infeasible, solver_failure };

struct RunResult {
  RunStatus status = RunStatus::max_iterations;
  std::vector<Bar> bars;
  DesignVector design{0, 1, 1.0};
  Evaluation final;
  Evaluation initial;
  std::vector<IterationRecord> history;
  /// Scaled design after each iteration, parallel to history.
  std::vector<Eigen::VectorXd> iterates;
  ConstraintState state;
  std::vector<double> no_cut_offsets;
  /// MMA subproblems that ended with a relative KKT residual above 1e-6, and
  /// the largest such residual.
  int subproblem_stalls = 0;
  double worst_subproblem_residual = 0.0;
  /// Set on solver failure: what went wrong and at which iteration.
  std::string diagnostic;
};

using IterationCallback = std::function<void(const IterationRecord&)>;

RunResult run_optimization(const RunConfig& config, const IterationCallback& on_iteration = {});

/// Evaluates the configured design (initial_design) without optimizing.
struct HomogenizeResult {
  std::vector<Bar> bars;
  Evaluation evaluation;
  std::vector<double> no_cut_offsets;
};
HomogenizeResult homogenize(const RunConfig& config);

struct GradientSample {
  double objective_error = 0.0;
  std::vector<double> constraint_error;
};
struct GradientCheckReport {
  std::vector<GradientSample> samples;
  int skipped_near_kink = 0;
  double max_error = 0.0;
  bool passed = false;
};

/// Central-difference audit of the objective and constraint gradients at
/// fd_samples random designs, resampling designs near projection kinks.
/// Errors are max-norm relative to the finite-difference gradient.
GradientCheckReport check_gradients(const RunConfig& config);

/// Random design with every endpoint inside the reference region.
std::vector<Bar> random_design(const RunConfig& config, std::mt19937& rng);

}  // namespace latticeopt
