#pragma once

#include "latticeopt/constraints.hpp"
#include "latticeopt/homogenization.hpp"
#include "latticeopt/projection.hpp"

#include <string>
#include <vector>

namespace latticeopt {

enum class ProblemKind { max_bulk, max_shear, min_poisson };

ProblemKind parse_problem(const std::string& name);
std::string to_string(ProblemKind kind);

/// Objective in minimization form: -K, -G or nu.
double objective_value(ProblemKind kind, const Voigt& ch);
/// W with df = sum_ab W_ab dC^H_ab.
Voigt objective_weights(ProblemKind kind, const Voigt& ch);
Voigt bulk_weights();
Eigen::VectorXd objective_gradient(ProblemKind kind, const Voigt& ch,
                                   const std::vector<Voigt>& dch_dz);

/// Gradient of a scalar with respect to the scaled design variables, given its
/// derivative with respect to every per-element effective density.
Eigen::VectorXd chain_density_gradient(const ProjectedField& field,
                                       const Eigen::MatrixXd& d_rho, const DesignVector& dv);

/// True when some reflected element centroid sits within tol of a kink of the
/// projection (cap density at |phi| = r, Heaviside band edge, zero axis
/// distance), where one-sided derivatives differ.
bool near_projection_kink(std::span<const Bar> bars, const UnitCellGrid& grid,
                          const SymmetryGroup& sym, const ProjectionParams& params,
                          double tol);

/// Everything that stays fixed while the design changes.
struct Model {
  ProblemKind problem = ProblemKind::max_bulk;
  UnitCellGrid grid{16, 1.0};
  SymmetryGroup symmetry = SymmetryGroup::cubic(Vec3::Constant(0.5));
  MaterialSet materials{{Material{}}, Material{1e-6, 0.3, 1.0}};
  ProjectionParams projection;
  double bar_width = 0.1;
  SolverOptions solver;
};

/// Raw constraint quantities, in this order in GradientBundle::grad_g.
enum ConstraintIndex { kWeight = 0, kDiscreteness, kExclusion, kNoCut, kBulk, kNumConstraints };

struct GradientBundle {
  Eigen::VectorXd grad_f;
  /// d/dz of w_f, g_d, g_m, g_n and K.
  std::vector<Eigen::VectorXd> grad_g;
  /// Elements each bar touches (reflected centroid within the support).
  std::vector<std::vector<int>> touched;
};

struct Evaluation {
  EffectiveTensor eff;
  double f = 0.0;
  double w_f = 0.0;
  double g_d = 0.0;
  double g_m = 0.0;
  double g_n = 0.0;
  double voigt_bound = 0.0;
  Eigen::MatrixXd rho;
  std::vector<double> no_cut_difference;
  CellProblemSolution solution;
  bool has_gradient = false;
  GradientBundle grad;

  /// Raw constraint value by index.
  double constraint(int index) const;
};

/// Evaluates objective, constraints and their gradients for a design.
class Evaluator {
 public:
  explicit Evaluator(Model model);

  const Model& model() const { return model_; }
  NoCutConstraint& no_cut() { return no_cut_; }
  const NoCutConstraint& no_cut() const { return no_cut_; }

  Evaluation evaluate(const DesignVector& dv, bool with_gradient,
                      const CellProblemSolution* warm_start = nullptr) const;

 private:
  Model model_;
  NoCutConstraint no_cut_;
};

}  // namespace latticeopt
