#pragma once

#include "latticeopt/grid.hpp"
#include "latticeopt/types.hpp"

#include <Eigen/Sparse>

#include <array>
#include <span>
#include <vector>

namespace latticeopt {

using ElementMatrix = Eigen::Matrix<double, 24, 24>;
using StrainMatrix = Eigen::Matrix<double, 6, 24>;

/// Trilinear hexahedron of edge h with 2x2x2 Gauss quadrature.
class HexElement {
 public:
  explicit HexElement(double h);

  /// Strain-displacement matrix (engineering shear) at Gauss point g.
  const StrainMatrix& B(int g) const { return b_[g]; }
  double weight() const { return weight_; }
  ElementMatrix stiffness(const Voigt& c) const;

 private:
  std::array<StrainMatrix, 8> b_;
  double weight_;
};

struct SolverOptions {
  enum class Method { direct, cg };
  Method method = Method::cg;
  double tolerance = 1e-10;
  /// 0 selects 10 * n^3.
  int max_iterations = 0;
};

/// Periodic fluctuation fields for the six unit strains (Voigt order
/// 11, 22, 33, 23, 13, 12), stored on master nodes: 3 * n^3 entries each with
/// the pinned master's components equal to zero.
struct CellProblemSolution {
  std::array<Eigen::VectorXd, 6> u;
  std::array<double, 6> residual{};
  int iterations = 0;
};

/// Assemble the periodic system for a per-element elasticity field and solve
/// the six cell problems. Throws SolverError when the relative residual
/// exceeds the tolerance.
CellProblemSolution assemble_and_solve(const UnitCellGrid& grid,
                                       std::span<const Voigt> field,
                                       const SolverOptions& options = {},
                                       const CellProblemSolution* warm_start = nullptr);

struct EffectiveTensor {
  Voigt CH = Voigt::Zero();
  double K = 0.0;
  double G = 0.0;
  double nu = 0.0;
};

/// Total strains (unit strain minus fluctuation strain) at every Gauss point,
/// one 6x6 block per (element, point): rows are strain components, columns
/// load cases.
struct StrainField {
  std::vector<Voigt> strain;  // index e * 8 + g
  double gauss_weight = 0.0;
  double cell_volume = 1.0;

  /// sum_g w E_g^T M E_g for element e.
  Voigt element_energy(int e, const Voigt& m) const;
};

StrainField element_strains(const UnitCellGrid& grid, const CellProblemSolution& sol);

EffectiveTensor effective_tensor(const UnitCellGrid& grid, std::span<const Voigt> field,
                                 const CellProblemSolution& sol);
EffectiveTensor effective_tensor(std::span<const Voigt> field, const StrainField& strains);

double bulk_modulus(const Voigt& ch);
double shear_modulus(const Voigt& ch);
/// Throws std::domain_error when C1122 + C1212 vanishes.
double poisson_ratio(const Voigt& ch);

/// Elementwise (Voigt) average of the element bulk moduli.
double voigt_bulk_bound(const UnitCellGrid& grid, std::span<const Voigt> field);

struct ElasticityDerivative {
  int element = 0;
  Voigt d_c = Voigt::Zero();
};

/// dC^H/dz for each design variable given the sparse element tensor
/// derivatives. The fluctuation fields are stationary, so no adjoint solve.
std::vector<Voigt> tensor_sensitivities(
    const StrainField& strains,
    const std::vector<std::vector<ElasticityDerivative>>& per_variable);

}  // namespace latticeopt
